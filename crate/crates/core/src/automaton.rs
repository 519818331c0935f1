//! Trace execution automaton.
//!
//! One state per recorded instruction, grouped into regions, plus the
//! distinguished NTE state that absorbs every instruction executed outside
//! a region. Consuming an instruction resolves a target from the cursor:
//!
//! 1. an outgoing edge keyed by the instruction address, if any;
//! 2. otherwise the first state holding that address (earliest-created
//!    region wins), reached through a newly created edge;
//! 3. otherwise NTE.
//!
//! Resolution is split from commitment so the engine can install a region
//! between the two; see [`Automaton::resolve`].

use rustc_hash::FxHashMap;
use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::rft::{Expansion, RegionRecording};
use crate::trace_io::TraceItem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegionId(pub u32);

/// The NTE state always has id 0.
pub const NTE: StateId = StateId(0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TransitionKind {
    StayedInterp,
    InterpToNative,
    NativeToInterp,
    /// Moved within one region.
    StayedNative,
    /// Moved from one region into another.
    NativeToNative,
}

impl TransitionKind {
    fn between(from: Option<RegionId>, to: Option<RegionId>) -> Self {
        match (from, to) {
            (None, None) => Self::StayedInterp,
            (None, Some(_)) => Self::InterpToNative,
            (Some(_), None) => Self::NativeToInterp,
            (Some(a), Some(b)) if a == b => Self::StayedNative,
            (Some(_), Some(_)) => Self::NativeToNative,
        }
    }

    /// The instruction landed in NTE, i.e. it was interpreted.
    #[inline]
    pub fn is_interpreted(self) -> bool {
        matches!(self, Self::StayedInterp | Self::NativeToInterp)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("cannot append an empty region recording")]
    EmptyRecording,
    #[error("address {0:#x} appears twice in one region")]
    DuplicateAddress(u64),
    #[error("unknown region id {0}")]
    UnknownRegion(u32),
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    address: u64,
    target: StateId,
    count: u64,
}

/// Outgoing edges in insertion order; hashed once a state fans out widely.
#[derive(Default)]
struct Edges {
    list: SmallVec<[Edge; 2]>,
    index: Option<FxHashMap<u64, u32>>,
}

const EDGE_INDEX_THRESHOLD: usize = 8;

impl Edges {
    #[inline]
    fn find(&self, address: u64) -> Option<usize> {
        match &self.index {
            Some(map) => map.get(&address).map(|&i| i as usize),
            None => self.list.iter().position(|e| e.address == address),
        }
    }

    fn push(&mut self, edge: Edge) -> usize {
        let idx = self.list.len();
        self.list.push(edge);
        match &mut self.index {
            Some(map) => {
                map.insert(edge.address, idx as u32);
            }
            None if self.list.len() > EDGE_INDEX_THRESHOLD => {
                self.index = Some(
                    self.list
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (e.address, i as u32))
                        .collect(),
                );
            }
            None => {}
        }
        idx
    }
}

struct State {
    address: u64,
    size: u32,
    owner: Option<RegionId>,
    edges: Edges,
    executions: u64,
}

/// Execution counters kept per region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RegionCounters {
    pub entries_from_interpreter: u64,
    pub entries_from_native: u64,
    pub dynamic_instructions: u64,
    pub head_executions: u64,
    pub tail_executions: u64,
    pub completed_traversals: u64,
}

impl RegionCounters {
    pub fn entries(&self) -> u64 {
        self.entries_from_interpreter + self.entries_from_native
    }
}

struct Region {
    entry: StateId,
    states: Vec<StateId>,
    core_tail: StateId,
    expansion: Vec<StateId>,
    counters: RegionCounters,
    in_traversal: bool,
}

/// Immutable view of one region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionSnapshot {
    pub id: u32,
    pub entry_address: u64,
    /// Every member address: recording order, then expansion.
    pub addresses: Vec<u64>,
    pub core_tail_address: u64,
    pub expansion_size: usize,
    #[serde(flatten)]
    pub counters: RegionCounters,
}

impl RegionSnapshot {
    pub fn static_size(&self) -> usize {
        self.addresses.len()
    }
}

/// Whole-run instruction attribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub total_instructions: u64,
    pub interpreted_instructions: u64,
    pub native_instructions: u64,
    pub region_transitions: u64,
}

#[derive(Clone, Copy, Debug)]
enum Via {
    Edge(usize),
    NewEdge,
    Nte,
}

/// A resolved but not yet applied transition.
#[derive(Clone, Copy, Debug)]
pub struct PendingStep {
    address: u64,
    target: StateId,
    via: Via,
    kind: TransitionKind,
    generation: u32,
}

impl PendingStep {
    pub fn kind(&self) -> TransitionKind {
        self.kind
    }

    pub fn target(&self) -> StateId {
        self.target
    }
}

pub struct Automaton {
    states: Vec<State>,
    regions: Vec<Region>,
    index: FxHashMap<u64, SmallVec<[StateId; 1]>>,
    cursor: StateId,
    totals: Totals,
    /// Bumped on every append; stale pending steps are re-resolved.
    generation: u32,
}

impl Default for Automaton {
    fn default() -> Self {
        Self::new()
    }
}

impl Automaton {
    /// An automaton holding only NTE, with the cursor on it.
    pub fn new() -> Self {
        let nte = State { address: 0, size: 0, owner: None, edges: Edges::default(), executions: 0 };
        Self {
            states: vec![nte],
            regions: Vec::new(),
            index: FxHashMap::default(),
            cursor: NTE,
            totals: Totals::default(),
            generation: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn cursor(&self) -> StateId {
        self.cursor
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn nte_executions(&self) -> u64 {
        self.states[0].executions
    }

    /// States holding `address`, ordered by owning region creation.
    pub fn states_at(&self, address: u64) -> &[StateId] {
        self.index.get(&address).map_or(&[], |v| v.as_slice())
    }

    pub fn state_address(&self, id: StateId) -> Option<u64> {
        (id != NTE).then(|| self.states[id.0 as usize].address)
    }

    pub fn state_owner(&self, id: StateId) -> Option<RegionId> {
        self.states[id.0 as usize].owner
    }

    pub fn state_executions(&self, id: StateId) -> u64 {
        self.states[id.0 as usize].executions
    }

    /// `(edge address, target, traversal count)` for each outgoing edge.
    pub fn edges(&self, id: StateId) -> impl Iterator<Item = (u64, StateId, u64)> + '_ {
        self.states[id.0 as usize].edges.list.iter().map(|e| (e.address, e.target, e.count))
    }

    /// Resolves where `address` leads from the cursor without mutating
    /// anything.
    #[inline]
    pub fn resolve(&self, address: u64) -> PendingStep {
        let cursor = &self.states[self.cursor.0 as usize];
        let (target, via) = if let Some(i) = cursor.edges.find(address) {
            (cursor.edges.list[i].target, Via::Edge(i))
        } else if let Some(first) = self.index.get(&address).and_then(|l| l.first()) {
            (*first, Via::NewEdge)
        } else {
            (NTE, Via::Nte)
        };
        let kind = TransitionKind::between(cursor.owner, self.states[target.0 as usize].owner);
        PendingStep { address, target, via, kind, generation: self.generation }
    }

    /// Applies a step produced by [`resolve`](Self::resolve). A step resolved
    /// before a later `append_region` is resolved again first.
    pub fn commit(&mut self, step: PendingStep) -> TransitionKind {
        let step = if step.generation == self.generation { step } else { self.resolve(step.address) };
        let from = self.cursor;
        let from_owner = self.states[from.0 as usize].owner;
        match step.via {
            Via::Edge(i) => self.states[from.0 as usize].edges.list[i].count += 1,
            Via::NewEdge => {
                self.states[from.0 as usize].edges.push(Edge {
                    address: step.address,
                    target: step.target,
                    count: 1,
                });
            }
            Via::Nte => {}
        }
        let target = &mut self.states[step.target.0 as usize];
        target.executions += 1;
        let to_owner = target.owner;

        if let Some(r) = from_owner.filter(|r| Some(*r) != to_owner) {
            self.regions[r.0 as usize].in_traversal = false;
        }
        self.totals.total_instructions += 1;
        match to_owner {
            None => self.totals.interpreted_instructions += 1,
            Some(r) => {
                self.totals.native_instructions += 1;
                let region = &mut self.regions[r.0 as usize];
                let c = &mut region.counters;
                c.dynamic_instructions += 1;
                match step.kind {
                    TransitionKind::InterpToNative => c.entries_from_interpreter += 1,
                    TransitionKind::NativeToNative => {
                        c.entries_from_native += 1;
                        self.totals.region_transitions += 1;
                    }
                    _ => {}
                }
                if step.target == region.entry {
                    c.head_executions += 1;
                    region.in_traversal = true;
                }
                if step.target == region.core_tail {
                    c.tail_executions += 1;
                    if region.in_traversal {
                        c.completed_traversals += 1;
                        region.in_traversal = false;
                    }
                }
            }
        }
        self.cursor = step.target;
        step.kind
    }

    /// Consumes one instruction.
    #[inline]
    pub fn step(&mut self, item: &TraceItem) -> TransitionKind {
        let pending = self.resolve(item.address);
        self.commit(pending)
    }

    /// Installs a region built from a linear recording plus an optional
    /// expansion sub-graph. Consecutive recorded instructions are linked;
    /// expansion states are wired by the expansion's successor edges. The
    /// cursor does not move.
    pub fn append_region(
        &mut self,
        recording: &RegionRecording,
        expansion: Option<&Expansion>,
    ) -> Result<RegionId, AutomatonError> {
        let recorded = recording.items();
        if recorded.is_empty() {
            return Err(AutomatonError::EmptyRecording);
        }
        let extra = expansion.map_or(&[][..], |e| e.instructions.as_slice());
        let mut local: FxHashMap<u64, StateId> = FxHashMap::default();
        for item in recorded.iter().chain(extra) {
            if local.insert(item.address, StateId(0)).is_some() {
                return Err(AutomatonError::DuplicateAddress(item.address));
            }
        }

        let id = RegionId(self.regions.len() as u32);
        let mut members = Vec::with_capacity(recorded.len() + extra.len());
        for item in recorded.iter().chain(extra) {
            let sid = StateId(self.states.len() as u32);
            self.states.push(State {
                address: item.address,
                size: item.size,
                owner: Some(id),
                edges: Edges::default(),
                executions: 0,
            });
            self.index.entry(item.address).or_default().push(sid);
            local.insert(item.address, sid);
            members.push(sid);
        }
        for pair in members[..recorded.len()].windows(2) {
            let to = self.states[pair[1].0 as usize].address;
            self.states[pair[0].0 as usize].edges.push(Edge { address: to, target: pair[1], count: 0 });
        }
        if let Some(exp) = expansion {
            for &(from, to) in &exp.edges {
                let (Some(&src), Some(&dst)) = (local.get(&from), local.get(&to)) else {
                    continue;
                };
                let edges = &mut self.states[src.0 as usize].edges;
                if edges.find(to).is_none() {
                    edges.push(Edge { address: to, target: dst, count: 0 });
                }
            }
        }
        self.regions.push(Region {
            entry: members[0],
            core_tail: members[recorded.len() - 1],
            expansion: members[recorded.len()..].to_vec(),
            states: members,
            counters: RegionCounters::default(),
            in_traversal: false,
        });
        self.generation = self.generation.wrapping_add(1);
        Ok(id)
    }

    pub fn region_stats(&self, id: RegionId) -> Result<RegionSnapshot, AutomatonError> {
        let r = self.regions.get(id.0 as usize).ok_or(AutomatonError::UnknownRegion(id.0))?;
        let addr = |s: StateId| self.states[s.0 as usize].address;
        Ok(RegionSnapshot {
            id: id.0,
            entry_address: addr(r.entry),
            addresses: r.states.iter().map(|&s| addr(s)).collect(),
            core_tail_address: addr(r.core_tail),
            expansion_size: r.expansion.len(),
            counters: r.counters,
        })
    }

    /// Snapshots of every region in creation order.
    pub fn region_snapshots(&self) -> Vec<RegionSnapshot> {
        (0..self.regions.len() as u32)
            .map(|i| self.region_stats(RegionId(i)).expect("in range"))
            .collect()
    }

    /// Member states of a region in recording order, expansion last.
    pub fn region_states(&self, id: RegionId) -> Option<&[StateId]> {
        self.regions.get(id.0 as usize).map(|r| r.states.as_slice())
    }

    /// Deterministic structural dump for debugging and golden files.
    pub fn dump(&self) -> AutomatonDump {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| StateDump {
                id: i as u32,
                address: (i != 0).then_some(s.address),
                size: (i != 0).then_some(s.size),
                owner: s.owner.map(|r| r.0),
                executions: s.executions,
                edges: s
                    .edges
                    .list
                    .iter()
                    .map(|e| EdgeDump { address: e.address, target: e.target.0, count: e.count })
                    .collect(),
            })
            .collect();
        let regions = self
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| RegionDump {
                id: i as u32,
                entry: r.entry.0,
                core_tail: r.core_tail.0,
                states: r.states.iter().map(|s| s.0).collect(),
                expansion: r.expansion.iter().map(|s| s.0).collect(),
                counters: r.counters,
            })
            .collect();
        AutomatonDump { totals: self.totals, states, regions }
    }
}

/// JSON-serializable automaton structure. State 0 is NTE and carries no
/// address, size, or owner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AutomatonDump {
    pub totals: Totals,
    pub states: Vec<StateDump>,
    pub regions: Vec<RegionDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StateDump {
    pub id: u32,
    pub address: Option<u64>,
    pub size: Option<u32>,
    pub owner: Option<u32>,
    pub executions: u64,
    pub edges: Vec<EdgeDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeDump {
    pub address: u64,
    pub target: u32,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionDump {
    pub id: u32,
    pub entry: u32,
    pub core_tail: u32,
    pub states: Vec<u32>,
    pub expansion: Vec<u32>,
    #[serde(flatten)]
    pub counters: RegionCounters,
}
