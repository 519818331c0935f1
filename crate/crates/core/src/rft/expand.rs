//! NETPlus-style look-ahead expansion over the observed control-flow graph.
//!
//! Starting from every successor of a recorded instruction that leaves the
//! recording ("exit successors"), walk through non-recorded addresses. A walk
//! is accepted when it steps back into the target set (the entry alone, or
//! every recorded address in extended mode) after visiting at most `depth`
//! non-recorded addresses. The expansion is the union of addresses on
//! accepted walks.
//!
//! A node `v` lies on an accepted walk iff
//! `dist(exit successors -> v) + dist(v -> targets) <= depth`, both
//! distances taken through non-recorded addresses, so two BFS passes
//! suffice.

use std::collections::hash_map::Entry;
use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{DynamicCfg, RegionRecording};
use crate::trace_io::TraceItem;

/// Instructions added to a recording, and the observed flow edges that
/// touch them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expansion {
    pub instructions: Vec<TraceItem>,
    /// `(from, to)` observed edges with at least one endpoint in the
    /// expansion and the other in the expansion or the recording.
    pub edges: Vec<(u64, u64)>,
}

impl Expansion {
    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn addresses(&self) -> impl Iterator<Item = u64> + '_ {
        self.instructions.iter().map(|i| i.address)
    }
}

pub fn netplus_expand(cfg: &DynamicCfg, rec: &RegionRecording, depth: u32, extended: bool) -> Expansion {
    let Some(entry) = rec.entry() else {
        return Expansion::default();
    };
    if depth == 0 {
        return Expansion::default();
    }
    let recorded: FxHashSet<u64> = rec.addresses().collect();
    let is_target = |a: u64| if extended { recorded.contains(&a) } else { a == entry };

    // Forward distances from the exit successors. Accepted nodes need at
    // least one more hop, so nothing past depth - 1 is kept.
    let mut forward: FxHashMap<u64, u32> = FxHashMap::default();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for r in rec.addresses() {
        for &s in cfg.successors(r) {
            if !recorded.contains(&s) && !forward.contains_key(&s) {
                forward.insert(s, 0);
                order.push(s);
                queue.push_back(s);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = forward[&v];
        if d + 1 >= depth {
            continue;
        }
        for &w in cfg.successors(v) {
            if !recorded.contains(&w) && !forward.contains_key(&w) {
                forward.insert(w, d + 1);
                order.push(w);
                queue.push_back(w);
            }
        }
    }

    // Backward distances to the target set, within the forward set.
    let mut preds: FxHashMap<u64, Vec<u64>> = FxHashMap::default();
    let mut backward: FxHashMap<u64, u32> = FxHashMap::default();
    for &v in &order {
        for &w in cfg.successors(v) {
            if forward.contains_key(&w) {
                preds.entry(w).or_default().push(v);
            }
        }
        if cfg.successors(v).iter().any(|&w| is_target(w)) {
            backward.insert(v, 1);
            queue.push_back(v);
        }
    }
    while let Some(w) = queue.pop_front() {
        let d = backward[&w];
        for &p in preds.get(&w).map_or(&[][..], |v| v.as_slice()) {
            if let Entry::Vacant(e) = backward.entry(p) {
                e.insert(d + 1);
                queue.push_back(p);
            }
        }
    }

    let accepted: Vec<u64> = order
        .into_iter()
        .filter(|v| backward.get(v).is_some_and(|b| forward[v] + b <= depth))
        .collect();
    let in_expansion: FxHashSet<u64> = accepted.iter().copied().collect();
    let member = |a: u64| in_expansion.contains(&a) || recorded.contains(&a);

    let mut edges = Vec::new();
    for from in rec.addresses().chain(accepted.iter().copied()) {
        for &to in cfg.successors(from) {
            if member(to) && (in_expansion.contains(&from) || in_expansion.contains(&to)) {
                edges.push((from, to));
            }
        }
    }
    let instructions = accepted
        .iter()
        .map(|&a| TraceItem::new(a, cfg.size_of(a).unwrap_or(1)))
        .collect();
    Expansion { instructions, edges }
}
