use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::trace_io::TraceItem;

#[derive(Clone, Debug, Default)]
struct Node {
    size: u32,
    successors: SmallVec<[u64; 2]>,
}

/// Control-flow graph of the instructions observed so far. Successor lists
/// keep first-observation order.
#[derive(Clone, Debug, Default)]
pub struct DynamicCfg {
    nodes: FxHashMap<u64, Node>,
}

impl DynamicCfg {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `current`, and the `last -> current` flow when there is one.
    #[inline]
    pub fn observe(&mut self, last: Option<&TraceItem>, current: &TraceItem) {
        self.nodes.entry(current.address).or_insert_with(|| Node {
            size: current.size,
            successors: SmallVec::new(),
        });
        if let Some(last) = last {
            self.add_edge(last.address, last.size, current.address);
        }
    }

    /// Adds `from -> to`, creating either endpoint as needed. Sizes of
    /// nodes created here are taken from `from_size` (or 1 for `to`).
    pub fn add_edge(&mut self, from: u64, from_size: u32, to: u64) {
        let node = self.nodes.entry(from).or_insert_with(|| Node { size: from_size, successors: SmallVec::new() });
        if !node.successors.contains(&to) {
            node.successors.push(to);
        }
        self.nodes.entry(to).or_insert_with(|| Node { size: 1, successors: SmallVec::new() });
    }

    pub fn successors(&self, address: u64) -> &[u64] {
        self.nodes.get(&address).map_or(&[], |n| n.successors.as_slice())
    }

    pub fn size_of(&self, address: u64) -> Option<u32> {
        self.nodes.get(&address).map(|n| n.size)
    }

    pub fn contains(&self, address: u64) -> bool {
        self.nodes.contains_key(&address)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
