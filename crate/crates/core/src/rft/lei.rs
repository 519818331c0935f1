//! Last-executed-iteration region formation over a bounded history of
//! interpreted instructions.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use super::{HotnessTable, RegionManager, RegionRecording};
use crate::automaton::TransitionKind;
use crate::trace_io::TraceItem;

/// Circular history of interpreted instructions. Positions are absolute
/// (they keep counting across evictions and clears).
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    entries: VecDeque<TraceItem>,
    /// Absolute position of `entries[0]`.
    start: u64,
    capacity: usize,
    /// address -> (most recent position, occurrences in the buffer)
    index: FxHashMap<u64, (u64, u32)>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history buffer capacity must be >= 1");
        Self {
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            start: 0,
            capacity,
            index: FxHashMap::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Absolute position the next pushed item will get.
    pub fn next_position(&self) -> u64 {
        self.start + self.entries.len() as u64
    }

    pub fn addresses(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|i| i.address)
    }

    pub fn contains(&self, address: u64) -> bool {
        self.index.contains_key(&address)
    }

    /// Pushes `current`, evicting the oldest entry first when full. Returns
    /// the position of the most recent earlier occurrence still in the
    /// buffer, if any.
    pub fn observe(&mut self, current: &TraceItem) -> Option<u64> {
        if self.entries.len() == self.capacity {
            self.evict_oldest();
        }
        let pos = self.next_position();
        let slot = self.index.entry(current.address).or_insert((pos, 0));
        let prior = (slot.1 > 0).then_some(slot.0);
        *slot = (pos, slot.1 + 1);
        self.entries.push_back(*current);
        prior
    }

    fn evict_oldest(&mut self) {
        if let Some(old) = self.entries.pop_front() {
            self.start += 1;
            if let Some(slot) = self.index.get_mut(&old.address) {
                slot.1 -= 1;
                if slot.1 == 0 {
                    self.index.remove(&old.address);
                }
            }
        }
    }

    /// Items at positions `from..to`, clamped to what is still buffered.
    pub fn slice(&self, from: u64, to: u64) -> Vec<TraceItem> {
        let lo = from.max(self.start).saturating_sub(self.start) as usize;
        let hi = (to.saturating_sub(self.start) as usize).min(self.entries.len());
        self.entries.range(lo..hi.max(lo)).copied().collect()
    }

    pub fn clear(&mut self) {
        self.start = self.next_position();
        self.entries.clear();
        self.index.clear();
    }
}

/// Collapses every inner repetition in `slice` to its last iteration: when
/// an address reappears, everything since its previous occurrence is
/// dropped. The result has distinct addresses and keeps the first item.
pub fn last_iteration(slice: &[TraceItem]) -> Vec<TraceItem> {
    let mut out: Vec<TraceItem> = Vec::with_capacity(slice.len());
    let mut at: FxHashMap<u64, usize> = FxHashMap::default();
    for item in slice {
        if let Some(&p) = at.get(&item.address) {
            for dropped in out.drain(p..) {
                at.remove(&dropped.address);
            }
        }
        at.insert(item.address, out.len());
        out.push(*item);
    }
    out
}

/// Called right after [`HistoryBuffer::observe`] reported a cycle back to
/// position `prior`. Counts the cycle head; once hot, emits the last
/// executed iteration (prior occurrence up to, not including, the item just
/// pushed), capped at `max_len`, and clears the buffer.
pub fn lei_form_region(
    buffer: &mut HistoryBuffer,
    prior: u64,
    hotness: &mut HotnessTable,
    max_len: usize,
) -> Option<RegionRecording> {
    let current = buffer.next_position().checked_sub(1)?;
    let slice = buffer.slice(prior, current);
    let head = slice.first()?.address;
    if !hotness.bump(head) {
        return None;
    }
    hotness.reset(head);
    let mut items = last_iteration(&slice);
    items.truncate(max_len);
    buffer.clear();
    Some(RegionRecording::from_items(items))
}

#[derive(Clone, Debug)]
pub struct LeiManager {
    buffer: HistoryBuffer,
    hotness: HotnessTable,
    max_len: usize,
}

impl LeiManager {
    pub fn new(threshold: u32, max_len: usize, capacity: usize) -> Self {
        Self { buffer: HistoryBuffer::new(capacity), hotness: HotnessTable::new(threshold), max_len }
    }
}

impl RegionManager for LeiManager {
    #[inline]
    fn handle_new_instruction(
        &mut self,
        _last: Option<&TraceItem>,
        current: &TraceItem,
        transition: TransitionKind,
    ) -> Option<RegionRecording> {
        if !transition.is_interpreted() {
            return None;
        }
        let prior = self.buffer.observe(current)?;
        lei_form_region(&mut self.buffer, prior, &mut self.hotness, self.max_len)
    }

    fn is_recording(&self) -> bool {
        false
    }
}
