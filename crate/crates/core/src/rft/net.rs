//! Next-executing-tail recording, in the plain (stop at backward branches)
//! and relaxed (stop at the first repeated address) flavours.

use rustc_hash::FxHashSet;

use super::{was_backward_branch, HotnessTable, RegionManager, RegionRecording};
use crate::automaton::TransitionKind;
use crate::trace_io::TraceItem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// NET: a backward branch ends the recording.
    BackwardBranch,
    /// NET-r: only a repeated address ends it.
    RepeatedAddress,
}

/// NET-r stop test: `current` repeats a recorded address, the recording is
/// full, or execution just entered an existing region.
pub fn netr_stop_condition(
    rec: &RegionRecording,
    current: &TraceItem,
    transition: TransitionKind,
    max_len: usize,
) -> bool {
    rec.contains(current.address) || rec.len() >= max_len || transition == TransitionKind::InterpToNative
}

/// Profiling arm shared by the NET family: count targets of interpreted
/// backward branches and of region exits.
#[derive(Clone, Debug)]
pub(crate) struct Profiler {
    hotness: HotnessTable,
}

impl Profiler {
    pub(crate) fn new(threshold: u32) -> Self {
        Self { hotness: HotnessTable::new(threshold) }
    }

    /// True when a recording should start at `current`; the counter is
    /// reset in that case.
    #[inline]
    pub(crate) fn observe(&mut self, last: Option<&TraceItem>, current: &TraceItem, t: TransitionKind) -> bool {
        let candidate = match t {
            TransitionKind::NativeToInterp => true,
            TransitionKind::StayedInterp => last.is_some_and(|l| was_backward_branch(l, current)),
            _ => false,
        };
        if candidate && self.hotness.bump(current.address) {
            self.hotness.reset(current.address);
            return true;
        }
        false
    }
}

/// A recording in progress.
#[derive(Clone, Debug)]
pub(crate) struct Recorder {
    items: Vec<TraceItem>,
    seen: FxHashSet<u64>,
    rule: StopRule,
    max_len: usize,
}

impl Recorder {
    pub(crate) fn start(first: &TraceItem, rule: StopRule, max_len: usize) -> Self {
        let mut seen = FxHashSet::default();
        if rule == StopRule::RepeatedAddress {
            seen.insert(first.address);
        }
        Self { items: vec![*first], seen, rule, max_len }
    }

    pub(crate) fn entry(&self) -> u64 {
        self.items[0].address
    }

    #[inline]
    pub(crate) fn should_stop(&self, last: Option<&TraceItem>, current: &TraceItem, t: TransitionKind) -> bool {
        if t == TransitionKind::InterpToNative || self.items.len() >= self.max_len {
            return true;
        }
        match self.rule {
            StopRule::BackwardBranch => last.is_some_and(|l| was_backward_branch(l, current)),
            StopRule::RepeatedAddress => self.seen.contains(&current.address),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, item: &TraceItem) {
        if self.rule == StopRule::RepeatedAddress {
            self.seen.insert(item.address);
        }
        self.items.push(*item);
    }

    pub(crate) fn finish(self) -> RegionRecording {
        RegionRecording::from_items(self.items)
    }
}

/// NET / NET-r manager. NETPlus variants reuse it; their expansion runs in
/// the engine after a recording is emitted.
#[derive(Clone, Debug)]
pub struct NetManager {
    profiler: Profiler,
    rule: StopRule,
    max_len: usize,
    recording: Option<Recorder>,
}

impl NetManager {
    pub fn new(threshold: u32, max_len: usize, rule: StopRule) -> Self {
        Self { profiler: Profiler::new(threshold), rule, max_len, recording: None }
    }
}

impl RegionManager for NetManager {
    #[inline]
    fn handle_new_instruction(
        &mut self,
        last: Option<&TraceItem>,
        current: &TraceItem,
        transition: TransitionKind,
    ) -> Option<RegionRecording> {
        if let Some(rec) = &mut self.recording {
            if rec.should_stop(last, current, transition) {
                return self.recording.take().map(Recorder::finish);
            }
            rec.push(current);
        } else if self.profiler.observe(last, current, transition) {
            self.recording = Some(Recorder::start(current, self.rule, self.max_len));
        }
        None
    }

    fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    fn finish(&mut self) -> Option<RegionRecording> {
        self.recording.take().map(Recorder::finish)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TransitionKind::*;

    fn it(a: u64) -> TraceItem {
        TraceItem::new(a, 4)
    }

    fn rec(addrs: &[u64]) -> RegionRecording {
        RegionRecording::from_items(addrs.iter().map(|&a| it(a)).collect())
    }

    /// Feeds addresses as if every instruction were interpreted.
    fn feed(m: &mut NetManager, addrs: &[u64]) -> Vec<(usize, RegionRecording)> {
        let mut out = Vec::new();
        let mut last: Option<TraceItem> = None;
        for (i, &a) in addrs.iter().enumerate() {
            let cur = it(a);
            if let Some(r) = m.handle_new_instruction(last.as_ref(), &cur, StayedInterp) {
                out.push((i, r));
            }
            last = Some(cur);
        }
        out
    }

    #[test]
    fn single_loop_threshold_two() {
        let mut m = NetManager::new(2, 1024, StopRule::BackwardBranch);
        let trace: Vec<u64> = [0x100, 0x104, 0x108].repeat(4);
        let out = feed(&mut m, &trace);
        // hot on the arrival at item 6, emitted at the backward branch at item 9
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 9);
        assert_eq!(out[0].1, rec(&[0x100, 0x104, 0x108]));
    }

    #[test]
    fn straight_line_never_records() {
        let mut m = NetManager::new(1, 1024, StopRule::BackwardBranch);
        let trace: Vec<u64> = (0..100).map(|i| 0x1000 + 4 * i).collect();
        assert!(feed(&mut m, &trace).is_empty());
        assert!(!m.is_recording());
        assert!(m.finish().is_none());
    }

    #[test]
    fn entering_a_region_truncates_the_recording() {
        let mut m = NetManager::new(1, 1024, StopRule::BackwardBranch);
        assert!(m.handle_new_instruction(Some(&it(0x108)), &it(0x100), StayedInterp).is_none());
        assert!(m.is_recording());
        assert!(m.handle_new_instruction(Some(&it(0x100)), &it(0x104), StayedInterp).is_none());
        let out = m.handle_new_instruction(Some(&it(0x104)), &it(0x108), InterpToNative);
        assert_eq!(out, Some(rec(&[0x100, 0x104])));
    }

    #[test]
    fn exit_targets_are_profiled_without_backward_branch() {
        let mut m = NetManager::new(1, 1024, StopRule::BackwardBranch);
        m.handle_new_instruction(Some(&it(0x100)), &it(0x200), NativeToInterp);
        assert!(m.is_recording());
        let mut m = NetManager::new(1, 1024, StopRule::BackwardBranch);
        m.handle_new_instruction(Some(&it(0x200)), &it(0x100), StayedNative);
        assert!(!m.is_recording());
    }

    #[test]
    fn cap_limits_recording_length() {
        let mut m = NetManager::new(1, 3, StopRule::BackwardBranch);
        let mut trace = vec![0x200, 0x100];
        trace.extend((1..10).map(|i| 0x100 + 4 * i));
        let out = feed(&mut m, &trace);
        assert_eq!(out[0].1, rec(&[0x100, 0x104, 0x108]));
    }

    #[test]
    fn netr_stop_condition_cases() {
        let r = rec(&[0xA0, 0xB0, 0xC0]);
        assert!(netr_stop_condition(&r, &it(0xB0), StayedInterp, 1024));
        // backward but new: keep going
        assert!(!netr_stop_condition(&r, &it(0x90), StayedInterp, 1024));
        assert!(netr_stop_condition(&r, &it(0xD0), StayedInterp, 3));
        assert!(netr_stop_condition(&r, &it(0xD0), InterpToNative, 1024));
    }

    #[test]
    fn relaxed_recording_crosses_backward_branches() {
        let mut m = NetManager::new(1, 1024, StopRule::RepeatedAddress);
        // 0x200 <- backward from 0x208; then 0x100 (backward) is new, 0x200 repeats
        let out = feed(&mut m, &[0x208, 0x200, 0x204, 0x100, 0x104, 0x200]);
        assert_eq!(out[0].1, rec(&[0x200, 0x204, 0x100, 0x104]));
    }
}
