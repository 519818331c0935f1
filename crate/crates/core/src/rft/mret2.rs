//! MRET2: NET recording performed twice from the same entry; the region is
//! what both passes agree on.

use rustc_hash::FxHashSet;

use super::net::{Profiler, Recorder, StopRule};
use super::{RegionManager, RegionRecording, RftError};
use crate::automaton::TransitionKind;
use crate::trace_io::TraceItem;

/// Items of `pass1`, in `pass1` order, whose addresses also occur in
/// `pass2`.
pub fn mret2_intersect(pass1: &RegionRecording, pass2: &RegionRecording) -> Result<RegionRecording, RftError> {
    match (pass1.entry(), pass2.entry()) {
        (Some(a), Some(b)) if a != b => return Err(RftError::EntryMismatch(a, b)),
        _ => {}
    }
    let second: FxHashSet<u64> = pass2.addresses().collect();
    Ok(RegionRecording::from_items(
        pass1.items().iter().filter(|i| second.contains(&i.address)).copied().collect(),
    ))
}

#[derive(Debug)]
enum Phase {
    Profiling,
    FirstPass(Recorder),
    /// First pass done; waiting for the entry to run in the interpreter.
    Armed(RegionRecording),
    SecondPass(RegionRecording, Recorder),
}

#[derive(Debug)]
pub struct Mret2Manager {
    profiler: Profiler,
    max_len: usize,
    phase: Phase,
}

impl Mret2Manager {
    pub fn new(threshold: u32, max_len: usize) -> Self {
        Self { profiler: Profiler::new(threshold), max_len, phase: Phase::Profiling }
    }

    fn start(&self, current: &TraceItem) -> Recorder {
        Recorder::start(current, StopRule::BackwardBranch, self.max_len)
    }
}

impl RegionManager for Mret2Manager {
    fn handle_new_instruction(
        &mut self,
        last: Option<&TraceItem>,
        current: &TraceItem,
        transition: TransitionKind,
    ) -> Option<RegionRecording> {
        match std::mem::replace(&mut self.phase, Phase::Profiling) {
            Phase::Profiling => {
                if self.profiler.observe(last, current, transition) {
                    self.phase = Phase::FirstPass(self.start(current));
                }
            }
            Phase::FirstPass(mut rec) => {
                if rec.should_stop(last, current, transition) {
                    let entry = rec.entry();
                    let pass1 = rec.finish();
                    self.phase = if current.address == entry && transition.is_interpreted() {
                        Phase::SecondPass(pass1, self.start(current))
                    } else {
                        Phase::Armed(pass1)
                    };
                } else {
                    rec.push(current);
                    self.phase = Phase::FirstPass(rec);
                }
            }
            Phase::Armed(pass1) => {
                if Some(current.address) == pass1.entry() && transition.is_interpreted() {
                    self.phase = Phase::SecondPass(pass1, self.start(current));
                } else if self.profiler.observe(last, current, transition) {
                    // another entry got hot first; the pending pass is dropped
                    self.phase = Phase::FirstPass(self.start(current));
                } else {
                    self.phase = Phase::Armed(pass1);
                }
            }
            Phase::SecondPass(pass1, mut rec) => {
                if rec.should_stop(last, current, transition) {
                    return Some(mret2_intersect(&pass1, &rec.finish()).expect("passes share an entry"));
                }
                rec.push(current);
                self.phase = Phase::SecondPass(pass1, rec);
            }
        }
        None
    }

    fn is_recording(&self) -> bool {
        matches!(self.phase, Phase::FirstPass(_) | Phase::SecondPass(..))
    }

    fn finish(&mut self) -> Option<RegionRecording> {
        match std::mem::replace(&mut self.phase, Phase::Profiling) {
            Phase::SecondPass(pass1, rec) => Some(mret2_intersect(&pass1, &rec.finish()).expect("passes share an entry")),
            _ => None,
        }
    }
}
