//! Trace-driven simulation of region formation in dynamic translators.
//!
//! A trace of executed guest instructions is replayed through an automaton
//! whose states are the instructions of formed regions plus a single
//! interpreter state. A pluggable region-formation technique watches the
//! replay and emits new regions, which are installed immediately. The
//! automaton's counters yield coverage, transition, size, completion and
//! duplication metrics, and an abstract cost estimate.
//!
//! ```
//! use regionsim::engine::{run_simulation, SimulationConfig};
//! use regionsim::rft::{RftConfig, Technique};
//! use regionsim::trace_io::{LoopSpec, ProgramSpec};
//!
//! let trace = ProgramSpec::single(0x100, LoopSpec::new(3, 4, 10)).generate().unwrap();
//! let config = SimulationConfig::new(RftConfig::new(Technique::Net).with_threshold(2));
//! let result = run_simulation(&trace, &config).unwrap();
//! assert_eq!(result.report.num_regions, 1);
//! assert_eq!(result.report.native_instructions, 21);
//! ```

pub mod automaton;
pub mod cost;
pub mod engine;
pub mod metrics;
pub mod rft;
pub mod trace_io;

pub use automaton::{Automaton, RegionId, StateId, TransitionKind, NTE};
pub use cost::{estimate_times, CostBreakdown, CostParams};
pub use engine::{run_simulation, run_sweep, SimError, SimulationConfig, SimulationResult, Simulator};
pub use metrics::{compute_report, MetricsReport};
pub use rft::{RftConfig, Technique};
pub use trace_io::{TraceFormat, TraceItem, Window};
