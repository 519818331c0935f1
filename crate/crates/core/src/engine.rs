//! Simulation driver: replays a trace through an automaton and a region
//! manager, and runs configuration sweeps over one shared trace.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::automaton::{Automaton, AutomatonDump, AutomatonError, TransitionKind};
use crate::cost::{estimate_times, CostBreakdown, CostParams};
use crate::metrics::{compute_report, MetricsReport};
use crate::rft::{make_rft, netplus_expand, DynamicCfg, RegionManager, RegionRecording, RftConfig, RftError};
use crate::trace_io::{TraceError, TraceItem, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Execute,
    Record,
    /// Only observable while a region is being installed.
    Append,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationConfig {
    #[serde(flatten)]
    pub rft: RftConfig,
    #[serde(flatten)]
    pub window: Window,
    pub cost: Option<CostParams>,
    /// Regions entered fewer times than this count as cold; defaults to
    /// the hotness threshold.
    pub cold_threshold: Option<u64>,
    #[serde(skip)]
    pub dump: bool,
}

impl SimulationConfig {
    pub fn new(rft: RftConfig) -> Self {
        Self { rft, window: Window::ALL, cost: None, cold_threshold: None, dump: false }
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn with_cost(mut self, cost: CostParams) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn with_dump(mut self, dump: bool) -> Self {
        self.dump = dump;
        self
    }

    pub fn cold_threshold(&self) -> u64 {
        self.cold_threshold.unwrap_or(self.rft.threshold as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub config: SimulationConfig,
    pub items: u64,
    /// Excluded from serialized output so reports stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub metadata: RunMetadata,
    pub report: MetricsReport,
    pub cost: Option<CostBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump: Option<AutomatonDump>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] RftError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("region install failed: {0}")]
    Automaton(#[from] AutomatonError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// One simulation in progress.
pub struct Simulator {
    config: SimulationConfig,
    automaton: Automaton,
    manager: Box<dyn RegionManager>,
    /// Only kept for techniques that expand recordings.
    cfg: Option<DynamicCfg>,
    last: Option<TraceItem>,
    mode: EngineMode,
    items: u64,
    started: Instant,
}

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self, SimError> {
        let manager = make_rft(&config.rft)?;
        let cfg = config.rft.technique.expansion().map(|_| DynamicCfg::new());
        Ok(Self {
            config,
            automaton: Automaton::new(),
            manager,
            cfg,
            last: None,
            mode: EngineMode::Execute,
            items: 0,
            started: Instant::now(),
        })
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn automaton(&self) -> &Automaton {
        &self.automaton
    }

    /// Consumes one item and returns the transition it was attributed to.
    ///
    /// The manager sees the transition as resolved before any region it
    /// emits is installed; the automaton then commits against the updated
    /// region set, so the item that closes a recording already runs in the
    /// new region.
    #[inline]
    pub fn consume(&mut self, item: &TraceItem) -> Result<TransitionKind, SimError> {
        if let Some(cfg) = &mut self.cfg {
            cfg.observe(self.last.as_ref(), item);
        }
        let pending = self.automaton.resolve(item.address);
        if let Some(rec) = self.manager.handle_new_instruction(self.last.as_ref(), item, pending.kind()) {
            self.append(&rec)?;
        }
        let kind = self.automaton.commit(pending);
        self.mode = if self.manager.is_recording() { EngineMode::Record } else { EngineMode::Execute };
        self.last = Some(*item);
        self.items += 1;
        Ok(kind)
    }

    fn append(&mut self, rec: &RegionRecording) -> Result<(), SimError> {
        self.mode = EngineMode::Append;
        let expansion = match (self.config.rft.technique.expansion(), &self.cfg) {
            (Some(extended), Some(cfg)) => Some(netplus_expand(cfg, rec, self.config.rft.netplus_depth, extended)),
            _ => None,
        };
        self.automaton.append_region(rec, expansion.as_ref())?;
        Ok(())
    }

    /// Flushes any recording still open and assembles the result.
    pub fn finish(mut self) -> Result<SimulationResult, SimError> {
        if let Some(rec) = self.manager.finish() {
            if !rec.is_empty() {
                self.append(&rec)?;
            }
        }
        self.mode = EngineMode::Execute;
        let report = compute_report(&self.automaton, self.config.cold_threshold());
        report.check_invariants().map_err(SimError::Invariant)?;
        let cost = self.config.cost.as_ref().map(|p| estimate_times(&report, p));
        let dump = self.config.dump.then(|| self.automaton.dump());
        Ok(SimulationResult {
            metadata: RunMetadata { items: self.items, wall_time: self.started.elapsed(), config: self.config },
            report,
            cost,
            dump,
        })
    }
}

fn windowed<'a>(trace: &'a [TraceItem], w: &Window) -> &'a [TraceItem] {
    let start = (w.skip.min(trace.len() as u64)) as usize;
    let rest = &trace[start..];
    let n = w.limit.map_or(rest.len(), |l| (l.min(rest.len() as u64)) as usize);
    &rest[..n]
}

/// Runs one configuration over an in-memory trace; the config's window is
/// applied to `trace`.
pub fn run_simulation(trace: &[TraceItem], config: &SimulationConfig) -> Result<SimulationResult, SimError> {
    let mut sim = Simulator::new(config.clone())?;
    for item in windowed(trace, &config.window) {
        sim.consume(item)?;
    }
    sim.finish()
}

/// Runs one configuration over a fallible item stream, already windowed.
pub fn run_simulation_stream<I>(items: I, config: &SimulationConfig) -> Result<SimulationResult, SimError>
where
    I: IntoIterator<Item = Result<TraceItem, TraceError>>,
{
    let mut sim = Simulator::new(config.clone())?;
    for item in items {
        sim.consume(&item?)?;
    }
    sim.finish()
}

/// Runs every configuration over the shared trace on up to `parallelism`
/// threads. Results come back in config order; a failing config does not
/// affect its siblings.
pub fn run_sweep(
    trace: &[TraceItem],
    configs: &[SimulationConfig],
    parallelism: usize,
) -> Vec<Result<SimulationResult, SimError>> {
    let workers = parallelism.clamp(1, configs.len().max(1));
    if workers == 1 {
        return configs.iter().map(|c| run_simulation(trace, c)).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                if tx.send((i, run_simulation(trace, config))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<Result<SimulationResult, SimError>>> = configs.iter().map(|_| None).collect();
    for (i, r) in rx {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every config produces a result")).collect()
}
