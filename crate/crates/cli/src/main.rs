//! `regionsim` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 I/O or input-file error,
//! 3 internal invariant violation.

mod args;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use regionsim::engine::{run_simulation_stream, run_sweep};
use regionsim::rft::RftConfig;
use regionsim::trace_io::{load_trace, open_trace, write_trace, ProgramSpec, Window};
use regionsim::{SimError, SimulationConfig, SimulationResult};

use args::{Cli, Command, CompareArgs, DumpArgs, GenTraceArgs, OutputFormat, SimulateArgs, SweepArgs, TraceArgs};
use output::{
    compare_header, open_output, report_header, report_row, write_csv, write_json, CompareRow,
};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Io(_) => 2,
            Self::Invariant(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Io(m) | Self::Invariant(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => Self::Usage(e.to_string()),
            SimError::Trace(_) => Self::Io(e.to_string()),
            SimError::Automaton(_) | SimError::Invariant(_) => Self::Invariant(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("regionsim: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::GenTrace(a) => gen_trace(a),
        Command::Dump(a) => dump(a),
    }
}

fn window(t: &TraceArgs) -> Window {
    Window::new(t.skip, t.limit)
}

fn validated(config: SimulationConfig) -> Result<SimulationConfig, CliError> {
    config.rft.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn run_one(t: &TraceArgs, config: &SimulationConfig) -> Result<SimulationResult, CliError> {
    let stream = open_trace(&t.trace, t.format, config.window).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(run_simulation_stream(stream, config)?)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let rft = RftConfig::new(a.rft)
        .with_threshold(a.params.threshold)
        .with_max_region_size(a.params.max_region_size)
        .with_depth(a.params.netplus_depth)
        .with_lei_buffer(a.params.lei_buffer);
    let mut config = SimulationConfig::new(rft).with_window(window(&a.trace));
    config.cost = a.model.cost_params;
    config.cold_threshold = a.model.cold_threshold;
    let result = run_one(&a.trace, &validated(config)?)?;
    let out = open_output(a.out.output.as_deref())?;
    match a.out.output_format {
        OutputFormat::Csv => write_csv(out, &report_header(), &[report_row(&result)])?,
        OutputFormat::Json => write_json(out, &result)?,
    }
    Ok(())
}

fn sweep_configs(a: &SweepArgs) -> Result<Vec<SimulationConfig>, CliError> {
    if a.rfts.is_empty() {
        return Err(CliError::Usage("no techniques given".into()));
    }
    let g = &a.grid;
    let mut configs = Vec::new();
    for &t in &a.rfts {
        for &threshold in &g.thresholds.0 {
            for &m in &g.max_region_sizes.0 {
                for &d in &g.depths.0 {
                    for &b in &g.lei_buffers.0 {
                        let rft = RftConfig::new(t)
                            .with_threshold(threshold)
                            .with_max_region_size(m)
                            .with_depth(d)
                            .with_lei_buffer(b);
                        let mut c = SimulationConfig::new(rft).with_window(window(&a.trace));
                        c.cost = a.model.cost_params.clone();
                        c.cold_threshold = a.model.cold_threshold;
                        configs.push(validated(c)?);
                    }
                }
            }
        }
    }
    Ok(configs)
}

fn run_grid(a: &SweepArgs) -> Result<Vec<SimulationResult>, CliError> {
    let configs = sweep_configs(a)?;
    // Load through the end of the window; each run applies the window itself.
    let t = &a.trace;
    let prefix = Window::new(0, t.limit.map(|l| t.skip.saturating_add(l)));
    let trace = load_trace(&t.trace, t.format, prefix).map_err(|e| CliError::Io(e.to_string()))?;
    let parallelism = a
        .grid
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    run_sweep(&trace, &configs, parallelism)
        .into_iter()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let results = run_grid(&a)?;
    let out = open_output(a.out.output.as_deref())?;
    match a.out.output_format {
        OutputFormat::Csv => {
            let rows: Vec<_> = results.iter().map(report_row).collect();
            write_csv(out, &report_header(), &rows)?
        }
        OutputFormat::Json => write_json(out, &results)?,
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    if !a.sweep.rfts.contains(&a.baseline) {
        return Err(CliError::Usage(format!("baseline `{}` is not among --rfts", a.baseline)));
    }
    let results = run_grid(&a.sweep)?;
    let point = |r: &SimulationResult| {
        let c = &r.metadata.config.rft;
        (c.threshold, c.max_region_size, c.netplus_depth, c.lei_buffer_capacity)
    };
    let rows: Vec<CompareRow> = results
        .iter()
        .map(|r| {
            let base = results
                .iter()
                .find(|b| b.metadata.config.rft.technique == a.baseline && point(b) == point(r))
                .expect("baseline runs at every parameter point");
            CompareRow::new(r, base)
        })
        .collect();
    let out = open_output(a.sweep.out.output.as_deref())?;
    match a.sweep.out.output_format {
        OutputFormat::Csv => {
            let values: Vec<_> = rows.iter().map(CompareRow::csv_values).collect();
            write_csv(out, &compare_header(), &values)?
        }
        OutputFormat::Json => write_json(out, &rows)?,
    }
    Ok(())
}

fn gen_trace(a: GenTraceArgs) -> Result<(), CliError> {
    let name = a.spec.display();
    let text = std::fs::read_to_string(&a.spec).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    let spec = ProgramSpec::parse(&text).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    let items = spec.generate().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    let file = std::fs::File::create(&a.output).map_err(|e| CliError::Io(format!("{}: {e}", a.output.display())))?;
    write_trace(file, a.format, &items)?;
    Ok(())
}

fn dump(a: DumpArgs) -> Result<(), CliError> {
    let rft = RftConfig::new(a.rft)
        .with_threshold(a.params.threshold)
        .with_max_region_size(a.params.max_region_size)
        .with_depth(a.params.netplus_depth)
        .with_lei_buffer(a.params.lei_buffer);
    let config = validated(SimulationConfig::new(rft).with_window(window(&a.trace)).with_dump(true))?;
    let result = run_one(&a.trace, &config)?;
    write_json(open_output(a.output.as_deref())?, &result.dump)?;
    Ok(())
}
