use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regionsim::cost::CostParams;
use regionsim::rft::{
    Technique, DEFAULT_LEI_BUFFER, DEFAULT_MAX_REGION_SIZE, DEFAULT_NETPLUS_DEPTH, DEFAULT_THRESHOLD,
};
use regionsim::trace_io::TraceFormat;

pub const REPORT_COLUMNS_HELP: &str = "\
CSV columns, in order:
  technique, threshold, max_region_size, netplus_depth, lei_buffer_capacity,
  skip, limit, items, total_instructions, interpreted_instructions,
  native_instructions, num_regions, coverage, num_transitions, region_entries,
  avg_dynamic_region_size, avg_static_region_size, hot_static_size,
  completion_ratio, cover_set_90, cold_region_fraction,
  distinct_region_addresses, duplication_ratio, cold_threshold,
  cold_region_definition, interp_time, native_time, gen_time,
  transition_time, total_time, baseline_time, profitable
Cells without a value (averages over zero, unreachable cover set, cost
columns without --cost-params) hold NA.";

pub const COMPARE_COLUMNS_HELP: &str = "\
CSV columns, in order:
  technique, baseline, threshold, max_region_size, netplus_depth,
  lei_buffer_capacity, total_instructions, interpreted_instructions,
  native_instructions, num_regions, coverage, num_transitions, region_entries,
  avg_dynamic_region_size, avg_static_region_size, hot_static_size,
  completion_ratio, cover_set_90, cold_region_fraction,
  distinct_region_addresses, duplication_ratio
Each metric is divided by the baseline technique's value at the same
parameter point. NA marks a zero or missing baseline value.";

#[derive(Parser, Debug)]
#[command(name = "regionsim", version, about = "Trace-driven simulator for region formation techniques")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one technique over a trace and write a one-row report.
    #[command(after_help = REPORT_COLUMNS_HELP)]
    Simulate(SimulateArgs),
    /// Simulate every technique at every parameter point.
    #[command(after_help = REPORT_COLUMNS_HELP)]
    Sweep(SweepArgs),
    /// Like sweep, with every metric normalized by a baseline technique.
    #[command(after_help = COMPARE_COLUMNS_HELP)]
    Compare(CompareArgs),
    /// Generate a synthetic trace from a loop-nest spec file.
    GenTrace(GenTraceArgs),
    /// Simulate one technique and write the final automaton as JSON.
    Dump(DumpArgs),
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    /// Trace file.
    #[arg(long)]
    pub trace: PathBuf,
    /// Trace format: binary or text.
    #[arg(long, default_value = "binary")]
    pub format: TraceFormat,
    /// Items to discard from the start of the trace.
    #[arg(long, default_value_t = 0)]
    pub skip: u64,
    /// Maximum items to simulate after the skipped ones.
    #[arg(long)]
    pub limit: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output_format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Costs as interp,native,gen,init,transition (non-negative decimals).
    #[arg(long)]
    pub cost_params: Option<CostParams>,
    /// Regions entered fewer times than this are cold [default: threshold].
    #[arg(long)]
    pub cold_threshold: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SingleParams {
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_REGION_SIZE)]
    pub max_region_size: usize,
    #[arg(long, default_value_t = DEFAULT_NETPLUS_DEPTH)]
    pub netplus_depth: u32,
    #[arg(long, default_value_t = DEFAULT_LEI_BUFFER)]
    pub lei_buffer: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Technique: net, mret2, lei, netplus, net-r or netplus-e-r.
    #[arg(long)]
    pub rft: Technique,
    #[command(flatten)]
    pub params: SingleParams,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[arg(long)]
    pub rft: Technique,
    #[command(flatten)]
    pub params: SingleParams,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parameter lists; each accepts `a,b,c` or an inclusive `start:stop:step`.
#[derive(Args, Debug)]
pub struct GridParams {
    #[arg(long, default_value_t = Grid(vec![DEFAULT_THRESHOLD]))]
    pub thresholds: Grid<u32>,
    #[arg(long, default_value_t = Grid(vec![DEFAULT_MAX_REGION_SIZE]))]
    pub max_region_sizes: Grid<usize>,
    #[arg(long, default_value_t = Grid(vec![DEFAULT_NETPLUS_DEPTH]))]
    pub depths: Grid<u32>,
    #[arg(long, default_value_t = Grid(vec![DEFAULT_LEI_BUFFER]))]
    pub lei_buffers: Grid<usize>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Comma-separated techniques.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub rfts: Vec<Technique>,
    #[command(flatten)]
    pub grid: GridParams,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Technique every row is divided by; must be one of --rfts.
    #[arg(long, default_value = "net")]
    pub baseline: Technique,
}

#[derive(Args, Debug)]
pub struct GenTraceArgs {
    /// Loop-nest spec file.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value = "binary")]
    pub format: TraceFormat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid<T>(pub Vec<T>);

impl<T> FromStr for Grid<T>
where
    T: FromStr + Copy + PartialOrd + std::ops::Add<Output = T> + Default,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |p: &str| p.trim().parse::<T>().map_err(|_| format!("`{p}` is not a valid number"));
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if step <= T::default() {
                    return Err("range step must be positive".into());
                }
                let mut v = Vec::new();
                let mut x = start;
                while x <= stop {
                    v.push(x);
                    x = x + step;
                }
                v
            }
            [_] => s.split(',').map(num).collect::<Result<_, _>>()?,
            _ => return Err(format!("`{s}`: expected a,b,c or start:stop:step")),
        };
        if values.is_empty() {
            return Err(format!("`{s}` selects no values"));
        }
        Ok(Grid(values))
    }
}

impl<T: std::fmt::Display> std::fmt::Display for Grid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use regionsim::cost::COST_CSV_COLUMNS;
    use regionsim::metrics::{CSV_COLUMNS, NUMERIC_COLUMNS};

    #[test]
    fn grid_forms() {
        assert_eq!("2,4,8".parse::<Grid<u32>>().unwrap().0, vec![2, 4, 8]);
        assert_eq!("4:12:2".parse::<Grid<u32>>().unwrap().0, vec![4, 6, 8, 10, 12]);
        assert_eq!("5".parse::<Grid<u32>>().unwrap().0, vec![5]);
        assert!("4:2:1".parse::<Grid<u32>>().is_err());
        assert!("1:4:0".parse::<Grid<u32>>().is_err());
        assert!("1,x".parse::<Grid<u32>>().is_err());
        assert!("1:2".parse::<Grid<u32>>().is_err());
    }

    fn words(help: &str) -> Vec<String> {
        let body = help.split("in order:").nth(1).unwrap();
        let end = body.find(char::is_uppercase).unwrap_or(body.len());
        body[..end].split([',', '\n', ' ']).filter(|w| !w.is_empty()).map(str::to_string).collect()
    }

    #[test]
    fn help_lists_the_report_columns() {
        let mut expected: Vec<String> =
            crate::output::ROW_PREFIX.iter().map(|s| s.to_string()).collect();
        expected.extend(CSV_COLUMNS.iter().map(|s| s.to_string()));
        expected.extend(COST_CSV_COLUMNS.iter().map(|s| s.to_string()));
        assert_eq!(words(REPORT_COLUMNS_HELP), expected);

        let mut expected: Vec<String> =
            crate::output::COMPARE_PREFIX.iter().map(|s| s.to_string()).collect();
        expected.extend(NUMERIC_COLUMNS.iter().map(|s| s.to_string()));
        assert_eq!(words(COMPARE_COLUMNS_HELP), expected);
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
