//! Run metrics derived from automaton counters.

use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::automaton::{Automaton, RegionCounters, RegionSnapshot};

/// How cold regions are identified; echoed in reports because the
/// definition is a modelling choice.
pub const COLD_REGION_DEFINITION: &str = "entries < threshold";

/// Per-region figures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionMetrics {
    pub id: u32,
    pub entry_address: u64,
    pub static_size: u64,
    pub expansion_size: u64,
    pub entries: u64,
    pub dynamic_instructions: u64,
    pub dynamic_size: Option<f64>,
    pub completion_ratio: Option<f64>,
    #[serde(flatten)]
    pub counters: RegionCounters,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub total_instructions: u64,
    pub interpreted_instructions: u64,
    pub native_instructions: u64,
    pub num_regions: u64,
    /// Fraction of instructions executed by regions.
    pub coverage: f64,
    /// Region entries coming straight from another region.
    pub num_transitions: u64,
    pub region_entries: u64,
    /// Native instructions per region entry.
    pub avg_dynamic_region_size: Option<f64>,
    pub avg_static_region_size: Option<f64>,
    pub hot_static_size: u64,
    /// Completed traversals over head executions, all regions together.
    pub completion_ratio: Option<f64>,
    /// `None` when all regions together stay below 90% of all instructions.
    pub cover_set_90: Option<u64>,
    pub cold_region_fraction: f64,
    pub cold_threshold: u64,
    pub cold_region_definition: &'static str,
    pub distinct_region_addresses: u64,
    pub duplication_ratio: Option<f64>,
    pub regions: Vec<RegionMetrics>,
}

/// Column order of [`MetricsReport::csv_values`].
pub const CSV_COLUMNS: [&str; 17] = [
    "total_instructions",
    "interpreted_instructions",
    "native_instructions",
    "num_regions",
    "coverage",
    "num_transitions",
    "region_entries",
    "avg_dynamic_region_size",
    "avg_static_region_size",
    "hot_static_size",
    "completion_ratio",
    "cover_set_90",
    "cold_region_fraction",
    "distinct_region_addresses",
    "duplication_ratio",
    "cold_threshold",
    "cold_region_definition",
];

pub(crate) fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

/// Completed traversals per head execution; `None` when the head never ran.
pub fn completion_ratio(counters: &RegionCounters) -> Option<f64> {
    ratio(counters.completed_traversals, counters.head_executions)
}

/// Smallest number of regions whose dynamic counts reach 90% of
/// `total_freq`, taking the largest first.
pub fn ninety_percent_cover_set(counts: &[u64], total_freq: u64) -> Option<u64> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let goal = 9 * total_freq as u128;
    let mut sum: u128 = 0;
    if goal == 0 {
        return Some(0);
    }
    for (i, c) in sorted.iter().enumerate() {
        sum += *c as u128;
        if 10 * sum >= goal {
            return Some(i as u64 + 1);
        }
    }
    None
}

/// Fraction of regions entered fewer than `threshold` times; 0 without
/// regions.
pub fn cold_region_fraction(regions: &[RegionSnapshot], threshold: u64) -> f64 {
    let cold = regions.iter().filter(|r| r.counters.entries() < threshold).count() as u64;
    ratio(cold, regions.len() as u64).unwrap_or(0.0)
}

/// Builds the report for a finished simulation.
pub fn compute_report(automaton: &Automaton, cold_threshold: u64) -> MetricsReport {
    let totals = automaton.totals();
    let snaps = automaton.region_snapshots();

    let hot_static_size: u64 = snaps.iter().map(|r| r.static_size() as u64).sum();
    let distinct: FxHashSet<u64> = snaps.iter().flat_map(|r| r.addresses.iter().copied()).collect();
    let entries: u64 = snaps.iter().map(|r| r.counters.entries()).sum();
    let heads: u64 = snaps.iter().map(|r| r.counters.head_executions).sum();
    let completed: u64 = snaps.iter().map(|r| r.counters.completed_traversals).sum();
    let dyn_counts: Vec<u64> = snaps.iter().map(|r| r.counters.dynamic_instructions).collect();
    let num_regions = snaps.len() as u64;

    let regions = snaps
        .iter()
        .map(|r| RegionMetrics {
            id: r.id,
            entry_address: r.entry_address,
            static_size: r.static_size() as u64,
            expansion_size: r.expansion_size as u64,
            entries: r.counters.entries(),
            dynamic_instructions: r.counters.dynamic_instructions,
            dynamic_size: ratio(r.counters.dynamic_instructions, r.counters.entries()),
            completion_ratio: completion_ratio(&r.counters),
            counters: r.counters,
        })
        .collect();

    MetricsReport {
        total_instructions: totals.total_instructions,
        interpreted_instructions: totals.interpreted_instructions,
        native_instructions: totals.native_instructions,
        num_regions,
        coverage: ratio(totals.native_instructions, totals.total_instructions).unwrap_or(0.0),
        num_transitions: totals.region_transitions,
        region_entries: entries,
        avg_dynamic_region_size: ratio(totals.native_instructions, entries),
        avg_static_region_size: ratio(hot_static_size, num_regions),
        hot_static_size,
        completion_ratio: ratio(completed, heads),
        cover_set_90: ninety_percent_cover_set(&dyn_counts, totals.total_instructions),
        cold_region_fraction: cold_region_fraction(&snaps, cold_threshold),
        cold_threshold,
        cold_region_definition: COLD_REGION_DEFINITION,
        distinct_region_addresses: distinct.len() as u64,
        duplication_ratio: ratio(hot_static_size - distinct.len() as u64, hot_static_size),
        regions,
    }
}

impl MetricsReport {
    /// Values in [`CSV_COLUMNS`] order; missing values are `NA`.
    pub fn csv_values(&self) -> Vec<String> {
        vec![
            self.total_instructions.to_string(),
            self.interpreted_instructions.to_string(),
            self.native_instructions.to_string(),
            self.num_regions.to_string(),
            self.coverage.to_string(),
            self.num_transitions.to_string(),
            self.region_entries.to_string(),
            fmt_opt(self.avg_dynamic_region_size),
            fmt_opt(self.avg_static_region_size),
            self.hot_static_size.to_string(),
            fmt_opt(self.completion_ratio),
            self.cover_set_90.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            self.cold_region_fraction.to_string(),
            self.distinct_region_addresses.to_string(),
            fmt_opt(self.duplication_ratio),
            self.cold_threshold.to_string(),
            self.cold_region_definition.to_string(),
        ]
    }

    /// Numeric metrics by column name, for normalization; `None` is N/A.
    pub fn numeric(&self, column: &str) -> Option<f64> {
        Some(match column {
            "total_instructions" => self.total_instructions as f64,
            "interpreted_instructions" => self.interpreted_instructions as f64,
            "native_instructions" => self.native_instructions as f64,
            "num_regions" => self.num_regions as f64,
            "coverage" => self.coverage,
            "num_transitions" => self.num_transitions as f64,
            "region_entries" => self.region_entries as f64,
            "avg_dynamic_region_size" => self.avg_dynamic_region_size?,
            "avg_static_region_size" => self.avg_static_region_size?,
            "hot_static_size" => self.hot_static_size as f64,
            "completion_ratio" => self.completion_ratio?,
            "cover_set_90" => self.cover_set_90? as f64,
            "cold_region_fraction" => self.cold_region_fraction,
            "distinct_region_addresses" => self.distinct_region_addresses as f64,
            "duplication_ratio" => self.duplication_ratio?,
            _ => return None,
        })
    }

    /// Conservation laws every report must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.interpreted_instructions + self.native_instructions != self.total_instructions {
            return Err(format!(
                "interpreted {} + native {} != total {}",
                self.interpreted_instructions, self.native_instructions, self.total_instructions
            ));
        }
        let per_region: u64 = self.regions.iter().map(|r| r.dynamic_instructions).sum();
        if per_region != self.native_instructions {
            return Err(format!("region dynamic counts sum to {per_region}, native is {}", self.native_instructions));
        }
        let transitions: u64 = self.regions.iter().map(|r| r.counters.entries_from_native).sum();
        if transitions != self.num_transitions {
            return Err(format!("native entries {transitions} != transitions {}", self.num_transitions));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(format!("coverage {} out of range", self.coverage));
        }
        Ok(())
    }
}

/// Metric columns that can be divided by a baseline.
pub const NUMERIC_COLUMNS: [&str; 15] = [
    "total_instructions",
    "interpreted_instructions",
    "native_instructions",
    "num_regions",
    "coverage",
    "num_transitions",
    "region_entries",
    "avg_dynamic_region_size",
    "avg_static_region_size",
    "hot_static_size",
    "completion_ratio",
    "cover_set_90",
    "cold_region_fraction",
    "distinct_region_addresses",
    "duplication_ratio",
];

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}
