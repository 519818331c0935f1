//! Abstract-time cost model for a simulated translator.
//!
//! All arithmetic is exact over non-negative rationals; values are rendered
//! as floats only at serialization time.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::metrics::MetricsReport;

/// Non-negative abstract time units.
pub type Units = Ratio<u128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid cost value {0:?}: expected a non-negative decimal")]
pub struct CostParseError(pub String);

/// Parses a non-negative decimal such as `10`, `0.25` or `.5` exactly.
pub fn parse_units(s: &str) -> Result<Units, CostParseError> {
    let err = || CostParseError(s.to_string());
    let t = s.trim();
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 30
    {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let numer: u128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err())? };
    Ok(Ratio::new(numer, 10u128.pow(frac.len() as u32)))
}

fn units_f64(u: &Units) -> f64 {
    *u.numer() as f64 / *u.denom() as f64
}

fn ser_units<S: Serializer>(u: &Units, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(units_f64(u))
}

/// Per-event costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostParams {
    /// per interpreted instruction
    #[serde(serialize_with = "ser_units")]
    pub interp: Units,
    /// per natively executed instruction
    #[serde(serialize_with = "ser_units")]
    pub native: Units,
    /// per static instruction compiled
    #[serde(serialize_with = "ser_units")]
    pub gen: Units,
    /// per region compiled
    #[serde(serialize_with = "ser_units")]
    pub compiler_init: Units,
    /// per region-to-region transition
    #[serde(serialize_with = "ser_units")]
    pub transition: Units,
}

impl CostParams {
    pub fn from_integers(interp: u64, native: u64, gen: u64, compiler_init: u64, transition: u64) -> Self {
        let u = |v: u64| Units::from_integer(v as u128);
        Self {
            interp: u(interp),
            native: u(native),
            gen: u(gen),
            compiler_init: u(compiler_init),
            transition: u(transition),
        }
    }
}

impl FromStr for CostParams {
    type Err = CostParseError;

    /// `interp,native,gen,init,transition`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 5 {
            return Err(CostParseError(s.to_string()));
        }
        Ok(Self {
            interp: parse_units(parts[0])?,
            native: parse_units(parts[1])?,
            gen: parse_units(parts[2])?,
            compiler_init: parse_units(parts[3])?,
            transition: parse_units(parts[4])?,
        })
    }
}

impl fmt::Display for CostParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.interp, self.native, self.gen, self.compiler_init, self.transition)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostBreakdown {
    #[serde(serialize_with = "ser_units")]
    pub interp_time: Units,
    #[serde(serialize_with = "ser_units")]
    pub native_time: Units,
    #[serde(serialize_with = "ser_units")]
    pub gen_time: Units,
    #[serde(serialize_with = "ser_units")]
    pub transition_time: Units,
    #[serde(serialize_with = "ser_units")]
    pub total_time: Units,
    /// Time to interpret the whole trace.
    #[serde(serialize_with = "ser_units")]
    pub baseline_time: Units,
    pub profitable: bool,
}

pub const COST_CSV_COLUMNS: [&str; 7] =
    ["interp_time", "native_time", "gen_time", "transition_time", "total_time", "baseline_time", "profitable"];

impl CostBreakdown {
    pub fn csv_values(&self) -> Vec<String> {
        vec![
            units_f64(&self.interp_time).to_string(),
            units_f64(&self.native_time).to_string(),
            units_f64(&self.gen_time).to_string(),
            units_f64(&self.transition_time).to_string(),
            units_f64(&self.total_time).to_string(),
            units_f64(&self.baseline_time).to_string(),
            self.profitable.to_string(),
        ]
    }
}

pub fn estimate_times(report: &MetricsReport, p: &CostParams) -> CostBreakdown {
    let n = |v: u64| Units::from_integer(v as u128);
    let interp_time = p.interp * n(report.interpreted_instructions);
    let native_time = p.native * n(report.native_instructions);
    let gen_time = p.gen * n(report.hot_static_size) + p.compiler_init * n(report.num_regions);
    let transition_time = p.transition * n(report.num_transitions);
    let total_time = interp_time + native_time + gen_time + transition_time;
    let baseline_time = p.interp * n(report.total_instructions);
    CostBreakdown {
        profitable: total_time < baseline_time,
        interp_time,
        native_time,
        gen_time,
        transition_time,
        total_time,
        baseline_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Automaton;
    use crate::metrics::compute_report;

    fn u(v: u128) -> Units {
        Units::from_integer(v)
    }

    #[test]
    fn parse_decimals() {
        assert_eq!(parse_units("10").unwrap(), u(10));
        assert_eq!(parse_units("0.25").unwrap(), Ratio::new(1, 4));
        assert_eq!(parse_units(".5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_units("3.").unwrap(), u(3));
        for bad in ["", ".", "-1", "1e3", "abc", "1.2.3"] {
            assert!(parse_units(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn params_round_trip_text() {
        let p: CostParams = "10,1,5,100,2".parse().unwrap();
        assert_eq!(p, CostParams::from_integers(10, 1, 5, 100, 2));
        assert_eq!(p.to_string().parse::<CostParams>().unwrap(), p);
        assert!("1,2,3".parse::<CostParams>().is_err());
    }

    #[test]
    fn nothing_translated_is_not_profitable() {
        let mut r = compute_report(&Automaton::new(), 1);
        r.total_instructions = 100;
        r.interpreted_instructions = 100;
        let c = estimate_times(&r, &CostParams::from_integers(10, 1, 5, 100, 2));
        assert_eq!(c.interp_time, u(1000));
        assert_eq!(c.total_time, c.baseline_time);
        assert!(!c.profitable);
    }
}
