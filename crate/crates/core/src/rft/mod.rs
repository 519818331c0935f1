//! Region formation techniques.
//!
//! A [`RegionManager`] sees every consumed instruction together with the
//! transition the automaton just made for it, keeps its own hotness and
//! recording state, and hands back a finished [`RegionRecording`] when its
//! stop criterion fires. Managers never look inside the automaton.
//!
//! Six techniques are provided:
//!
//! | tag           | start                         | stop                              | expansion          |
//! |---------------|-------------------------------|-----------------------------------|--------------------|
//! | `net`         | hot backward/exit target      | backward branch, region entry, M  | none               |
//! | `mret2`       | as `net`, recorded twice      | as `net`, per pass                | pass intersection  |
//! | `lei`         | hot cycle in history buffer   | (formed at once from the buffer)  | none               |
//! | `netplus`     | as `net`                      | as `net`                          | paths to the entry |
//! | `net-r`       | as `net`                      | repeated address, region entry, M | none               |
//! | `netplus-e-r` | as `net`                      | as `net-r`                        | paths to any member|

mod cfg;
mod expand;
mod hotness;
mod lei;
mod mret2;
mod net;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::TransitionKind;
use crate::trace_io::TraceItem;

pub use cfg::DynamicCfg;
pub use expand::{netplus_expand, Expansion};
pub use hotness::HotnessTable;
pub use lei::{last_iteration, lei_form_region, HistoryBuffer, LeiManager};
pub use mret2::{mret2_intersect, Mret2Manager};
pub use net::{netr_stop_condition, NetManager, StopRule};

pub const DEFAULT_THRESHOLD: u32 = 1024;
pub const DEFAULT_MAX_REGION_SIZE: usize = 1024;
pub const DEFAULT_NETPLUS_DEPTH: u32 = 10;
pub const DEFAULT_LEI_BUFFER: usize = 8192;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RftError {
    #[error("unknown technique `{0}` (expected one of: net, mret2, lei, netplus, net-r, netplus-e-r)")]
    UnknownTechnique(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("recordings start at different entries ({0:#x} vs {1:#x})")]
    EntryMismatch(u64, u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "net")]
    Net,
    #[serde(rename = "mret2")]
    Mret2,
    #[serde(rename = "lei")]
    Lei,
    #[serde(rename = "netplus")]
    NetPlus,
    #[serde(rename = "net-r")]
    NetR,
    #[serde(rename = "netplus-e-r")]
    NetPlusER,
}

impl Technique {
    pub const ALL: [Technique; 6] = [
        Technique::Net,
        Technique::Mret2,
        Technique::Lei,
        Technique::NetPlus,
        Technique::NetR,
        Technique::NetPlusER,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Net => "net",
            Self::Mret2 => "mret2",
            Self::Lei => "lei",
            Self::NetPlus => "netplus",
            Self::NetR => "net-r",
            Self::NetPlusER => "netplus-e-r",
        }
    }

    /// `Some(extended)` for techniques that expand recordings after
    /// formation.
    pub fn expansion(self) -> Option<bool> {
        match self {
            Self::NetPlus => Some(false),
            Self::NetPlusER => Some(true),
            _ => None,
        }
    }
}

impl FromStr for Technique {
    type Err = RftError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| RftError::UnknownTechnique(s.to_string()))
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RftConfig {
    pub technique: Technique,
    pub threshold: u32,
    pub max_region_size: usize,
    pub netplus_depth: u32,
    pub lei_buffer_capacity: usize,
}

impl RftConfig {
    pub fn new(technique: Technique) -> Self {
        Self {
            technique,
            threshold: DEFAULT_THRESHOLD,
            max_region_size: DEFAULT_MAX_REGION_SIZE,
            netplus_depth: DEFAULT_NETPLUS_DEPTH,
            lei_buffer_capacity: DEFAULT_LEI_BUFFER,
        }
    }

    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_max_region_size(mut self, m: usize) -> Self {
        self.max_region_size = m;
        self
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.netplus_depth = depth;
        self
    }

    pub fn with_lei_buffer(mut self, capacity: usize) -> Self {
        self.lei_buffer_capacity = capacity;
        self
    }

    pub fn validate(&self) -> Result<(), RftError> {
        let bad = |what: &str| Err(RftError::InvalidConfig(format!("{what} must be >= 1")));
        if self.threshold == 0 {
            return bad("threshold");
        }
        if self.max_region_size == 0 {
            return bad("max region size");
        }
        if self.netplus_depth == 0 {
            return bad("netplus depth");
        }
        if self.lei_buffer_capacity == 0 {
            return bad("lei buffer capacity");
        }
        Ok(())
    }
}

/// A finished linear recording; the first item is the region entry.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RegionRecording {
    items: Vec<TraceItem>,
}

impl RegionRecording {
    pub fn from_items(items: Vec<TraceItem>) -> Self {
        Self { items }
    }

    pub fn items(&self) -> &[TraceItem] {
        &self.items
    }

    pub fn into_items(self) -> Vec<TraceItem> {
        self.items
    }

    pub fn entry(&self) -> Option<u64> {
        self.items.first().map(|i| i.address)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn addresses(&self) -> impl Iterator<Item = u64> + '_ {
        self.items.iter().map(|i| i.address)
    }

    pub fn contains(&self, address: u64) -> bool {
        self.items.iter().any(|i| i.address == address)
    }
}

/// Policy deciding what to profile, when to record and when to stop.
pub trait RegionManager: Send {
    /// Called once per consumed instruction, after the automaton transition
    /// for `current`. `last` is `None` for the first instruction of a trace.
    fn handle_new_instruction(
        &mut self,
        last: Option<&TraceItem>,
        current: &TraceItem,
        transition: TransitionKind,
    ) -> Option<RegionRecording>;

    fn is_recording(&self) -> bool;

    /// End of trace: return whatever the stop criterion would produce if it
    /// fired now.
    fn finish(&mut self) -> Option<RegionRecording> {
        None
    }
}

impl<M: RegionManager + ?Sized> RegionManager for Box<M> {
    fn handle_new_instruction(
        &mut self,
        last: Option<&TraceItem>,
        current: &TraceItem,
        transition: TransitionKind,
    ) -> Option<RegionRecording> {
        (**self).handle_new_instruction(last, current, transition)
    }

    fn is_recording(&self) -> bool {
        (**self).is_recording()
    }

    fn finish(&mut self) -> Option<RegionRecording> {
        (**self).finish()
    }
}

/// Non-sequential flow to the same or a lower address.
#[inline]
pub fn was_backward_branch(last: &TraceItem, current: &TraceItem) -> bool {
    current.address != last.fall_through() && current.address <= last.address
}

/// Builds the manager for `config.technique`.
pub fn make_rft(config: &RftConfig) -> Result<Box<dyn RegionManager>, RftError> {
    config.validate()?;
    let threshold = config.threshold;
    let max = config.max_region_size;
    Ok(match config.technique {
        Technique::Net | Technique::NetPlus => Box::new(NetManager::new(threshold, max, StopRule::BackwardBranch)),
        Technique::NetR | Technique::NetPlusER => Box::new(NetManager::new(threshold, max, StopRule::RepeatedAddress)),
        Technique::Mret2 => Box::new(Mret2Manager::new(threshold, max)),
        Technique::Lei => Box::new(LeiManager::new(threshold, max, config.lei_buffer_capacity)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_branch_detection() {
        let last = TraceItem::new(0x108, 4);
        assert!(was_backward_branch(&last, &TraceItem::new(0x100, 4)));
        assert!(!was_backward_branch(&TraceItem::new(0x100, 4), &TraceItem::new(0x104, 4)));
        assert!(!was_backward_branch(&TraceItem::new(0x100, 4), &TraceItem::new(0x200, 4)));
        // a jump to itself closes a one-instruction loop
        assert!(was_backward_branch(&last, &last));
    }

    #[test]
    fn technique_tags_round_trip() {
        for t in Technique::ALL {
            assert_eq!(t.tag().parse::<Technique>().unwrap(), t);
        }
        assert_eq!("nope".parse::<Technique>(), Err(RftError::UnknownTechnique("nope".into())));
    }

    #[test]
    fn defaults_and_validation() {
        let c = RftConfig::new(Technique::Net);
        assert_eq!((c.threshold, c.max_region_size, c.netplus_depth), (1024, 1024, 10));
        assert_eq!(c.lei_buffer_capacity, 8192);
        assert!(make_rft(&c).is_ok());
        assert!(make_rft(&RftConfig::new(Technique::NetPlus).with_depth(10)).is_ok());
        assert!(RftConfig::new(Technique::Lei).with_threshold(0).validate().is_err());
        assert!(RftConfig::new(Technique::Lei).with_depth(0).validate().is_err());
        assert!(RftConfig::new(Technique::Lei).with_lei_buffer(0).validate().is_err());
        assert!(make_rft(&RftConfig::new(Technique::Net).with_max_region_size(0)).is_err());
    }
}
