use rustc_hash::FxHashMap;

/// Per-address execution counters that saturate at the hotness threshold.
#[derive(Clone, Debug)]
pub struct HotnessTable {
    counters: FxHashMap<u64, u32>,
    threshold: u32,
}

impl HotnessTable {
    pub fn new(threshold: u32) -> Self {
        assert!(threshold >= 1, "hotness threshold must be >= 1");
        Self { counters: FxHashMap::default(), threshold }
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    /// Increments the counter for `address`; true once it has reached the
    /// threshold.
    #[inline]
    pub fn bump(&mut self, address: u64) -> bool {
        let c = self.counters.entry(address).or_insert(0);
        *c = (*c + 1).min(self.threshold);
        *c >= self.threshold
    }

    pub fn reset(&mut self, address: u64) {
        self.counters.insert(address, 0);
    }

    pub fn get(&self, address: u64) -> u32 {
        self.counters.get(&address).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturates_and_resets() {
        let mut h = HotnessTable::new(2);
        assert!(!h.bump(7));
        assert!(h.bump(7));
        assert!(h.bump(7));
        assert_eq!(h.get(7), 2);
        h.reset(7);
        assert_eq!(h.get(7), 0);
        assert!(!h.bump(7));
    }

    #[test]
    fn threshold_one_is_immediately_hot() {
        let mut h = HotnessTable::new(1);
        assert!(h.bump(1));
    }
}
