use crate::error::{Error, Result};

/// Min/max statistics of one page or chunk. NaN values are excluded from
/// the range and counted in `null_count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageStats {
    pub min: f64,
    pub max: f64,
    pub value_count: u64,
    pub null_count: u64,
}

impl Default for PageStats {
    fn default() -> Self {
        PageStats { min: f64::INFINITY, max: f64::NEG_INFINITY, value_count: 0, null_count: 0 }
    }
}

impl PageStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut s = PageStats::default();
        for v in values {
            s.add(v);
        }
        s
    }

    pub fn add(&mut self, v: f64) {
        self.value_count += 1;
        if v.is_nan() {
            self.null_count += 1;
        } else {
            if v < self.min {
                self.min = v;
            }
            if v > self.max {
                self.max = v;
            }
        }
    }

    pub fn merge(&mut self, other: &PageStats) {
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.value_count += other.value_count;
        self.null_count += other.null_count;
    }

    /// True when some non-NaN value exists.
    pub fn has_range(&self) -> bool {
        self.min <= self.max
    }

    /// Conservative overlap test against the closed interval `[lo, hi]`.
    pub fn may_overlap(&self, lo: f64, hi: f64) -> bool {
        self.null_count > 0 || (self.has_range() && self.min <= hi && lo <= self.max)
    }

    /// Checks decoded values against these statistics.
    pub fn verify(&self, values: &[f64]) -> Result<()> {
        let actual = PageStats::from_values(values.iter().copied());
        let same = |a: f64, b: f64| a == b || (a.is_infinite() && b.is_infinite() && a.signum() == b.signum());
        if actual.value_count != self.value_count
            || actual.null_count != self.null_count
            || !same(actual.min, self.min)
            || !same(actual.max, self.max)
        {
            return Err(Error::corruption(format!(
                "page statistics mismatch: stored [{}, {}] n={} nulls={}, decoded [{}, {}] n={} nulls={}",
                self.min, self.max, self.value_count, self.null_count, actual.min, actual.max, actual.value_count,
                actual.null_count
            )));
        }
        Ok(())
    }
}
