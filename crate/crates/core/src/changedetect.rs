//! ADWIN adaptive windowing over a real-valued stream in `[0, 1]`.
//!
//! The window is stored as an exponential histogram: row `r` holds buckets
//! summarising `2^r` consecutive items, with at most [`MAX_BUCKETS_PER_ROW`]
//! buckets per row. After every insertion each bucket boundary is tested as
//! a split point between an older sub-window `W0` and a newer `W1`; while
//! some split shows a mean difference of at least
//!
//! ```text
//! eps_cut = sqrt( ln(4 * width / delta) / (2 m) ),   m = 1 / (1/|W0| + 1/|W1|)
//! ```
//!
//! the oldest bucket is discarded.

use std::collections::VecDeque;

use thiserror::Error;

pub const MAX_BUCKETS_PER_ROW: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChangeDetectError {
    #[error("input {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("window is empty")]
    EmptyWindow,
    #[error("delta {0} outside (0, 1)")]
    InvalidDelta(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Bucket {
    count: u64,
    sum: f64,
    /// Sum of squared deviations from the bucket mean.
    m2: f64,
}

impl Bucket {
    fn merge(older: Bucket, newer: Bucket) -> Bucket {
        let n = older.count + newer.count;
        let d = newer.sum / newer.count as f64 - older.sum / older.count as f64;
        Bucket {
            count: n,
            sum: older.sum + newer.sum,
            m2: older.m2 + newer.m2 + d * d * (older.count * newer.count) as f64 / n as f64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveWindow {
    delta: f64,
    /// `rows[r]` holds buckets of `2^r` items, newest at the front.
    rows: Vec<VecDeque<Bucket>>,
    width: u64,
    total: f64,
    m2: f64,
    detections: u64,
}

impl AdaptiveWindow {
    pub fn new(delta: f64) -> Result<Self, ChangeDetectError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ChangeDetectError::InvalidDelta(delta));
        }
        Ok(Self {
            delta,
            rows: Vec::new(),
            width: 0,
            total: 0.0,
            m2: 0.0,
            detections: 0,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn mean(&self) -> Result<f64, ChangeDetectError> {
        if self.width == 0 {
            return Err(ChangeDetectError::EmptyWindow);
        }
        Ok(self.total / self.width as f64)
    }

    pub fn variance(&self) -> Result<f64, ChangeDetectError> {
        if self.width == 0 {
            return Err(ChangeDetectError::EmptyWindow);
        }
        Ok(self.m2 / self.width as f64)
    }

    /// Number of updates that triggered at least one cut.
    pub fn detections(&self) -> u64 {
        self.detections
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    pub fn row_lengths(&self) -> Vec<usize> {
        self.rows.iter().map(VecDeque::len).collect()
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.width = 0;
        self.total = 0.0;
        self.m2 = 0.0;
    }

    /// Appends `x` and shrinks the window while any split shows a change.
    /// Returns whether anything was dropped.
    pub fn update(&mut self, x: f64) -> Result<bool, ChangeDetectError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ChangeDetectError::OutOfRange(x));
        }
        self.insert(x);
        let mut changed = false;
        while self.cut_exists() {
            self.drop_oldest();
            changed = true;
        }
        if changed {
            self.detections += 1;
        }
        Ok(changed)
    }

    fn insert(&mut self, x: f64) {
        if self.width > 0 {
            let mean = self.total / self.width as f64;
            let n = self.width as f64;
            self.m2 += (x - mean) * (x - mean) * n / (n + 1.0);
        }
        self.width += 1;
        self.total += x;
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_front(Bucket { count: 1, sum: x, m2: 0.0 });

        let mut r = 0;
        while r < self.rows.len() && self.rows[r].len() > MAX_BUCKETS_PER_ROW {
            let older = self.rows[r].pop_back().expect("row overflow");
            let newer = self.rows[r].pop_back().expect("row overflow");
            if r + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[r + 1].push_front(Bucket::merge(older, newer));
            r += 1;
        }
    }

    /// Buckets from oldest to newest.
    fn buckets_oldest_first(&self) -> impl Iterator<Item = &Bucket> {
        self.rows.iter().rev().flat_map(|row| row.iter().rev())
    }

    fn cut_exists(&self) -> bool {
        if self.width < 2 {
            return false;
        }
        let log_term = (4.0 * self.width as f64 / self.delta).ln();
        let total_buckets = self.bucket_count();
        let (mut n0, mut s0) = (0u64, 0.0f64);
        // The newest bucket always stays in W1.
        for b in self.buckets_oldest_first().take(total_buckets - 1) {
            n0 += b.count;
            s0 += b.sum;
            let n1 = self.width - n0;
            let s1 = self.total - s0;
            let diff = s0 / n0 as f64 - s1 / n1 as f64;
            let m = 1.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
            let eps_sq = log_term / (2.0 * m);
            if diff * diff >= eps_sq {
                return true;
            }
        }
        false
    }

    fn drop_oldest(&mut self) {
        let Some(r) = self.rows.iter().rposition(|row| !row.is_empty()) else {
            return;
        };
        let b = self.rows[r].pop_back().expect("non-empty row");
        let rest = self.width - b.count;
        if rest == 0 {
            self.reset();
            return;
        }
        let mean_b = b.sum / b.count as f64;
        let mean_rest = (self.total - b.sum) / rest as f64;
        let d = mean_b - mean_rest;
        self.m2 = (self.m2 - b.m2 - d * d * (b.count * rest) as f64 / self.width as f64).max(0.0);
        self.width = rest;
        self.total -= b.sum;
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
    }
}
