//! Split mathematics shared by the sequential tree and the vertical tree.

use serde::{Deserialize, Serialize};

use crate::instance::{ClassCounts, NUM_CLASSES};

/// Confidence radius `sqrt(R² ln(1/δ) / 2n)`.
pub fn hoeffding_bound(range: f64, delta: f64, n: u64) -> f64 {
    debug_assert!(n >= 1 && delta > 0.0 && delta <= 1.0 && range > 0.0);
    (range * range * (1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Shannon entropy in bits.
pub fn entropy(counts: &ClassCounts) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of a binary presence split, in bits. `present[c]`
/// counts class-`c` observations where the attribute had positive weight;
/// the absent branch is the remainder of `totals`.
pub fn info_gain(totals: &ClassCounts, present: &ClassCounts) -> f64 {
    let n: u64 = totals.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut absent = [0u64; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        absent[c] = totals[c] - present[c];
    }
    let n_present: u64 = present.iter().sum();
    let n_absent = n - n_present;
    let n = n as f64;
    entropy(totals) - (n_present as f64 / n) * entropy(present) - (n_absent as f64 / n) * entropy(&absent)
}

/// Range of the information gain for the classes seen at a leaf.
pub fn gain_range(totals: &ClassCounts) -> f64 {
    let observed = totals.iter().filter(|&&c| c > 0).count().max(2);
    (observed as f64).log2()
}

pub fn is_pure(totals: &ClassCounts) -> bool {
    totals.iter().filter(|&&c| c > 0).count() <= 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub attribute: u32,
    pub gain: f64,
}

impl SplitCandidate {
    /// Higher gain wins; equal gains go to the smaller attribute id.
    fn beats(&self, other: &SplitCandidate) -> bool {
        self.gain > other.gain || (self.gain == other.gain && self.attribute < other.attribute)
    }
}

/// Best and second-best candidates under a total order, so merging partial
/// results from disjoint attribute sets equals one pass over the union.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TopTwo {
    pub best: Option<SplitCandidate>,
    pub second: Option<SplitCandidate>,
}

impl TopTwo {
    pub fn offer(&mut self, c: SplitCandidate) {
        match self.best {
            None => self.best = Some(c),
            Some(b) if c.beats(&b) => {
                self.second = self.best;
                self.best = Some(c);
            }
            Some(_) => match self.second {
                Some(s) if !c.beats(&s) => {}
                _ => self.second = Some(c),
            },
        }
    }

    pub fn merge(&mut self, other: &TopTwo) {
        for c in [other.best, other.second].into_iter().flatten() {
            self.offer(c);
        }
    }
}

/// Split test on a leaf holding `n` observations: returns the attribute to
/// split on, if any.
///
/// A missing second candidate counts as the null split with gain 0, and a
/// split is never made on an attribute without positive gain.
pub fn split_decision(
    top: &TopTwo,
    totals: &ClassCounts,
    delta: f64,
    tie_threshold: f64,
    n: u64,
) -> Option<u32> {
    let best = top.best?;
    if !(best.gain > 0.0) {
        return None;
    }
    let second = top.second.map_or(0.0, |s| s.gain.max(0.0));
    let eps = hoeffding_bound(gain_range(totals), delta, n);
    (best.gain - second > eps || eps < tie_threshold).then_some(best.attribute)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: entropy from explicit probabilities.
    fn h2(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
        }
    }

    #[test]
    fn hoeffding_spot_value() {
        // sqrt(ln(1e7) / 800)
        let eps = hoeffding_bound(1.0, 1e-7, 400);
        assert!((eps - 0.141_94).abs() < 1e-5, "{eps}");
    }

    #[test]
    fn hoeffding_quartering() {
        for n in [1u64, 7, 400, 12345] {
            let a = hoeffding_bound(1.0, 1e-7, n);
            let b = hoeffding_bound(1.0, 1e-7, 4 * n);
            assert!((b - a / 2.0).abs() < 1e-15);
        }
        assert_eq!(hoeffding_bound(1.0, 1.0, 10), 0.0);
    }

    #[test]
    fn pure_leaf_has_no_gain() {
        assert_eq!(info_gain(&[0, 0, 50], &[0, 0, 20]), 0.0);
    }

    #[test]
    fn perfect_separation_is_one_bit() {
        // negative never has the attribute, positive always does
        assert_eq!(info_gain(&[25, 0, 25], &[0, 0, 25]), 1.0);
    }

    #[test]
    fn mixed_leaf_gain_matches_oracle() {
        // positive: 30 with A, 10 without; negative: 10 with A, 30 without
        let g = info_gain(&[40, 0, 40], &[10, 0, 30]);
        let oracle = h2(0.5) - 0.5 * h2(30.0 / 40.0) - 0.5 * h2(10.0 / 40.0);
        assert!((g - oracle).abs() < 1e-12);
        assert!((g - 0.188_721_875_540_867).abs() < 1e-12);
    }

    #[test]
    fn top_two_tie_break_and_merge() {
        let cands = [
            SplitCandidate { attribute: 9, gain: 0.3 },
            SplitCandidate { attribute: 4, gain: 0.3 },
            SplitCandidate { attribute: 1, gain: 0.1 },
            SplitCandidate { attribute: 2, gain: 0.5 },
        ];
        let mut all = TopTwo::default();
        cands.iter().for_each(|&c| all.offer(c));
        assert_eq!(all.best.unwrap().attribute, 2);
        assert_eq!(all.second.unwrap().attribute, 4);

        let mut a = TopTwo::default();
        let mut b = TopTwo::default();
        a.offer(cands[0]);
        a.offer(cands[2]);
        b.offer(cands[1]);
        b.offer(cands[3]);
        let mut merged = TopTwo::default();
        merged.merge(&b);
        merged.merge(&a);
        assert_eq!(merged, all);
    }

    #[test]
    fn decision_rules() {
        let totals = [100, 0, 100];
        let clear = TopTwo {
            best: Some(SplitCandidate { attribute: 1, gain: 0.9 }),
            second: Some(SplitCandidate { attribute: 2, gain: 0.01 }),
        };
        assert_eq!(split_decision(&clear, &totals, 1e-7, 0.05, 200), Some(1));
        let close = TopTwo {
            best: Some(SplitCandidate { attribute: 1, gain: 0.30 }),
            second: Some(SplitCandidate { attribute: 2, gain: 0.29 }),
        };
        assert_eq!(split_decision(&close, &totals, 1e-7, 0.05, 200), None);
        // Tie threshold kicks in once the bound is small enough.
        assert_eq!(split_decision(&close, &totals, 1e-7, 0.05, 100_000), Some(1));
        let zero = TopTwo {
            best: Some(SplitCandidate { attribute: 1, gain: 0.0 }),
            second: None,
        };
        assert_eq!(split_decision(&zero, &totals, 1e-7, 0.05, 1_000_000), None);
        assert_eq!(split_decision(&TopTwo::default(), &totals, 1e-7, 0.05, 10), None);
    }
}
