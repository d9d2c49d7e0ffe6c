use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-width histogram: `edges.len() == counts.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

fn check_finite(scores: &[f64]) -> Result<()> {
    match scores.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::invalid(format!("non-finite score {v}"))),
        None => Ok(()),
    }
}

pub(crate) fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Equal-width bins over `[lo, hi]`, the last bin closed on the right.
/// A degenerate range is widened to `[lo - 0.5, lo + 0.5]`.
pub(crate) fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

pub(crate) fn bin_index(edges: &[f64], value: f64) -> usize {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let width = (edges[bins] - lo) / bins as f64;
    let i = ((value - lo) / width).floor();
    if i < 0.0 {
        0
    } else {
        (i as usize).min(bins - 1)
    }
}

pub fn export_histogram(scores: &[f64], bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot histogram an empty score list"));
    }
    if bins == 0 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    check_finite(scores)?;
    let (lo, hi) = min_max(scores.iter().copied());
    let edges = equal_width_edges(lo, hi, bins);
    let mut counts = vec![0u64; bins];
    for &s in scores {
        counts[bin_index(&edges, s)] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Histogram with fixed, pre-configured edges so snapshots from different
/// processes or time windows can be merged bin by bin. Values outside the
/// edges land in `underflow`/`overflow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl FixedHistogram {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("histogram needs at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "histogram edges must be finite and strictly increasing",
            ));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn record(&mut self, value: f64) {
        let last = *self.edges.last().unwrap();
        if value.is_nan() || value < self.edges[0] {
            self.underflow += 1;
        } else if value > last {
            self.overflow += 1;
        } else {
            // bins are [e_i, e_{i+1}); the last one is closed
            let i = self.edges.partition_point(|e| *e <= value);
            let last_bin = self.counts.len() - 1;
            self.counts[(i - 1).min(last_bin)] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn merge(&mut self, other: &FixedHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::invalid(
                "cannot merge histograms with different edges",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.underflow = 0;
        self.overflow = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_value() {
        for bins in [1, 2, 5, 10] {
            let h = export_histogram(&[3.25], bins).unwrap();
            assert_eq!(h.counts.iter().sum::<u64>(), 1);
            let i = h.counts.iter().position(|c| *c == 1).unwrap();
            assert!(h.edges[i] <= 3.25 && 3.25 <= h.edges[i + 1]);
        }
    }

    #[test]
    fn four_values_two_bins() {
        let h = export_histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.edges, vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn uniform_draws_concentrate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = export_histogram(&draws, 10).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 10_000);
        // binomial(1e4, 0.1): sigma = 30
        for c in &h.counts {
            assert!((*c as f64 - 1000.0).abs() <= 5.0 * 30.0, "{c}");
        }
    }

    #[test]
    fn errors() {
        assert!(export_histogram(&[], 3).is_err());
        assert!(export_histogram(&[1.0], 0).is_err());
        assert!(export_histogram(&[f64::NAN], 3).is_err());
    }

    #[test]
    fn fixed_histogram_bins_and_merge() {
        let mut h = FixedHistogram::new(vec![0.0, 1.0, 2.0]).unwrap();
        for v in [-1.0, 0.0, 0.5, 1.0, 2.0, 2.5] {
            h.record(v);
        }
        assert_eq!(
            (h.underflow, h.counts.clone(), h.overflow),
            (1, vec![2, 2], 1)
        );
        let mut g = h.clone();
        g.merge(&h).unwrap();
        assert_eq!(g.total(), 12);
        g.reset();
        assert_eq!(g.total(), 0);
        assert!(FixedHistogram::new(vec![1.0, 1.0]).is_err());
        assert!(g
            .merge(&FixedHistogram::new(vec![0.0, 3.0]).unwrap())
            .is_err());
    }
}
