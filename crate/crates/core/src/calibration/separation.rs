//! Separation between the scores of samples the Student handles well and
//! those it does not.

use serde::{Deserialize, Serialize};

use super::histogram::{bin_index, equal_width_edges, min_max};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingStatus {
    /// The fit density overtakes the unfit density above the unfit mode.
    Crossing,
    /// One density dominates everywhere; threshold is the midpoint of means.
    NoCrossing,
    /// The binned densities are identical; threshold is the pooled median.
    Indistinguishable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationDiagnostic {
    pub mean_gap: f64,
    pub auroc: f64,
    pub crossing_threshold: f64,
    pub status: CrossingStatus,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Probability that a random fit score exceeds a random unfit score, ties
/// counted half (Mann-Whitney U with midranks).
pub fn auroc(fit: &[f64], unfit: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = fit
        .iter()
        .map(|&s| (s, true))
        .chain(unfit.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_fit = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let fits = all[i..=j].iter().filter(|(_, f)| *f).count();
        rank_sum_fit += mid_rank * fits as f64;
        i = j + 1;
    }
    let nf = fit.len() as f64;
    let nu = unfit.len() as f64;
    (rank_sum_fit - nf * (nf + 1.0) / 2.0) / (nf * nu)
}

/// Locates the threshold where the fit-score histogram overtakes the
/// unfit-score histogram, scanning upward from the unfit mode.
///
/// The returned threshold sits halfway between the centre of the last bin the
/// unfit density dominates and the centre of the first bin the fit density
/// dominates; for adjacent bins that is their shared edge.
pub fn crossing_point_threshold(
    scores_fit: &[f64],
    scores_unfit: &[f64],
    bins: usize,
) -> Result<SeparationDiagnostic> {
    if scores_fit.is_empty() || scores_unfit.is_empty() {
        return Err(Error::invalid("both score lists must be non-empty"));
    }
    if bins < 2 {
        return Err(Error::invalid("bins must be at least 2"));
    }
    if let Some(v) = scores_fit
        .iter()
        .chain(scores_unfit)
        .find(|v| !v.is_finite())
    {
        return Err(Error::invalid(format!("non-finite score {v}")));
    }
    let mean_gap = mean(scores_fit) - mean(scores_unfit);
    let auroc = auroc(scores_fit, scores_unfit);

    let (lo, hi) = min_max(scores_fit.iter().chain(scores_unfit).copied());
    let edges = equal_width_edges(lo, hi, bins);
    let density = |scores: &[f64]| {
        let mut d = vec![0.0; bins];
        for &s in scores {
            d[bin_index(&edges, s)] += 1.0;
        }
        let n = scores.len() as f64;
        d.iter_mut().for_each(|v| *v /= n);
        d
    };
    let fit = density(scores_fit);
    let unfit = density(scores_unfit);
    let center = |i: usize| 0.5 * (edges[i] + edges[i + 1]);

    let mode = (0..bins).fold(0, |best, i| if unfit[i] > unfit[best] { i } else { best });
    if let Some(first_fit) = (mode..bins).find(|&i| fit[i] > unfit[i]) {
        let crossing = match (mode..first_fit).rev().find(|&j| unfit[j] > fit[j]) {
            Some(last_unfit) => 0.5 * (center(last_unfit) + center(first_fit)),
            None => center(first_fit),
        };
        return Ok(SeparationDiagnostic {
            mean_gap,
            auroc,
            crossing_threshold: crossing,
            status: CrossingStatus::Crossing,
        });
    }

    let (crossing_threshold, status) = if fit == unfit {
        let mut pooled: Vec<f64> = scores_fit.iter().chain(scores_unfit).copied().collect();
        (median(&mut pooled), CrossingStatus::Indistinguishable)
    } else {
        (
            0.5 * (mean(scores_fit) + mean(scores_unfit)),
            CrossingStatus::NoCrossing,
        )
    };
    Ok(SeparationDiagnostic {
        mean_gap,
        auroc,
        crossing_threshold,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn disjoint_supports_cross_in_the_gap() {
        let unfit: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let fit: Vec<f64> = (0..=10).map(|i| 2.0 + i as f64 / 10.0).collect();
        for bins in [2, 4, 7, 10, 30, 64] {
            let d = crossing_point_threshold(&fit, &unfit, bins).unwrap();
            assert_eq!(d.status, CrossingStatus::Crossing);
            assert!(
                d.crossing_threshold > 1.0 && d.crossing_threshold < 2.0,
                "bins={bins} -> {}",
                d.crossing_threshold
            );
            assert_eq!(d.auroc, 1.0);
            assert!((d.mean_gap - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_lists_fall_back_to_median() {
        let scores = [1.0, 4.0, 2.0, 8.0, 3.0];
        let d = crossing_point_threshold(&scores, &scores, 8).unwrap();
        assert_eq!(d.status, CrossingStatus::Indistinguishable);
        assert_eq!(d.auroc, 0.5);
        assert_eq!(d.crossing_threshold, 3.0);
        assert_eq!(d.mean_gap, 0.0);
    }

    #[test]
    fn dominated_everywhere_uses_mean_midpoint() {
        // fit sits below unfit: the fit density never overtakes above the unfit mode
        let fit = [0.0, 0.1, 0.2];
        let unfit = [5.0, 5.1, 5.2];
        let d = crossing_point_threshold(&fit, &unfit, 10).unwrap();
        assert_eq!(d.status, CrossingStatus::NoCrossing);
        assert!((d.crossing_threshold - 2.6).abs() < 1e-12);
        assert_eq!(d.auroc, 0.0);
    }

    #[test]
    fn gaussian_modes_cross_at_midpoint() {
        // analytic: equal-variance unit normals at 0 and 4 intersect at 2;
        // AUROC = Phi(4 / sqrt 2) = 0.99766
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let unfit: Vec<f64> = Normal::new(0.0, 1.0)
            .unwrap()
            .sample_iter(&mut rng)
            .take(20_000)
            .collect();
        let fit: Vec<f64> = Normal::new(4.0, 1.0)
            .unwrap()
            .sample_iter(&mut rng)
            .take(20_000)
            .collect();
        let d = crossing_point_threshold(&fit, &unfit, 60).unwrap();
        assert_eq!(d.status, CrossingStatus::Crossing);
        assert!(
            (d.crossing_threshold - 2.0).abs() <= 0.2,
            "{}",
            d.crossing_threshold
        );
        assert!((d.auroc - 0.997_661).abs() < 2e-3, "{}", d.auroc);
    }

    #[test]
    fn auroc_ties_count_half() {
        assert_eq!(auroc(&[1.0], &[1.0]), 0.5);
        assert_eq!(auroc(&[1.0, 2.0], &[1.0]), 0.75);
    }

    #[test]
    fn errors() {
        assert!(crossing_point_threshold(&[], &[1.0], 4).is_err());
        assert!(crossing_point_threshold(&[1.0], &[1.0], 1).is_err());
        assert!(crossing_point_threshold(&[f64::NAN], &[1.0], 4).is_err());
    }
}
