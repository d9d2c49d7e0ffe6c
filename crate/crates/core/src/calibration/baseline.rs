//! Random-routing baseline and fraction-aligned comparison of score policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cost::CostDefaults;
use super::sweep::{score_records, sweep_thresholds, Grid, TradeoffCurve};
use crate::dataset::CalibrationRecord;
use crate::error::{Error, Result};
use crate::policy::{RouterPolicy, ScoreType};

/// Random routing at one Student rate, summarised over seeded runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomPoint {
    pub rate: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub mean_cost: f64,
    pub mean_student_fraction: f64,
}

/// Runs the random router at each rate `runs` times. Run `r` uses a ChaCha8
/// stream seeded with `seed + r`, shared across rates.
pub fn random_baseline(
    records: &[CalibrationRecord],
    rates: &[f64],
    runs: usize,
    seed: u64,
    costs: CostDefaults,
) -> Result<Vec<RandomPoint>> {
    if runs == 0 {
        return Err(Error::invalid("random baseline needs at least one run"));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::config(format!("random rate {r} outside [0, 1]")));
    }
    let scored = score_records(records, &RouterPolicy::random(0.5), costs)?;
    let n = scored.len() as f64;
    let draws: Vec<Vec<f64>> = (0..runs as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            (0..scored.len()).map(|_| rng.random::<f64>()).collect()
        })
        .collect();

    Ok(rates
        .iter()
        .map(|&rate| {
            let mut accs = Vec::with_capacity(runs);
            let mut cost_sum = 0.0;
            let mut frac_sum = 0.0;
            for run in &draws {
                let mut correct = 0u64;
                let mut students = 0u64;
                let mut cost = 0.0;
                for (s, &draw) in scored.iter().zip(run) {
                    let to_student = draw < rate;
                    correct += s.correct(to_student) as u64;
                    students += to_student as u64;
                    cost += s.student_cost + if to_student { 0.0 } else { s.teacher_cost };
                }
                accs.push(correct as f64 / n);
                cost_sum += cost / n;
                frac_sum += students as f64 / n;
            }
            let mean = accs.iter().sum::<f64>() / runs as f64;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / runs as f64;
            RandomPoint {
                rate,
                runs,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
                max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_cost: cost_sum / runs as f64,
                mean_student_fraction: frac_sum / runs as f64,
            }
        })
        .collect())
}

/// Accuracy and cost at Student fraction `fraction`, linearly interpolated
/// between the two curve points that bracket it. `None` outside the curve's
/// fraction range.
pub fn at_fraction(curve: &TradeoffCurve, fraction: f64) -> Option<(f64, f64)> {
    let mut pts: Vec<_> = curve.points.iter().collect();
    pts.sort_by(|a, b| a.student_fraction.total_cmp(&b.student_fraction));
    let lo = pts.first()?.student_fraction;
    let hi = pts.last()?.student_fraction;
    if fraction < lo || fraction > hi {
        return None;
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if fraction >= a.student_fraction && fraction <= b.student_fraction {
            let span = b.student_fraction - a.student_fraction;
            if span == 0.0 {
                return Some((a.accuracy, a.expected_cost));
            }
            let t = (fraction - a.student_fraction) / span;
            return Some((
                a.accuracy + t * (b.accuracy - a.accuracy),
                a.expected_cost + t * (b.expected_cost - a.expected_cost),
            ));
        }
    }
    let only = pts[0];
    Some((only.accuracy, only.expected_cost))
}

/// One policy's numbers at one aligned Student fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub student_fraction: f64,
    pub accuracy: f64,
    pub expected_cost: f64,
    /// Spread across seeded runs; zero for deterministic scores.
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub score_type: ScoreType,
    /// Absent for the random baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<TradeoffCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<Vec<RandomPoint>>,
    pub aligned: Vec<AlignedRow>,
}

/// Sweeps every policy family and aligns them on the requested Student
/// fractions. Random families are evaluated as a seeded baseline with
/// `rate = fraction`.
pub fn compare_policies(
    records: &[CalibrationRecord],
    families: &[RouterPolicy],
    fractions: &[f64],
    runs: usize,
    seed: u64,
    costs: CostDefaults,
) -> Result<Vec<PolicyComparison>> {
    families
        .iter()
        .map(|family| {
            if family.score_type == ScoreType::Random {
                let points = random_baseline(records, fractions, runs, seed, costs)?;
                let aligned = points
                    .iter()
                    .map(|p| AlignedRow {
                        student_fraction: p.rate,
                        accuracy: p.mean_accuracy,
                        expected_cost: p.mean_cost,
                        accuracy_std: p.std_accuracy,
                    })
                    .collect();
                Ok(PolicyComparison {
                    score_type: ScoreType::Random,
                    curve: None,
                    random: Some(points),
                    aligned,
                })
            } else {
                let curve = sweep_thresholds(records, family, &Grid::Auto, costs)?;
                let aligned = fractions
                    .iter()
                    .filter_map(|&f| {
                        at_fraction(&curve, f).map(|(accuracy, expected_cost)| AlignedRow {
                            student_fraction: f,
                            accuracy,
                            expected_cost,
                            accuracy_std: 0.0,
                        })
                    })
                    .collect();
                Ok(PolicyComparison {
                    score_type: family.score_type,
                    curve: Some(curve),
                    random: None,
                    aligned,
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{margin_dataset, SyntheticConfig};

    #[test]
    fn random_baseline_is_deterministic_and_tracks_rate() {
        let records = margin_dataset(&SyntheticConfig {
            samples: 2_000,
            ..Default::default()
        });
        let rates = [0.0, 0.3, 1.0];
        let a = random_baseline(&records, &rates, 5, 42, CostDefaults::default()).unwrap();
        let b = random_baseline(&records, &rates, 5, 42, CostDefaults::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].mean_student_fraction, 0.0);
        assert_eq!(a[2].mean_student_fraction, 1.0);
        assert!((a[1].mean_student_fraction - 0.3).abs() < 0.03);
        assert_eq!(a[0].std_accuracy, 0.0);
    }

    #[test]
    fn interpolation_hits_curve_points() {
        let records = margin_dataset(&SyntheticConfig {
            samples: 50,
            ..Default::default()
        });
        let curve = sweep_thresholds(
            &records,
            &RouterPolicy::energy(0.0),
            &Grid::Auto,
            CostDefaults::default(),
        )
        .unwrap();
        let full = at_fraction(&curve, 1.0).unwrap();
        assert_eq!(full.0, curve.points[0].accuracy);
        let none = at_fraction(&curve, 0.0).unwrap();
        assert_eq!(none.0, curve.points.last().unwrap().accuracy);
        assert!(at_fraction(&curve, 1.1).is_none());
    }

    #[test]
    fn single_policy_comparison_reduces_to_sweep() {
        let records = margin_dataset(&SyntheticConfig {
            samples: 100,
            ..Default::default()
        });
        let energy = RouterPolicy::energy(0.0);
        let cmp =
            compare_policies(&records, &[energy], &[0.5], 3, 1, CostDefaults::default()).unwrap();
        let sweep =
            sweep_thresholds(&records, &energy, &Grid::Auto, CostDefaults::default()).unwrap();
        assert_eq!(cmp.len(), 1);
        assert_eq!(cmp[0].curve.as_ref().unwrap(), &sweep);
    }
}
