//! Threshold sweeps over a labeled calibration set.

use serde::{Deserialize, Serialize};

use super::cost::CostDefaults;
use crate::dataset::{dataset_digest, CalibrationRecord};
use crate::error::{Error, Result};
use crate::policy::{RouterPolicy, ScoreType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffPoint {
    #[serde(with = "crate::threshold")]
    pub threshold: f64,
    pub accuracy: f64,
    pub expected_cost: f64,
    pub student_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffCurve {
    pub policy: RouterPolicy,
    pub dataset_digest: String,
    pub points: Vec<TradeoffPoint>,
}

impl TradeoffCurve {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        for (i, p) in self.points.iter().enumerate() {
            if p.threshold.is_nan() {
                return Err(Error::invalid(format!("point {i}: threshold is NaN")));
            }
            if !(0.0..=1.0).contains(&p.accuracy) || !(0.0..=1.0).contains(&p.student_fraction) {
                return Err(Error::invalid(format!(
                    "point {i}: accuracy/fraction outside [0, 1]"
                )));
            }
            if !(p.expected_cost.is_finite() && p.expected_cost >= 0.0) {
                return Err(Error::invalid(format!("point {i}: invalid expected cost")));
            }
        }
        if self
            .points
            .windows(2)
            .any(|w| w[0].threshold >= w[1].threshold)
        {
            return Err(Error::invalid(
                "curve thresholds must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// The point whose threshold is closest to `threshold`.
    pub fn nearest(&self, threshold: f64) -> Option<&TradeoffPoint> {
        self.points.iter().min_by(|a, b| {
            let da = (a.threshold - threshold).abs();
            let db = (b.threshold - threshold).abs();
            da.total_cmp(&db)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Every distinct observed score plus the `-inf`/`+inf` sentinels.
    Auto,
    Explicit(Vec<f64>),
}

/// One record reduced to what routing and evaluation need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScoredRecord {
    pub score: f64,
    /// False when the specialized router escalates on the extra-class argmax.
    pub eligible: bool,
    pub student_correct: bool,
    pub teacher_correct: bool,
    pub student_cost: f64,
    pub teacher_cost: f64,
}

impl ScoredRecord {
    pub fn correct(&self, to_student: bool) -> bool {
        if to_student {
            self.student_correct
        } else {
            self.teacher_correct
        }
    }
}

pub(crate) fn score_records(
    records: &[CalibrationRecord],
    policy: &RouterPolicy,
    costs: CostDefaults,
) -> Result<Vec<ScoredRecord>> {
    if records.is_empty() {
        return Err(Error::calibration("dataset is empty"));
    }
    policy.validate()?;
    records
        .iter()
        .map(|r| {
            let label = r
                .label
                .ok_or_else(|| Error::calibration(format!("record '{}' has no label", r.id)))?;
            let teacher = r.teacher_prediction().ok_or_else(|| {
                Error::calibration(format!("record '{}' has no teacher prediction", r.id))
            })?;
            let score = policy.score(&r.student_logits)?;
            let eligible = match policy.specialization {
                Some(spec) => r.student_logits.argmax() < spec.cbar,
                None => true,
            };
            Ok(ScoredRecord {
                score,
                eligible,
                student_correct: r.student_prediction() == label,
                teacher_correct: teacher == label,
                student_cost: r.student_cost.unwrap_or(costs.student),
                teacher_cost: r.teacher_cost.unwrap_or(costs.teacher),
            })
        })
        .collect()
}

/// Accuracy, cost and Student fraction of each threshold in `grid` under the
/// joint rule: Student answer when routed to the Student, Teacher answer
/// otherwise. The policy's own threshold is ignored.
pub fn sweep_thresholds(
    records: &[CalibrationRecord],
    policy_family: &RouterPolicy,
    grid: &Grid,
    costs: CostDefaults,
) -> Result<TradeoffCurve> {
    if policy_family.score_type == ScoreType::Random {
        return Err(Error::config(
            "random routing has no threshold to sweep; use the random baseline",
        ));
    }
    let scored = score_records(records, policy_family, costs)?;
    let thresholds = match grid {
        Grid::Auto => auto_grid(&scored),
        Grid::Explicit(values) => {
            if values.iter().any(|v| v.is_nan()) {
                return Err(Error::invalid("grid contains NaN"));
            }
            let mut values = values.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            if values.is_empty() {
                return Err(Error::invalid("grid is empty"));
            }
            values
        }
    };
    let points = evaluate_grid(&scored, &thresholds);
    Ok(TradeoffCurve {
        policy: policy_family.with_threshold(0.0),
        dataset_digest: dataset_digest(records),
        points,
    })
}

fn auto_grid(scored: &[ScoredRecord]) -> Vec<f64> {
    let mut grid: Vec<f64> = scored
        .iter()
        .filter(|r| r.eligible)
        .map(|r| r.score)
        .collect();
    grid.push(f64::NEG_INFINITY);
    grid.push(f64::INFINITY);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Sorted-prefix evaluation: O((N + G) log N).
fn evaluate_grid(scored: &[ScoredRecord], thresholds: &[f64]) -> Vec<TradeoffPoint> {
    let n = scored.len() as f64;
    let mut eligible: Vec<&ScoredRecord> = scored.iter().filter(|r| r.eligible).collect();
    eligible.sort_by(|a, b| a.score.total_cmp(&b.score));

    // suffix[i] = totals over eligible[i..]
    let m = eligible.len();
    let mut suffix_student_correct = vec![0u64; m + 1];
    let mut suffix_teacher_correct = vec![0u64; m + 1];
    let mut suffix_teacher_cost = vec![0.0f64; m + 1];
    for i in (0..m).rev() {
        let r = eligible[i];
        suffix_student_correct[i] = suffix_student_correct[i + 1] + r.student_correct as u64;
        suffix_teacher_correct[i] = suffix_teacher_correct[i + 1] + r.teacher_correct as u64;
        suffix_teacher_cost[i] = suffix_teacher_cost[i + 1] + r.teacher_cost;
    }
    let all_teacher_correct: u64 = scored.iter().map(|r| r.teacher_correct as u64).sum();
    let all_student_cost: f64 = scored.iter().map(|r| r.student_cost).sum();
    let all_teacher_cost: f64 = scored.iter().map(|r| r.teacher_cost).sum();

    thresholds
        .iter()
        .map(|&t| {
            let start = eligible.partition_point(|r| r.score < t);
            let n_student = (m - start) as u64;
            let correct =
                suffix_student_correct[start] + all_teacher_correct - suffix_teacher_correct[start];
            let cost = all_student_cost + (all_teacher_cost - suffix_teacher_cost[start]);
            TradeoffPoint {
                threshold: t,
                accuracy: correct as f64 / n,
                expected_cost: cost / n,
                student_fraction: n_student as f64 / n,
            }
        })
        .collect()
}
