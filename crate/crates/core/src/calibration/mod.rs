//! Offline analysis over labeled logit datasets.

pub mod artifact;
mod baseline;
mod cost;
mod histogram;
mod mcnemar;
mod paired;
mod separation;
mod sweep;
mod target;

pub use baseline::{
    at_fraction, compare_policies, random_baseline, AlignedRow, PolicyComparison, RandomPoint,
};
pub use cost::{expected_cost, CostDefaults};
pub use histogram::{export_histogram, FixedHistogram, Histogram};
pub use mcnemar::{mcnemar, McNemarResult};
pub use paired::{joint_correctness, paired_outcomes};
pub use separation::{auroc, crossing_point_threshold, CrossingStatus, SeparationDiagnostic};
pub use sweep::{sweep_thresholds, Grid, TradeoffCurve, TradeoffPoint};
pub use target::{threshold_for_target, OperatingTarget};

use crate::dataset::CalibrationRecord;
use crate::error::{Error, Result};
use crate::policy::RouterPolicy;

/// Splits routing scores by Student top-1 correctness: `(fit, unfit)`.
pub fn scores_by_correctness(
    records: &[CalibrationRecord],
    policy: &RouterPolicy,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut fit = Vec::new();
    let mut unfit = Vec::new();
    for r in records {
        let label = r
            .label
            .ok_or_else(|| Error::calibration(format!("record '{}' has no label", r.id)))?;
        let score = policy.score(&r.student_logits)?;
        if r.student_prediction() == label {
            fit.push(score);
        } else {
            unfit.push(score);
        }
    }
    Ok((fit, unfit))
}
