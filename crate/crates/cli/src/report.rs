//! Simulation report: per-policy comparison, separation diagnostic and a
//! recommended operating threshold.

use std::fmt::Write as _;

use cascadeflow_core::calibration::{
    compare_policies, crossing_point_threshold, scores_by_correctness, sweep_thresholds,
    threshold_for_target, CostDefaults, CrossingStatus, Grid, McNemarResult, OperatingTarget,
    PolicyComparison, SeparationDiagnostic, TradeoffCurve, TradeoffPoint,
};
use cascadeflow_core::dataset::{dataset_digest, CalibrationRecord};
use cascadeflow_core::{threshold, Result, RouterPolicy, ScoreType};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub score_type: ScoreType,
    #[serde(with = "threshold")]
    pub threshold: f64,
    /// The threshold's exact operating point on the calibration set.
    pub operating_point: TradeoffPoint,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub dataset_digest: String,
    pub records: usize,
    pub seed: u64,
    pub runs: usize,
    pub fractions: Vec<f64>,
    pub comparisons: Vec<PolicyComparison>,
    /// Score separation of the first thresholded policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationDiagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<Recommendation>,
}

pub struct ReportOptions<'a> {
    pub families: &'a [RouterPolicy],
    pub fractions: &'a [f64],
    pub runs: usize,
    pub seed: u64,
    pub bins: usize,
    pub costs: CostDefaults,
    pub target: Option<OperatingTarget>,
}

pub fn build_report(
    records: &[CalibrationRecord],
    opts: &ReportOptions<'_>,
) -> Result<SimulationReport> {
    let comparisons = compare_policies(
        records,
        opts.families,
        opts.fractions,
        opts.runs,
        opts.seed,
        opts.costs,
    )?;
    let primary = opts
        .families
        .iter()
        .zip(&comparisons)
        .find(|(f, _)| f.score_type != ScoreType::Random);

    let mut separation = None;
    let mut recommendation = None;
    if let Some((family, comparison)) = primary {
        let (fit, unfit) = scores_by_correctness(records, family)?;
        let diag = if fit.is_empty() || unfit.is_empty() {
            None
        } else {
            Some(crossing_point_threshold(&fit, &unfit, opts.bins)?)
        };
        let curve = comparison
            .curve
            .as_ref()
            .expect("thresholded policies carry a curve");
        recommendation = recommend(records, family, curve, diag.as_ref(), opts)?;
        separation = diag;
    }

    Ok(SimulationReport {
        dataset_digest: dataset_digest(records),
        records: records.len(),
        seed: opts.seed,
        runs: opts.runs,
        fractions: opts.fractions.to_vec(),
        comparisons,
        separation,
        recommendation,
    })
}

fn recommend(
    records: &[CalibrationRecord],
    family: &RouterPolicy,
    curve: &TradeoffCurve,
    diag: Option<&SeparationDiagnostic>,
    opts: &ReportOptions<'_>,
) -> Result<Option<Recommendation>> {
    let (t, rationale) = match opts.target {
        Some(target) => match threshold_for_target(curve, target)? {
            Some(point) => (point.threshold, target_rationale(target)),
            None => return Ok(None),
        },
        None => match diag {
            Some(d) => (d.crossing_threshold, crossing_rationale(d)),
            None => return Ok(None),
        },
    };
    let operating_point = operating_point(records, family, t, opts.costs)?;
    Ok(Some(Recommendation {
        score_type: family.score_type,
        threshold: t,
        operating_point,
        rationale,
    }))
}

pub fn operating_point(
    records: &[CalibrationRecord],
    family: &RouterPolicy,
    t: f64,
    costs: CostDefaults,
) -> Result<TradeoffPoint> {
    let curve = sweep_thresholds(records, family, &Grid::Explicit(vec![t]), costs)?;
    Ok(curve.points[0])
}

fn target_rationale(target: OperatingTarget) -> String {
    match target {
        OperatingTarget::MinAccuracy(a) => {
            format!("lowest-cost threshold whose calibration accuracy is at least {a}")
        }
        OperatingTarget::MaxCost(c) => {
            format!("most accurate threshold whose expected cost is at most {c}")
        }
    }
}

fn crossing_rationale(d: &SeparationDiagnostic) -> String {
    match d.status {
        CrossingStatus::Crossing => format!(
            "score densities of Student-correct and Student-wrong samples cross here (AUROC {:.4})",
            d.auroc
        ),
        CrossingStatus::NoCrossing => format!(
            "densities never cross; threshold placed midway between the class means (AUROC {:.4})",
            d.auroc
        ),
        CrossingStatus::Indistinguishable => {
            "score densities are indistinguishable; threshold is the pooled median and routing is no better than random"
                .to_string()
        }
    }
}

fn fmt_threshold(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.4}")
    } else if t > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Evenly spaced rows of `curve`, always including both ends.
pub fn curve_table(curve: &TradeoffCurve, rows: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>12}  {:>9}  {:>14}  {:>9}",
        "threshold", "accuracy", "expected_cost", "student"
    );
    let n = curve.points.len();
    let rows = rows.clamp(2, n.max(2));
    let mut last = None;
    for i in 0..rows {
        let idx = if n <= 1 {
            0
        } else {
            (i * (n - 1) + (rows - 1) / 2) / (rows - 1)
        };
        if last == Some(idx) || idx >= n {
            continue;
        }
        last = Some(idx);
        out.push_str(&point_row(&curve.points[idx]));
    }
    out
}

pub fn point_row(p: &TradeoffPoint) -> String {
    format!(
        "{:>12}  {:>9.4}  {:>14.6e}  {:>9.4}\n",
        fmt_threshold(p.threshold),
        p.accuracy,
        p.expected_cost,
        p.student_fraction
    )
}

pub fn report_table(report: &SimulationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dataset {} ({} records)",
        &report.dataset_digest[..12],
        report.records
    );
    let _ = writeln!(
        out,
        "{:<8}  {:>8}  {:>9}  {:>8}  {:>14}",
        "policy", "student", "accuracy", "std", "expected_cost"
    );
    for fraction in &report.fractions {
        for c in &report.comparisons {
            if let Some(row) = c.aligned.iter().find(|r| r.student_fraction == *fraction) {
                let std = if c.score_type == ScoreType::Random {
                    format!("{:.4}", row.accuracy_std)
                } else {
                    "-".into()
                };
                let _ = writeln!(
                    out,
                    "{:<8}  {:>8.2}  {:>9.4}  {:>8}  {:>14.6e}",
                    c.score_type.as_str(),
                    row.student_fraction,
                    row.accuracy,
                    std,
                    row.expected_cost
                );
            }
        }
    }
    if let Some(d) = &report.separation {
        let _ = writeln!(
            out,
            "separation: mean gap {:.4}, AUROC {:.4}, crossing {} ({:?})",
            d.mean_gap,
            d.auroc,
            fmt_threshold(d.crossing_threshold),
            d.status
        );
    }
    match &report.recommendation {
        Some(r) => {
            let p = &r.operating_point;
            let _ = writeln!(
                out,
                "recommended {} threshold {}: accuracy {:.4}, expected cost {:.6e}, student fraction {:.4}",
                r.score_type,
                fmt_threshold(r.threshold),
                p.accuracy,
                p.expected_cost,
                p.student_fraction
            );
            let _ = writeln!(out, "  {}", r.rationale);
        }
        None => {
            let _ = writeln!(out, "no threshold recommended");
        }
    }
    out
}

pub fn mcnemar_text(result: &McNemarResult, alpha: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "b (A right, B wrong) = {}", result.b);
    let _ = writeln!(out, "c (A wrong, B right) = {}", result.c);
    let p = if result.p_value >= 1e-4 {
        format!("{:.6}", result.p_value)
    } else {
        format!("{:.3e}", result.p_value)
    };
    let _ = writeln!(out, "p-value = {p}");
    let _ = writeln!(out, "odds ratio b/c = {}", fmt_ratio(result.odds_ratio));
    let verdict = if result.significant(alpha) {
        format!(
            "p ≤ {alpha}: reject the null hypothesis; the difference is significant at α = {alpha}"
        )
    } else {
        format!("p > {alpha}: the null hypothesis stands; no significant difference at α = {alpha}")
    };
    let _ = writeln!(out, "{verdict}");
    out
}

fn fmt_ratio(r: f64) -> String {
    if r.is_nan() {
        "undefined".into()
    } else if r.is_infinite() {
        "inf".into()
    } else {
        format!("{r:.4}")
    }
}
