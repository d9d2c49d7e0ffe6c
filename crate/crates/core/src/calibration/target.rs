use serde::{Deserialize, Serialize};

use super::sweep::{TradeoffCurve, TradeoffPoint};
use crate::error::{Error, Result};

/// What the operator wants from the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingTarget {
    MinAccuracy(f64),
    MaxCost(f64),
}

/// Picks a curve point for `target`, or `None` when no point complies.
///
/// `MinAccuracy` returns the smallest compliant threshold (the cheapest point
/// meeting the bar); `MaxCost` returns the largest compliant threshold (the
/// most Teacher-heavy point within budget).
pub fn threshold_for_target(
    curve: &TradeoffCurve,
    target: OperatingTarget,
) -> Result<Option<TradeoffPoint>> {
    if curve.points.is_empty() {
        return Err(Error::invalid("curve has no points"));
    }
    let found = match target {
        OperatingTarget::MinAccuracy(acc) => {
            curve.points.iter().find(|p| p.accuracy >= acc).copied()
        }
        OperatingTarget::MaxCost(cost) => curve
            .points
            .iter()
            .rev()
            .find(|p| p.expected_cost <= cost)
            .copied(),
    };
    Ok(found)
}
