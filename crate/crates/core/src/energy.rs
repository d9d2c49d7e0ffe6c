//! Free-energy and confidence scores over model outputs.
//!
//! Every exp-sum goes through a max-shifted log-sum-exp so logits of any
//! finite magnitude are safe. Routing scores use the "higher means Student"
//! convention: `-F` for energy, the max softmax probability for softmax, and
//! negated entropy for entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::LogitVector;

/// A free-energy value `F`. The routing score is its negation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyScore(pub f64);

impl EnergyScore {
    pub fn value(self) -> f64 {
        self.0
    }

    /// `-F`, the quantity compared against the threshold.
    pub fn routing_score(self) -> f64 {
        -self.0
    }
}

/// `log Σ exp(x_i)`, shifted by the maximum. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `F = -log Σ_i exp(s_i)`.
pub fn free_energy_classification(logits: &LogitVector) -> EnergyScore {
    EnergyScore(-log_sum_exp(logits.as_slice()))
}

/// Free energy over the first `cbar` classes only; the trailing "other" class
/// is excluded from the sum.
pub fn free_energy_specialized(logits: &LogitVector, cbar: usize) -> Result<EnergyScore> {
    if cbar == 0 {
        return Err(Error::invalid("cbar must be at least 1"));
    }
    if logits.len() != cbar + 1 {
        return Err(Error::invalid(format!(
            "specialized logits must have cbar + 1 = {} entries, got {}",
            cbar + 1,
            logits.len()
        )));
    }
    Ok(EnergyScore(-log_sum_exp(&logits.as_slice()[..cbar])))
}

/// Max softmax probability, in `(0, 1]`.
pub fn softmax_confidence(logits: &LogitVector) -> f64 {
    let values = logits.as_slice();
    let max = logits.max();
    let denom: f64 = values.iter().map(|v| (v - max).exp()).sum();
    1.0 / denom
}

/// Softmax probabilities.
pub fn softmax(logits: &LogitVector) -> Vec<f64> {
    let values = logits.as_slice();
    let max = logits.max();
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Shannon entropy (nats) of the softmax distribution. Zero-probability
/// terms contribute nothing.
pub fn entropy_score(logits: &LogitVector) -> f64 {
    // H = log Z - Σ p_i s_i with shifted logits, avoiding log(p_i) underflow.
    let values = logits.as_slice();
    let max = logits.max();
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    let log_denom = denom.ln();
    let h: f64 = exps
        .iter()
        .zip(values)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, v)| {
            let p = e / denom;
            -p * ((v - max) - log_denom)
        })
        .sum();
    h.max(0.0)
}

/// One importance sample of a regression score function: `S(x, y_k)` and the
/// proposal density `q(y_k)` it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionScoreSample {
    #[serde(rename = "s")]
    pub score: f64,
    #[serde(rename = "q")]
    pub proposal_density: f64,
}

impl RegressionScoreSample {
    pub fn new(score: f64, proposal_density: f64) -> Result<Self> {
        let sample = Self {
            score,
            proposal_density,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.score.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite regression score {}",
                self.score
            )));
        }
        if !(self.proposal_density.is_finite() && self.proposal_density > 0.0) {
            return Err(Error::invalid(format!(
                "proposal density must be finite and positive, got {}",
                self.proposal_density
            )));
        }
        Ok(())
    }
}

/// Importance-sampling estimate of the regression free energy:
/// `-log((1/M) Σ_k exp(s_k) / q_k)`, evaluated in log space.
pub fn free_energy_regression(samples: &[RegressionScoreSample]) -> Result<EnergyScore> {
    if samples.is_empty() {
        return Err(Error::invalid("no regression score samples"));
    }
    let mut terms = Vec::with_capacity(samples.len());
    for sample in samples {
        sample.validate()?;
        terms.push(sample.score - sample.proposal_density.ln());
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok(EnergyScore(-(max + (sum / terms.len() as f64).ln())))
}

/// One detected box: class logits plus importance samples for each of the
/// four box coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBox {
    pub class_logits: LogitVector,
    pub reg_samples: [Vec<RegressionScoreSample>; 4],
}

/// The Student's output for one image: `B ≥ 1` boxes with equal-length class
/// logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection", into = "RawDetection")]
pub struct DetectionSample {
    boxes: Vec<DetectionBox>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    boxes: Vec<DetectionBox>,
}

impl TryFrom<RawDetection> for DetectionSample {
    type Error = Error;

    fn try_from(raw: RawDetection) -> Result<Self> {
        DetectionSample::new(raw.boxes)
    }
}

impl From<DetectionSample> for RawDetection {
    fn from(sample: DetectionSample) -> Self {
        RawDetection {
            boxes: sample.boxes,
        }
    }
}

impl DetectionSample {
    pub fn new(boxes: Vec<DetectionBox>) -> Result<Self> {
        let Some(first) = boxes.first() else {
            return Err(Error::invalid("detection sample needs at least one box"));
        };
        let classes = first.class_logits.len();
        for (b, det) in boxes.iter().enumerate() {
            if det.class_logits.len() != classes {
                return Err(Error::invalid(format!(
                    "box {b} has {} class logits, expected {classes}",
                    det.class_logits.len()
                )));
            }
            for (j, coord) in det.reg_samples.iter().enumerate() {
                if coord.is_empty() {
                    return Err(Error::invalid(format!(
                        "box {b} coordinate {j} has no regression samples"
                    )));
                }
                for sample in coord {
                    sample.validate()?;
                }
            }
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[DetectionBox] {
        &self.boxes
    }

    pub fn num_classes(&self) -> usize {
        self.boxes[0].class_logits.len()
    }
}

/// Class term: mean classification free energy over boxes.
pub fn detection_class_energy(sample: &DetectionSample) -> EnergyScore {
    let values = sample
        .boxes()
        .iter()
        .map(|b| free_energy_classification(&b.class_logits).0)
        .collect();
    EnergyScore(multiset_mean(values))
}

/// Regression term: mean over boxes and the four coordinates.
pub fn detection_regression_energy(sample: &DetectionSample) -> EnergyScore {
    let values = sample
        .boxes()
        .iter()
        .flat_map(|b| &b.reg_samples)
        .map(|coord| {
            free_energy_regression(coord)
                .expect("detection sample validated on construction")
                .0
        })
        .collect();
    EnergyScore(multiset_mean(values))
}

/// Mean as `Σ_v (count_v / n) · v` over distinct values in sorted order.
/// Depends only on the value proportions, so reordering the boxes or
/// replicating every box `k` times gives a bit-identical result.
fn multiset_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut mean = 0.0;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let run = values[i..]
            .iter()
            .take_while(|&&x| x.total_cmp(&v).is_eq())
            .count();
        mean += (run as f64 / n) * v;
        i += run;
    }
    mean
}

/// `F^o = F^c + F^r`.
pub fn detection_total_energy(sample: &DetectionSample) -> EnergyScore {
    EnergyScore(detection_class_energy(sample).0 + detection_regression_energy(sample).0)
}
