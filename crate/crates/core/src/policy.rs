//! Router policies and the threshold comparator.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::energy::{
    detection_total_energy, entropy_score, free_energy_classification, free_energy_specialized,
    softmax_confidence, DetectionSample,
};
use crate::error::{Error, Result};
use crate::logits::LogitVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreType {
    Energy,
    Softmax,
    Entropy,
    Random,
}

impl ScoreType {
    pub const ALL: [ScoreType; 4] = [
        ScoreType::Energy,
        ScoreType::Softmax,
        ScoreType::Entropy,
        ScoreType::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreType::Energy => "energy",
            ScoreType::Softmax => "softmax",
            ScoreType::Entropy => "entropy",
            ScoreType::Random => "random",
        }
    }
}

impl fmt::Display for ScoreType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(ScoreType::Energy),
            "softmax" => Ok(ScoreType::Softmax),
            "entropy" => Ok(ScoreType::Entropy),
            "random" => Ok(ScoreType::Random),
            other => Err(Error::config(format!("unknown score type '{other}'"))),
        }
    }
}

/// Student trained on the `cbar` most popular classes plus one trailing
/// "other" class at index `cbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Specialization {
    pub cbar: usize,
    pub extra_index: usize,
}

impl Specialization {
    pub fn new(cbar: usize) -> Self {
        Self {
            cbar,
            extra_index: cbar,
        }
    }
}

/// The runtime knob: which score to compute and where to cut it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterPolicy {
    pub score_type: ScoreType,
    #[serde(with = "crate::threshold")]
    pub threshold: f64,
    #[serde(default = "default_random_rate")]
    pub random_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specialization: Option<Specialization>,
}

fn default_random_rate() -> f64 {
    0.5
}

impl RouterPolicy {
    pub fn threshold(score_type: ScoreType, threshold: f64) -> Self {
        Self {
            score_type,
            threshold,
            random_rate: default_random_rate(),
            specialization: None,
        }
    }

    pub fn energy(threshold: f64) -> Self {
        Self::threshold(ScoreType::Energy, threshold)
    }

    pub fn random(rate: f64) -> Self {
        Self {
            score_type: ScoreType::Random,
            threshold: 0.0,
            random_rate: rate,
            specialization: None,
        }
    }

    pub fn specialized(cbar: usize, threshold: f64) -> Self {
        Self {
            specialization: Some(Specialization::new(cbar)),
            ..Self::energy(threshold)
        }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self { threshold, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() {
            return Err(Error::config("threshold is NaN"));
        }
        if !(0.0..=1.0).contains(&self.random_rate) {
            return Err(Error::config(format!(
                "random_rate must lie in [0, 1], got {}",
                self.random_rate
            )));
        }
        if let Some(spec) = self.specialization {
            if spec.cbar < 1 {
                return Err(Error::config("specialization cbar must be at least 1"));
            }
            if spec.extra_index != spec.cbar {
                return Err(Error::config(format!(
                    "specialization extra_index must equal cbar ({}), got {}",
                    spec.cbar, spec.extra_index
                )));
            }
            if self.score_type != ScoreType::Energy {
                return Err(Error::config(
                    "specialization is only defined for the energy score",
                ));
            }
        }
        Ok(())
    }

    /// The routing score for a classification output, on the "higher means
    /// Student" scale. Random policies report the energy score.
    pub fn score(&self, logits: &LogitVector) -> Result<f64> {
        match (self.score_type, self.specialization) {
            (ScoreType::Energy, Some(spec)) => {
                Ok(free_energy_specialized(logits, spec.cbar)?.routing_score())
            }
            (ScoreType::Energy | ScoreType::Random, _) => {
                Ok(free_energy_classification(logits).routing_score())
            }
            (ScoreType::Softmax, _) => Ok(softmax_confidence(logits)),
            (ScoreType::Entropy, _) => Ok(-entropy_score(logits)),
        }
    }

    /// Full routing decision for a classification output.
    pub fn decide(&self, logits: &LogitVector, rng_draw: Option<f64>) -> Result<RoutingDecision> {
        if self.specialization.is_some() {
            route_specialized(logits, self)
        } else {
            route(self.score(logits)?, self, rng_draw)
        }
    }

    /// Routing decision for a detection output. Only energy and random
    /// policies are defined for detection.
    pub fn decide_detection(
        &self,
        sample: &DetectionSample,
        rng_draw: Option<f64>,
    ) -> Result<RoutingDecision> {
        match self.score_type {
            ScoreType::Energy | ScoreType::Random if self.specialization.is_none() => {
                let score = detection_total_energy(sample).routing_score();
                route(score, self, rng_draw)
            }
            _ => Err(Error::config(format!(
                "score type '{}'{} is not defined for detection",
                self.score_type,
                if self.specialization.is_some() {
                    " with specialization"
                } else {
                    ""
                }
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Student,
    Teacher,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Student => "student",
            Target::Teacher => "teacher",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub target: Target,
    pub score: f64,
    #[serde(with = "crate::threshold")]
    pub threshold_used: f64,
}

/// Threshold comparator. Scores at or above the threshold go to the Student.
/// Random policies ignore the score and send the sample to the Student iff
/// `rng_draw < random_rate`.
pub fn route(score: f64, policy: &RouterPolicy, rng_draw: Option<f64>) -> Result<RoutingDecision> {
    let target = match policy.score_type {
        ScoreType::Random => {
            let draw =
                rng_draw.ok_or_else(|| Error::config("random policy requires a uniform draw"))?;
            if draw < policy.random_rate {
                Target::Student
            } else {
                Target::Teacher
            }
        }
        _ => {
            if score >= policy.threshold {
                Target::Student
            } else {
                Target::Teacher
            }
        }
    };
    Ok(RoutingDecision {
        target,
        score,
        threshold_used: policy.threshold,
    })
}

/// Specialized router: Student iff `-F̄ ≥ t` and the argmax over all
/// `cbar + 1` logits is one of the popular classes.
pub fn route_specialized(logits: &LogitVector, policy: &RouterPolicy) -> Result<RoutingDecision> {
    let spec = policy
        .specialization
        .ok_or_else(|| Error::config("policy has no specialization"))?;
    let score = free_energy_specialized(logits, spec.cbar)?.routing_score();
    let popular = logits.argmax() < spec.cbar;
    let target = if popular && score >= policy.threshold {
        Target::Student
    } else {
        Target::Teacher
    };
    Ok(RoutingDecision {
        target,
        score,
        threshold_used: policy.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn threshold_comparator() {
        let p = RouterPolicy::energy(3.0);
        assert_eq!(route(5.0, &p, None).unwrap().target, Target::Student);
        assert_eq!(route(3.0, &p, None).unwrap().target, Target::Student);
        assert_eq!(route(2.9999, &p, None).unwrap().target, Target::Teacher);
        let d = route(2.0, &p, None).unwrap();
        assert_eq!((d.score, d.threshold_used), (2.0, 3.0));
    }

    #[test]
    fn random_needs_draw() {
        let p = RouterPolicy::random(0.3);
        assert!(matches!(route(0.0, &p, None), Err(Error::Config(_))));
        assert_eq!(
            route(100.0, &p, Some(0.29)).unwrap().target,
            Target::Student
        );
        assert_eq!(route(100.0, &p, Some(0.3)).unwrap().target, Target::Teacher);
        assert_eq!(
            route(0.0, &RouterPolicy::random(0.0), Some(0.0))
                .unwrap()
                .target,
            Target::Teacher
        );
    }

    #[test]
    fn sentinel_thresholds() {
        let all_student = RouterPolicy::energy(f64::NEG_INFINITY);
        let all_teacher = RouterPolicy::energy(f64::INFINITY);
        for s in [-1e300, 0.0, 1e300] {
            assert_eq!(
                route(s, &all_student, None).unwrap().target,
                Target::Student
            );
            assert_eq!(
                route(s, &all_teacher, None).unwrap().target,
                Target::Teacher
            );
        }
    }

    #[test]
    fn specialized_examples() {
        let extra = lv(&[0.0, 0.0, 10.0]);
        for t in [-1e9, -5.0, 0.0, std::f64::consts::LN_2] {
            let d = route_specialized(&extra, &RouterPolicy::specialized(2, t)).unwrap();
            assert_eq!(d.target, Target::Teacher);
        }
        let popular = lv(&[5.0, 0.0, -3.0]);
        let d = route_specialized(&popular, &RouterPolicy::specialized(2, 3.0)).unwrap();
        assert_eq!(d.target, Target::Student);
        assert!((d.score - 5.006_715_348_489_118).abs() < 1e-12);
        let d = route_specialized(&popular, &RouterPolicy::specialized(2, 100.0)).unwrap();
        assert_eq!(d.target, Target::Teacher);
        assert!(route_specialized(&lv(&[1.0]), &RouterPolicy::specialized(2, 0.0)).is_err());
    }

    #[test]
    fn specialized_tie_goes_to_lowest_index() {
        // extra class ties with class 0: lowest index wins, so not escalated on argmax
        let tie = lv(&[4.0, 1.0, 4.0]);
        let d = route_specialized(&tie, &RouterPolicy::specialized(2, 0.0)).unwrap();
        assert_eq!(d.target, Target::Student);
    }

    #[test]
    fn policy_validation() {
        assert!(RouterPolicy::random(1.5).validate().is_err());
        assert!(RouterPolicy::random(-0.1).validate().is_err());
        assert!(RouterPolicy::random(1.0).validate().is_ok());
        assert!(RouterPolicy::energy(f64::NAN).validate().is_err());
        let mut p = RouterPolicy::specialized(3, 0.0);
        assert!(p.validate().is_ok());
        p.specialization = Some(Specialization {
            cbar: 3,
            extra_index: 1,
        });
        assert!(p.validate().is_err());
        let p = RouterPolicy {
            score_type: ScoreType::Softmax,
            ..RouterPolicy::specialized(3, 0.5)
        };
        assert!(p.validate().is_err());
        assert!(RouterPolicy::specialized(0, 0.0).validate().is_err());
    }

    #[test]
    fn scores_follow_higher_is_student() {
        let confident = lv(&[10.0, 0.0, 0.0]);
        let unsure = lv(&[0.0, 0.0, 0.0]);
        for st in [ScoreType::Energy, ScoreType::Softmax, ScoreType::Entropy] {
            let p = RouterPolicy::threshold(st, 0.0);
            assert!(
                p.score(&confident).unwrap() > p.score(&unsure).unwrap(),
                "{st}"
            );
        }
    }

    #[test]
    fn policy_serde() {
        let p: RouterPolicy =
            serde_json::from_str(r#"{"score_type":"energy","threshold":"-inf"}"#).unwrap();
        assert_eq!(p.threshold, f64::NEG_INFINITY);
        assert_eq!(p.random_rate, 0.5);
        let text = serde_json::to_string(&RouterPolicy::specialized(2, 1.5)).unwrap();
        assert_eq!(
            text,
            r#"{"score_type":"energy","threshold":1.5,"random_rate":0.5,"specialization":{"cbar":2,"extra_index":2}}"#
        );
        assert!(
            serde_json::from_str::<RouterPolicy>(r#"{"score_type":"bogus","threshold":1}"#)
                .is_err()
        );
    }
}
