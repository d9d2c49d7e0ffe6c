//! Seeded synthetic calibration sets for demos and tests.
//!
//! Each sample draws a margin `m ~ U(0, max_margin)`, picks a class `k`, and
//! sets Student logits to `N(0, 1)` noise with `m` added to class `k`. The
//! Student is correct with probability `sigmoid(slope·(m - midpoint))`, so
//! correctness rises with the logit margin (and with `-F`). The Teacher is
//! correct with a fixed probability independent of the margin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{CalibrationRecord, CostUnit};
use crate::logits::LogitVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub classes: usize,
    pub max_margin: f64,
    pub midpoint: f64,
    pub slope: f64,
    pub teacher_accuracy: f64,
    pub student_cost: f64,
    pub teacher_cost: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            classes: 10,
            max_margin: 8.0,
            midpoint: 3.0,
            slope: 1.5,
            teacher_accuracy: 0.92,
            student_cost: 0.54e8,
            teacher_cost: 2.92e8,
            seed: 7,
        }
    }
}

fn other_class(rng: &mut impl Rng, classes: usize, not: usize) -> usize {
    let pick = rng.random_range(0..classes - 1);
    if pick >= not {
        pick + 1
    } else {
        pick
    }
}

pub fn margin_dataset(config: &SyntheticConfig) -> Vec<CalibrationRecord> {
    assert!(config.classes >= 2, "need at least two classes");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    (0..config.samples)
        .map(|i| {
            let margin = rng.random::<f64>() * config.max_margin;
            let class = rng.random_range(0..config.classes);
            let mut logits: Vec<f64> = (0..config.classes)
                .map(|_| noise.sample(&mut rng))
                .collect();
            logits[class] += margin;
            let logits = LogitVector::new(logits).expect("finite synthetic logits");
            let predicted = logits.argmax();

            let p_correct = 1.0 / (1.0 + (-config.slope * (margin - config.midpoint)).exp());
            let label = if rng.random::<f64>() < p_correct {
                predicted
            } else {
                other_class(&mut rng, config.classes, predicted)
            };
            let teacher = if rng.random::<f64>() < config.teacher_accuracy {
                label
            } else {
                other_class(&mut rng, config.classes, label)
            };

            let mut record = CalibrationRecord::new(format!("syn-{i:06}"), logits);
            record.label = Some(label);
            record.teacher_pred = Some(teacher);
            record.student_cost = Some(config.student_cost);
            record.teacher_cost = Some(config.teacher_cost);
            record.cost_unit = Some(CostUnit::Flops);
            record
        })
        .collect()
}
