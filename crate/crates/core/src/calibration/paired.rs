use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cost::CostDefaults;
use super::sweep::score_records;
use crate::dataset::CalibrationRecord;
use crate::error::Result;
use crate::policy::{route, route_specialized, RouterPolicy, ScoreType, Target};

/// Per-record joint-rule correctness of `policy`. Random policies draw from a
/// ChaCha8 stream seeded with `seed`, one draw per record in order.
pub fn joint_correctness(
    records: &[CalibrationRecord],
    policy: &RouterPolicy,
    seed: u64,
) -> Result<Vec<bool>> {
    let scored = score_records(records, policy, CostDefaults::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .zip(&scored)
        .map(|(record, s)| {
            let decision = if policy.specialization.is_some() {
                route_specialized(&record.student_logits, policy)?
            } else {
                let draw = (policy.score_type == ScoreType::Random).then(|| rng.random::<f64>());
                route(s.score, policy, draw)?
            };
            Ok(s.correct(decision.target == Target::Student))
        })
        .collect()
}

/// Disagreement counts `(b, c)`: `b` = A correct and B wrong, `c` = A wrong
/// and B correct. Both policies see the same random stream.
pub fn paired_outcomes(
    records: &[CalibrationRecord],
    policy_a: &RouterPolicy,
    policy_b: &RouterPolicy,
    seed: u64,
) -> Result<(u64, u64)> {
    let a = joint_correctness(records, policy_a, seed)?;
    let b = joint_correctness(records, policy_b, seed)?;
    Ok(a.iter()
        .zip(&b)
        .fold((0, 0), |(b_count, c_count), (&x, &y)| {
            (b_count + (x && !y) as u64, c_count + (!x && y) as u64)
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::logits::LogitVector;

    fn records() -> Vec<CalibrationRecord> {
        // (logit gap, student correct, teacher correct)
        let spec = [
            (0.1, false, true),
            (2.0, true, false),
            (0.5, false, false),
            (4.0, true, true),
            (0.2, true, true),
            (3.0, false, true),
        ];
        spec.iter()
            .enumerate()
            .map(|(i, &(gap, s_ok, t_ok))| {
                let mut r = CalibrationRecord::new(
                    format!("r{i}"),
                    LogitVector::new(vec![gap, 0.0]).unwrap(),
                );
                r.label = Some(if s_ok { 0 } else { 1 });
                let label = r.label.unwrap();
                r.teacher_pred = Some(if t_ok { label } else { 1 - label });
                r
            })
            .collect()
    }

    #[test]
    fn identical_policies_never_disagree() {
        let rs = records();
        for p in [RouterPolicy::energy(1.0), RouterPolicy::random(0.4)] {
            assert_eq!(paired_outcomes(&rs, &p, &p, 9).unwrap(), (0, 0));
        }
    }

    #[test]
    fn all_teacher_vs_all_student_counts() {
        let rs = records();
        let teacher = RouterPolicy::energy(f64::INFINITY);
        let student = RouterPolicy::energy(f64::NEG_INFINITY);
        // direct enumeration over the table above
        let b = rs
            .iter()
            .filter(|r| r.teacher_pred == r.label && r.student_prediction() != r.label.unwrap())
            .count() as u64;
        let c = rs
            .iter()
            .filter(|r| r.teacher_pred != r.label && r.student_prediction() == r.label.unwrap())
            .count() as u64;
        assert_eq!((b, c), (2, 1));
        assert_eq!(paired_outcomes(&rs, &teacher, &student, 0).unwrap(), (b, c));
    }

    #[test]
    fn single_record() {
        let rs = &records()[..1];
        let teacher = RouterPolicy::energy(f64::INFINITY);
        let student = RouterPolicy::energy(f64::NEG_INFINITY);
        assert_eq!(paired_outcomes(rs, &teacher, &student, 0).unwrap(), (1, 0));
    }

    #[test]
    fn empty_dataset_errors() {
        let p = RouterPolicy::energy(0.0);
        assert!(matches!(
            paired_outcomes(&[], &p, &p, 0),
            Err(Error::Calibration(_))
        ));
    }
}
