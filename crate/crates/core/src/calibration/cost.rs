use crate::error::{Error, Result};

/// Usage-weighted average cost of the cascade. Escalated samples pay for both
/// models because the Student always runs first:
/// `(N_S·F_S + N_T·(F_S + F_T)) / (N_S + N_T)`.
pub fn expected_cost(
    n_student: u64,
    n_teacher: u64,
    f_student: f64,
    f_teacher: f64,
) -> Result<f64> {
    let total = n_student + n_teacher;
    if total == 0 {
        return Err(Error::invalid("expected cost needs at least one sample"));
    }
    for (name, f) in [("student cost", f_student), ("teacher cost", f_teacher)] {
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::invalid(format!(
                "{name} must be finite and non-negative, got {f}"
            )));
        }
    }
    let ns = n_student as f64;
    let nt = n_teacher as f64;
    Ok((ns * f_student + nt * (f_student + f_teacher)) / total as f64)
}

/// Costs charged to records that do not declare their own.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostDefaults {
    pub student: f64,
    pub teacher: f64,
}
