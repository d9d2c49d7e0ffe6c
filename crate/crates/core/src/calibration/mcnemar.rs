//! Exact McNemar test on paired disagreement counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Model A correct, model B wrong.
    pub b: u64,
    /// Model A wrong, model B correct.
    pub c: u64,
    pub p_value: f64,
    #[serde(with = "crate::threshold")]
    pub odds_ratio: f64,
}

impl McNemarResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Two-sided exact binomial McNemar test:
/// `p = min(1, 2·P(X ≥ max(b, c)))` with `X ~ Binomial(b + c, 1/2)`.
///
/// Odds ratio is `b / c`, `+inf` when only `c` is zero, and 1 when both are.
pub fn mcnemar(b: i64, c: i64) -> Result<McNemarResult> {
    if b < 0 || c < 0 {
        return Err(Error::invalid(format!(
            "counts must be non-negative, got b={b}, c={c}"
        )));
    }
    let (b, c) = (b as u64, c as u64);
    let p_value = if b + c == 0 {
        1.0
    } else {
        (2.0 * binomial_half_upper_tail(b + c, b.max(c))).min(1.0)
    };
    let odds_ratio = match (b, c) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => b as f64 / c as f64,
    };
    Ok(McNemarResult {
        b,
        c,
        p_value,
        odds_ratio,
    })
}

/// `P(X ≥ k)` for `X ~ Binomial(n, 1/2)`, requires `2k ≥ n`.
fn binomial_half_upper_tail(n: u64, k: u64) -> f64 {
    debug_assert!(2 * k >= n && k <= n);
    // ln C(n, k) via the shorter product
    let r = k.min(n - k);
    let mut ln_first = 0.0;
    for j in 1..=r {
        ln_first += ((n - r + j) as f64 / j as f64).ln();
    }
    // terms decrease from i = k upward, so the first is the max
    let mut ln_term = 0.0;
    let mut rel_sum = 1.0;
    for i in k..n {
        ln_term += ((n - i) as f64 / (i + 1) as f64).ln();
        let t = ln_term.exp();
        rel_sum += t;
        if t < 1e-300 {
            break;
        }
    }
    (ln_first + rel_sum.ln() - n as f64 * std::f64::consts::LN_2).exp()
}
