//! One-sided two-sample tests for A/B results.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use super::EvalError;

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// One-sided Fisher exact test that group 1's success rate exceeds group 2's.
///
/// Each group is `(successes, trials)`. Returns `P(X >= s1)` for the
/// hypergeometric count of group-1 successes given both margins.
pub fn fisher_exact_greater(group1: (u64, u64), group2: (u64, u64)) -> Result<f64, EvalError> {
    let ((s1, n1), (s2, n2)) = (group1, group2);
    for (s, n) in [group1, group2] {
        if n == 0 {
            return Err(EvalError::EmptyGroup);
        }
        if s > n {
            return Err(EvalError::SuccessesExceedTrials { successes: s, trials: n });
        }
    }
    let total = n1 + n2;
    let successes = s1 + s2;
    let hi = n1.min(successes);
    let lo = successes.saturating_sub(n2);
    let ln_denominator = ln_choose(total, n1);
    let ln_pmf = |x: u64| ln_choose(successes, x) + ln_choose(total - successes, n1 - x) - ln_denominator;

    // Log-sum-exp over the upper tail.
    let start = s1.max(lo);
    let terms: Vec<f64> = (start..=hi).map(ln_pmf).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let p = max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    Ok(p.min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for "mean of sample 1 exceeds mean of sample 2".
    pub p: f64,
    pub mean1: f64,
    pub mean2: f64,
    /// Both samples have zero variance.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// One-sided Welch t-test that sample 1 has the larger mean.
pub fn welch_t_greater(sample1: &[f64], sample2: &[f64]) -> Result<WelchResult, EvalError> {
    if sample1.len() < 2 || sample2.len() < 2 {
        return Err(EvalError::SampleTooSmall(sample1.len().min(sample2.len())));
    }
    let (m1, v1) = mean_var(sample1);
    let (m2, v2) = mean_var(sample2);
    let (a, b) = (v1 / sample1.len() as f64, v2 / sample2.len() as f64);
    let se2 = a + b;
    if se2 == 0.0 {
        let (t, p) = match m1.total_cmp(&m2) {
            std::cmp::Ordering::Equal => (0.0, 0.5),
            std::cmp::Ordering::Greater => (f64::INFINITY, 0.0),
            std::cmp::Ordering::Less => (f64::NEG_INFINITY, 1.0),
        };
        return Ok(WelchResult { t, df: f64::NAN, p, mean1: m1, mean2: m2, degenerate: true });
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (a * a / (sample1.len() - 1) as f64 + b * b / (sample2.len() - 1) as f64);
    Ok(WelchResult { t, df, p: student_t_sf(t, df), mean1: m1, mean2: m2, degenerate: false })
}
