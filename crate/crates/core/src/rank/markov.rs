use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matrix::ComparisonMatrix;
use super::RankError;
use crate::data::MfiId;

/// Direct and iterative solutions must agree to this many units.
pub const SOLVER_AGREEMENT: f64 = 1e-8;
const POWER_TOLERANCE: f64 = 1e-14;
const POWER_MAX_ITERATIONS: usize = 100_000;
const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Row-stochastic transition matrix over `order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub order: Vec<MfiId>,
    pub rows: Vec<Vec<f64>>,
    /// Rows that had no points and were spread uniformly over the other lenders.
    pub zero_rows: Vec<MfiId>,
    pub damping: f64,
}

impl TransitionMatrix {
    /// Wrap an arbitrary stochastic matrix. Rows must be non-negative and sum to 1.
    pub fn from_rows(order: Vec<MfiId>, rows: Vec<Vec<f64>>) -> Result<Self, RankError> {
        let n = order.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(RankError::NotStochastic("matrix is not square over the lender order".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|&x| !(x >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(RankError::NotStochastic(format!("row {i} is not a probability vector")));
            }
        }
        Ok(TransitionMatrix { order, rows, zero_rows: Vec::new(), damping: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Normalise each row of the comparison matrix to sum to 1.
///
/// A lender that no one beats on anything has a zero row; it moves uniformly
/// to the other lenders. With `damping > 0` every row becomes
/// `(1 - damping) * row + damping / n`.
pub fn transition(a: &ComparisonMatrix, damping: f64) -> Result<TransitionMatrix, RankError> {
    let n = a.len();
    if n < 2 {
        return Err(RankError::TooFewLenders(n));
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(RankError::InvalidDamping(damping));
    }
    let mut zero_rows = Vec::new();
    let rows = a
        .points
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u32 = row.iter().sum();
            let mut p: Vec<f64> = if total == 0 {
                zero_rows.push(a.order[i].clone());
                (0..n).map(|j| if j == i { 0.0 } else { 1.0 / (n - 1) as f64 }).collect()
            } else {
                row.iter().map(|&x| x as f64 / total as f64).collect()
            };
            if damping > 0.0 {
                for x in &mut p {
                    *x = (1.0 - damping) * *x + damping / n as f64;
                }
            }
            p
        })
        .collect();
    Ok(TransitionMatrix { order: a.order.clone(), rows, zero_rows, damping })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub order: Vec<MfiId>,
    /// The direct solution.
    pub pi: Vec<f64>,
    pub power_converged: bool,
    pub power_iterations: usize,
    /// Max absolute difference between the direct and iterative solutions;
    /// `None` when power iteration did not converge.
    pub discrepancy: Option<f64>,
}

impl StationaryDistribution {
    pub fn get(&self, mfi: &MfiId) -> Option<f64> {
        self.order.iter().position(|m| m == mfi).map(|i| self.pi[i])
    }
}

/// Solve `pi P = pi`, `sum(pi) = 1` by LU with the last balance equation
/// replaced by the normalisation.
pub fn solve_direct(p: &TransitionMatrix) -> Result<Vec<f64>, RankError> {
    let n = p.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Row i of (P^T - I).
            m[(i, j)] = p.rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = m.lu().solve(&b).ok_or(RankError::NotUnique)?;
    if x.iter().any(|v| !v.is_finite() || *v < -SOLVER_AGREEMENT) {
        return Err(RankError::NotUnique);
    }
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

/// Power iteration from the uniform vector. Returns the iterate and whether
/// successive iterates came within tolerance before the cap.
pub fn solve_power(p: &TransitionMatrix) -> (Vec<f64>, usize, bool) {
    let n = p.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for it in 1..=POWER_MAX_ITERATIONS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in p.rows.iter().enumerate() {
            for (j, &pij) in row.iter().enumerate() {
                next[j] += pi[i] * pij;
            }
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta < POWER_TOLERANCE {
            return (pi, it, true);
        }
    }
    (pi, POWER_MAX_ITERATIONS, false)
}

/// Stationary distribution by two independent routes.
///
/// The direct solution is returned. When power iteration converges it must
/// agree within [`SOLVER_AGREEMENT`], otherwise the result is an error; when it
/// does not converge (periodic chains) the direct solution stands and
/// `power_converged` is false.
pub fn stationary(p: &TransitionMatrix) -> Result<StationaryDistribution, RankError> {
    if p.len() < 2 {
        return Err(RankError::TooFewLenders(p.len()));
    }
    let direct = solve_direct(p)?;
    let (power, iterations, converged) = solve_power(p);
    let discrepancy = converged.then(|| direct.iter().zip(&power).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    if let Some(d) = discrepancy {
        if d > SOLVER_AGREEMENT {
            return Err(RankError::SolverDisagreement(d));
        }
    } else {
        log::warn!("power iteration did not converge in {iterations} steps; using the direct solution");
    }
    Ok(StationaryDistribution {
        order: p.order.clone(),
        pi: direct,
        power_converged: converged,
        power_iterations: iterations,
        discrepancy,
    })
}
