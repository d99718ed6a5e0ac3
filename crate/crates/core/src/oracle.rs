//! Ground truth computed without the recursion.
//!
//! [`batch_solve`] evaluates the regularized weighted least-squares solution in
//! closed form from the whole data history: the inverse covariance and the
//! information vector `q = P⁻¹θ̂` are unrolled as
//!
//! ```text
//! P⁻¹_{t+1,i} = Σ_j Σ_{k≤t} α^{t−k} M_k[i,j] φ_{k,j}φ_{k,j}ᵀ + Σ_j α^{t+1} M_0[i,j] P⁻¹_{0,j}
//! q_{t+1,i}   = Σ_j Σ_{k≤t} α^{t−k} M_k[i,j] φ_{k,j}y_{k+1,j} + Σ_j α^{t+1} M_0[i,j] P⁻¹_{0,j}θ̂_{0,j}
//! ```
//!
//! with `M_k = C_t C_{t−1} ⋯ C_k`. For a fixed topology `M_k` is the matrix
//! power `C^{t+1−k}`.

use thiserror::Error;

use crate::linalg::{lambda_min, spd_inverse, Matrix, Vector};
use crate::scenario::StepData;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("information matrix of sensor {sensor} is not positive definite")]
    Singular { sensor: usize },
}

/// Combination matrices applied at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum CombinationSchedule {
    Fixed(Matrix),
    /// `C_k` for `k = 0, 1, …`; must cover the history.
    PerStep(Vec<Matrix>),
}

impl CombinationSchedule {
    /// Schedule for a recorded topology path `r(0), r(1), …`.
    pub fn from_path(combinations: &[Matrix], path: &[usize]) -> Self {
        CombinationSchedule::PerStep(path.iter().map(|&r| combinations[r].clone()).collect())
    }

    fn n(&self) -> Option<usize> {
        match self {
            CombinationSchedule::Fixed(c) => Some(c.nrows()),
            CombinationSchedule::PerStep(cs) => cs.first().map(|c| c.nrows()),
        }
    }

    /// `M_k = C_{len−1} ⋯ C_k` for `k = 0..len`.
    fn backward_products(&self, len: usize, n: usize) -> Result<Vec<Matrix>, OracleError> {
        let mut out = vec![Matrix::identity(n, n); len];
        match self {
            CombinationSchedule::Fixed(c) => {
                // out[k] = C^{len−k}, memoized from the largest k down.
                let mut power = Matrix::identity(n, n);
                for k in (0..len).rev() {
                    power = c * power;
                    out[k] = power.clone();
                }
            }
            CombinationSchedule::PerStep(cs) => {
                if cs.len() < len {
                    return Err(OracleError::DimensionMismatch(format!(
                        "schedule covers {} steps, history has {len}",
                        cs.len()
                    )));
                }
                let mut acc = Matrix::identity(n, n);
                for k in (0..len).rev() {
                    acc = &acc * &cs[k];
                    out[k] = acc.clone();
                }
            }
        }
        Ok(out)
    }
}

/// Closed-form state of every sensor after the whole history.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub theta_hat: Vec<Vector>,
    pub p: Vec<Matrix>,
    pub p_inv: Vec<Matrix>,
}

/// Closed-form estimates after processing `history` (`history[k]` holds
/// `φ_{k,j}` and `y_{k+1,j}`), so the result is at time `history.len()`.
pub fn batch_solve(
    history: &[StepData],
    schedule: &CombinationSchedule,
    alpha: f64,
    p0: &[Matrix],
    theta_hat0: &[Vector],
) -> Result<BatchSolution, OracleError> {
    let n = schedule
        .n()
        .or_else(|| history.first().map(|s| s.regressors.len()))
        .unwrap_or(p0.len());
    if p0.len() != n || theta_hat0.len() != n {
        return Err(OracleError::DimensionMismatch(format!(
            "{} initial covariances and {} initial estimates for {n} sensors",
            p0.len(),
            theta_hat0.len()
        )));
    }
    let m = theta_hat0.first().map_or(0, |v| v.len());
    for (k, step) in history.iter().enumerate() {
        if step.regressors.len() != n || step.outputs.len() != n {
            return Err(OracleError::DimensionMismatch(format!("step {k} has data for a different sensor count")));
        }
        if step.regressors.iter().any(|phi| phi.len() != m) {
            return Err(OracleError::DimensionMismatch(format!("step {k} has a regressor of the wrong length")));
        }
    }

    let len = history.len();
    let products = schedule.backward_products(len, n)?;
    let p0_inv = p0
        .iter()
        .enumerate()
        .map(|(j, p)| spd_inverse(p).ok_or(OracleError::Singular { sensor: j }))
        .collect::<Result<Vec<_>, _>>()?;
    let q0: Vec<Vector> = p0_inv.iter().zip(theta_hat0).map(|(pi, th)| pi * th).collect();
    let initial_weights = if len == 0 { Matrix::identity(n, n) } else { products[0].clone() };

    let mut theta_hat = Vec::with_capacity(n);
    let mut p_out = Vec::with_capacity(n);
    let mut p_inv_out = Vec::with_capacity(n);
    for i in 0..n {
        let decay0 = alpha.powi(len as i32);
        let mut info = Matrix::zeros(m, m);
        let mut q = Vector::zeros(m);
        for j in 0..n {
            let w = initial_weights[(i, j)];
            if w != 0.0 {
                info += &p0_inv[j] * (decay0 * w);
                q += &q0[j] * (decay0 * w);
            }
        }
        for (k, step) in history.iter().enumerate() {
            let decay = alpha.powi((len - 1 - k) as i32);
            for j in 0..n {
                let w = products[k][(i, j)];
                if w == 0.0 {
                    continue;
                }
                let phi = &step.regressors[j];
                info += phi * phi.transpose() * (decay * w);
                q += phi * (step.outputs[j] * decay * w);
            }
        }
        let p = spd_inverse(&info).ok_or(OracleError::Singular { sensor: i })?;
        theta_hat.push(&p * q);
        p_out.push(p);
        p_inv_out.push(info);
    }
    Ok(BatchSolution { theta_hat, p: p_out, p_inv: p_inv_out })
}

/// Realized window matrix `(1/(n(1+h))) Σ_i Σ_k φ_{k,i}φ_{k,i}ᵀ/(1+‖φ_{k,i}‖²)`.
///
/// `window[k][i]` is `φ` of sensor `i` at the `k`-th step of the window.
pub fn window_matrix(window: &[Vec<Vector>], n: usize, h: usize) -> Result<Matrix, OracleError> {
    check_window(window, n, h)?;
    let m = window.first().and_then(|w| w.first()).map_or(0, |v| v.len());
    let mut total = Matrix::zeros(m, m);
    for row in window {
        for phi in row {
            if phi.len() != m {
                return Err(OracleError::DimensionMismatch("regressors of different lengths".into()));
            }
            total += normalized_outer(phi);
        }
    }
    Ok(total / (n as f64 * (1.0 + h as f64)))
}

/// Single-sensor analogue `(1/(1+h)) Σ_k φ_{k,i}φ_{k,i}ᵀ/(1+‖φ_{k,i}‖²)`.
pub fn sensor_window_matrix(window: &[Vec<Vector>], sensor: usize, n: usize, h: usize) -> Result<Matrix, OracleError> {
    check_window(window, n, h)?;
    if sensor >= n {
        return Err(OracleError::DimensionMismatch(format!("sensor {sensor} out of range for {n} sensors")));
    }
    let m = window.first().map_or(0, |w| w[sensor].len());
    let mut total = Matrix::zeros(m, m);
    for row in window {
        total += normalized_outer(&row[sensor]);
    }
    Ok(total / (1.0 + h as f64))
}

/// `λ_min` of [`window_matrix`].
pub fn brute_force_lambda(window: &[Vec<Vector>], n: usize, h: usize) -> Result<f64, OracleError> {
    Ok(lambda_min(&window_matrix(window, n, h)?))
}

/// `φφᵀ/(1+‖φ‖²)`.
pub fn normalized_outer(phi: &Vector) -> Matrix {
    phi * phi.transpose() / (1.0 + phi.norm_squared())
}

fn check_window(window: &[Vec<Vector>], n: usize, h: usize) -> Result<(), OracleError> {
    if window.len() != h {
        return Err(OracleError::DimensionMismatch(format!("window has {} steps, expected {h}", window.len())));
    }
    if let Some(k) = window.iter().position(|row| row.len() != n) {
        return Err(OracleError::DimensionMismatch(format!("window step {k} does not have {n} sensors")));
    }
    Ok(())
}
