//! Per-sensor forgetting-factor least-squares recursions.
//!
//! A diffusion step is split in two phases. [`adapt`] folds one local
//! observation into a sensor's `(θ̂, P)` pair and produces the intermediate
//! `(θ̄, P̄)`; [`combine`] fuses the neighbours' intermediates in information
//! form:
//!
//! ```text
//! P⁻¹ = Σ_j a_j P̄_j⁻¹,    θ̂ = P Σ_j a_j P̄_j⁻¹ θ̄_j
//! ```
//!
//! `P` is stored directly and symmetrized after every update.

use thiserror::Error;

use crate::linalg::{block_diag, condition_number, kron_identity, spd_inverse, stack, symmetrize, Matrix, Vector};

/// Tolerance on the sum of combination weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FflsError {
    #[error("regressor or observation is not finite")]
    NonFiniteInput,
    #[error("forgetting factor {0} outside (0, 1]")]
    InvalidForgettingFactor(f64),
    #[error("adapted matrix lost positive definiteness (condition number {condition:e})")]
    LostDefiniteness { condition: f64 },
    #[error("combined information matrix is singular (condition number {condition:e})")]
    SingularCombination { condition: f64 },
    #[error("combination weights must be non-negative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// `(θ̂_{t,i}, P_{t,i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorState {
    pub theta_hat: Vector,
    pub p: Matrix,
}

impl SensorState {
    pub fn new(theta_hat: Vector, p: Matrix) -> Self {
        Self { theta_hat, p }
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }
}

/// Output of the adaptation phase, with the quantities the combine step and
/// the error diagnostics need.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateState {
    pub theta_bar: Vector,
    pub p_bar: Matrix,
    pub p_bar_inv: Matrix,
    /// `P̄⁻¹ θ̄`.
    pub q_bar: Vector,
    /// `L = Pφ / (α + φᵀPφ)`.
    pub gain: Vector,
}

/// One local FFLS update:
///
/// ```text
/// θ̄ = θ̂ + Pφ (α + φᵀPφ)⁻¹ (y − φᵀθ̂)
/// P̄ = (P − Pφφᵀ P / (α + φᵀPφ)) / α
/// ```
pub fn adapt(state: &SensorState, phi: &Vector, y: f64, alpha: f64) -> Result<IntermediateState, FflsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FflsError::InvalidForgettingFactor(alpha));
    }
    if phi.len() != state.dim() {
        return Err(FflsError::DimensionMismatch(format!(
            "regressor has length {}, state has dimension {}",
            phi.len(),
            state.dim()
        )));
    }
    if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
        return Err(FflsError::NonFiniteInput);
    }
    let p = &state.p;
    let p_phi = p * phi;
    let denom = alpha + phi.dot(&p_phi);
    let gain = &p_phi / denom;
    let innovation = y - phi.dot(&state.theta_hat);
    let theta_bar = &state.theta_hat + &gain * innovation;
    let mut p_bar = (p - &p_phi * p_phi.transpose() / denom) / alpha;
    symmetrize(&mut p_bar);
    let p_bar_inv = spd_inverse(&p_bar).ok_or_else(|| FflsError::LostDefiniteness { condition: condition_number(&p_bar) })?;
    let q_bar = &p_bar_inv * &theta_bar;
    Ok(IntermediateState { theta_bar, p_bar, p_bar_inv, q_bar, gain })
}

/// Convex fusion of neighbour intermediates.
///
/// The weights must be non-negative and sum to one; which entry of the
/// adjacency matrix supplies them is the caller's choice. A single neighbour
/// with weight one is passed through unchanged.
pub fn combine(neighbors: &[(&IntermediateState, f64)]) -> Result<SensorState, FflsError> {
    let first = neighbors.first().ok_or(FflsError::InvalidWeights { sum: 0.0 })?.0;
    let m = first.theta_bar.len();
    let sum: f64 = neighbors.iter().map(|(_, a)| a).sum();
    if neighbors.iter().any(|(_, a)| !(a.is_finite() && *a >= 0.0)) || (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(FflsError::InvalidWeights { sum });
    }
    if let Some((s, _)) = neighbors.iter().find(|(s, _)| s.theta_bar.len() != m) {
        return Err(FflsError::DimensionMismatch(format!("neighbour of dimension {} among {m}", s.theta_bar.len())));
    }

    let active: Vec<_> = neighbors.iter().filter(|(_, a)| *a > 0.0).collect();
    if let [(only, a)] = active.as_slice() {
        if *a == 1.0 {
            return Ok(SensorState::new(only.theta_bar.clone(), only.p_bar.clone()));
        }
    }

    let mut information = Matrix::zeros(m, m);
    let mut q = Vector::zeros(m);
    for (s, a) in active {
        information += &s.p_bar_inv * *a;
        q += &s.q_bar * *a;
    }
    symmetrize(&mut information);
    let p = spd_inverse(&information)
        .ok_or_else(|| FflsError::SingularCombination { condition: condition_number(&information) })?;
    let theta_hat = &p * q;
    Ok(SensorState::new(theta_hat, p))
}

/// The classical single-sensor FFLS step: adapt, then combine with weight one.
pub fn standard_ffls_step(state: &SensorState, phi: &Vector, y: f64, alpha: f64) -> Result<SensorState, FflsError> {
    let intermediate = adapt(state, phi, y, alpha)?;
    combine(&[(&intermediate, 1.0)])
}

/// Inputs of one step of the network error recursion, all per sensor.
#[derive(Debug, Clone, Copy)]
pub struct ErrorStepContext<'a> {
    pub alpha: f64,
    /// Combination matrix `C` used at this step (`A` or `Aᵀ`).
    pub combination: &'a Matrix,
    /// `P_{t,i}`.
    pub p: &'a [Matrix],
    /// `P_{t+1,i}`.
    pub p_next: &'a [Matrix],
    /// `P̄_{t+1,i}`.
    pub p_bar: &'a [Matrix],
    /// `L_{t,i}`.
    pub gains: &'a [Vector],
    /// `w_{t+1,i}`.
    pub noise: &'a [f64],
    /// `Δθ_t` (shared by all sensors).
    pub theta_delta: &'a Vector,
}

/// Propagates the stacked tracking error one step:
///
/// ```text
/// Θ̃_{t+1} = α P_{t+1} 𝒜 P_t⁻¹ Θ̃_t − P_{t+1} 𝒜 P̄_{t+1}⁻¹ (L_t W_{t+1} − ΔΘ_t)
/// ```
///
/// with `𝒜 = C ⊗ I_m` and block-diagonal `P`, `P̄`, `L`. Built from dense
/// block matrices so that it stays independent of the per-sensor code path.
pub fn error_update(prev_error: &Vector, ctx: &ErrorStepContext<'_>) -> Result<Vector, FflsError> {
    let n = ctx.combination.nrows();
    let dims_ok = ctx.combination.ncols() == n
        && ctx.p.len() == n
        && ctx.p_next.len() == n
        && ctx.p_bar.len() == n
        && ctx.gains.len() == n
        && ctx.noise.len() == n;
    if !dims_ok {
        return Err(FflsError::DimensionMismatch(format!("error recursion inputs disagree on n = {n}")));
    }
    let m = ctx.theta_delta.len();
    if prev_error.len() != n * m || ctx.gains.iter().any(|g| g.len() != m) {
        return Err(FflsError::DimensionMismatch(format!("expected stacked length {}", n * m)));
    }

    let big_a = kron_identity(ctx.combination, m);
    let p_t = block_diag(ctx.p);
    let p_next = block_diag(ctx.p_next);
    let p_t_inv = spd_inverse(&p_t).ok_or(FflsError::LostDefiniteness { condition: condition_number(&p_t) })?;
    let p_bar = block_diag(ctx.p_bar);
    let p_bar_inv =
        spd_inverse(&p_bar).ok_or(FflsError::LostDefiniteness { condition: condition_number(&p_bar) })?;

    let mut gain_matrix = Matrix::zeros(n * m, n);
    for (i, g) in ctx.gains.iter().enumerate() {
        gain_matrix.view_mut((i * m, i), (m, 1)).copy_from(g);
    }
    let w = Vector::from_column_slice(ctx.noise);
    let drift = stack(&vec![ctx.theta_delta.clone(); n]);

    let homogeneous = &p_next * &big_a * &p_t_inv * prev_error * ctx.alpha;
    let forcing = &p_next * &big_a * &p_bar_inv * (gain_matrix * w - drift);
    Ok(homogeneous - forcing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_positive_definite, lambda_min, relative_difference};
    use proptest::prelude::*;

    fn spd(entries: &[f64], m: usize, shift: f64) -> Matrix {
        let b = Matrix::from_row_slice(m, m, entries);
        &b * b.transpose() + Matrix::identity(m, m) * shift
    }

    fn spd_strategy(m: usize) -> impl Strategy<Value = Matrix> {
        (proptest::collection::vec(-2.0f64..2.0, m * m), 0.05f64..2.0).prop_map(move |(e, s)| spd(&e, m, s))
    }

    fn state(theta: &[f64], p: Matrix) -> SensorState {
        SensorState::new(Vector::from_column_slice(theta), p)
    }

    #[test]
    fn zero_regressor_only_inflates_p() {
        let s = state(&[1.0, -1.0], spd(&[1.0, 0.3, 0.0, 2.0], 2, 0.5));
        let out = adapt(&s, &Vector::zeros(2), 3.0, 0.8).unwrap();
        assert_eq!(out.theta_bar, s.theta_hat);
        assert!(relative_difference(&out.p_bar, &(&s.p / 0.8)) < 1e-15);
    }

    #[test]
    fn scalar_adaptation_by_hand() {
        let s = state(&[2.0], Matrix::identity(1, 1));
        let out = adapt(&s, &Vector::from_element(1, 1.0), 3.0, 1.0).unwrap();
        assert_eq!(out.gain[0], 0.5);
        assert_eq!(out.theta_bar[0], 2.5);
        assert_eq!(out.p_bar[(0, 0)], 0.5);
        assert!((out.p_bar_inv[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adapt_rejects_bad_input() {
        let s = state(&[0.0], Matrix::identity(1, 1));
        let phi = Vector::from_element(1, 1.0);
        assert_eq!(adapt(&s, &phi, f64::NAN, 0.9), Err(FflsError::NonFiniteInput));
        assert_eq!(adapt(&s, &Vector::from_element(1, f64::INFINITY), 0.0, 0.9), Err(FflsError::NonFiniteInput));
        assert_eq!(adapt(&s, &phi, 0.0, 0.0), Err(FflsError::InvalidForgettingFactor(0.0)));
        assert!(matches!(adapt(&s, &Vector::zeros(2), 0.0, 0.9), Err(FflsError::DimensionMismatch(_))));
    }

    fn intermediate(theta: f64, p: f64) -> IntermediateState {
        let s = state(&[theta], Matrix::from_element(1, 1, p));
        // φ = 0, α = 1 leaves (θ, P) untouched
        adapt(&s, &Vector::zeros(1), 0.0, 1.0).unwrap()
    }

    #[test]
    fn combine_single_neighbor_passes_through() {
        let i = adapt(&state(&[0.3, 0.1], spd(&[1.0, 0.2, 0.4, 1.0], 2, 0.1)), &Vector::from_vec(vec![1.0, 2.0]), 0.7, 0.9)
            .unwrap();
        let out = combine(&[(&i, 1.0)]).unwrap();
        assert_eq!(out.theta_hat, i.theta_bar);
        assert_eq!(out.p, i.p_bar);
    }

    #[test]
    fn combine_identical_neighbors_is_idempotent() {
        let i = intermediate(1.5, 0.25);
        let out = combine(&[(&i, 0.2), (&i, 0.3), (&i, 0.5)]).unwrap();
        assert!((out.theta_hat[0] - 1.5).abs() < 1e-15);
        assert!((out.p[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn combine_scalar_by_hand() {
        // P⁻¹ = ½·1 + ½·2 = 3/2, θ̂ = (2/3)(½·0 + ½·2·3) = 2
        let a = intermediate(0.0, 1.0);
        let b = intermediate(3.0, 0.5);
        let out = combine(&[(&a, 0.5), (&b, 0.5)]).unwrap();
        assert!((out.p[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.theta_hat[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn combine_rejects_bad_weights() {
        let a = intermediate(0.0, 1.0);
        assert!(matches!(combine(&[(&a, 0.5), (&a, 0.6)]), Err(FflsError::InvalidWeights { .. })));
        assert!(matches!(combine(&[(&a, 1.5), (&a, -0.5)]), Err(FflsError::InvalidWeights { .. })));
        assert!(matches!(combine(&[]), Err(FflsError::InvalidWeights { .. })));
    }

    #[test]
    fn standard_step_is_adapt_then_unit_combine() {
        let s = state(&[0.5, -0.5], spd(&[1.0, 0.5, -0.3, 0.8], 2, 0.2));
        let phi = Vector::from_vec(vec![0.4, -1.1]);
        let direct = standard_ffls_step(&s, &phi, 0.9, 0.97).unwrap();
        let composed = combine(&[(&adapt(&s, &phi, 0.9, 0.97).unwrap(), 1.0)]).unwrap();
        assert_eq!(direct, composed);

        let idle = standard_ffls_step(&s, &Vector::zeros(2), 0.9, 0.5).unwrap();
        assert_eq!(idle.theta_hat, s.theta_hat);
        assert!(relative_difference(&idle.p, &(&s.p * 2.0)) < 1e-15);
    }

    /// Exact minimizer of Σ_k α^{t−k}(y_{k+1} − βφ_k)² + α^{t+1}(β − θ̂_0)²/P_0 for m = 1.
    #[test]
    fn scalar_recursion_matches_regularized_minimizer() {
        let alpha = 0.9;
        let (theta0, p0) = (0.2, 4.0);
        let phis = [1.3, -0.4, 2.1];
        let ys = [0.7, -0.1, 1.9];
        let mut s = state(&[theta0], Matrix::from_element(1, 1, p0));
        for (&phi, &y) in phis.iter().zip(&ys) {
            s = standard_ffls_step(&s, &Vector::from_element(1, phi), y, alpha).unwrap();
        }
        let t = phis.len() - 1;
        let mut num = alpha.powi(t as i32 + 1) * theta0 / p0;
        let mut den = alpha.powi(t as i32 + 1) / p0;
        for k in 0..=t {
            let w = alpha.powi((t - k) as i32);
            num += w * phis[k] * ys[k];
            den += w * phis[k] * phis[k];
        }
        assert!((s.theta_hat[0] - num / den).abs() < 1e-10);
        assert!((s.p[(0, 0)] - 1.0 / den).abs() < 1e-10);
    }

    #[test]
    fn error_update_zero_noise_zero_error() {
        let p = vec![Matrix::identity(2, 2); 2];
        let ctx = ErrorStepContext {
            alpha: 0.9,
            combination: &Matrix::from_element(2, 2, 0.5),
            p: &p,
            p_next: &p,
            p_bar: &p,
            gains: &[Vector::from_vec(vec![0.1, 0.2]), Vector::from_vec(vec![0.3, 0.1])],
            noise: &[0.0, 0.0],
            theta_delta: &Vector::zeros(2),
        };
        assert_eq!(error_update(&Vector::zeros(4), &ctx).unwrap(), Vector::zeros(4));
        assert!(matches!(
            error_update(&Vector::zeros(3), &ctx),
            Err(FflsError::DimensionMismatch(_))
        ));
    }

    /// One diffusion step from a random initialization, checked against the
    /// direct difference θ_{t+1} − θ̂_{t+1}.
    #[test]
    fn error_update_matches_direct_difference() {
        let m = 2;
        let alpha = 0.93;
        let c = Matrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6]);
        let theta = Vector::from_vec(vec![1.0, -0.5]);
        let delta = Vector::from_vec(vec![0.05, -0.02]);
        let sensors = [
            state(&[0.3, 0.2], spd(&[1.0, 0.2, 0.1, 0.7], m, 0.3)),
            state(&[-0.4, 0.9], spd(&[0.5, -0.3, 0.8, 1.2], m, 0.1)),
        ];
        let phis = [Vector::from_vec(vec![0.8, -1.2]), Vector::from_vec(vec![-0.3, 0.6])];
        let noise = [0.11, -0.07];
        let inter: Vec<_> = (0..2)
            .map(|i| adapt(&sensors[i], &phis[i], phis[i].dot(&theta) + noise[i], alpha).unwrap())
            .collect();
        let next: Vec<_> = (0..2)
            .map(|i| combine(&[(&inter[0], c[(i, 0)]), (&inter[1], c[(i, 1)])]).unwrap())
            .collect();
        let theta_next = &theta + &delta;
        let direct = stack(&next.iter().map(|s| &theta_next - &s.theta_hat).collect::<Vec<_>>());
        let prev = stack(&sensors.iter().map(|s| &theta - &s.theta_hat).collect::<Vec<_>>());
        let ctx = ErrorStepContext {
            alpha,
            combination: &c,
            p: &sensors.iter().map(|s| s.p.clone()).collect::<Vec<_>>(),
            p_next: &next.iter().map(|s| s.p.clone()).collect::<Vec<_>>(),
            p_bar: &inter.iter().map(|s| s.p_bar.clone()).collect::<Vec<_>>(),
            gains: &inter.iter().map(|s| s.gain.clone()).collect::<Vec<_>>(),
            noise: &noise,
            theta_delta: &delta,
        };
        let recursed = error_update(&prev, &ctx).unwrap();
        assert!((&recursed - &direct).norm() <= 1e-8 * (1.0 + direct.norm()), "{recursed} vs {direct}");
    }

    #[test]
    fn identity_combination_decouples_blocks() {
        let alpha = 0.9;
        let theta = Vector::from_vec(vec![0.5]);
        let sensors = [state(&[0.1], Matrix::from_element(1, 1, 2.0)), state(&[-0.2], Matrix::from_element(1, 1, 0.5))];
        let phis = [Vector::from_element(1, 1.5), Vector::from_element(1, -0.7)];
        let noise = [0.05, 0.02];
        let inter: Vec<_> = (0..2)
            .map(|i| adapt(&sensors[i], &phis[i], phis[i].dot(&theta) + noise[i], alpha).unwrap())
            .collect();
        let ctx = ErrorStepContext {
            alpha,
            combination: &Matrix::identity(2, 2),
            p: &sensors.iter().map(|s| s.p.clone()).collect::<Vec<_>>(),
            p_next: &inter.iter().map(|s| s.p_bar.clone()).collect::<Vec<_>>(),
            p_bar: &inter.iter().map(|s| s.p_bar.clone()).collect::<Vec<_>>(),
            gains: &inter.iter().map(|s| s.gain.clone()).collect::<Vec<_>>(),
            noise: &noise,
            theta_delta: &Vector::zeros(1),
        };
        let prev = Vector::from_vec(vec![theta[0] - 0.1, theta[0] + 0.2]);
        let out = error_update(&prev, &ctx).unwrap();
        for i in 0..2 {
            // single-sensor error: (1 − Lφ) θ̃ − L w
            let single = (1.0 - inter[i].gain[0] * phis[i][0]) * prev[i] - inter[i].gain[0] * noise[i];
            assert!((out[i] - single).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rank_one_identity(p in spd_strategy(3), phi in proptest::collection::vec(-3.0f64..3.0, 3), alpha in 0.05f64..1.0) {
            let phi = Vector::from_vec(phi);
            let s = SensorState::new(Vector::zeros(3), p.clone());
            let out = adapt(&s, &phi, 0.0, alpha).unwrap();
            let p_inv = spd_inverse(&p).unwrap();
            let direct = spd_inverse(&(p_inv * alpha + &phi * phi.transpose())).unwrap();
            prop_assert!(relative_difference(&out.p_bar, &direct) <= 1e-8);
        }

        #[test]
        fn outputs_stay_positive_definite(
            ps in proptest::collection::vec(spd_strategy(2), 3),
            phis in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 3),
            raw in proptest::collection::vec(0.01f64..1.0, 3),
            alpha in 0.1f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            weights[2] = 1.0 - weights[0] - weights[1];
            let inter: Vec<_> = ps.iter().zip(&phis).map(|(p, phi)| {
                adapt(&SensorState::new(Vector::zeros(2), p.clone()), &Vector::from_column_slice(phi), 1.0, alpha).unwrap()
            }).collect();
            for i in &inter {
                prop_assert!(is_positive_definite(&i.p_bar));
                prop_assert_eq!(i.p_bar.clone(), i.p_bar.transpose());
            }
            let pairs: Vec<_> = inter.iter().zip(weights.iter().copied()).collect();
            let out = combine(&pairs).unwrap();
            prop_assert!(is_positive_definite(&out.p));
            prop_assert_eq!(out.p.clone(), out.p.transpose());
        }

        /// (Σ a_j A_j)⁻¹ ≼ Σ a_j A_j⁻¹ for positive definite A_j.
        #[test]
        fn combination_inverse_is_dominated(
            mats in proptest::collection::vec(spd_strategy(3), 2..5),
            raw in proptest::collection::vec(0.01f64..1.0, 5),
        ) {
            let k = mats.len();
            let total: f64 = raw[..k].iter().sum();
            let weights: Vec<f64> = raw[..k].iter().map(|w| w / total).collect();
            let mut mean = Matrix::zeros(3, 3);
            let mut mean_inv = Matrix::zeros(3, 3);
            for (a, w) in mats.iter().zip(&weights) {
                mean += a * *w;
                mean_inv += spd_inverse(a).unwrap() * *w;
            }
            let gap = mean_inv - spd_inverse(&mean).unwrap();
            let scale = gap.norm().max(1.0);
            prop_assert!(lambda_min(&gap) >= -1e-10 * scale);
        }
    }
}
