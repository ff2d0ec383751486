//! Recursive least-squares estimators.
//!
//! [`sift_step`] forgets only inside the information subspace of each step:
//! the regressor is first filtered by a truncated SVD, the information matrix
//! is split along the row space of the filtered regressor, and only the
//! parallel part is discounted by `λ`. [`ef_step`] is classical exponential
//! forgetting and [`nf_step`] the no-forgetting special case.
//!
//! Every estimator carries both `R` (information) and `P = R⁻¹` (covariance).

use crate::error::{Error, Result};
use crate::numerics::{
    check_finite, compact_svd, condition_number, mil_rank_q_update, spd_solve, symmetrize, Matrix,
    MilUpdate, SymMatrix, Vector,
};

/// One step of data: regressor `phi` (p×n) and measurement `y` (length p).
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSample {
    pub phi: Matrix,
    pub y: Vector,
}

impl RegressionSample {
    pub fn new(phi: Matrix, y: Vector) -> Result<Self> {
        if phi.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "regressor has {} rows but measurement has length {}",
                phi.nrows(),
                y.len()
            )));
        }
        check_finite(&phi, "regressor")?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(RegressionSample { phi, y })
    }

    /// Noiseless sample `y = φ θ`.
    pub fn exact(phi: Matrix, theta: &Vector) -> Result<Self> {
        let y = &phi * theta;
        Self::new(phi, y)
    }

    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn cols(&self) -> usize {
        self.phi.ncols()
    }
}

/// Tuning of the subspace-of-information forgetting estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiftConfig {
    pub lambda: f64,
    pub epsilon: f64,
    /// Filtered ranks `q ≤ q_max` update `P` through the matrix inversion
    /// lemma, larger ranks invert `R` directly. Only affects cost.
    pub q_max: usize,
}

impl SiftConfig {
    pub fn new(lambda: f64, epsilon: f64, q_max: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!(
                "forgetting factor must lie in (0, 1), got {lambda}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "truncation parameter must be positive, got {epsilon}"
            )));
        }
        Ok(SiftConfig {
            lambda,
            epsilon,
            q_max,
        })
    }
}

impl Default for SiftConfig {
    fn default() -> Self {
        SiftConfig {
            lambda: 0.5,
            epsilon: 1e-4,
            q_max: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub theta: Vector,
    pub r: SymMatrix,
    pub p: SymMatrix,
    pub step: usize,
}

impl EstimatorState {
    /// Starts from `theta0` and positive-definite information matrix `r0`.
    pub fn new(theta0: Vector, r0: SymMatrix) -> Result<Self> {
        if theta0.len() != r0.dim() {
            return Err(Error::Shape(format!(
                "θ₀ has length {} but R₀ is {1}x{1}",
                theta0.len(),
                r0.dim()
            )));
        }
        let p = r0.inverse_pd().map_err(|_| {
            Error::Domain("initial information matrix must be positive definite".into())
        })?;
        Ok(EstimatorState {
            theta: theta0,
            r: r0,
            p,
            step: 0,
        })
    }

    /// `θ₀ = 0`, `R₀ = P₀ = I`.
    pub fn zeroed(n: usize) -> Self {
        EstimatorState {
            theta: Vector::zeros(n),
            r: SymMatrix::identity(n),
            p: SymMatrix::identity(n),
            step: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `‖R P − I‖` in the Frobenius norm.
    pub fn coherence_error(&self) -> f64 {
        let n = self.dim();
        (self.r.as_matrix() * self.p.as_matrix() - Matrix::identity(n, n)).norm()
    }

    fn check_sample(&self, sample: &RegressionSample) -> Result<()> {
        if sample.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "regressor has {} columns but the estimator has {} parameters",
                sample.cols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Regressor and measurement projected onto the dominant left singular vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredSample {
    pub phi_bar: Matrix,
    pub y_bar: Vector,
    pub q: usize,
    /// All `min(p, n)` singular values of the raw regressor, descending.
    pub sigma: Vec<f64>,
}

/// Intermediate matrices of one [`sift_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct SiftStepTrace {
    pub filtered: FilteredSample,
    pub r_parallel: SymMatrix,
    pub r_perp: SymMatrix,
    pub r_bar: SymMatrix,
    pub used_mil: bool,
    /// `κ(φ̄ R φ̄ᵀ)` of the inner system; `None` when nothing was kept.
    pub inner_condition: Option<f64>,
}

/// Keeps the directions whose singular values are at least `√ε`.
pub fn information_filter(sample: &RegressionSample, epsilon: f64) -> Result<FilteredSample> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config(format!(
            "truncation parameter must be positive, got {epsilon}"
        )));
    }
    let n = sample.cols();
    let svd = compact_svd(&sample.phi)?;
    let threshold = epsilon.sqrt();
    let q = svd.sigma.iter().take_while(|&&s| s >= threshold).count();
    if q == 0 {
        return Ok(FilteredSample {
            phi_bar: Matrix::zeros(0, n),
            y_bar: Vector::zeros(0),
            q,
            sigma: svd.sigma,
        });
    }
    let u_bar_t = svd.u.columns(0, q).transpose();
    Ok(FilteredSample {
        phi_bar: &u_bar_t * &sample.phi,
        y_bar: &u_bar_t * &sample.y,
        q,
        sigma: svd.sigma,
    })
}

/// One step of subspace-of-information forgetting RLS.
pub fn sift_step(
    state: &EstimatorState,
    sample: &RegressionSample,
    cfg: &SiftConfig,
) -> Result<(EstimatorState, SiftStepTrace)> {
    state.check_sample(sample)?;
    let n = state.dim();
    let max_rank = sample.rows().min(n);
    if cfg.q_max > max_rank {
        return Err(Error::Config(format!(
            "q_max = {} exceeds min(p, n) = {max_rank}",
            cfg.q_max
        )));
    }
    let filtered = information_filter(sample, cfg.epsilon)?;
    let q = filtered.q;

    if q == 0 {
        let next = EstimatorState {
            step: state.step + 1,
            ..state.clone()
        };
        let trace = SiftStepTrace {
            filtered,
            r_parallel: SymMatrix::zeros(n),
            r_perp: state.r.clone(),
            r_bar: state.r.clone(),
            used_mil: false,
            inner_condition: None,
        };
        return Ok((next, trace));
    }

    let phi_bar = &filtered.phi_bar;
    let r = state.r.as_matrix();
    let l = phi_bar * r;
    let inner = symmetrize(&(&l * phi_bar.transpose()))?;
    let x = spd_solve(&inner, &l, "φ̄ R φ̄ᵀ")?;
    let lt_x = l.transpose() * x;
    let r_parallel = symmetrize(&lt_x)?;
    let r_perp = symmetrize(&(r - &lt_x))?;
    let r_bar = symmetrize(&(r - lt_x * (1.0 - cfg.lambda)))?;
    let r_next = symmetrize(&(r_bar.as_matrix() + phi_bar.transpose() * phi_bar))?;

    let used_mil = q <= cfg.q_max;
    let p_next = if used_mil {
        let p_bar = mil_rank_q_update(
            &state.p,
            phi_bar,
            MilUpdate::Sifting {
                lambda: cfg.lambda,
                phi_r: &l,
            },
        )?;
        mil_rank_q_update(&p_bar, phi_bar, MilUpdate::Measurement)?
    } else {
        r_next.inverse_pd()?
    };

    let gain_input = phi_bar.transpose() * (&filtered.y_bar - phi_bar * &state.theta);
    let theta = &state.theta + p_next.as_matrix() * gain_input;

    let inner_condition = Some(condition_number(&inner)?);
    let next = EstimatorState {
        theta,
        r: r_next,
        p: p_next,
        step: state.step + 1,
    };
    let trace = SiftStepTrace {
        filtered,
        r_parallel,
        r_perp,
        r_bar,
        used_mil,
        inner_condition,
    };
    Ok((next, trace))
}

/// One step of RLS with exponential forgetting `λ ∈ (0, 1]`.
pub fn ef_step(
    state: &EstimatorState,
    sample: &RegressionSample,
    lambda: f64,
) -> Result<EstimatorState> {
    state.check_sample(sample)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!(
            "forgetting factor must lie in (0, 1], got {lambda}"
        )));
    }
    let phi = &sample.phi;
    let rows = phi.nrows();
    let r_next = symmetrize(&(state.r.as_matrix() * lambda + phi.transpose() * phi))?;

    let p = state.p.as_matrix();
    let m = phi * p;
    let inner = Matrix::identity(rows, rows) * lambda + &m * phi.transpose();
    let x = spd_solve(&inner, &m, "λI + φ P φᵀ")?;
    let p_next = symmetrize(&((p - m.transpose() * x) / lambda))?;

    let gain_input = phi.transpose() * (&sample.y - phi * &state.theta);
    let theta = &state.theta + p_next.as_matrix() * gain_input;
    Ok(EstimatorState {
        theta,
        r: r_next,
        p: p_next,
        step: state.step + 1,
    })
}

/// RLS without forgetting.
pub fn nf_step(state: &EstimatorState, sample: &RegressionSample) -> Result<EstimatorState> {
    ef_step(state, sample, 1.0)
}

/// Transition matrix `I − P_{k+1} φ̄ᵀ φ̄` of the noiseless estimation-error system.
pub fn error_dynamics_factor(state_next: &EstimatorState, filtered: &FilteredSample) -> Matrix {
    let n = state_next.dim();
    let phi_bar = &filtered.phi_bar;
    Matrix::identity(n, n) - state_next.p.as_matrix() * (phi_bar.transpose() * phi_bar)
}

/// Common interface of the recursive estimators.
///
/// Other forgetting schemes (variable-direction, directional or multiple
/// forgetting) plug in by implementing this trait.
pub trait Estimator {
    fn name(&self) -> &str;

    fn state(&self) -> &EstimatorState;

    fn step(&mut self, sample: &RegressionSample) -> Result<()>;

    fn theta(&self) -> &Vector {
        &self.state().theta
    }

    fn information(&self) -> &SymMatrix {
        &self.state().r
    }

    fn covariance(&self) -> &SymMatrix {
        &self.state().p
    }

    /// Diagnostics of the latest step, for estimators that produce them.
    fn last_trace(&self) -> Option<&SiftStepTrace> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct SiftRls {
    state: EstimatorState,
    cfg: SiftConfig,
    trace: Option<SiftStepTrace>,
}

impl SiftRls {
    pub fn new(state: EstimatorState, cfg: SiftConfig) -> Self {
        SiftRls {
            state,
            cfg,
            trace: None,
        }
    }

    pub fn config(&self) -> &SiftConfig {
        &self.cfg
    }
}

impl Estimator for SiftRls {
    fn name(&self) -> &str {
        "sift"
    }

    fn state(&self) -> &EstimatorState {
        &self.state
    }

    fn step(&mut self, sample: &RegressionSample) -> Result<()> {
        let (next, trace) = sift_step(&self.state, sample, &self.cfg)?;
        self.state = next;
        self.trace = Some(trace);
        Ok(())
    }

    fn last_trace(&self) -> Option<&SiftStepTrace> {
        self.trace.as_ref()
    }
}

#[derive(Clone, Debug)]
pub struct ExpForgettingRls {
    state: EstimatorState,
    lambda: f64,
}

impl ExpForgettingRls {
    pub fn new(state: EstimatorState, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!(
                "forgetting factor must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(ExpForgettingRls { state, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Estimator for ExpForgettingRls {
    fn name(&self) -> &str {
        "ef"
    }

    fn state(&self) -> &EstimatorState {
        &self.state
    }

    fn step(&mut self, sample: &RegressionSample) -> Result<()> {
        self.state = ef_step(&self.state, sample, self.lambda)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NoForgettingRls {
    state: EstimatorState,
}

impl NoForgettingRls {
    pub fn new(state: EstimatorState) -> Self {
        NoForgettingRls { state }
    }
}

impl Estimator for NoForgettingRls {
    fn name(&self) -> &str {
        "nf"
    }

    fn state(&self) -> &EstimatorState {
        &self.state
    }

    fn step(&mut self, sample: &RegressionSample) -> Result<()> {
        self.state = nf_step(&self.state, sample)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rel_diff, sym_eigvals};

    fn scalar_state() -> EstimatorState {
        EstimatorState::zeroed(1)
    }

    fn scalar_sample(phi: f64, y: f64) -> RegressionSample {
        RegressionSample::new(Matrix::from_element(1, 1, phi), Vector::from_element(1, y)).unwrap()
    }

    #[test]
    fn sample_shape_is_checked() {
        assert!(RegressionSample::new(Matrix::zeros(2, 3), Vector::zeros(3)).is_err());
        assert!(
            RegressionSample::new(Matrix::zeros(1, 1), Vector::from_element(1, f64::NAN)).is_err()
        );
    }

    #[test]
    fn config_validation() {
        assert!(SiftConfig::new(1.0, 1e-4, 0).is_err());
        assert!(SiftConfig::new(0.0, 1e-4, 0).is_err());
        assert!(SiftConfig::new(0.5, 0.0, 0).is_err());
        assert!(SiftConfig::new(0.5, 1e-4, 1).is_ok());
    }

    #[test]
    fn filter_zero_regressor() {
        let s = RegressionSample::new(Matrix::zeros(2, 3), Vector::zeros(2)).unwrap();
        let f = information_filter(&s, 0.3).unwrap();
        assert_eq!(f.q, 0);
        assert_eq!(f.phi_bar.shape(), (0, 3));
    }

    #[test]
    fn filter_diagonal_regressor() {
        let phi = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.1]);
        let s = RegressionSample::new(phi, Vector::from_vec(vec![3.0, -7.0])).unwrap();
        let f = information_filter(&s, 1.0).unwrap();
        assert_eq!(f.q, 1);
        // up to the sign of the kept singular vector
        let sign = f.phi_bar[(0, 0)].signum();
        assert!((f.phi_bar[(0, 0)] * sign - 2.0).abs() < 1e-15);
        assert!(f.phi_bar[(0, 1)].abs() < 1e-15);
        assert!((f.y_bar[0] * sign - 3.0).abs() < 1e-15);
    }

    #[test]
    fn filter_keeps_singular_value_equal_to_threshold() {
        let phi = Matrix::from_row_slice(1, 2, &[0.5, 0.0]);
        let s = RegressionSample::new(phi, Vector::zeros(1)).unwrap();
        assert_eq!(information_filter(&s, 0.25).unwrap().q, 1);
    }

    #[test]
    fn filter_tall_full_rank_keeps_everything() {
        let phi = Matrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let s = RegressionSample::new(phi.clone(), Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let f = information_filter(&s, 1e-4).unwrap();
        assert_eq!(f.q, 2);
        assert!(
            rel_diff(
                &(f.phi_bar.transpose() * &f.phi_bar),
                &(phi.transpose() * &phi)
            ) < 1e-14
        );
    }

    #[test]
    fn sift_scalar_example() {
        let cfg = SiftConfig::new(0.5, 0.25, 0).unwrap();
        let (next, trace) = sift_step(&scalar_state(), &scalar_sample(1.0, 2.0), &cfg).unwrap();
        assert_eq!(trace.filtered.q, 1);
        assert!((trace.r_bar[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((next.r[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((next.theta[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn sift_skips_uninformative_sample() {
        let cfg = SiftConfig::default();
        let state = EstimatorState::new(
            Vector::from_vec(vec![0.3, -1.0]),
            SymMatrix::from_diagonal(&[2.0, 5.0]),
        )
        .unwrap();
        let s = RegressionSample::new(
            Matrix::from_element(1, 2, 1e-3),
            Vector::from_element(1, 9.0),
        )
        .unwrap();
        let (next, trace) = sift_step(&state, &s, &cfg).unwrap();
        assert_eq!(trace.filtered.q, 0);
        assert_eq!(next.theta, state.theta);
        assert_eq!(next.r, state.r);
        assert_eq!(next.p, state.p);
    }

    #[test]
    fn sift_rejects_oversized_q_max() {
        let cfg = SiftConfig::new(0.5, 1e-4, 2).unwrap();
        assert!(matches!(
            sift_step(&scalar_state(), &scalar_sample(1.0, 1.0), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ef_scalar_example() {
        let next = ef_step(&scalar_state(), &scalar_sample(1.0, 2.0), 0.5).unwrap();
        assert!((next.r[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((next.theta[0] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ef_zero_regressor_only_forgets() {
        let state = EstimatorState::new(
            Vector::from_vec(vec![1.0, 2.0]),
            SymMatrix::from_diagonal(&[2.0, 4.0]),
        )
        .unwrap();
        let s = RegressionSample::new(Matrix::zeros(1, 2), Vector::from_element(1, 5.0)).unwrap();
        let next = ef_step(&state, &s, 0.8).unwrap();
        assert!(rel_diff(&next.r, &(state.r.as_matrix() * 0.8)) < 1e-15);
        assert_eq!(next.theta, state.theta);
    }

    #[test]
    fn nf_is_batch_mean() {
        let mut state = scalar_state();
        for k in 1..=50 {
            state = nf_step(&state, &scalar_sample(1.0, 1.0)).unwrap();
            let expected = k as f64 / (k as f64 + 1.0);
            assert!((state.theta[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn nf_spectra_are_monotone() {
        let mut state = EstimatorState::zeroed(3);
        let rows = [
            [1.0, 0.2, -0.5],
            [0.0, 1.5, 0.3],
            [0.4, -0.4, 0.9],
            [2.0, 0.0, 0.0],
        ];
        let mut prev_r = sym_eigvals(&state.r).unwrap();
        let mut prev_p = sym_eigvals(&state.p).unwrap();
        for (i, row) in rows.iter().cycle().take(20).enumerate() {
            let s = RegressionSample::new(
                Matrix::from_row_slice(1, 3, row),
                Vector::from_element(1, i as f64),
            )
            .unwrap();
            state = nf_step(&state, &s).unwrap();
            let er = sym_eigvals(&state.r).unwrap();
            let ep = sym_eigvals(&state.p).unwrap();
            for j in 0..3 {
                assert!(er[j] >= prev_r[j] - 1e-12);
                assert!(ep[j] <= prev_p[j] + 1e-12);
            }
            prev_r = er;
            prev_p = ep;
        }
    }

    #[test]
    fn error_factor_examples() {
        let state = EstimatorState::zeroed(3);
        let s = RegressionSample::new(Matrix::zeros(1, 3), Vector::zeros(1)).unwrap();
        let f = information_filter(&s, 1e-4).unwrap();
        assert_eq!(error_dynamics_factor(&state, &f), Matrix::identity(3, 3));

        let cfg = SiftConfig::new(0.5, 0.25, 0).unwrap();
        let (next, trace) = sift_step(&scalar_state(), &scalar_sample(1.0, 2.0), &cfg).unwrap();
        let a = error_dynamics_factor(&next, &trace.filtered);
        assert!((a[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trace_parts_sum_to_information() {
        let state = EstimatorState::new(
            Vector::zeros(3),
            SymMatrix::from_symmetric(Matrix::from_row_slice(
                3,
                3,
                &[3.0, 0.5, -0.2, 0.5, 2.0, 0.3, -0.2, 0.3, 1.5],
            ))
            .unwrap(),
        )
        .unwrap();
        let s = RegressionSample::new(
            Matrix::from_row_slice(2, 3, &[1.0, -1.0, 0.5, 0.2, 0.3, 2.0]),
            Vector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let (_, trace) = sift_step(&state, &s, &SiftConfig::default()).unwrap();
        let sum = trace.r_parallel.as_matrix() + trace.r_perp.as_matrix();
        assert!(rel_diff(&sum, &state.r) < 1e-14);
        assert!(sym_eigvals(&trace.r_bar).unwrap()[0] > 0.0);
    }
}
