//! Explicit eigenvalue certificates for the information and covariance
//! matrices, per-step monitors that check them, and the oblique-projection
//! update whose information matrix can degenerate.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorState, RegressionSample, SiftConfig, SiftStepTrace};
use crate::numerics::{compact_svd, sym_eigen, sym_eigvals, symmetrize, Matrix, SymMatrix};

/// Relative slack applied by the monitors.
pub const MON_TOL: f64 = 1e-9;
/// Relative threshold of the pseudoinverse in [`oblique_step`].
pub const PINV_TOL: f64 = 1e-12;

/// Excitation properties of a regressor sequence.
///
/// `alpha` lower-bounds `Σ φᵀφ` over every window of `window` steps, `beta`
/// upper-bounds each `φᵀφ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitationBounds {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsCertificate {
    pub r_min_lb: f64,
    pub p_max_ub: f64,
    pub r_max_ub: Option<f64>,
    pub p_min_lb: Option<f64>,
    pub kappa_ub: Option<f64>,
}

impl fmt::Display for BoundsCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda_min(R) >= {:e}", self.r_min_lb)?;
        writeln!(f, "lambda_max(P) <= {:e}", self.p_max_ub)?;
        if let Some(v) = self.r_max_ub {
            writeln!(f, "lambda_max(R) <= {v:e}")?;
        }
        if let Some(v) = self.p_min_lb {
            writeln!(f, "lambda_min(P) >= {v:e}")?;
        }
        if let Some(v) = self.kappa_ub {
            write!(f, "cond(phi_bar R phi_bar^T) <= {v:e}")?;
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Bounds that hold for every step of subspace-of-information forgetting,
/// without any excitation assumption; the upper ones need `beta`.
pub fn sift_certificate(
    cfg: &SiftConfig,
    r0: &SymMatrix,
    beta: Option<f64>,
) -> Result<BoundsCertificate> {
    let eig = sym_eigvals(r0)?;
    let (r0_min, r0_max) = (eig[0], eig[eig.len() - 1]);
    if r0_min <= 0.0 {
        return Err(Error::Domain("R₀ must be positive definite".into()));
    }
    let forget = 1.0 - cfg.lambda;
    let r_min_lb = (cfg.epsilon / forget).min(r0_min);
    let p_max_ub = (forget / cfg.epsilon).max(1.0 / r0_min);
    let mut cert = BoundsCertificate {
        r_min_lb,
        p_max_ub,
        r_max_ub: None,
        p_min_lb: None,
        kappa_ub: None,
    };
    if let Some(beta) = beta {
        positive("β", beta)?;
        let r_max_ub = (beta / forget).max(r0_max);
        cert.r_max_ub = Some(r_max_ub);
        cert.p_min_lb = Some((forget / beta).min(1.0 / r0_max));
        cert.kappa_ub = Some(beta * r_max_ub / (cfg.epsilon * r_min_lb));
    }
    Ok(cert)
}

/// Exponential-forgetting bounds under persistent excitation with window 1.
pub fn ef_certificate(
    lambda: f64,
    r0: &SymMatrix,
    excitation: &ExcitationBounds,
) -> Result<BoundsCertificate> {
    if excitation.window != 1 {
        return Err(Error::UnsupportedWindow(excitation.window));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!(
            "forgetting factor must lie in (0, 1), got {lambda}"
        )));
    }
    let alpha = excitation
        .alpha
        .ok_or_else(|| Error::Config("the lower information bound needs α".into()))?;
    positive("α", alpha)?;
    let eig = sym_eigvals(r0)?;
    let (r0_min, r0_max) = (eig[0], eig[eig.len() - 1]);
    if r0_min <= 0.0 {
        return Err(Error::Domain("R₀ must be positive definite".into()));
    }
    let forget = 1.0 - lambda;
    let r_min_lb = (alpha / forget).min(r0_min);
    let mut cert = BoundsCertificate {
        r_min_lb,
        p_max_ub: 1.0 / r_min_lb,
        r_max_ub: None,
        p_min_lb: None,
        kappa_ub: None,
    };
    if let Some(beta) = excitation.beta {
        positive("β", beta)?;
        let r_max_ub = (beta / forget).max(r0_max);
        cert.r_max_ub = Some(r_max_ub);
        cert.p_min_lb = Some(1.0 / r_max_ub);
    }
    Ok(cert)
}

/// `max_k λ_max(φ_kᵀ φ_k)`, the tightest regressor upper bound of a data set.
pub fn regressor_upper_bound<'a, I>(samples: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a RegressionSample>,
{
    let mut beta = 0.0_f64;
    for s in samples {
        if let Some(&smax) = compact_svd(&s.phi)?.sigma.first() {
            beta = beta.max(smax * smax);
        }
    }
    Ok(beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    InformationMin,
    InformationMax,
    CovarianceMin,
    CovarianceMax,
    InnerCondition,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::InformationMin => "lambda_min_R",
            BoundKind::InformationMax => "lambda_max_R",
            BoundKind::CovarianceMin => "lambda_min_P",
            BoundKind::CovarianceMax => "lambda_max_P",
            BoundKind::InnerCondition => "cond_inner",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub bound: BoundKind,
    pub bound_value: f64,
    pub observed: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn extend(&mut self, other: ViolationReport) {
        self.violations.extend(other.violations);
    }

    pub fn flags(&self, kind: BoundKind) -> bool {
        self.violations.iter().any(|v| v.bound == kind)
    }

    /// CSV with header `step,bound,bound_value,observed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(format!("writing violations: {e}"));
        w.write_record(["step", "bound", "bound_value", "observed"])
            .map_err(io)?;
        for v in &self.violations {
            w.write_record([
                v.step.to_string(),
                v.bound.as_str().to_string(),
                v.bound_value.to_string(),
                v.observed.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Io(format!("writing violations: {e}")))?;
        Ok(())
    }
}

/// Checks the certificate against `state` and, if given, against the inner
/// condition number of the step that produced it.
pub fn monitor_step(
    state: &EstimatorState,
    cert: &BoundsCertificate,
    trace: Option<&SiftStepTrace>,
) -> Result<ViolationReport> {
    let mut report = ViolationReport::default();
    let step = state.step;
    let mut flag = |bound, bound_value, observed| {
        report.violations.push(Violation {
            step,
            bound,
            bound_value,
            observed,
        })
    };

    let r = sym_eigvals(&state.r)?;
    let (r_min, r_max) = (r[0], r[r.len() - 1]);
    if r_min < cert.r_min_lb * (1.0 - MON_TOL) {
        flag(BoundKind::InformationMin, cert.r_min_lb, r_min);
    }
    if let Some(ub) = cert.r_max_ub {
        if r_max > ub * (1.0 + MON_TOL) {
            flag(BoundKind::InformationMax, ub, r_max);
        }
    }
    let p = sym_eigvals(&state.p)?;
    let (p_min, p_max) = (p[0], p[p.len() - 1]);
    if p_max > cert.p_max_ub * (1.0 + MON_TOL) {
        flag(BoundKind::CovarianceMax, cert.p_max_ub, p_max);
    }
    if let Some(lb) = cert.p_min_lb {
        if p_min < lb * (1.0 - MON_TOL) {
            flag(BoundKind::CovarianceMin, lb, p_min);
        }
    }
    if let (Some(ub), Some(kappa)) = (cert.kappa_ub, trace.and_then(|t| t.inner_condition)) {
        if kappa > ub * (1.0 + MON_TOL) {
            flag(BoundKind::InnerCondition, ub, kappa);
        }
    }
    Ok(report)
}

/// Checks that the nonzero eigenvalues of `R⊥` lie within the spectrum of
/// `R = R∥ + R⊥`; returns the worst excursion relative to `λ_max(R)`.
pub fn perp_spectrum_excursion(trace: &SiftStepTrace) -> Result<f64> {
    let r = symmetrize(&(trace.r_parallel.as_matrix() + trace.r_perp.as_matrix()))?;
    let er = sym_eigvals(&r)?;
    let (lo, hi) = (er[0], er[er.len() - 1]);
    let perp = sym_eigvals(&trace.r_perp)?;
    let keep = perp.len() - trace.filtered.q;
    let worst = perp[perp.len() - keep..]
        .iter()
        .map(|&v| (lo - v).max(v - hi).max(0.0))
        .fold(0.0_f64, f64::max);
    Ok(worst / hi)
}

/// Oblique-projection information update:
///
/// `R − (1−λ) R φᵀ (φ R φᵀ)⁺ φ R + φᵀ φ` when `‖φ‖₂ ≥ ε`, otherwise `R + φᵀ φ`.
pub fn oblique_step(r: &SymMatrix, phi: &Matrix, lambda: f64, epsilon: f64) -> Result<SymMatrix> {
    if phi.ncols() != r.dim() {
        return Err(Error::Shape(format!(
            "regressor has {} columns, information matrix is {1}x{1}",
            phi.ncols(),
            r.dim()
        )));
    }
    let info = phi.transpose() * phi;
    let norm = compact_svd(phi)?.sigma.first().copied().unwrap_or(0.0);
    if norm < epsilon {
        return symmetrize(&(r.as_matrix() + info));
    }
    let rp = r.as_matrix() * phi.transpose();
    let inner = symmetrize(&(phi * &rp))?;
    let (vals, vecs) = sym_eigen(&inner)?;
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let q = inner.dim();
    let mut pinv = Matrix::zeros(q, q);
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() > PINV_TOL * top {
            let col = vecs.column(i);
            pinv += col * col.transpose() / v;
        }
    }
    let forgotten = &rp * pinv * rp.transpose() * (1.0 - lambda);
    symmetrize(&(r.as_matrix() - forgotten + info))
}

/// Regressors `φ_k = diag(ε, λ^{(k+1)/2})` for `k < steps`, under which the
/// oblique update drives `λ_min(R_k)` to zero from `R₀ = diag(ε², 1)`.
pub fn degenerating_sequence(epsilon: f64, lambda: f64, steps: usize) -> Vec<Matrix> {
    (0..steps)
        .map(|k| {
            Matrix::from_row_slice(
                2,
                2,
                &[epsilon, 0.0, 0.0, lambda.powf((k as f64 + 1.0) / 2.0)],
            )
        })
        .collect()
}

pub fn degenerating_initial(epsilon: f64) -> SymMatrix {
    SymMatrix::from_diagonal(&[epsilon * epsilon, 1.0])
}

/// Closed form `R_k = diag(ε² Σ_{i=0}^{k} λⁱ, (k+1) λᵏ)` of that sequence.
pub fn degenerating_closed_form(epsilon: f64, lambda: f64, k: usize) -> SymMatrix {
    let geometric: f64 = (0..=k).map(|i| lambda.powi(i as i32)).sum();
    SymMatrix::from_diagonal(&[
        epsilon * epsilon * geometric,
        (k as f64 + 1.0) * lambda.powi(k as i32),
    ])
}

/// Runs [`oblique_step`] over [`degenerating_sequence`] and returns `R_0..=R_steps`.
pub fn run_oblique_counterexample(
    epsilon: f64,
    lambda: f64,
    steps: usize,
) -> Result<Vec<SymMatrix>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut r = degenerating_initial(epsilon);
    out.push(r.clone());
    for phi in degenerating_sequence(epsilon, lambda, steps) {
        r = oblique_step(&r, &phi, lambda, epsilon)?;
        out.push(r.clone());
    }
    Ok(out)
}
