//! Dense linear-algebra substrate.
//!
//! Thin contracts over `nalgebra`: ordered compact SVD, ascending symmetric
//! eigenvalues, condition numbers, exact symmetrization and the two rank-`q`
//! matrix-inversion-lemma covariance updates used by the estimators.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative reconstruction tolerance of [`compact_svd`].
pub const TOL_SVD: f64 = 1e-10;
/// Orthonormality tolerance of the left singular vectors.
pub const TOL_ORTH: f64 = 1e-10;

const MAX_ITER: usize = 10_000;

/// Factorization accuracy targets. Defaults are [`TOL_SVD`] and [`TOL_ORTH`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub svd: f64,
    pub orth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            svd: TOL_SVD,
            orth: TOL_ORTH,
        }
    }
}

/// Square matrix whose `(i, j)` and `(j, i)` entries are bitwise equal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(Matrix::from_diagonal(&Vector::from_row_slice(diag)))
    }

    /// Wraps `m` if it is square, finite and exactly symmetric.
    pub fn from_symmetric(m: Matrix) -> Result<Self> {
        check_finite(&m, "symmetric matrix")?;
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    /// Inverse through a Cholesky factorization; fails unless positive definite.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let chol = Cholesky::new(self.0.clone()).ok_or_else(|| {
            Error::NumericalFailure("matrix is not numerically positive definite".into())
        })?;
        symmetrize(&chol.inverse())
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Compact SVD with singular values in descending order.
///
/// `u` has `min(rows, cols)` columns. `v` is only present when requested
/// through [`compact_svd_with_v`].
#[derive(Clone, Debug)]
pub struct CompactSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Option<Matrix>,
}

impl CompactSvd {
    /// `U diag(sigma) Vᵀ`; `None` when `v` was not computed.
    pub fn reconstruct(&self) -> Option<Matrix> {
        let v = self.v.as_ref()?;
        let s = Matrix::from_diagonal(&Vector::from_column_slice(&self.sigma));
        Some(&self.u * s * v.transpose())
    }
}

pub(crate) fn check_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn svd_impl(m: &Matrix, want_v: bool) -> Result<CompactSvd> {
    check_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(CompactSvd {
            u: Matrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: want_v.then(|| Matrix::zeros(cols, 0)),
        });
    }
    let svd = SVD::try_new(m.clone(), true, want_v, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd
        .u
        .ok_or_else(|| Error::NumericalFailure("SVD returned no left vectors".into()))?;
    let v = match (want_v, svd.v_t) {
        (true, Some(vt)) => Some(vt.transpose()),
        (true, None) => {
            return Err(Error::NumericalFailure(
                "SVD returned no right vectors".into(),
            ))
        }
        (false, _) => None,
    };
    Ok(CompactSvd {
        u,
        sigma: svd.singular_values.iter().copied().collect(),
        v,
    })
}

/// Compact SVD without right singular vectors.
pub fn compact_svd(m: &Matrix) -> Result<CompactSvd> {
    svd_impl(m, false)
}

pub fn compact_svd_with_v(m: &Matrix) -> Result<CompactSvd> {
    svd_impl(m, true)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigvals(a: &SymMatrix) -> Result<Vec<f64>> {
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Eigenpairs sorted by ascending eigenvalue; eigenvectors are columns.
pub fn sym_eigen(a: &SymMatrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

pub fn spectral_radius(a: &SymMatrix) -> Result<f64> {
    let vals = sym_eigvals(a)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// `λ_max / λ_min` of a positive-semidefinite matrix, `+∞` when singular.
///
/// Eigenvalues below `-1e-10·max(1, λ_max)` are rejected as a domain error.
pub fn condition_number(a: &SymMatrix) -> Result<f64> {
    let vals = sym_eigvals(a)?;
    let (Some(&lo), Some(&hi)) = (vals.first(), vals.last()) else {
        return Err(Error::Shape("condition number of an empty matrix".into()));
    };
    if lo < -1e-10 * hi.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "matrix is not positive semidefinite (smallest eigenvalue {lo:e})"
        )));
    }
    if lo <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

/// `½(a + aᵀ)`, with the upper triangle mirrored so the result is exactly symmetric.
pub fn symmetrize(a: &Matrix) -> Result<SymMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "cannot symmetrize a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "symmetrize input")?;
    let n = a.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = a[(i, i)];
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(SymMatrix(out))
}

/// Solves `m X = b` for a symmetric positive-definite `m`.
pub(crate) fn spd_solve(m: &Matrix, b: &Matrix, what: &str) -> Result<Matrix> {
    let m = symmetrize(m)?;
    let chol = Cholesky::new(m.into_matrix()).ok_or_else(|| {
        Error::NumericalFailure(format!("{what} is not numerically positive definite"))
    })?;
    Ok(chol.solve(b))
}

/// Which matrix-inversion-lemma update [`mil_rank_q_update`] applies.
#[derive(Clone, Copy, Debug)]
pub enum MilUpdate<'a> {
    /// Forgetting inside the row space of `phi_bar`:
    /// `P + (1−λ)/λ · φ̄ᵀ (L φ̄ᵀ)⁻¹ φ̄` with `L = φ̄ R` supplied by the caller.
    Sifting { lambda: f64, phi_r: &'a Matrix },
    /// Measurement update `P − M ᵀ(I + M φ̄ᵀ)⁻¹ M` with `M = φ̄ P`.
    Measurement,
}

/// Rank-`q` covariance update without forming or inverting the information matrix.
pub fn mil_rank_q_update(
    p: &SymMatrix,
    phi_bar: &Matrix,
    update: MilUpdate<'_>,
) -> Result<SymMatrix> {
    let n = p.dim();
    if phi_bar.ncols() != n {
        return Err(Error::Shape(format!(
            "regressor has {} columns, covariance is {n}x{n}",
            phi_bar.ncols()
        )));
    }
    let q = phi_bar.nrows();
    if q == 0 {
        return Ok(p.clone());
    }
    match update {
        MilUpdate::Sifting { lambda, phi_r } => {
            if phi_r.shape() != phi_bar.shape() {
                return Err(Error::Shape(format!(
                    "cached product is {}x{}, expected {q}x{n}",
                    phi_r.nrows(),
                    phi_r.ncols()
                )));
            }
            let inner = phi_r * phi_bar.transpose();
            let x = spd_solve(&inner, phi_bar, "φ̄ R φ̄ᵀ")?;
            let coef = (1.0 - lambda) / lambda;
            symmetrize(&(p.as_matrix() + phi_bar.transpose() * x * coef))
        }
        MilUpdate::Measurement => {
            let m = phi_bar * p.as_matrix();
            let inner = Matrix::identity(q, q) + &m * phi_bar.transpose();
            let x = spd_solve(&inner, &m, "I + φ̄ P φ̄ᵀ")?;
            symmetrize(&(p.as_matrix() - m.transpose() * x))
        }
    }
}

/// Frobenius-norm relative difference `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
