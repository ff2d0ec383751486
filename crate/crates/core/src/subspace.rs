//! Subspace decomposition of a positive-definite matrix.
//!
//! For positive-definite `A` and a subspace `S` spanned by the columns of `v`,
//!
//! ```text
//! A∥S = A v (vᵀ A v)⁻¹ vᵀ A        A⊥S = A − A∥S
//! ```
//!
//! Both parts are positive semidefinite, `A∥S` acts like `A` on `S` and has
//! rank `dim S`, while `A⊥S` annihilates `S` and has rank `n − dim S`. The
//! result does not depend on the basis chosen for `S`.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, compact_svd, symmetrize, Matrix, SymMatrix, Vector};

/// Relative singular-value threshold below which a direction counts as rank deficient.
pub const RANK_TOL: f64 = 1e-8;
/// Relative eigenvalue slack for positive semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-10;

/// Basis `v` (n×p) of a subspace, with linearly independent columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    v: Matrix,
}

impl SubspaceBasis {
    pub fn new(v: Matrix) -> Result<Self> {
        check_finite(&v, "subspace basis")?;
        let (n, p) = v.shape();
        if p == 0 || p > n {
            return Err(Error::Domain(format!(
                "subspace dimension must lie in 1..={n}, got {p}"
            )));
        }
        let sigma = compact_svd(&v)?.sigma;
        let smax = sigma[0];
        let smin = sigma[sigma.len() - 1];
        if smax == 0.0 || smin <= RANK_TOL * smax {
            return Err(Error::RankDeficient(format!(
                "basis columns are not independent (σ_min/σ_max = {:e})",
                if smax == 0.0 { 0.0 } else { smin / smax }
            )));
        }
        Ok(SubspaceBasis { v })
    }

    /// Basis spanned by the rows of `m` (its columns are `mᵀ`).
    pub fn from_row_space(m: &Matrix) -> Result<Self> {
        Self::new(m.transpose())
    }

    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn ambient_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub parallel: SymMatrix,
    pub orthogonal: SymMatrix,
    pub subspace_dim: usize,
}

fn check_dims(a: &SymMatrix, s: &SubspaceBasis) -> Result<()> {
    if a.dim() != s.ambient_dim() {
        return Err(Error::Shape(format!(
            "matrix is {0}x{0} but basis lives in R^{1}",
            a.dim(),
            s.ambient_dim()
        )));
    }
    Ok(())
}

/// Splits `a` into the parts parallel and orthogonal to the span of `s`.
pub fn decompose(a: &SymMatrix, s: &SubspaceBasis) -> Result<Decomposition> {
    check_dims(a, s)?;
    let n = a.dim();
    let p = s.dim();
    if Cholesky::new(a.as_matrix().clone()).is_none() {
        return Err(Error::Domain("matrix is not positive definite".into()));
    }
    let av = a.as_matrix() * s.matrix();
    let gram = symmetrize(&(s.matrix().transpose() * &av))?;
    let chol = Cholesky::new(gram.into_matrix())
        .ok_or_else(|| Error::RankDeficient("vᵀAv is singular; basis is not independent".into()))?;
    let parallel = symmetrize(&(&av * chol.solve(&av.transpose())))?;
    let orthogonal = if p == n {
        SymMatrix::zeros(n)
    } else {
        symmetrize(&(a.as_matrix() - parallel.as_matrix()))?
    };
    Ok(Decomposition {
        parallel,
        orthogonal,
        subspace_dim: p,
    })
}

/// `⟨x, y⟩_A = xᵀ A y`.
pub fn a_inner_product(x: &Vector, y: &Vector, a: &SymMatrix) -> Result<f64> {
    if x.len() != a.dim() || y.len() != a.dim() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {} against a {2}x{2} matrix",
            x.len(),
            y.len(),
            a.dim()
        )));
    }
    Ok(x.dot(&(a.as_matrix() * y)))
}

/// Basis of `{x : ⟨x, y⟩_A = 0 for all y ∈ S}`, i.e. the null space of `vᵀA`.
///
/// Returns `None` when `S` is the whole space.
pub fn orthogonal_complement_basis(
    s: &SubspaceBasis,
    a: &SymMatrix,
) -> Result<Option<SubspaceBasis>> {
    check_dims(a, s)?;
    let n = s.ambient_dim();
    let p = s.dim();
    if p == n {
        return Ok(None);
    }
    // Pad vᵀA with zero rows so the SVD returns all n right singular vectors.
    let vta = s.matrix().transpose() * a.as_matrix();
    let mut padded = Matrix::zeros(n, n);
    padded.rows_mut(0, p).copy_from(&vta);
    let svd = crate::numerics::compact_svd_with_v(&padded)?;
    let v = svd.v.expect("requested right singular vectors");
    let w = v.columns(p, n - p).into_owned();
    SubspaceBasis::new(w).map(Some)
}

/// Numerical rank with the relative [`RANK_TOL`] threshold.
pub fn numerical_rank(m: &Matrix) -> Result<usize> {
    let sigma = compact_svd(m)?.sigma;
    let Some(&smax) = sigma.first() else {
        return Ok(0);
    };
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sigma.iter().filter(|&&x| x > RANK_TOL * smax).count())
}

/// Checks whether `candidate` is symmetric, has rank `dim S` and agrees with
/// `a` on a basis of `S`. Such a matrix is necessarily `decompose(a, s).parallel`.
pub fn verify_uniqueness(a: &SymMatrix, s: &SubspaceBasis, candidate: &Matrix) -> bool {
    if a.dim() != s.ambient_dim() || candidate.shape() != (a.dim(), a.dim()) {
        return false;
    }
    if candidate.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let scale = candidate.norm().max(a.norm());
    if (candidate - candidate.transpose()).norm() > 1e-10 * scale {
        return false;
    }
    match numerical_rank(candidate) {
        Ok(r) if r == s.dim() => {}
        _ => return false,
    }
    let av = a.as_matrix() * s.matrix();
    let cv = candidate * s.matrix();
    s.matrix().column_iter().enumerate().all(|(j, _)| {
        let target = av.column(j);
        (cv.column(j) - target).norm() <= 1e-9 * target.norm().max(f64::MIN_POSITIVE)
    })
}
