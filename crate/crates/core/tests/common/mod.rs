#![allow(dead_code)]

use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sift_rls::{Matrix, SymMatrix, Vector};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `G Gᵀ / n + c I` with `c` drawn from `[0.05, 1)`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let g = gaussian(rng, n, n);
    let c = rng.gen_range(0.05..1.0);
    let m = &g * g.transpose() / n as f64 + Matrix::identity(n, n) * c;
    SymMatrix::from_symmetric((&m + m.transpose()) * 0.5).unwrap()
}

/// Ascending eigenvalues straight from nalgebra.
pub fn eigvals(m: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new((m + m.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn rank(m: &Matrix, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel * top).count(),
        _ => 0,
    }
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `A v (vᵀ A v)⁻¹ vᵀ A` formed as `(A u)(A u)ᵀ` with `u = v L⁻ᵀ`, `vᵀ A v = L Lᵀ`.
pub fn parallel_oracle(a: &Matrix, v: &Matrix) -> Matrix {
    let gram = v.transpose() * a * v;
    let l = Cholesky::new((&gram + gram.transpose()) * 0.5).unwrap().l();
    // u Lᵀ = v  ⇔  L uᵀ = vᵀ
    let ut = l.solve_lower_triangular(&v.transpose()).unwrap();
    let au = a * ut.transpose();
    &au * au.transpose()
}

/// Euclidean orthogonal complement of the columns of `v`.
pub fn euclidean_complement(v: &Matrix) -> Matrix {
    let n = v.nrows();
    let proj =
        Matrix::identity(n, n) - v * (v.transpose() * v).try_inverse().unwrap() * v.transpose();
    let eig = SymmetricEigen::new((&proj + proj.transpose()) * 0.5);
    let cols: Vec<_> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0.5)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    Matrix::from_columns(&cols)
}
