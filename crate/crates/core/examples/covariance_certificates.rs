//! Computes a priori eigenvalue bounds for the information and covariance
//! matrices and monitors them along a run.
//!
//! The subspace-forgetting bounds need no excitation assumption; the
//! exponential-forgetting bounds need persistent excitation, so the second
//! half feeds square full-rank regressors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sift_rls::bounds::{
    ef_certificate, monitor_step, regressor_upper_bound, sift_certificate, ExcitationBounds,
};
use sift_rls::harness::{generate_scenario, simulate, ScenarioConfig};
use sift_rls::numerics::{sym_eigvals, Matrix, Vector};
use sift_rls::{
    Estimator, EstimatorState, ExpForgettingRls, RegressionSample, SiftConfig, SiftRls, SymMatrix,
};

fn main() -> sift_rls::Result<()> {
    let samples = generate_scenario(&ScenarioConfig::default())?;
    let cfg = SiftConfig::default();
    let beta = regressor_upper_bound(&samples)?;
    let cert = sift_certificate(&cfg, &SymMatrix::identity(4), Some(beta))?;
    println!("benchmark, beta = {beta:.3}:\n{cert}\n");

    let mut est = SiftRls::new(EstimatorState::zeroed(4), cfg);
    let run = simulate(&mut est, &samples, Some(&cert))?;
    let rho = run.trajectory.rho_p.iter().copied().fold(0.0, f64::max);
    println!(
        "{} states monitored, {} violations, max rho(P) = {rho:.1} of at most {}",
        run.trajectory.len(),
        run.violations.len(),
        cert.p_max_ub
    );

    // diagonal regressors with entries in [1, 2] give alpha = 1, beta = 4
    let lambda = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let exc = ExcitationBounds {
        alpha: Some(1.0),
        beta: Some(4.0),
        window: 1,
    };
    let r0 = SymMatrix::from_diagonal(&[0.5, 50.0]);
    let cert = ef_certificate(lambda, &r0, &exc)?;
    println!("\nexponential forgetting, lambda = {lambda}:\n{cert}");
    let mut ef = ExpForgettingRls::new(EstimatorState::new(Vector::zeros(2), r0)?, lambda)?;
    let mut violations = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for _ in 0..300 {
        let phi = Matrix::from_diagonal(&Vector::from_fn(2, |_, _| rng.gen_range(1.0..2.0)));
        ef.step(&RegressionSample::new(phi, Vector::zeros(2))?)?;
        violations += monitor_step(ef.state(), &cert, None)?.len();
        let e = sym_eigvals(ef.information())?;
        lo = lo.min(e[0]);
        hi = hi.max(e[1]);
    }
    println!("observed lambda(R) in [{lo:.3}, {hi:.3}], {violations} violations");
    Ok(())
}
