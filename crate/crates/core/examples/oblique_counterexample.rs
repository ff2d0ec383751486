//! Contrasts the oblique-projection information update, whose smallest
//! information eigenvalue decays to zero on a constructed regressor
//! sequence, with subspace-of-information forgetting on the same sequence.

use sift_rls::bounds::{
    degenerating_closed_form, degenerating_initial, degenerating_sequence,
    run_oblique_counterexample,
};
use sift_rls::estimators::sift_step;
use sift_rls::numerics::sym_eigvals;
use sift_rls::{EstimatorState, RegressionSample, SiftConfig, Vector};

fn main() -> sift_rls::Result<()> {
    let (eps, lambda, steps) = (0.0625, 0.95, 400);
    let oblique = run_oblique_counterexample(eps, lambda, steps)?;

    // same regressors; keeping singular values ≥ √(ε²) = ε retains both directions while they are large
    let cfg = SiftConfig::new(lambda, eps * eps, 0)?;
    let mut state = EstimatorState::new(Vector::zeros(2), degenerating_initial(eps))?;
    let mut sift = vec![state.r.clone()];
    for phi in degenerating_sequence(eps, lambda, steps) {
        state = sift_step(&state, &RegressionSample::new(phi, Vector::zeros(2))?, &cfg)?.0;
        sift.push(state.r.clone());
    }

    println!(
        "{:>4} {:>14} {:>14} {:>14}",
        "k", "oblique", "closed form", "sift"
    );
    for k in (0..=steps).step_by(25) {
        let closed = degenerating_closed_form(eps, lambda, k);
        println!(
            "{k:>4} {:>14.6e} {:>14.6e} {:>14.6e}",
            sym_eigvals(&oblique[k])?[0],
            closed[(0, 0)].min(closed[(1, 1)]),
            sym_eigvals(&sift[k])?[0]
        );
    }
    Ok(())
}
