//! The covariance can be updated through the matrix inversion lemma (cheap
//! for small filtered ranks) or by inverting the information matrix. Both
//! paths give the same estimates; `q_max` only chooses between them.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sift_rls::estimators::sift_step;
use sift_rls::numerics::rel_diff;
use sift_rls::{EstimatorState, Matrix, RegressionSample, SiftConfig, Vector};

fn main() -> sift_rls::Result<()> {
    let (n, p, steps) = (30, 2, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<RegressionSample> = (0..steps)
        .map(|_| {
            let phi = Matrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
            let y = Vector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            RegressionSample::new(phi, y)
        })
        .collect::<sift_rls::Result<_>>()?;

    let mut finals = Vec::new();
    for q_max in [0, p] {
        let cfg = SiftConfig::new(0.9, 1e-4, q_max)?;
        let mut state = EstimatorState::zeroed(n);
        let start = Instant::now();
        for s in &samples {
            state = sift_step(&state, s, &cfg)?.0;
        }
        println!(
            "q_max = {q_max}: {steps} steps with n = {n} in {:?}",
            start.elapsed()
        );
        finals.push(state);
    }
    println!(
        "final covariance relative gap {:.1e}, coherence |RP - I| = {:.1e}",
        rel_diff(finals[1].p.as_matrix(), finals[0].p.as_matrix()),
        finals[1].coherence_error()
    );
    Ok(())
}
