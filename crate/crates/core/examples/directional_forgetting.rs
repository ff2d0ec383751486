//! One forgetting step seen through the subspace decomposition: exponential
//! forgetting shrinks all of `R`, subspace-of-information forgetting only
//! the part parallel to the regressor's row space.

use sift_rls::estimators::{ef_step, sift_step};
use sift_rls::numerics::rel_diff;
use sift_rls::subspace::{decompose, orthogonal_complement_basis, SubspaceBasis};
use sift_rls::{EstimatorState, Matrix, RegressionSample, SiftConfig, SymMatrix, Vector};

fn main() -> sift_rls::Result<()> {
    let r = SymMatrix::from_symmetric(Matrix::from_row_slice(
        3,
        3,
        &[3.0, 0.5, 0.2, 0.5, 2.0, 0.3, 0.2, 0.3, 1.0],
    ))?;
    let state = EstimatorState::new(Vector::zeros(3), r.clone())?;
    let phi = Matrix::from_row_slice(1, 3, &[1.0, -1.0, 0.5]);
    let sample = RegressionSample::new(phi.clone(), Vector::from_element(1, 1.0))?;
    let cfg = SiftConfig::new(0.5, 1e-4, 1)?;

    let (next, trace) = sift_step(&state, &sample, &cfg)?;
    let ef = ef_step(&state, &sample, cfg.lambda)?;

    let s = SubspaceBasis::from_row_space(&phi)?;
    let dec = decompose(&r, &s)?;
    println!(
        "trace matches decomposition: parallel gap {:.1e}, orthogonal gap {:.1e}",
        rel_diff(trace.r_parallel.as_matrix(), dec.parallel.as_matrix()),
        rel_diff(trace.r_perp.as_matrix(), dec.orthogonal.as_matrix())
    );

    // directions R-orthogonal to the regressor keep their information untouched
    let w = orthogonal_complement_basis(&s, &r)?.expect("proper subspace");
    for (i, x) in w.matrix().column_iter().enumerate() {
        let before = r.as_matrix() * x;
        let sifted = trace.r_bar.as_matrix() * x;
        let exp = (r.as_matrix() * cfg.lambda) * x;
        println!(
            "complement direction {i}: |R̄x - Rx| = {:.1e}, |λRx - Rx| = {:.3}",
            (sifted - &before).norm(),
            (exp - &before).norm()
        );
    }
    println!("information after the step (sift):\n{}", next.r.as_matrix());
    println!("information after the step (ef):\n{}", ef.r.as_matrix());
    Ok(())
}
