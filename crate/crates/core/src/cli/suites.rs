//! Headless invariant suites behind `sift-rls verify`.

use std::io::Write;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{
    degenerating_closed_form, degenerating_initial, degenerating_sequence, monitor_step,
    regressor_upper_bound, run_oblique_counterexample, sift_certificate, BoundKind,
};
use crate::error::{Error, Result};
use crate::estimators::{
    ef_step, sift_step, EstimatorState, RegressionSample, SiftConfig, SiftRls,
};
use crate::harness::{generate_scenario, simulate, ScenarioConfig};
use crate::numerics::{rel_diff, sym_eigen, sym_eigvals, symmetrize, Matrix, SymMatrix, Vector};
use crate::subspace::{
    decompose, numerical_rank, orthogonal_complement_basis, verify_uniqueness, SubspaceBasis,
};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Properties of the parallel/orthogonal split of positive-definite matrices.
    Decomposition,
    /// Full-rank regressors make the subspace step an exponential-forgetting step.
    Degeneration,
    /// Covariance certificate on the benchmark, plus a corrupted-state control.
    Monitor,
    /// Inversion-lemma and direct-inversion updates agree.
    Paths,
    /// Noiseless estimation error decays and stays within its certificate.
    Stability,
    /// Oblique-projection update loses its lower information bound.
    Counterexample,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Decomposition => "decomposition",
            Suite::Degeneration => "degeneration",
            Suite::Monitor => "monitor",
            Suite::Paths => "paths",
            Suite::Stability => "stability",
            Suite::Counterexample => "counterexample",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Feed a state violating the lower information bound to the monitor.
    pub inject_perturbation: bool,
    /// Print the per-step trace of the counterexample.
    pub print_trace: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions, out: &mut dyn Write) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (suite as u64).wrapping_mul(0x9e37_79b9));
    let (passed, detail) = match suite {
        Suite::Decomposition => decomposition(&mut rng)?,
        Suite::Degeneration => degeneration(&mut rng)?,
        Suite::Monitor => monitor(opts)?,
        Suite::Paths => paths(&mut rng)?,
        Suite::Stability => stability(&mut rng)?,
        Suite::Counterexample => counterexample(opts, out)?,
    };
    Ok(SuiteOutcome {
        suite,
        passed,
        detail,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let g = gaussian(rng, n, n);
    symmetrize(&(&g * g.transpose() / n as f64 + Matrix::identity(n, n) * 0.1)).expect("square")
}

fn vec_gap(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn min_singular(m: &Matrix) -> f64 {
    crate::numerics::compact_svd(m)
        .map(|s| s.sigma.last().copied().unwrap_or(0.0))
        .unwrap_or(0.0)
}

fn full_rank_regressor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, floor: f64) -> Matrix {
    loop {
        let phi = gaussian(rng, rows, cols);
        if min_singular(&phi) >= floor {
            return phi;
        }
    }
}

fn decomposition(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const CASES: usize = 100;
    let mut failures = 0;
    for _ in 0..CASES {
        let n = rng.gen_range(1..=6);
        let p = rng.gen_range(1..=n);
        let a = random_spd(rng, n);
        let s = SubspaceBasis::new(gaussian(rng, n, p))?;
        let dec = decompose(&a, &s)?;
        let ea = sym_eigvals(&a)?;
        let (lo, hi) = (ea[0], ea[n - 1]);
        let mut ok = true;

        let psd = |m: &SymMatrix| sym_eigvals(m).map(|v| v[0] >= -1e-10 * hi);
        ok &= psd(&dec.parallel)? && psd(&dec.orthogonal)?;
        ok &= numerical_rank(&dec.parallel)? == p;
        ok &= numerical_rank(&dec.orthogonal)? == n - p;
        ok &= rel_diff(
            &(dec.parallel.as_matrix() * s.matrix()),
            &(a.as_matrix() * s.matrix()),
        ) <= 1e-9;

        let mix = gaussian(rng, p, p) + Matrix::identity(p, p) * 3.0;
        let other = SubspaceBasis::new(s.matrix() * mix)?;
        ok &= rel_diff(
            decompose(&a, &other)?.parallel.as_matrix(),
            dec.parallel.as_matrix(),
        ) <= 1e-8;
        ok &= verify_uniqueness(&a, &s, dec.parallel.as_matrix());

        if let Some(w) = orthogonal_complement_basis(&s, &a)? {
            let dual = decompose(&a, &w)?;
            ok &= rel_diff(dual.parallel.as_matrix(), dec.orthogonal.as_matrix()) <= 1e-8;
            let perp = sym_eigvals(&dec.orthogonal)?;
            ok &= perp[p..]
                .iter()
                .all(|&v| v >= lo - 1e-9 * hi && v <= hi * (1.0 + 1e-9));
        }
        if !ok {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!("{failures}/{CASES} random instances failed"),
    ))
}

fn degeneration(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const CASES: usize = 50;
    let epsilon: f64 = 1e-4;
    let mut worst = 0.0_f64;
    for _ in 0..CASES {
        let n = rng.gen_range(1..=5);
        let p = rng.gen_range(n..=n + 2);
        let lambda = rng.gen_range(0.3..0.99);
        let state = EstimatorState::new(
            Vector::from_fn(n, |_, _| StandardNormal.sample(rng)),
            random_spd(rng, n),
        )?;
        let phi = full_rank_regressor(rng, p, n, epsilon.sqrt());
        let sample =
            RegressionSample::new(phi, Vector::from_fn(p, |_, _| StandardNormal.sample(rng)))?;
        let (sift, _) = sift_step(&state, &sample, &SiftConfig::new(lambda, epsilon, 0)?)?;
        let ef = ef_step(&state, &sample, lambda)?;
        worst = worst
            .max(vec_gap(&sift.theta, &ef.theta))
            .max(rel_diff(sift.r.as_matrix(), ef.r.as_matrix()))
            .max(rel_diff(sift.p.as_matrix(), ef.p.as_matrix()));
    }
    Ok((
        worst <= 1e-9,
        format!("max relative gap {worst:.2e} over {CASES} steps"),
    ))
}

/// State whose smallest information eigenvalue is half of `floor`.
fn corrupted(state: &EstimatorState, floor: f64) -> Result<EstimatorState> {
    let (vals, vecs) = sym_eigen(&state.r)?;
    let u = vecs.column(0);
    let r = symmetrize(&(state.r.as_matrix() + (floor / 2.0 - vals[0]) * u * u.transpose()))?;
    let p = r.inverse_pd()?;
    Ok(EstimatorState {
        r,
        p,
        ..state.clone()
    })
}

fn monitor(opts: &VerifyOptions) -> Result<(bool, String)> {
    let samples = generate_scenario(&ScenarioConfig::with_seed(opts.seed))?;
    let cfg = SiftConfig::default();
    let n = samples[0].cols();
    let mut est = SiftRls::new(EstimatorState::zeroed(n), cfg);
    let beta = regressor_upper_bound(&samples)?;
    let cert = sift_certificate(&cfg, &SymMatrix::identity(n), Some(beta))?;
    let mut run = simulate(&mut est, &samples, Some(&cert))?;

    let bad = corrupted(crate::estimators::Estimator::state(&est), cert.r_min_lb)?;
    let control = monitor_step(&bad, &cert, None)?;
    let control_flagged = control.flags(BoundKind::InformationMin);
    if opts.inject_perturbation {
        run.violations.extend(control);
    }
    let passed = run.violations.is_empty() && control_flagged;
    Ok((
        passed,
        format!(
            "{} violations over {} states, corrupted control {}",
            run.violations.len(),
            run.trajectory.len(),
            if control_flagged { "flagged" } else { "missed" }
        ),
    ))
}

fn paths(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const RUNS: usize = 5;
    const STEPS: usize = 100;
    let mut worst = 0.0_f64;
    for _ in 0..RUNS {
        let n = rng.gen_range(2..=6);
        let p = rng.gen_range(1..=3);
        let lambda = rng.gen_range(0.3..0.99);
        let direct = SiftConfig::new(lambda, 1e-4, 0)?;
        let mil = SiftConfig::new(lambda, 1e-4, p.min(n))?;
        let mut a = EstimatorState::zeroed(n);
        let mut b = a.clone();
        for _ in 0..STEPS {
            let mut phi = gaussian(rng, p, n);
            // weak rows exercise partial ranks, zero regressors the no-op path
            match rng.gen_range(0..10) {
                0 => phi.fill(0.0),
                1..=3 => phi.row_mut(0).scale_mut(1e-3),
                _ => {}
            }
            let y = Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
            let sample = RegressionSample::new(phi, y)?;
            a = sift_step(&a, &sample, &direct)?.0;
            b = sift_step(&b, &sample, &mil)?.0;
            worst = worst
                .max(vec_gap(&b.theta, &a.theta))
                .max(rel_diff(b.r.as_matrix(), a.r.as_matrix()))
                .max(rel_diff(b.p.as_matrix(), a.p.as_matrix()));
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max relative gap {worst:.2e} over {} steps", RUNS * STEPS),
    ))
}

fn stability(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    const STEPS: usize = 200;
    let (n, p) = (4, 2);
    let cfg = SiftConfig::default();
    let truth = Vector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let samples = (0..STEPS)
        .map(|_| {
            RegressionSample::exact(full_rank_regressor(rng, p, n, cfg.epsilon.sqrt()), &truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut est = SiftRls::new(EstimatorState::zeroed(n), cfg);
    let run = simulate(&mut est, &samples, None)?;
    let errors: Vec<f64> = run
        .trajectory
        .thetas
        .iter()
        .map(|t| (t - &truth).norm())
        .collect();

    let e0 = errors[0];
    let smallest = errors.iter().copied().fold(f64::INFINITY, f64::min);
    // exact zeros count as reaching round-off
    let decades = (e0 / smallest.max(e0 * f64::EPSILON)).log10();
    let rate = fitted_rate(&errors);
    let beta = regressor_upper_bound(&samples)?;
    let cert = sift_certificate(&cfg, &SymMatrix::identity(n), Some(beta))?;
    let c0 = (cert.r_max_ub.expect("beta given") / cert.r_min_lb).sqrt();
    let bounded = errors.iter().all(|&e| e <= c0 * e0 * (1.0 + 1e-9));
    Ok((
        decades >= 2.0 && rate < 1.0 && bounded,
        format!("{decades:.1} decades, fitted rate {rate:.3}, max error within {c0:.3e}·|e0|: {bounded}"),
    ))
}

/// Per-step factor `exp(slope)` of a least-squares line through `ln e_k`,
/// restricted to the steps above the round-off floor.
pub(crate) fn fitted_rate(errors: &[f64]) -> f64 {
    let floor = errors[0] * 1e-12;
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .take_while(|(_, &e)| e > floor)
        .map(|(k, &e)| (k as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        // dropped below the floor within a step
        return 0.0;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    (sxy / sxx).exp()
}

/// Counterexample parameters: `λ_min` crosses `GAMMA` before the
/// pseudoinverse threshold starts discarding the decaying direction.
pub const COUNTER_EPSILON: f64 = 0.0625;
pub const COUNTER_LAMBDA: f64 = 0.95;
pub const COUNTER_STEPS: usize = 400;
pub const COUNTER_GAMMA: f64 = 1e-6;

/// First `k` at which the closed form's smallest eigenvalue is below `gamma`.
pub fn predicted_crossing(epsilon: f64, lambda: f64, gamma: f64, steps: usize) -> Option<usize> {
    (0..=steps).find(|&k| {
        let d = degenerating_closed_form(epsilon, lambda, k);
        d[(0, 0)].min(d[(1, 1)]) < gamma
    })
}

fn counterexample(opts: &VerifyOptions, out: &mut dyn Write) -> Result<(bool, String)> {
    let (eps, lam) = (COUNTER_EPSILON, COUNTER_LAMBDA);
    let states = run_oblique_counterexample(eps, lam, COUNTER_STEPS)?;
    let mut closed_gap = 0.0_f64;
    for (k, r) in states.iter().enumerate().take(201) {
        let c = degenerating_closed_form(eps, lam, k);
        for i in 0..2 {
            closed_gap = closed_gap.max((r[(i, i)] - c[(i, i)]).abs() / c[(i, i)]);
        }
        closed_gap = closed_gap.max(r[(0, 1)].abs() / c[(0, 0)]);
    }
    let oblique_min = states
        .iter()
        .map(|r| sym_eigvals(r).map(|v| v[0]))
        .collect::<Result<Vec<_>>>()?;
    let predicted = predicted_crossing(eps, lam, COUNTER_GAMMA, COUNTER_STEPS);
    let observed = oblique_min.iter().position(|&v| v < COUNTER_GAMMA);

    // SIFt keeps singular values ≥ √ε', so ε' = ε² retains the first direction
    let eps_sift = eps * eps;
    let cfg = SiftConfig::new(lam, eps_sift, 0)?;
    let r0 = degenerating_initial(eps);
    let floor = (eps_sift / (1.0 - lam)).min(sym_eigvals(&r0)?[0]);
    let mut state = EstimatorState::new(Vector::zeros(2), r0)?;
    let mut sift_min = vec![sym_eigvals(&state.r)?[0]];
    for phi in degenerating_sequence(eps, lam, COUNTER_STEPS) {
        let sample = RegressionSample::new(phi, Vector::zeros(2))?;
        state = sift_step(&state, &sample, &cfg)?.0;
        sift_min.push(sym_eigvals(&state.r)?[0]);
    }
    let sift_ok = sift_min.iter().all(|&v| v >= floor * (1.0 - 1e-9));

    if opts.print_trace {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        writeln!(out, "k,lambda_min_oblique,lambda_min_sift").map_err(io)?;
        for (k, (a, b)) in oblique_min.iter().zip(&sift_min).enumerate() {
            writeln!(out, "{k},{a:e},{b:e}").map_err(io)?;
        }
    }
    let fmt_step = |s: Option<usize>| s.map_or("never".to_string(), |k| k.to_string());
    Ok((
        closed_gap <= 1e-9 && predicted.is_some() && predicted == observed && sift_ok,
        format!(
            "closed-form gap {closed_gap:.1e}, lambda_min < {COUNTER_GAMMA:e} at step {} (predicted {}), sift floor {floor:e} held: {sift_ok}",
            fmt_step(observed),
            fmt_step(predicted)
        ),
    ))
}
