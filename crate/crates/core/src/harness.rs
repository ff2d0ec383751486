//! Nonuniform-excitation benchmark.
//!
//! Four time-varying parameters are identified from two measurements per
//! step. The horizon is split in three phases: the first excites parameters
//! 1 and 2, the second parameters 3 and 4, and the third only the single
//! direction `[0 2 1 0]`. Metrics track the estimation error inside the
//! excited subspaces, how far the estimate drifts in the unexcited ones, and
//! the spectral radius of the covariance.
//!
//! Gaussian draws come from `ChaCha8Rng` seeded with `seed`, consumed per
//! step in this order: regressor entries row-major (phase three draws the two
//! scale factors first, then the leakage entries row-major), then the
//! regressor-noise entries row-major, then the measurement noise. Draws are
//! made even when a variance is zero so the stream layout never changes.

use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{monitor_step, BoundsCertificate, ViolationReport};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, RegressionSample};
use crate::numerics::{spectral_radius, Matrix, Vector};

/// Number of identified parameters.
pub const PARAMS: usize = 4;
/// Measurements per step.
pub const OUTPUTS: usize = 2;
/// Row direction excited during the third phase.
pub const PHASE3_DIRECTION: [f64; PARAMS] = [0.0, 2.0, 1.0, 0.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Number of parameter estimates `θ_0..θ_{horizon-1}`; one fewer samples.
    pub horizon: usize,
    /// First steps of phases two and three.
    pub boundaries: [usize; 2],
    /// Variance of the additive regressor noise entering the measurements.
    pub regressor_noise_var: f64,
    pub measurement_noise_var: f64,
    /// Variance of the weakly excited regressor directions.
    pub leakage_var: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            horizon: 1201,
            boundaries: [400, 800],
            regressor_noise_var: 1e-2,
            measurement_noise_var: 1e-2,
            leakage_var: 1e-4,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(seed: u64) -> Self {
        ScenarioConfig {
            seed,
            ..Self::default()
        }
    }

    /// Same phase proportions over a different horizon.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        let last = horizon.saturating_sub(1);
        self.horizon = horizon;
        self.boundaries = [last / 3, 2 * last / 3];
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.regressor_noise_var = 0.0;
        self.measurement_noise_var = 0.0;
        self.leakage_var = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [b1, b2] = self.boundaries;
        if !(0 < b1 && b1 < b2 && b2 + 1 < self.horizon) {
            return Err(Error::Config(format!(
                "phase boundaries {b1}, {b2} must satisfy 0 < b1 < b2 < horizon - 1 = {}",
                self.horizon.saturating_sub(1)
            )));
        }
        for (name, v) in [
            ("regressor noise variance", self.regressor_noise_var),
            ("measurement noise variance", self.measurement_noise_var),
            ("leakage variance", self.leakage_var),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// True parameters `[sin(πk/60), cos(k/60), sin(k/225), cos(k/225)]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrueParams;

impl TrueParams {
    pub fn at(&self, k: usize) -> Vector {
        let k = k as f64;
        Vector::from_vec(vec![
            (std::f64::consts::PI * k / 60.0).sin(),
            (k / 60.0).cos(),
            (k / 225.0).sin(),
            (k / 225.0).cos(),
        ])
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, col_std: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(rows, col_std.len());
    for i in 0..rows {
        for (j, s) in col_std.iter().enumerate() {
            m[(i, j)] = s * normal(rng);
        }
    }
    m
}

/// Samples `0..horizon-1` of the benchmark, deterministic in `cfg.seed`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Vec<RegressionSample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = TrueParams;
    let lo = cfg.leakage_var.sqrt();
    let noise = cfg.regressor_noise_var.sqrt();
    let meas = cfg.measurement_noise_var.sqrt();
    let [b1, b2] = cfg.boundaries;

    let mut out = Vec::with_capacity(cfg.horizon - 1);
    for k in 0..cfg.horizon - 1 {
        let phi = if k < b1 {
            gaussian_matrix(&mut rng, OUTPUTS, &[1.0, 1.0, lo, lo])
        } else if k < b2 {
            gaussian_matrix(&mut rng, OUTPUTS, &[lo, lo, 1.0, 1.0])
        } else {
            let scale: Vec<f64> = (0..OUTPUTS).map(|_| normal(&mut rng)).collect();
            let leak = gaussian_matrix(&mut rng, OUTPUTS, &[lo; PARAMS]);
            Matrix::from_fn(OUTPUTS, PARAMS, |i, j| scale[i] * PHASE3_DIRECTION[j]) + leak
        };
        let v = gaussian_matrix(&mut rng, OUTPUTS, &[noise; PARAMS]);
        let w = Vector::from_fn(OUTPUTS, |_, _| meas * normal(&mut rng));
        let y = (&phi + v) * truth.at(k) + w;
        out.push(RegressionSample::new(phi, y)?);
    }
    Ok(out)
}

/// Coordinates of `θ` along the excited direction `[0 2 1 0]/3` and the
/// unexcited `[0 1 -2 0]/3` of the third phase.
pub fn projected_params(theta: &Vector) -> (f64, f64) {
    let par = 2.0 / 3.0 * theta[1] + 1.0 / 3.0 * theta[2];
    let perp = 1.0 / 3.0 * theta[1] - 2.0 / 3.0 * theta[2];
    (par, perp)
}

/// Parameter estimates and covariance spectral radii, indexed by step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub thetas: Vec<Vector>,
    pub rho_p: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn push<E: Estimator + ?Sized>(&mut self, est: &E) -> Result<()> {
        self.thetas.push(est.theta().clone());
        self.rho_p.push(spectral_radius(est.covariance())?);
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub violations: ViolationReport,
}

/// Feeds `samples` to `est`, recording the trajectory and, with a
/// certificate, every bound violation including the initial state.
pub fn simulate<E: Estimator + ?Sized>(
    est: &mut E,
    samples: &[RegressionSample],
    cert: Option<&BoundsCertificate>,
) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    out.trajectory.push(est)?;
    if let Some(cert) = cert {
        out.violations
            .extend(monitor_step(est.state(), cert, None)?);
    }
    for sample in samples {
        est.step(sample)?;
        out.trajectory.push(est)?;
        if let Some(cert) = cert {
            out.violations
                .extend(monitor_step(est.state(), cert, est.last_trace())?);
        }
    }
    Ok(out)
}

/// Metrics of one step; `None` outside the phase where a metric is defined.
///
/// `e12`/`e34` cover steps `0..=b2`, `e_par`/`e_perp` cover `b2..`. The drift
/// metrics measure how far the unexcited components move from where they
/// stood when their phase began: `delta34` (θ³, θ⁴) over `1..=b1` from `θ_0`,
/// `delta12` (θ¹, θ²) over `b1+1..=b2` from `θ_b1`, and `delta_perp`
/// (θ¹, θ⁴, θ⊥) over `b2+1..` from `θ_b2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    pub k: usize,
    pub e12: Option<f64>,
    pub e34: Option<f64>,
    pub e_par: Option<f64>,
    pub e_perp: Option<f64>,
    pub delta12: Option<f64>,
    pub delta34: Option<f64>,
    pub delta_perp: Option<f64>,
    pub rho_p: f64,
}

fn hypot(parts: &[f64]) -> f64 {
    parts.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-step error and drift metrics. Error metrics need `truth`; without it
/// only the drift metrics and `rho_p` are filled in.
pub fn compute_metrics(
    traj: &Trajectory,
    truth: Option<&TrueParams>,
    cfg: &ScenarioConfig,
) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    if traj.thetas.len() != cfg.horizon || traj.rho_p.len() != cfg.horizon {
        return Err(Error::Shape(format!(
            "trajectory has {} estimates and {} radii, horizon is {}",
            traj.thetas.len(),
            traj.rho_p.len(),
            cfg.horizon
        )));
    }
    if let Some(t) = traj.thetas.iter().find(|t| t.len() != PARAMS) {
        return Err(Error::Shape(format!(
            "expected {PARAMS} parameters, got {}",
            t.len()
        )));
    }
    let [b1, b2] = cfg.boundaries;
    let th = &traj.thetas;
    let (_, perp_ref) = projected_params(&th[b2]);

    let records = th
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let mut rec = MetricsRecord {
                k,
                rho_p: traj.rho_p[k],
                ..Default::default()
            };
            if let Some(truth) = truth {
                let err = theta - truth.at(k);
                if k <= b2 {
                    rec.e12 = Some(hypot(&[err[0], err[1]]));
                    rec.e34 = Some(hypot(&[err[2], err[3]]));
                }
                if k >= b2 {
                    let (par, perp) = projected_params(theta);
                    let (tpar, tperp) = projected_params(&truth.at(k));
                    rec.e_par = Some((par - tpar).abs());
                    rec.e_perp = Some(hypot(&[err[0], err[3], perp - tperp]));
                }
            }
            // each drift is measured over the phase in which its components are unexcited
            if (1..=b1).contains(&k) {
                rec.delta34 = Some(hypot(&[theta[2] - th[0][2], theta[3] - th[0][3]]));
            }
            if (b1 + 1..=b2).contains(&k) {
                rec.delta12 = Some(hypot(&[theta[0] - th[b1][0], theta[1] - th[b1][1]]));
            }
            if k > b2 {
                let (_, perp) = projected_params(theta);
                rec.delta_perp = Some(hypot(&[
                    theta[0] - th[b2][0],
                    theta[3] - th[b2][3],
                    perp - perp_ref,
                ]));
            }
            rec
        })
        .collect();
    Ok(records)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const METRICS_HEADER: [&str; 9] = [
    "k",
    "e12",
    "e34",
    "e_par",
    "e_perp",
    "delta12",
    "delta34",
    "delta_perp",
    "rho_P",
];

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            cell(r.e12),
            cell(r.e34),
            cell(r.e_par),
            cell(r.e_perp),
            cell(r.delta12),
            cell(r.delta34),
            cell(r.delta_perp),
            r.rho_p.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Columns `k,theta1..thetaN`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = traj.thetas.first().map_or(0, |t| t.len());
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("theta{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (k, theta) in traj.thetas.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(theta.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Writes samples as `# p=P n=N`, a column header, then one row per step
/// holding `φ` row-major followed by `y`.
pub fn write_samples_csv<W: Write>(samples: &[RegressionSample], mut out: W) -> Result<()> {
    let (p, n) = samples.first().map_or((0, 0), |s| (s.rows(), s.cols()));
    writeln!(out, "# p={p} n={n}").map_err(|e| Error::Io(e.to_string()))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::with_capacity(p * n + p);
    for i in 0..p {
        header.extend((0..n).map(|j| format!("phi{i}_{j}")));
    }
    header.extend((0..p).map(|i| format!("y{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for s in samples {
        if s.rows() != p || s.cols() != n {
            return Err(Error::Shape("samples have inconsistent dimensions".into()));
        }
        let mut row: Vec<String> = Vec::with_capacity(p * n + p);
        for i in 0..p {
            row.extend(s.phi.row(i).iter().map(|x| x.to_string()));
        }
        row.extend(s.y.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn parse_dims(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix('#')?;
    let mut p = None;
    let mut n = None;
    for tok in rest.split(|c: char| c.is_whitespace() || c == ',') {
        if let Some(v) = tok.strip_prefix("p=") {
            p = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        }
    }
    Some((p?, n?))
}

/// Reads the format of [`write_samples_csv`]; errors carry 1-based line numbers.
pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<RegressionSample>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::Io(e.to_string()))?;
    let (p, n) = parse_dims(&first).ok_or_else(|| Error::Parse {
        line: 1,
        message: "expected a dimension line like `# p=2 n=4`".into(),
    })?;
    if p == 0 || n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "p and n must be positive".into(),
        });
    }
    let width = p * n + p;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() + 1),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() + 1);
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} is not a number: {field:?}", i + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("field {} is not finite", i + 1),
                });
            }
            vals.push(v);
        }
        let phi = Matrix::from_row_slice(p, n, &vals[..p * n]);
        let y = Vector::from_column_slice(&vals[p * n..]);
        out.push(RegressionSample::new(phi, y).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
