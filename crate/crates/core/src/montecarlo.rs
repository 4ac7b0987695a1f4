//! Monte Carlo estimators: moment suprema, strong errors on coupled grids,
//! Lyapunov slopes and stability experiments, plus their CSV forms.
//!
//! Paths run in parallel in batches; every reduction walks the batch results
//! in ascending `path_id`, so reports do not depend on the worker count.

use std::io::Write;

use rayon::prelude::*;

use crate::brownian::{step_ratio, BrownianGrid};
use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::scalar::{norm, to_f64_vec, Scalar};
use crate::scheme::{interpolate_auxiliary, simulate, PathResult, Scheme, SchemeConfig};
use crate::sde::{DecayFunction, LyapunovSpec, RateAssumption};

const BATCH: usize = 256;
/// Default fraction of the horizon discarded before fitting Lyapunov slopes.
pub const DEFAULT_BURN_IN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloSettings {
    pub paths: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl MonteCarloSettings {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }
}

/// Runs `work(path_id)` for every path and hands each batch of results, in
/// path order, to `reduce`.
fn run_batched<R, W, F>(settings: &MonteCarloSettings, work: W, mut reduce: F) -> Result<()>
where
    R: Send,
    W: Fn(u64) -> Result<R> + Sync,
    F: FnMut(Vec<R>) -> Result<()>,
{
    let pool = match settings.workers {
        None => None,
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?,
        ),
    };
    let mut start = 0;
    while start < settings.paths {
        let end = (start + BATCH).min(settings.paths);
        let map = || -> Vec<Result<R>> { (start..end).into_par_iter().map(|i| work(i as u64)).collect() };
        let results = match &pool {
            Some(p) => p.install(map),
            None => map(),
        };
        reduce(results.into_iter().collect::<Result<Vec<R>>>()?)?;
        start = end;
    }
    Ok(())
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = xs.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nt = T::from_usize_lossy(n);
    let mean = xs.iter().copied().sum::<T>() / nt;
    if n < 2 {
        return (mean, T::zero());
    }
    let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (nt - T::one()) / nt).sqrt())
}

fn median<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
pub fn fit_line<T: Scalar>(points: &[(T, T)]) -> Option<(T, T)> {
    let mut acc = LineFit::default();
    for &(x, y) in points {
        acc.push(x, y);
    }
    acc.fit()
}

/// Slope of `log(error)` against `log(dt)` over rows with positive error;
/// needs at least three such rows.
pub fn fit_loglog<T: Scalar>(points: &[(T, T)]) -> Option<(T, T)> {
    let logs: Vec<(T, T)> = points
        .iter()
        .filter(|&&(dt, e)| dt > T::zero() && e > T::zero())
        .map(|&(dt, e)| (dt.ln(), e.ln()))
        .collect();
    if logs.len() < 3 {
        return None;
    }
    fit_line(&logs)
}

/// Streaming least squares in `f64` regardless of the path scalar.
#[derive(Debug, Clone, Copy, Default)]
struct LineFit {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl LineFit {
    fn push<T: Scalar>(&mut self, x: T, y: T) {
        let (x, y) = (x.as_f64(), y.as_f64());
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn fit<T: Scalar>(&self) -> Option<(T, T)> {
        if self.n < 2.0 {
            return None;
        }
        let den = self.n * self.sxx - self.sx * self.sx;
        if den == 0.0 {
            return None;
        }
        let slope = (self.n * self.sxy - self.sx * self.sy) / den;
        let intercept = (self.sy - slope * self.sx) / self.n;
        Some((T::lit(slope), T::lit(intercept)))
    }
}

fn truncated_config<T: Scalar>(bundle: &ModelBundle<T>, dt: T, horizon: T) -> Result<SchemeConfig<T>> {
    SchemeConfig::new(Scheme::Truncated(bundle.policy.clone()), dt, horizon, bundle.x0.clone())
}

fn check_finite_v<T: Scalar>(path: &PathResult<T>, rho: T) -> Result<Vec<T>> {
    path.v_values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let p = v.powf(rho);
            if p.is_finite() {
                Ok(p)
            } else {
                Err(Error::numeric(
                    format!("V^rho on path {} at step {k}", path.path_id),
                    to_f64_vec(path.state(k)),
                ))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow<T> {
    pub dt: T,
    /// `max_k` of the sample mean of `V^rho(Y_k)`.
    pub sup_moment: T,
    /// Standard error of the mean at the maximizing step.
    pub stderr: T,
    pub argmax_step: usize,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport<T> {
    pub rho: T,
    pub horizon: T,
    pub rows: Vec<MomentRow<T>>,
}

/// `sup_k E V^rho(Y_k)` for each step size, from `settings.paths` truncated
/// paths started at `bundle.x0`.
pub fn estimate_moment_sup<T: Scalar>(
    bundle: &ModelBundle<T>,
    rho: T,
    dts: &[T],
    horizon: T,
    settings: &MonteCarloSettings,
) -> Result<MomentReport<T>> {
    if settings.paths < 2 {
        return Err(Error::Config("moment estimation needs at least 2 paths".into()));
    }
    if !(rho > T::zero()) {
        return Err(Error::Config("rho must be positive".into()));
    }
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let config = truncated_config(bundle, dt, horizon)?;
        let n = config.steps();
        let mut sum = vec![T::zero(); n + 1];
        let mut sumsq = vec![T::zero(); n + 1];
        run_batched(
            settings,
            |id| {
                let grid = BrownianGrid::generate(settings.seed, id, horizon, dt, bundle.system.noise_dim())?;
                let path = simulate(&config, &bundle.system, &bundle.lyapunov, &grid)?;
                check_finite_v(&path, rho)
            },
            |batch| {
                for vr in batch {
                    for (k, &v) in vr.iter().enumerate() {
                        sum[k] = sum[k] + v;
                        sumsq[k] = sumsq[k] + v * v;
                    }
                }
                Ok(())
            },
        )?;
        let m = T::from_usize_lossy(settings.paths);
        let mut best = (0, T::neg_infinity());
        for (k, &s) in sum.iter().enumerate() {
            let mean = s / m;
            if mean > best.1 {
                best = (k, mean);
            }
        }
        let (k, mean) = best;
        let var = ((sumsq[k] - m * mean * mean) / (m - T::one())).max(T::zero());
        rows.push(MomentRow {
            dt,
            sup_moment: mean,
            stderr: (var / m).sqrt(),
            argmax_step: k,
            paths: settings.paths,
        });
    }
    Ok(MomentReport { rho, horizon, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow<T> {
    pub dt: T,
    /// Mean of `|X_ref(T) - Y(T)|^q`.
    pub mean_error: T,
    pub stderr: T,
    pub paths: usize,
    /// Mean and standard error of `U(Ybar(T) - X_ref(T))` when a rate
    /// assumption was supplied.
    pub metric: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    pub q: T,
    pub rows: Vec<ErrorRow<T>>,
    /// Least-squares `(slope, intercept)` of `log mean_error` on `log dt`.
    pub fit: Option<(T, T)>,
}

impl<T: Scalar> ErrorReport<T> {
    /// Sorts rows by decreasing `dt` and fits the log-log line.
    pub fn from_rows(q: T, mut rows: Vec<ErrorRow<T>>) -> Self {
        rows.sort_by(|a, b| b.dt.partial_cmp(&a.dt).unwrap_or(std::cmp::Ordering::Equal));
        let points: Vec<(T, T)> = rows.iter().map(|r| (r.dt, r.mean_error)).collect();
        let fit = fit_loglog(&points);
        Self { q, rows, fit }
    }

    pub fn slope(&self) -> Option<T> {
        self.fit.map(|(s, _)| s)
    }
}

/// Strong error at `T` of truncated paths at each `dt` against a truncated
/// reference at `dt_ref`, all driven by one Brownian grid per path.
pub fn estimate_strong_error<T: Scalar>(
    bundle: &ModelBundle<T>,
    q: T,
    dts: &[T],
    dt_ref: T,
    horizon: T,
    settings: &MonteCarloSettings,
    rate: Option<&RateAssumption<T>>,
) -> Result<ErrorReport<T>> {
    if !(q > T::zero()) {
        return Err(Error::Config(format!("q = {q} must be positive")));
    }
    if settings.paths == 0 || dts.is_empty() {
        return Err(Error::Config("need at least one path and one step size".into()));
    }
    for &dt in dts {
        step_ratio(dt, dt_ref)?;
    }
    let ref_config = truncated_config(bundle, dt_ref, horizon)?;
    let configs: Vec<SchemeConfig<T>> = dts
        .iter()
        .map(|&dt| truncated_config(bundle, dt, horizon))
        .collect::<Result<_>>()?;
    let m = bundle.system.noise_dim();
    let mut errors: Vec<Vec<T>> = vec![Vec::with_capacity(settings.paths); dts.len()];
    let mut metrics: Vec<Vec<T>> = vec![Vec::new(); dts.len()];
    run_batched(
        settings,
        |id| {
            let grid = BrownianGrid::generate(settings.seed, id, horizon, dt_ref, m)?;
            let reference = simulate(&ref_config, &bundle.system, &bundle.lyapunov, &grid)?;
            let x_ref = reference.terminal().to_vec();
            configs
                .iter()
                .map(|config| {
                    let path = simulate(config, &bundle.system, &bundle.lyapunov, &grid)?;
                    let diff: Vec<T> = path.terminal().iter().zip(&x_ref).map(|(&a, &b)| a - b).collect();
                    let err = norm(&diff).powf(q);
                    let metric = match rate {
                        Some(rate) => {
                            let ybar = interpolate_auxiliary(&path, &bundle.system, &grid, horizon)?;
                            let d: Vec<T> = ybar.iter().zip(&x_ref).map(|(&a, &b)| a - b).collect();
                            Some(rate.metric_at(&d))
                        }
                        None => None,
                    };
                    if !err.is_finite() {
                        return Err(Error::numeric(format!("strong error on path {id}"), to_f64_vec(&x_ref)));
                    }
                    Ok((err, metric))
                })
                .collect::<Result<Vec<_>>>()
        },
        |batch| {
            for per_path in batch {
                for (row, (err, metric)) in per_path.into_iter().enumerate() {
                    errors[row].push(err);
                    if let Some(u) = metric {
                        metrics[row].push(u);
                    }
                }
            }
            Ok(())
        },
    )?;
    let rows = dts
        .iter()
        .enumerate()
        .map(|(i, &dt)| {
            let (mean_error, stderr) = mean_stderr(&errors[i]);
            ErrorRow {
                dt,
                mean_error,
                stderr,
                paths: settings.paths,
                metric: rate.map(|_| mean_stderr(&metrics[i])),
            }
        })
        .collect();
    Ok(ErrorReport::from_rows(q, rows))
}

/// Per-path and mean-moment exponential rates.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate<T> {
    /// Least-squares slope of `log V(Z_k)` against `t_k`; `-inf` for paths
    /// absorbed at the equilibrium.
    pub slopes: Vec<T>,
    /// Slope of `log` of the across-path mean of `V^rho`.
    pub mean_moment_slope: T,
}

fn window_start(steps: usize, burn_in: f64) -> usize {
    ((steps as f64) * burn_in).ceil() as usize
}

fn check_burn_in(burn_in: f64) -> Result<()> {
    if !(0.0..=0.9).contains(&burn_in) {
        return Err(Error::Config(format!("burn-in fraction {burn_in} outside [0, 0.9]")));
    }
    Ok(())
}

/// Pathwise slope of `log V` over steps `start..` of `v`.
fn path_slope<T: Scalar>(v: &[T], dt: T, start: usize) -> T {
    let mut fit = LineFit::default();
    for (k, &vk) in v.iter().enumerate().skip(start) {
        if vk > T::zero() {
            fit.push(T::from_usize_lossy(k) * dt, vk.ln());
        }
    }
    fit.fit().map(|(s, _)| s).unwrap_or(T::neg_infinity())
}

fn moment_slope<T: Scalar>(sum: &[T], dt: T, start: usize) -> T {
    path_slope(sum, dt, start)
}

/// Exponential rates from simulated paths sharing one step size and length.
pub fn estimate_lyapunov<T: Scalar>(
    paths: &[PathResult<T>],
    spec: &LyapunovSpec<T>,
    burn_in: f64,
) -> Result<LyapunovEstimate<T>> {
    check_burn_in(burn_in)?;
    let first = paths
        .first()
        .ok_or_else(|| Error::Config("no paths to fit".into()))?;
    if paths.iter().any(|p| p.dt != first.dt || p.len() != first.len()) {
        return Err(Error::Config("paths must share step size and length".into()));
    }
    if paths.iter().all(|p| p.v_values[0] <= T::zero()) {
        return Err(Error::DegenerateInput("every path starts at V = 0".into()));
    }
    let start = window_start(first.len() - 1, burn_in);
    let mut sum = vec![T::zero(); first.len()];
    let mut slopes = Vec::with_capacity(paths.len());
    for p in paths {
        slopes.push(path_slope(&p.v_values, p.dt, start));
        for (s, &v) in sum.iter_mut().zip(&p.v_values) {
            *s = *s + v.powf(spec.rho);
        }
    }
    Ok(LyapunovEstimate {
        slopes,
        mean_moment_slope: moment_slope(&sum, first.dt, start),
    })
}

/// Distance from `x` to the kernel of `w`.
pub fn distance_to_kernel<T: Scalar>(decay: &DecayFunction<T>, x: &[T]) -> Result<T> {
    if decay.kernel_is_origin {
        return Ok(norm(x));
    }
    match &decay.distance {
        Some(d) => Ok(d(x)),
        None => Err(Error::Config("decay function has no kernel descriptor".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Truncated,
    Classical,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Truncated => "truncated",
            SchemeKind::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary<T> {
    pub scheme: SchemeKind,
    pub path_id: u64,
    /// Last recorded state (the state before blow-up for diverged paths).
    pub terminal_state: Vec<T>,
    pub terminal_norm: T,
    pub distance: T,
    pub max_vrho: T,
    pub max_norm: T,
    /// `+inf` for diverged paths, `-inf` for absorbed ones.
    pub slope: T,
    pub diverged: bool,
    pub first_truncation_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub dt: T,
    pub horizon: T,
    pub threshold: T,
    pub radius: T,
    pub burn_in: f64,
    pub truncated: Vec<PathSummary<T>>,
    pub classical: Vec<PathSummary<T>>,
    /// Truncated paths with distance to the kernel below the threshold at `T`.
    pub converged_fraction: f64,
    /// Truncated paths with `max_k |Z_k| <= radius`.
    pub bounded_fraction: f64,
    pub classical_divergence_fraction: f64,
    pub median_slope: T,
    /// Normal-approximation standard error of the median, from the finite slopes.
    pub median_slope_stderr: T,
    pub mean_moment_slope: T,
}

fn summarize<T: Scalar>(
    kind: SchemeKind,
    path: &PathResult<T>,
    spec: &LyapunovSpec<T>,
    decay: Option<&DecayFunction<T>>,
    start: usize,
) -> Result<PathSummary<T>> {
    let terminal = path.terminal().to_vec();
    let diverged = path.diverged_at.is_some();
    let distance = match decay {
        Some(w) => distance_to_kernel(w, &terminal)?,
        None => norm(&terminal),
    };
    let max_vrho = path
        .v_values
        .iter()
        .map(|&v| v.powf(spec.rho))
        .fold(T::zero(), |a, b| a.max(b));
    if kind == SchemeKind::Truncated && !max_vrho.is_finite() {
        return Err(Error::numeric(format!("V^rho on truncated path {}", path.path_id), to_f64_vec(&terminal)));
    }
    let slope = if diverged {
        T::infinity()
    } else {
        path_slope(&path.v_values, path.dt, start)
    };
    Ok(PathSummary {
        scheme: kind,
        path_id: path.path_id,
        terminal_norm: norm(&terminal),
        terminal_state: terminal,
        distance,
        max_vrho,
        max_norm: path.max_norm,
        slope,
        diverged,
        first_truncation_step: path.first_truncation_step,
    })
}

/// Truncated and classical paths on shared Brownian grids from `bundle.x0`.
pub fn stability_experiment<T: Scalar>(
    bundle: &ModelBundle<T>,
    dt: T,
    horizon: T,
    settings: &MonteCarloSettings,
    threshold: T,
) -> Result<StabilityReport<T>> {
    stability_experiment_with_burn_in(bundle, dt, horizon, settings, threshold, DEFAULT_BURN_IN)
}

pub fn stability_experiment_with_burn_in<T: Scalar>(
    bundle: &ModelBundle<T>,
    dt: T,
    horizon: T,
    settings: &MonteCarloSettings,
    threshold: T,
    burn_in: f64,
) -> Result<StabilityReport<T>> {
    check_burn_in(burn_in)?;
    if settings.paths == 0 {
        return Err(Error::Config("stability experiment needs at least one path".into()));
    }
    let truncated_cfg = truncated_config(bundle, dt, horizon)?;
    let classical_cfg = SchemeConfig::new(Scheme::Classical, dt, horizon, bundle.x0.clone())?;
    let radius = bundle.policy.truncation_radius(dt)?;
    let n = truncated_cfg.steps();
    let start = window_start(n, burn_in);
    let rho = bundle.lyapunov.rho;
    let decay = bundle.decay.as_ref();

    let mut truncated = Vec::with_capacity(settings.paths);
    let mut classical = Vec::with_capacity(settings.paths);
    let mut moment_sum = vec![T::zero(); n + 1];
    run_batched(
        settings,
        |id| {
            let grid = BrownianGrid::generate(settings.seed, id, horizon, dt, bundle.system.noise_dim())?;
            let tp = simulate(&truncated_cfg, &bundle.system, &bundle.lyapunov, &grid)?;
            let cp = simulate(&classical_cfg, &bundle.system, &bundle.lyapunov, &grid)?;
            let vr = check_finite_v(&tp, rho)?;
            Ok((
                summarize(SchemeKind::Truncated, &tp, &bundle.lyapunov, decay, start)?,
                summarize(SchemeKind::Classical, &cp, &bundle.lyapunov, decay, start)?,
                vr,
            ))
        },
        |batch| {
            for (ts, cs, vr) in batch {
                for (s, v) in moment_sum.iter_mut().zip(vr) {
                    *s = *s + v;
                }
                truncated.push(ts);
                classical.push(cs);
            }
            Ok(())
        },
    )?;

    let m = settings.paths as f64;
    let tol = radius * (T::one() + T::lit(1e-12));
    let converged = truncated.iter().filter(|s| s.distance < threshold).count();
    let bounded = truncated.iter().filter(|s| s.max_norm <= tol).count();
    let diverged = classical.iter().filter(|s| s.diverged).count();
    let slopes: Vec<T> = truncated.iter().map(|s| s.slope).collect();
    let finite: Vec<T> = slopes.iter().copied().filter(|s| s.is_finite()).collect();
    let (_, se_mean) = mean_stderr(&finite);
    let median_slope_stderr = if finite.len() >= 2 {
        T::lit((std::f64::consts::PI / 2.0).sqrt()) * se_mean
    } else {
        T::nan()
    };
    Ok(StabilityReport {
        dt,
        horizon,
        threshold,
        radius,
        burn_in,
        converged_fraction: converged as f64 / m,
        bounded_fraction: bounded as f64 / m,
        classical_divergence_fraction: diverged as f64 / m,
        median_slope: median(&slopes),
        median_slope_stderr,
        mean_moment_slope: moment_slope(&moment_sum, dt, start),
        truncated,
        classical,
    })
}

fn num<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("writing CSV: {e}"))
}

/// Columns `dt, mean_error, stderr, paths, q`.
pub fn write_error_csv<T: Scalar, W: Write>(report: &ErrorReport<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dt", "mean_error", "stderr", "paths", "q"]).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([num(r.dt), num(r.mean_error), num(r.stderr), r.paths.to_string(), num(report.q)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Columns `dt, sup_moment, argmax_step`.
pub fn write_moment_csv<T: Scalar, W: Write>(report: &MomentReport<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dt", "sup_moment", "argmax_step"]).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([num(r.dt), num(r.sup_moment), r.argmax_step.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Columns `scheme, path_id, terminal_norm, max_vrho, lyap_slope, diverged,
/// first_truncation_step`; truncated rows first, then classical.
pub fn write_stability_csv<T: Scalar, W: Write>(report: &StabilityReport<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "path_id",
        "terminal_norm",
        "max_vrho",
        "lyap_slope",
        "diverged",
        "first_truncation_step",
    ])
    .map_err(csv_err)?;
    for s in report.truncated.iter().chain(&report.classical) {
        w.write_record([
            s.scheme.name().to_string(),
            s.path_id.to_string(),
            num(s.terminal_norm),
            num(s.max_vrho),
            num(s.slope),
            if s.diverged { "1" } else { "0" }.to_string(),
            s.first_truncation_step.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Columns `step, t, y_1 .. y_d, v, truncated`.
pub fn write_path_csv<T: Scalar, W: Write>(path: &PathResult<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((1..=path.dim).map(|i| format!("y_{i}")));
    header.extend(["v".to_string(), "truncated".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..path.len() {
        let mut rec = vec![k.to_string(), num(path.time(k))];
        rec.extend(path.state(k).iter().map(|&v| num(v)));
        rec.push(num(path.v_values[k]));
        rec.push(if k > 0 && path.truncated[k - 1] { "1" } else { "0" }.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
