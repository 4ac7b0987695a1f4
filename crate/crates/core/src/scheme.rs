//! Explicit time steppers: the V-truncated Euler-Maruyama scheme (all three
//! truncation variants share one stepper) and the unmodified Euler-Maruyama
//! baseline.

use crate::brownian::{step_count, step_ratio, BrownianGrid};
use crate::error::{Error, Result};
use crate::sde::{LyapunovSpec, SdeSystem};
use crate::scalar::{all_finite, norm, to_f64_vec, Scalar};
use crate::truncation::{project_in_place, TruncationPolicy};

/// Coordinates beyond this magnitude count as blown up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone)]
pub enum Scheme<T> {
    Truncated(TruncationPolicy<T>),
    Classical,
}

impl<T> Scheme<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Truncated(_) => "truncated",
            Scheme::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig<T> {
    pub scheme: Scheme<T>,
    pub dt: T,
    pub horizon: T,
    pub initial_state: Vec<T>,
    /// Keep the pre-truncation predictors `Y~_k`.
    pub store_pre: bool,
}

impl<T: Scalar> SchemeConfig<T> {
    pub fn new(scheme: Scheme<T>, dt: T, horizon: T, initial_state: Vec<T>) -> Result<Self> {
        step_count(horizon, dt)?;
        if let Scheme::Truncated(policy) = &scheme {
            policy.truncation_radius(dt)?;
        }
        Ok(Self {
            scheme,
            dt,
            horizon,
            initial_state,
            store_pre: false,
        })
    }

    pub fn storing_pre(mut self) -> Self {
        self.store_pre = true;
        self
    }

    pub fn steps(&self) -> usize {
        step_count(self.horizon, self.dt).expect("validated at construction")
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult<T> {
    pub dim: usize,
    pub dt: T,
    /// `Y_0 .. Y_N` row-major; shorter when the path diverged.
    pub states: Vec<T>,
    /// `Y~_1 .. Y~_N` when requested.
    pub pre_truncation: Option<Vec<T>>,
    pub v_values: Vec<T>,
    /// Per step `k >= 1`: whether the projection moved the predictor.
    pub truncated: Vec<bool>,
    /// First `k` with `|Y~_k| >= radius`.
    pub first_truncation_step: Option<usize>,
    /// First step whose state blew up (classical scheme only).
    pub diverged_at: Option<usize>,
    pub radius: Option<T>,
    /// `max_{k >= 1} |Y_k|`.
    pub max_norm: T,
    pub seed: u64,
    pub path_id: u64,
}

impl<T: Scalar> PathResult<T> {
    /// Number of recorded states (`N + 1` unless the path diverged).
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn pre(&self, k: usize) -> Option<&[T]> {
        assert!(k >= 1, "predictors start at step 1");
        self.pre_truncation
            .as_ref()
            .map(|p| &p[(k - 1) * self.dim..k * self.dim])
    }

    pub fn terminal(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.dt
    }
}

/// `pre = y + f(y) dt + g(y) db` using caller buffers.
#[inline]
fn predictor<T: Scalar>(
    system: &SdeSystem<T>,
    y: &[T],
    dt: T,
    db: &[T],
    fbuf: &mut [T],
    gbuf: &mut [T],
    out: &mut [T],
) {
    let m = system.noise_dim();
    system.drift_into(y, fbuf);
    system.diffusion_into(y, gbuf);
    for (i, o) in out.iter_mut().enumerate() {
        let mut noise = T::zero();
        for j in 0..m {
            noise = noise + gbuf[i * m + j] * db[j];
        }
        *o = y[i] + fbuf[i] * dt + noise;
    }
}

/// One step of the V-truncated scheme: `(Y~_{k+1}, Y_{k+1})`.
pub fn step_truncated<T: Scalar>(
    policy: &TruncationPolicy<T>,
    system: &SdeSystem<T>,
    y: &[T],
    dt: T,
    db: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let radius = policy.truncation_radius(dt)?;
    let d = system.state_dim();
    let mut fbuf = vec![T::zero(); d];
    let mut gbuf = vec![T::zero(); d * system.noise_dim()];
    let mut pre = vec![T::zero(); d];
    predictor(system, y, dt, db, &mut fbuf, &mut gbuf, &mut pre);
    if !all_finite(&pre) {
        return Err(Error::numeric("truncated predictor", to_f64_vec(y)));
    }
    let mut post = pre.clone();
    project_in_place(&mut post, radius)?;
    Ok((pre, post))
}

/// One unmodified Euler-Maruyama step; non-finite output is returned as is.
pub fn step_classical<T: Scalar>(system: &SdeSystem<T>, y: &[T], dt: T, db: &[T]) -> Vec<T> {
    let d = system.state_dim();
    let mut fbuf = vec![T::zero(); d];
    let mut gbuf = vec![T::zero(); d * system.noise_dim()];
    let mut out = vec![T::zero(); d];
    predictor(system, y, dt, db, &mut fbuf, &mut gbuf, &mut out);
    out
}

fn is_diverged<T: Scalar>(x: &[T]) -> bool {
    let lim = T::lit(DIVERGENCE_THRESHOLD);
    x.iter().any(|v| !v.is_finite() || v.abs() > lim)
}

/// Iterates the configured scheme over the grid `t_k = k dt`, consuming
/// `brownian` coarsened to `dt`.
pub fn simulate<T: Scalar>(
    config: &SchemeConfig<T>,
    system: &SdeSystem<T>,
    spec: &LyapunovSpec<T>,
    brownian: &BrownianGrid<T>,
) -> Result<PathResult<T>> {
    let d = system.state_dim();
    let m = system.noise_dim();
    if config.initial_state.len() != d {
        return Err(Error::Config("initial state has wrong dimension".into()));
    }
    if brownian.noise_dim != m {
        return Err(Error::Config(format!(
            "Brownian grid has {} noise coordinates, system needs {m}",
            brownian.noise_dim
        )));
    }
    if (brownian.horizon - config.horizon).abs() > T::lit(1e-9) * config.horizon {
        return Err(Error::Config("Brownian grid horizon differs from the scheme horizon".into()));
    }
    let factor = step_ratio(config.dt, brownian.dt_fine)?;
    let increments = brownian.coarsen(factor)?;
    let n = config.steps();
    debug_assert_eq!(increments.len(), n * m);

    let radius = match &config.scheme {
        Scheme::Truncated(policy) => Some(policy.truncation_radius(config.dt)?),
        Scheme::Classical => None,
    };

    let mut states = Vec::with_capacity((n + 1) * d);
    let mut v_values = Vec::with_capacity(n + 1);
    let mut truncated = Vec::with_capacity(n);
    let mut pre_store = config.store_pre.then(|| Vec::with_capacity(n * d));
    let mut y = config.initial_state.clone();
    states.extend_from_slice(&y);
    v_values.push(spec.value_at(&y));

    let mut fbuf = vec![T::zero(); d];
    let mut gbuf = vec![T::zero(); d * m];
    let mut next = vec![T::zero(); d];
    let mut first_truncation_step = None;
    let mut diverged_at = None;
    let mut max_norm = T::zero();

    for k in 0..n {
        let db = &increments[k * m..(k + 1) * m];
        predictor(system, &y, config.dt, db, &mut fbuf, &mut gbuf, &mut next);
        if let Some(pre) = pre_store.as_mut() {
            pre.extend_from_slice(&next);
        }
        match radius {
            Some(r) => {
                if !all_finite(&next) {
                    return Err(Error::numeric("truncated predictor", to_f64_vec(&y)));
                }
                if first_truncation_step.is_none() && norm(&next) >= r {
                    first_truncation_step = Some(k + 1);
                }
                truncated.push(project_in_place(&mut next, r)?);
            }
            None => {
                if is_diverged(&next) {
                    diverged_at = Some(k + 1);
                    break;
                }
                truncated.push(false);
            }
        }
        std::mem::swap(&mut y, &mut next);
        max_norm = max_norm.max(norm(&y));
        states.extend_from_slice(&y);
        v_values.push(spec.value_at(&y));
    }

    Ok(PathResult {
        dim: d,
        dt: config.dt,
        states,
        pre_truncation: pre_store,
        v_values,
        truncated,
        first_truncation_step,
        diverged_at,
        radius,
        max_norm,
        seed: brownian.seed,
        path_id: brownian.path_id,
    })
}

/// `Ybar(t) = Y_k + f(Y_k)(t - t_k) + g(Y_k)(B(t) - B(t_k))` for
/// `t in [t_k, t_{k+1})`. `t` must fall on the fine grid of `brownian`;
/// grid points return `Y_k` unchanged.
pub fn interpolate_auxiliary<T: Scalar>(
    path: &PathResult<T>,
    system: &SdeSystem<T>,
    brownian: &BrownianGrid<T>,
    t: T,
) -> Result<Vec<T>> {
    let horizon = path.time(path.len() - 1);
    let tol = T::lit(1e-9);
    if !(t >= T::zero() && t <= horizon * (T::one() + tol)) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    let factor = step_ratio(path.dt, brownian.dt_fine)?;
    let pos = t / path.dt;
    let nearest = pos.round();
    if (pos - nearest).abs() <= tol {
        let k = nearest.to_usize().unwrap();
        return Ok(path.state(k.min(path.len() - 1)).to_vec());
    }
    let k = pos.floor().to_usize().unwrap();
    let tk = path.time(k);
    let sub = (t - tk) / brownian.dt_fine;
    let j = sub.round();
    if (sub - j).abs() > tol * T::from_usize_lossy(factor) {
        return Err(Error::Domain(format!("t = {t} is not on the Brownian refinement grid")));
    }
    let db = brownian.partial_sum(factor, k, j.to_usize().unwrap());
    let yk = path.state(k);
    let f = system.drift_at(yk);
    let g = system.diffusion_at(yk);
    let m = system.noise_dim();
    Ok((0..path.dim)
        .map(|i| {
            let noise: T = (0..m).map(|c| g[i * m + c] * db[c]).sum();
            yk[i] + f[i] * (t - tk) + noise
        })
        .collect())
}
