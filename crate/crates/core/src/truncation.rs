//! Growth envelopes, truncation radii and the radial projection applied after
//! every Euler predictor step.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sde::{DecayFunction, LyapunovSpec, RealFn, SdeSystem};
use crate::scalar::{all_finite, norm, to_f64_vec, Scalar};
use crate::validate::{sphere_directions, ValidationReport};

const INVERSE_REL_WIDTH: f64 = 1e-12;
const INVERSE_MAX_ITERS: usize = 200;
const GROWTH_SLACK: f64 = 1e-9;

/// Strictly increasing, unbounded function on `[domain_floor, inf)`.
#[derive(Clone)]
pub struct MonotoneEnvelope<T> {
    forward: RealFn<T>,
    inverse: Option<RealFn<T>>,
    domain_floor: T,
    label: String,
}

impl<T: Scalar> MonotoneEnvelope<T> {
    pub fn new(label: impl Into<String>, forward: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            forward: Arc::new(forward),
            inverse: None,
            domain_floor: T::one(),
            label: label.into(),
        }
    }

    pub fn with_inverse(mut self, inverse: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn with_floor(mut self, floor: T) -> Self {
        self.domain_floor = floor;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_floor(&self) -> T {
        self.domain_floor
    }

    pub fn has_closed_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    #[inline]
    pub fn forward(&self, u: T) -> T {
        (self.forward)(u)
    }

    /// Closed-form inverse when supplied, bisection otherwise.
    pub fn inverse(&self, v: T) -> Result<T> {
        let floor = self.domain_floor;
        let lo_val = self.forward(floor);
        if !(v >= lo_val * (T::one() - T::lit(1e-12))) {
            return Err(Error::Domain(format!(
                "{} inverse undefined at {v}: below envelope value {lo_val} at the floor {floor}",
                self.label
            )));
        }
        if let Some(inv) = &self.inverse {
            return Ok(inv(v));
        }
        self.bisect(v)
    }

    fn bisect(&self, v: T) -> Result<T> {
        let mut lo = self.domain_floor;
        let mut hi = if lo > T::zero() { lo } else { T::one() };
        let two = T::lit(2.0);
        let mut bracketed = false;
        for _ in 0..INVERSE_MAX_ITERS {
            if self.forward(hi) >= v {
                bracketed = true;
                break;
            }
            lo = hi;
            hi = hi * two;
        }
        if !bracketed {
            return Err(Error::Domain(format!("{} inverse: could not bracket {v}", self.label)));
        }
        let width = T::lit(INVERSE_REL_WIDTH);
        for _ in 0..INVERSE_MAX_ITERS {
            if hi - lo <= width * hi.abs().max(T::min_positive_value()) {
                break;
            }
            let mid = lo + (hi - lo) / two;
            if self.forward(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + (hi - lo) / two)
    }

    /// Strict monotonicity on the grid and, with a closed inverse, the
    /// round trip `forward(inverse(v)) = v` to relative 1e-9 (or `64 eps`
    /// when that is larger, as for `f32`).
    pub fn check(&self, grid: &[T]) -> ValidationReport {
        let tol = T::lit(1e-9).max(T::lit(64.0) * T::epsilon());
        let mut report = ValidationReport::new(format!("envelope {}", self.label));
        for w in grid.windows(2) {
            report.checked += 1;
            let (a, b) = (self.forward(w[0]), self.forward(w[1]));
            if w[0] < w[1] && !(a < b) {
                report.record(&[w[1]], a, b, "envelope not strictly increasing");
            }
        }
        if self.inverse.is_some() {
            for &u in grid {
                let v = self.forward(u);
                report.checked += 1;
                match self.inverse(v) {
                    Ok(back) => {
                        let rt = self.forward(back);
                        if (rt - v).abs() > tol * v.abs().max(T::one()) {
                            report.record(&[u], rt, v, "forward(inverse(v)) differs from v");
                        }
                    }
                    Err(_) => report.skipped += 1,
                }
            }
        }
        report
    }
}

impl<T> fmt::Debug for MonotoneEnvelope<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneEnvelope")
            .field("label", &self.label)
            .field("closed_inverse", &self.inverse.is_some())
            .finish_non_exhaustive()
    }
}

/// Which growth envelope defines the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationVariant {
    /// Finite-horizon scheme, weights `(1+V)^delta`.
    FiniteTime,
    /// Stability scheme weighted by `Lambda_rho^{1/2} V^delta`.
    StabilityBar,
    /// Stability scheme weighted by `(Lambda_rho V)^{1/2} / (1+V)^{1/2-delta}`.
    StabilityHat,
}

impl TruncationVariant {
    pub fn is_stability(self) -> bool {
        !matches!(self, TruncationVariant::FiniteTime)
    }
}

/// Envelope plus the constants `K`, `theta`, `delta_star`; the radius at
/// step size `dt` is `envelope^{-1}(K dt^{-theta})`.
#[derive(Clone, Debug)]
pub struct TruncationPolicy<T> {
    pub variant: TruncationVariant,
    pub envelope: MonotoneEnvelope<T>,
    pub k_const: T,
    pub theta: T,
    pub delta_star: T,
}

impl<T: Scalar> TruncationPolicy<T> {
    pub fn new(
        variant: TruncationVariant,
        envelope: MonotoneEnvelope<T>,
        k_const: T,
        theta: T,
        delta_star: T,
    ) -> Result<Self> {
        let half = T::lit(0.5);
        let theta_ok = match variant {
            TruncationVariant::FiniteTime => theta > T::zero() && theta <= half,
            _ => theta > T::zero() && theta < half,
        };
        if !theta_ok {
            return Err(Error::Config(format!("theta = {theta} outside the admissible interval for {variant:?}")));
        }
        let ds_ok = match variant {
            TruncationVariant::FiniteTime => delta_star > T::zero() && delta_star <= T::one(),
            _ => delta_star > T::zero() && delta_star < T::one(),
        };
        if !ds_ok {
            return Err(Error::Config(format!("delta_star = {delta_star} outside the admissible interval")));
        }
        if !(k_const > T::zero()) {
            return Err(Error::Config("K must be positive".into()));
        }
        Ok(Self {
            variant,
            envelope,
            k_const,
            theta,
            delta_star,
        })
    }

    /// `K dt^{-theta}`.
    pub fn level(&self, dt: T) -> T {
        self.k_const * dt.powf(-self.theta)
    }

    /// `K (delta_star)^{-theta} >= envelope(|x0| v 1)`.
    pub fn feasible_for(&self, x0: &[T]) -> bool {
        self.level(self.delta_star) >= self.envelope.forward(norm(x0).max(T::one()))
    }

    /// Largest step (capped at `cap`) keeping the policy feasible for `x0`.
    pub fn max_feasible_step(&self, x0: &[T], cap: T) -> T {
        let need = self.envelope.forward(norm(x0).max(T::one()));
        (self.k_const / need).powf(T::one() / self.theta).min(cap)
    }

    fn check_step(&self, dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(Error::Domain(format!("step size {dt} must be positive")));
        }
        if dt > self.delta_star * (T::one() + T::lit(1e-12)) {
            return Err(Error::PolicyViolation(format!(
                "step size {dt} exceeds delta_star = {}",
                self.delta_star
            )));
        }
        Ok(())
    }

    pub fn truncation_radius(&self, dt: T) -> Result<T> {
        self.check_step(dt)?;
        self.envelope.inverse(self.level(dt))
    }

    /// Radial projection onto the ball of radius `truncation_radius(dt)`.
    pub fn truncate(&self, dt: T, x: &[T]) -> Result<Vec<T>> {
        let r = self.truncation_radius(dt)?;
        let mut out = x.to_vec();
        project_in_place(&mut out, r)?;
        Ok(out)
    }
}

/// `(|x| ^ radius) x / |x|` in place; `|x| <= radius` leaves `x` untouched.
/// Returns whether the state was moved.
#[inline]
pub fn project_in_place<T: Scalar>(x: &mut [T], radius: T) -> Result<bool> {
    if !all_finite(x) {
        return Err(Error::numeric("truncate", to_f64_vec(x)));
    }
    let r = norm(x);
    if r <= radius {
        return Ok(false);
    }
    let s = radius / r;
    for v in x.iter_mut() {
        *v = *v * s;
    }
    Ok(true)
}

/// `Lambda_rho(x) = 1 ^ (w(x) / V^rho(x))`, with `Lambda_rho = 1` where `V = 0`.
pub fn lambda_rho<T: Scalar>(spec: &LyapunovSpec<T>, decay: &DecayFunction<T>, x: &[T]) -> T {
    let v = spec.value_at(x);
    if v <= T::zero() {
        return T::one();
    }
    let ratio = decay.value_at(x) / v.powf(spec.rho);
    ratio.min(T::one()).max(T::zero())
}

/// The two growth ratios the envelope must dominate at `x`, per variant.
/// Returns `None` where the ratio is undefined (`V = 0` for stability variants).
pub fn growth_ratios<T: Scalar>(
    variant: TruncationVariant,
    spec: &LyapunovSpec<T>,
    system: &SdeSystem<T>,
    decay: Option<&DecayFunction<T>>,
    x: &[T],
) -> Result<Option<(T, T)>> {
    let f = norm(&system.drift_at(x));
    let g2 = {
        let g = system.diffusion_at(x);
        g.iter().map(|&v| v * v).sum::<T>()
    };
    let v = spec.value_at(x);
    let delta = spec.delta();
    let two = T::lit(2.0);
    match variant {
        TruncationVariant::FiniteTime => {
            let b = T::one() + v;
            Ok(Some((f / b.powf(delta), g2 / b.powf(two * delta))))
        }
        TruncationVariant::StabilityBar | TruncationVariant::StabilityHat => {
            let decay = decay.ok_or_else(|| Error::Config("stability variants need a decay function".into()))?;
            if v <= T::zero() {
                return Ok(None);
            }
            let lam = lambda_rho(spec, decay, x);
            if variant == TruncationVariant::StabilityBar {
                Ok(Some((
                    f / (lam.sqrt() * v.powf(delta)),
                    g2 / (lam * v.powf(two * delta)),
                )))
            } else {
                let b = T::one() + v;
                Ok(Some((
                    b.powf(T::lit(0.5) - delta) * f / (lam * v).sqrt(),
                    b.powf(T::one() - two * delta) * g2 / (lam * v),
                )))
            }
        }
    }
}

/// Worst growth ratio found on `{|x| = u, u/2, u/4}` for each tested `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub u: f64,
    pub worst_ratio: f64,
    pub envelope: f64,
}

/// Checks `sup_{|x| <= u} ratio(x) <= envelope(u)` by sampling `n_dirs`
/// directions at radii `u`, `u/2`, `u/4`.
pub fn envelope_validate<T: Scalar>(
    policy: &TruncationPolicy<T>,
    spec: &LyapunovSpec<T>,
    system: &SdeSystem<T>,
    decay: Option<&DecayFunction<T>>,
    radii: &[T],
    n_dirs: usize,
) -> Result<(ValidationReport, Vec<EnvelopeRow>)> {
    let mut report = ValidationReport::new(format!("envelope domination ({:?})", policy.variant));
    let dirs = sphere_directions::<T>(system.state_dim(), n_dirs);
    let slack = T::lit(GROWTH_SLACK);
    let mut rows = Vec::with_capacity(radii.len());
    for &u in radii {
        let bound = policy.envelope.forward(u);
        let mut worst = T::zero();
        for scale in [T::one(), T::lit(0.5), T::lit(0.25)] {
            for dir in &dirs {
                let x: Vec<T> = dir.iter().map(|&c| c * u * scale).collect();
                report.checked += 1;
                match growth_ratios(policy.variant, spec, system, decay, &x)? {
                    None => report.skipped += 1,
                    Some((a, b)) => {
                        let m = a.max(b);
                        if !m.is_finite() {
                            report.record(&x, m, bound, "growth ratio not finite");
                            continue;
                        }
                        worst = worst.max(m);
                        if m > bound + slack * bound.max(T::one()) {
                            report.record(&x, m, bound, format!("growth ratio exceeds envelope({u})"));
                        }
                    }
                }
            }
        }
        rows.push(EnvelopeRow {
            u: u.as_f64(),
            worst_ratio: worst.as_f64(),
            envelope: bound.as_f64(),
        });
    }
    Ok((report, rows))
}

/// Per-step coefficient bounds implied by the truncation at step size `dt`.
pub fn growth_bound_check<T: Scalar>(
    policy: &TruncationPolicy<T>,
    spec: &LyapunovSpec<T>,
    system: &SdeSystem<T>,
    decay: Option<&DecayFunction<T>>,
    x: &[T],
    dt: T,
) -> Result<bool> {
    policy.check_step(dt)?;
    let level = policy.level(dt);
    let f = system.drift_at(x);
    let g = system.diffusion_at(x);
    let f_norm = norm(&f);
    let g2: T = g.iter().map(|&v| v * v).sum();
    let v = spec.value_at(x);
    let delta = spec.delta();
    let two = T::lit(2.0);
    let slack = T::lit(GROWTH_SLACK);
    let ok = |lhs: T, rhs: T| lhs <= rhs + slack * rhs.abs().max(T::one());
    Ok(match policy.variant {
        TruncationVariant::FiniteTime => {
            let b = T::one() + v;
            ok(f_norm, level * b.powf(delta)) && ok(g2, level * b.powf(two * delta))
        }
        TruncationVariant::StabilityBar | TruncationVariant::StabilityHat => {
            let decay = decay.ok_or_else(|| Error::Config("stability variants need a decay function".into()))?;
            let lam = lambda_rho(spec, decay, x);
            let weight = if policy.variant == TruncationVariant::StabilityBar {
                lam * v.powf(two * delta)
            } else {
                lam * v / (T::one() + v).powf(T::one() - two * delta)
            };
            ok(f_norm * f_norm, level * level * weight) && ok(g2, level * weight)
        }
    })
}
