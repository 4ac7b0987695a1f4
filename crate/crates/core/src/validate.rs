//! Numeric checks of the hypotheses placed on `f`, `g`, `V` and `w`.
//!
//! Every check samples points and records violations as data; the only
//! errors are malformed inputs.

use std::fmt;

use crate::error::{Error, Result};
use crate::sde::{generator_power, DecayFunction, LyapunovClass, LyapunovSpec, RateAssumption, SdeSystem};
use crate::scalar::{norm, to_f64_vec, Scalar};

pub const DEFAULT_DERIVATIVE_TOL: f64 = 1e-5;
pub const DEFAULT_STRUCTURE_SLACK: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub witness: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

/// Outcome of one validator over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub check: String,
    pub checked: usize,
    pub skipped: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            checked: 0,
            skipped: 0,
            violations: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn record<T: Scalar>(&mut self, x: &[T], lhs: T, rhs: T, detail: impl Into<String>) {
        self.violations.push(Violation {
            witness: to_f64_vec(x),
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
            detail: detail.into(),
        });
    }

    /// Converts a failing report into [`Error::Validation`] naming the first witness.
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::Validation {
                check: self.check.clone(),
                detail: format!("{}: {} > {}", v.detail, v.lhs, v.rhs),
                witness: v.witness.clone(),
            }),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "pass" } else { "FAIL" };
        write!(
            f,
            "{:<28} {status}  ({} checked, {} skipped, {} violations)",
            self.check,
            self.checked,
            self.skipped,
            self.violations.len()
        )?;
        if let Some(v) = self.violations.first() {
            write!(f, "\n    first: {} at {:?}: {:.6e} > {:.6e}", v.detail, v.witness, v.lhs, v.rhs)?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn within<T: Scalar>(lhs: T, rhs: T, slack: T) -> bool {
    lhs <= rhs + slack * rhs.abs().max(T::one())
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Halton points in the box `[-half_width, half_width]^d`.
pub fn halton_box<T: Scalar>(dim: usize, half_width: T, n: usize) -> Vec<Vec<T>> {
    assert!(dim <= PRIMES.len(), "halton_box supports up to {} dimensions", PRIMES.len());
    (1..=n)
        .map(|i| {
            (0..dim)
                .map(|j| T::lit(2.0 * radical_inverse(i, PRIMES[j]) - 1.0) * half_width)
                .collect()
        })
        .collect()
}

/// Validator sample set: Halton grid on the box plus the initial condition
/// and the equilibrium.
pub fn sample_set<T: Scalar>(dim: usize, half_width: T, n: usize, extra: &[&[T]]) -> Vec<Vec<T>> {
    let mut out = halton_box(dim, half_width, n);
    for e in extra {
        out.push(e.to_vec());
    }
    out
}

/// Deterministic unit directions: `+-1` in one dimension, evenly spaced angles
/// in two, normalised Halton points beyond.
pub fn sphere_directions<T: Scalar>(dim: usize, n: usize) -> Vec<Vec<T>> {
    match dim {
        1 => vec![vec![T::one()], vec![-T::one()]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![T::lit(a.cos()), T::lit(a.sin())]
            })
            .collect(),
        _ => halton_box::<T>(dim, T::one(), n)
            .into_iter()
            .filter_map(|p| {
                let r = norm(&p);
                (r > T::lit(1e-3)).then(|| p.iter().map(|&v| v / r).collect())
            })
            .collect(),
    }
}

/// Checks `L(1+V)^rho <= lambda (1 + V^rho)` (or with `V^rho` for the
/// kernel-zero class). Points where `V = 0` under the kernel-zero class are
/// skipped since `V^rho` is not differentiable there.
pub fn validate_structure_condition<T: Scalar>(
    spec: &LyapunovSpec<T>,
    system: &SdeSystem<T>,
    lambda: T,
    samples: &[Vec<T>],
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::Config("structure condition needs at least one sample".into()));
    }
    let slack = T::lit(DEFAULT_STRUCTURE_SLACK);
    let mut report = ValidationReport::new("structure condition");
    for x in samples {
        let v = spec.value_at(x);
        if spec.class == LyapunovClass::KernelZero && v <= T::zero() {
            report.skipped += 1;
            continue;
        }
        let lhs = generator_power(spec, system, x, spec.rho)?;
        let rhs = lambda * (T::one() + v.powf(spec.rho));
        report.checked += 1;
        if lhs > rhs + slack {
            report.record(x, lhs, rhs, "L(V^rho) exceeds lambda (1 + V^rho)");
        }
    }
    Ok(report)
}

fn fd_step<T: Scalar>(xi: T) -> T {
    let base = T::fd_step();
    base.max(base * xi.abs())
}

/// Central finite differences of `V` and of `DV` against the analytic
/// gradient and Hessian, relative tolerance `tol` (scaled by `max(1, |exact|)`).
pub fn validate_derivatives<T: Scalar>(
    spec: &LyapunovSpec<T>,
    samples: &[Vec<T>],
    tol: T,
) -> Result<ValidationReport> {
    if !(tol > T::zero()) {
        return Err(Error::Config("derivative tolerance must be positive".into()));
    }
    let mut report = ValidationReport::new("derivatives");
    let two = T::lit(2.0);
    for x in samples {
        let d = x.len();
        let grad = spec.gradient_at(x);
        let hess = spec.hessian_at(x);
        let mut xp = x.clone();
        let mut xm = x.clone();
        let mut ok = true;
        for i in 0..d {
            let h = fd_step(x[i]);
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            let fd = (spec.value_at(&xp) - spec.value_at(&xm)) / (two * h);
            if ok && (fd - grad[i]).abs() > tol * grad[i].abs().max(T::one()) {
                report.record(x, (fd - grad[i]).abs(), tol, format!("gradient component {i}"));
                ok = false;
            }
            let gp = spec.gradient_at(&xp);
            let gm = spec.gradient_at(&xm);
            for j in 0..d {
                let fd = (gp[j] - gm[j]) / (two * h);
                let exact = hess[j * d + i];
                if ok && (fd - exact).abs() > tol * exact.abs().max(T::one()) {
                    report.record(x, (fd - exact).abs(), tol, format!("hessian entry ({j},{i})"));
                    ok = false;
                }
            }
            xp[i] = x[i];
            xm[i] = x[i];
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Derivative-growth bounds for `n = 1, 2`, the monotone-scaling property
/// `V(eps x) <= V(x)` for `eps` in {0.1, 0.5, 0.9}, nonnegativity, and the
/// kernel condition for the kernel-zero and hat classes.
pub fn validate_class_membership<T: Scalar>(
    spec: &LyapunovSpec<T>,
    samples: &[Vec<T>],
) -> ValidationReport {
    let mut report = ValidationReport::new("class membership");
    let slack = T::lit(BOUND_SLACK);
    let delta = spec.delta();
    let c = spec.growth_constant;
    let eps_grid = [T::lit(0.1), T::lit(0.5), T::lit(0.9)];
    for x in samples {
        report.checked += 1;
        let v = spec.value_at(x);
        if v < T::zero() {
            report.record(x, -v, T::zero(), "V is negative");
            continue;
        }
        let base = match spec.class {
            LyapunovClass::KernelZero => v,
            LyapunovClass::Offset | LyapunovClass::Hat => T::one() + v,
        };
        let g1 = norm(&spec.gradient_at(x));
        let b1 = c * base.powf(T::one() - delta);
        if !within(g1, b1, slack) {
            report.record(x, g1, b1, "|DV| exceeds c base^{1-delta}");
        }
        let g2 = norm(&spec.hessian_at(x));
        let b2 = c * base.powf(T::one() - T::lit(2.0) * delta);
        if !within(g2, b2, slack) {
            report.record(x, g2, b2, "|D2V| exceeds c base^{1-2 delta}");
        }
        for &eps in &eps_grid {
            let scaled: Vec<T> = x.iter().map(|&xi| eps * xi).collect();
            let vs = spec.value_at(&scaled);
            if !within(vs, v, slack) {
                report.record(x, vs, v, format!("V({} x) > V(x)", eps));
            }
        }
        if spec.class.requires_zero_kernel() {
            let r = norm(x);
            if r > T::zero() && v <= T::zero() {
                report.record(x, T::zero(), v, "V vanishes away from the origin");
            }
        }
    }
    if spec.class.requires_zero_kernel() {
        if let Some(d) = samples.first().map(|s| s.len()) {
            let origin = vec![T::zero(); d];
            let v0 = spec.value_at(&origin);
            report.checked += 1;
            if v0 != T::zero() {
                report.record(&origin, v0.abs(), T::zero(), "V(0) must vanish");
            }
        }
    }
    report
}

/// `V >= 0` on the samples and `V(t x)` increasing along each sampled ray for
/// `t` in {2, 4, 8}.
pub fn validate_radial_growth<T: Scalar>(spec: &LyapunovSpec<T>, samples: &[Vec<T>]) -> ValidationReport {
    let mut report = ValidationReport::new("radial unboundedness");
    for x in samples {
        if norm(x) <= T::zero() {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let mut prev = spec.value_at(x);
        if prev < T::zero() {
            report.record(x, -prev, T::zero(), "V is negative");
        }
        for t in [2.0, 4.0, 8.0] {
            let y: Vec<T> = x.iter().map(|&xi| xi * T::lit(t)).collect();
            let v = spec.value_at(&y);
            if v <= prev {
                report.record(&y, prev, v, "V not increasing along ray");
                break;
            }
            prev = v;
        }
    }
    report
}

/// `w >= 0` and, when `mu` is present, `w - mu V^rho >= -tol`.
pub fn validate_decay<T: Scalar>(
    decay: &DecayFunction<T>,
    spec: &LyapunovSpec<T>,
    samples: &[Vec<T>],
    tol: T,
) -> ValidationReport {
    let mut report = ValidationReport::new("decay function");
    for x in samples {
        report.checked += 1;
        let w = decay.value_at(x);
        if w < -tol {
            report.record(x, -w, T::zero(), "w is negative");
        }
        if let Some(mu) = decay.mu {
            let bound = mu * spec.value_at(x).powf(spec.rho);
            if w - bound < -tol * bound.max(T::one()) {
                report.record(x, bound, w, "w below mu V^rho");
            }
        }
    }
    report
}

/// Checks the scalar feasibility conditions of a rate assumption together
/// with `U <= kappa(|x|^q) <= V^a` on the samples and
/// `dt^tau <= kappa(dt^{q/2})` on a grid over `(0, delta_star]`.
pub fn validate_rate_assumption<T: Scalar>(
    rate: &RateAssumption<T>,
    spec: &LyapunovSpec<T>,
    theta: T,
    delta_star: T,
    samples: &[Vec<T>],
) -> ValidationReport {
    let mut report = ValidationReport::new("rate assumption");
    let delta4 = spec.delta();
    let origin = [T::zero()];
    let ell = rate.ell(delta4);
    report.checked += 1;
    if !(ell > T::zero()) {
        report.record(&origin, T::zero(), ell, "l = r + 2 delta_2 - 2 delta_4 / a must be positive");
    }
    let rmin = T::lit(2.0) * (delta4 / rate.a - rate.u_delta());
    report.checked += 1;
    if !(rate.r > rmin) {
        report.record(&origin, rmin, rate.r, "r must exceed 2 (delta_4 / a - delta_2)");
    }
    report.checked += 1;
    if !(spec.rho > rate.a) {
        report.record(&origin, rate.a, spec.rho, "rho must exceed a");
    }
    let tau_max = rate.tau_max(delta4, spec.rho, theta);
    report.checked += 1;
    if !(rate.tau > T::zero() && rate.tau <= tau_max) {
        report.record(&origin, rate.tau, tau_max, "tau outside (0, theta (rho - a) / (a l)]");
    }
    let slack = T::lit(BOUND_SLACK);
    for k in 0..32 {
        let dt = delta_star * T::lit(0.5f64.powi(k));
        report.checked += 1;
        let lhs = dt.powf(rate.tau);
        let rhs = (rate.kappa)(dt.powf(rate.q / T::lit(2.0)));
        if !within(lhs, rhs, slack) {
            report.record(&[dt], lhs, rhs, "dt^tau exceeds kappa(dt^{q/2})");
        }
    }
    for x in samples {
        report.checked += 1;
        let u = rate.metric_at(x);
        let k = (rate.kappa)(norm(x).powf(rate.q));
        let va = spec.value_at(x).powf(rate.a);
        if !within(u, k, slack) {
            report.record(x, u, k, "U exceeds kappa(|x|^q)");
        }
        if !within(k, va, slack) {
            report.record(x, k, va, "kappa(|x|^q) exceeds V^a");
        }
    }
    report
}
