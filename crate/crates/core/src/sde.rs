//! SDE models, Lyapunov data and the generator operator
//! `LV(x) = <DV(x), f(x)> + 1/2 tr(g(x)^T D2V(x) g(x))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, dot, norm, to_f64_vec, Scalar};

/// Vector-valued callable writing its result into the output slice.
pub type VecField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;
/// Real-valued callable on the state space.
pub type ScalarField<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Real function of one real variable.
pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `dX = f(X) dt + g(X) dB` with `f: R^d -> R^d`, `g: R^d -> R^{d x m}`.
///
/// The diffusion callable fills a row-major `d x m` buffer.
#[derive(Clone)]
pub struct SdeSystem<T> {
    state_dim: usize,
    noise_dim: usize,
    drift: VecField<T>,
    diffusion: VecField<T>,
    equilibrium: Option<Vec<T>>,
}

impl<T: Scalar> SdeSystem<T> {
    pub fn new(
        state_dim: usize,
        noise_dim: usize,
        drift: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        diffusion: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if state_dim == 0 || noise_dim == 0 {
            return Err(Error::Config("state and noise dimensions must be positive".into()));
        }
        Ok(Self {
            state_dim,
            noise_dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            equilibrium: None,
        })
    }

    /// Registers an equilibrium; `f(x*)` and `g(x*)` must vanish to 1e-12.
    pub fn with_equilibrium(mut self, x: Vec<T>) -> Result<Self> {
        if x.len() != self.state_dim {
            return Err(Error::Config("equilibrium has wrong dimension".into()));
        }
        let tol = T::lit(1e-12);
        let f = self.drift_at(&x);
        let g = self.diffusion_at(&x);
        if norm(&f) > tol || norm(&g) > tol {
            return Err(Error::Validation {
                check: "equilibrium".into(),
                detail: format!("|f(x*)| = {}, |g(x*)| = {}", norm(&f), norm(&g)),
                witness: to_f64_vec(&x),
            });
        }
        self.equilibrium = Some(x);
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn equilibrium(&self) -> Option<&[T]> {
        self.equilibrium.as_deref()
    }

    #[inline]
    pub fn drift_into(&self, x: &[T], out: &mut [T]) {
        (self.drift)(x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, x: &[T], out: &mut [T]) {
        (self.diffusion)(x, out)
    }

    pub fn drift_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.state_dim];
        self.drift_into(x, &mut out);
        out
    }

    /// Row-major `d x m` diffusion matrix.
    pub fn diffusion_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.state_dim * self.noise_dim];
        self.diffusion_into(x, &mut out);
        out
    }
}

impl<T> fmt::Debug for SdeSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .finish_non_exhaustive()
    }
}

/// Which derivative-growth family a Lyapunov function is declared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovClass {
    /// `|D^n V| <= c (1+V)^{1-n delta}`.
    Offset,
    /// `|D^n V| <= c V^{1-n delta}` and `Ker(V) = {0}`.
    KernelZero,
    /// Offset bounds together with `Ker(V) = {0}`.
    Hat,
}

impl LyapunovClass {
    pub fn requires_zero_kernel(self) -> bool {
        !matches!(self, LyapunovClass::Offset)
    }
}

/// A Lyapunov function with analytic gradient and Hessian plus class data.
#[derive(Clone)]
pub struct LyapunovSpec<T> {
    pub value: ScalarField<T>,
    /// Writes `DV(x)` (length d).
    pub gradient: VecField<T>,
    /// Writes `D2V(x)` row-major (d x d).
    pub hessian: VecField<T>,
    pub rho: T,
    /// `1/delta`, an integer no smaller than `smoothness_order`.
    pub delta_inv: u32,
    pub smoothness_order: u32,
    pub growth_constant: T,
    pub class: LyapunovClass,
}

impl<T: Scalar> LyapunovSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        hessian: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        rho: T,
        delta_inv: u32,
        smoothness_order: u32,
        growth_constant: T,
        class: LyapunovClass,
    ) -> Result<Self> {
        if !(rho > T::zero()) {
            return Err(Error::Config("rho must be positive".into()));
        }
        if !(2..=4).contains(&smoothness_order) {
            return Err(Error::Config("smoothness order must be 2, 3 or 4".into()));
        }
        if delta_inv < smoothness_order {
            return Err(Error::Config(format!(
                "1/delta = {delta_inv} must be at least the smoothness order {smoothness_order}"
            )));
        }
        if !(growth_constant > T::zero()) {
            return Err(Error::Config("growth constant must be positive".into()));
        }
        Ok(Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            rho,
            delta_inv,
            smoothness_order,
            growth_constant,
            class,
        })
    }

    pub fn delta(&self) -> T {
        T::one() / T::from_u32(self.delta_inv).unwrap()
    }

    #[inline]
    pub fn value_at(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    pub fn gradient_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        (self.gradient)(x, &mut out);
        out
    }

    pub fn hessian_at(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len() * x.len()];
        (self.hessian)(x, &mut out);
        out
    }

    /// Same data with a different exponent `rho`.
    pub fn with_rho(&self, rho: T) -> Self {
        Self { rho, ..self.clone() }
    }
}

impl<T: fmt::Debug> fmt::Debug for LyapunovSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("rho", &self.rho)
            .field("delta_inv", &self.delta_inv)
            .field("smoothness_order", &self.smoothness_order)
            .field("growth_constant", &self.growth_constant)
            .field("class", &self.class)
            .finish_non_exhaustive()
    }
}

/// Decay function `w` with `LV^rho <= -w`, whose kernel is the limit set.
#[derive(Clone)]
pub struct DecayFunction<T> {
    pub w: ScalarField<T>,
    pub kernel_is_origin: bool,
    /// Exponential rate with `w >= mu V^rho`, when one exists.
    pub mu: Option<T>,
    /// Distance to `Ker(w)` for kernels other than the origin.
    pub distance: Option<ScalarField<T>>,
}

impl<T: Scalar> DecayFunction<T> {
    pub fn new(w: impl Fn(&[T]) -> T + Send + Sync + 'static, kernel_is_origin: bool) -> Self {
        Self {
            w: Arc::new(w),
            kernel_is_origin,
            mu: None,
            distance: None,
        }
    }

    pub fn with_mu(mut self, mu: T) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_distance(mut self, d: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.distance = Some(Arc::new(d));
        self
    }

    #[inline]
    pub fn value_at(&self, x: &[T]) -> T {
        (self.w)(x)
    }
}

impl<T: fmt::Debug> fmt::Debug for DecayFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecayFunction")
            .field("kernel_is_origin", &self.kernel_is_origin)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

/// Hypotheses behind the strong-rate estimate `E U(Ybar(T) - X(T)) <= C kappa(C dt^{q/2})`.
#[derive(Clone)]
pub struct RateAssumption<T> {
    /// Error metric `U`.
    pub metric_u: ScalarField<T>,
    /// `1/delta_2` for `U`.
    pub u_delta_inv: u32,
    pub kappa: RealFn<T>,
    pub kappa_inverse: RealFn<T>,
    pub a: T,
    pub q: T,
    pub tau: T,
    pub c1: T,
    pub iota: T,
    pub kbar: T,
    pub r: T,
}

impl<T: Scalar> RateAssumption<T> {
    pub fn u_delta(&self) -> T {
        T::one() / T::from_u32(self.u_delta_inv).unwrap()
    }

    /// `l = r + 2 delta_2 - 2 delta_4 / a`.
    pub fn ell(&self, delta4: T) -> T {
        self.r + T::lit(2.0) * self.u_delta() - T::lit(2.0) * delta4 / self.a
    }

    /// Largest admissible `tau`, `theta (rho - a) / (a l)`.
    pub fn tau_max(&self, delta4: T, rho: T, theta: T) -> T {
        theta * (rho - self.a) / (self.a * self.ell(delta4))
    }

    /// Power-metric family `U = |x|^qbar`, `kappa(s) = s^{1/2}` with `q = 2 qbar`.
    pub fn power_metric(qbar: u32, kbar: T, r: T) -> Self {
        let qb = T::from_u32(qbar).unwrap();
        Self {
            metric_u: Arc::new(move |x: &[T]| norm(x).powf(qb)),
            u_delta_inv: qbar,
            kappa: Arc::new(|s: T| s.sqrt()),
            kappa_inverse: Arc::new(|s: T| s * s),
            a: qb / T::lit(2.0),
            q: T::lit(2.0) * qb,
            tau: qb / T::lit(2.0),
            c1: T::lit(2.0).powf(qb - T::one()),
            iota: T::one(),
            kbar,
            r,
        }
    }

    #[inline]
    pub fn metric_at(&self, x: &[T]) -> T {
        (self.metric_u)(x)
    }
}

impl<T: fmt::Debug> fmt::Debug for RateAssumption<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateAssumption")
            .field("u_delta_inv", &self.u_delta_inv)
            .field("a", &self.a)
            .field("q", &self.q)
            .field("tau", &self.tau)
            .field("r", &self.r)
            .finish_non_exhaustive()
    }
}

fn check_dims<T: Scalar>(system: &SdeSystem<T>, x: &[T]) -> Result<()> {
    if x.len() != system.state_dim() {
        return Err(Error::Config(format!(
            "state has dimension {}, system expects {}",
            x.len(),
            system.state_dim()
        )));
    }
    if !all_finite(x) {
        return Err(Error::numeric("generator input", to_f64_vec(x)));
    }
    Ok(())
}

/// `tr(g^T H g)` for row-major `g` (d x m) and `H` (d x d).
fn trace_quadratic<T: Scalar>(g: &[T], h: &[T], d: usize, m: usize) -> T {
    let mut acc = T::zero();
    for j in 0..m {
        for a in 0..d {
            let ga = g[a * m + j];
            if ga == T::zero() {
                continue;
            }
            let mut row = T::zero();
            for b in 0..d {
                row = row + h[a * d + b] * g[b * m + j];
            }
            acc = acc + ga * row;
        }
    }
    acc
}

/// `|DV(x) g(x)|`, the Euclidean norm of the row vector `DV g`.
fn gradient_diffusion_sq<T: Scalar>(grad: &[T], g: &[T], d: usize, m: usize) -> T {
    (0..m)
        .map(|j| {
            let s: T = (0..d).map(|a| grad[a] * g[a * m + j]).sum();
            s * s
        })
        .sum()
}

/// The generator `LV(x)`.
pub fn generator<T: Scalar>(spec: &LyapunovSpec<T>, system: &SdeSystem<T>, x: &[T]) -> Result<T> {
    check_dims(system, x)?;
    let (d, m) = (system.state_dim(), system.noise_dim());
    let grad = spec.gradient_at(x);
    let hess = spec.hessian_at(x);
    let f = system.drift_at(x);
    let g = system.diffusion_at(x);
    let out = dot(&grad, &f) + T::lit(0.5) * trace_quadratic(&g, &hess, d, m);
    if !out.is_finite() {
        return Err(Error::numeric("generator", to_f64_vec(x)));
    }
    Ok(out)
}

/// Generator applied to `(1+V)^rho` (offset and hat classes) or `V^rho`
/// (kernel-zero class):
/// `(rho/2) b^{rho-2} [2 b LV + (rho-1) |DV g|^2]` with `b` the base.
pub fn generator_power<T: Scalar>(
    spec: &LyapunovSpec<T>,
    system: &SdeSystem<T>,
    x: &[T],
    rho: T,
) -> Result<T> {
    check_dims(system, x)?;
    let (d, m) = (system.state_dim(), system.noise_dim());
    let v = spec.value_at(x);
    let base = match spec.class {
        LyapunovClass::KernelZero => {
            if v <= T::zero() {
                return Err(Error::DegenerateInput(format!(
                    "V(x) = 0 at {:?}; V^rho is not differentiable there",
                    to_f64_vec(x)
                )));
            }
            v
        }
        LyapunovClass::Offset | LyapunovClass::Hat => T::one() + v,
    };
    let lv = generator(spec, system, x)?;
    let grad = spec.gradient_at(x);
    let g = system.diffusion_at(x);
    let dvg = gradient_diffusion_sq(&grad, &g, d, m);
    let two = T::lit(2.0);
    let out = rho / two * base.powf(rho - two) * (two * base * lv + (rho - T::one()) * dvg);
    if !out.is_finite() {
        return Err(Error::numeric("generator_power", to_f64_vec(x)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cubic() -> (SdeSystem<f64>, LyapunovSpec<f64>) {
        let sys = SdeSystem::new(
            1,
            1,
            |x: &[f64], o: &mut [f64]| o[0] = -0.5 * x[0] - x[0].powi(3),
            |x: &[f64], o: &mut [f64]| o[0] = x[0],
        )
        .unwrap();
        let v = LyapunovSpec::new(
            |x: &[f64]| x[0] * x[0],
            |x: &[f64], o: &mut [f64]| o[0] = 2.0 * x[0],
            |_: &[f64], o: &mut [f64]| o[0] = 2.0,
            0.5,
            2,
            2,
            2.0,
            LyapunovClass::KernelZero,
        )
        .unwrap();
        (sys, v)
    }

    #[test]
    fn generator_scalar_cubic_at_one() {
        let (sys, v) = scalar_cubic();
        assert!((generator(&v, &sys, &[1.0]).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn generator_power_scalar_cubic_half() {
        let (sys, v) = scalar_cubic();
        let got = generator_power(&v, &sys, &[1.0], 0.5).unwrap();
        assert!((got + 1.5).abs() < 1e-14, "{got}");
    }

    #[test]
    fn generator_power_kernel_zero_rejects_origin() {
        let (sys, v) = scalar_cubic();
        assert!(matches!(
            generator_power(&v, &sys, &[0.0], 0.5),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn generator_zero_at_equilibrium() {
        let (sys, v) = scalar_cubic();
        assert_eq!(generator(&v, &sys, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn generator_rejects_non_finite() {
        let (sys, v) = scalar_cubic();
        assert!(matches!(
            generator(&v, &sys, &[f64::NAN]),
            Err(Error::NumericFailure { .. })
        ));
    }

    #[test]
    fn equilibrium_must_be_stationary() {
        let (sys, _) = scalar_cubic();
        assert!(sys.clone().with_equilibrium(vec![0.0]).is_ok());
        assert!(sys.with_equilibrium(vec![1.0]).is_err());
    }

    #[test]
    fn delta_must_respect_order() {
        let r = LyapunovSpec::<f64>::new(
            |_| 0.0,
            |_, _| {},
            |_, _| {},
            0.5,
            2,
            4,
            1.0,
            LyapunovClass::Offset,
        );
        assert!(r.is_err());
    }

    #[test]
    fn power_metric_ell() {
        let ra = RateAssumption::<f64>::power_metric(2, 1.5, 1.0);
        assert_eq!(ra.a, 1.0);
        assert_eq!(ra.q, 4.0);
        assert!((ra.ell(0.25) - 1.5).abs() < 1e-15);
        assert_eq!(ra.metric_at(&[3.0, 4.0]), 25.0);
    }
}
