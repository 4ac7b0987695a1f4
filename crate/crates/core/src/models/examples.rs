use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::sde::{DecayFunction, LyapunovClass, LyapunovSpec, SdeSystem};
use crate::scalar::{norm, Scalar};
use crate::truncation::{MonotoneEnvelope, TruncationPolicy, TruncationVariant};

/// Names accepted by [`crate::models::load_model`].
pub const BUILTIN_MODELS: [(&str, &str); 3] = [
    ("planar-quartic", "2-D SDE with cubic drift and quadratic diffusion, V = |x|^2, rho = 1/8"),
    ("scalar-cubic", "dX = (-0.5X - X^3) dt + X dB, V = x^2, rho = 1/2"),
    ("duffing-vdp", "stochastic Duffing-van der Pol oscillator, V = x1^4 + x2^2 + x1 x2 + 4 x1^2"),
];

fn sq_norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

fn quadratic_lyapunov<T: Scalar>(dim: usize, rho: T, c: T) -> Result<LyapunovSpec<T>> {
    LyapunovSpec::new(
        |x: &[T]| sq_norm(x),
        |x: &[T], o: &mut [T]| {
            for (oi, &xi) in o.iter_mut().zip(x) {
                *oi = T::lit(2.0) * xi;
            }
        },
        move |_: &[T], o: &mut [T]| {
            for (k, oi) in o.iter_mut().enumerate() {
                *oi = if k / dim == k % dim { T::lit(2.0) } else { T::zero() };
            }
        },
        rho,
        2,
        2,
        c,
        LyapunovClass::KernelZero,
    )
}

/// Planar SDE `f = -2|x|^2 x`, `g = 2 sqrt(2) |x|^2 I`, with `V = |x|^2`,
/// `rho = 1/8`, `w = |x|^{2.25} / 4`, envelope `16 (u+2)^2`, `theta = 0.4`,
/// `delta_star = 1e-4`, `x0 = (1, sqrt 3)`.
pub fn example_planar_quartic<T: Scalar>() -> Result<ModelBundle<T>> {
    let rho = T::lit(0.125);
    let system = SdeSystem::new(
        2,
        2,
        |x: &[T], o: &mut [T]| {
            let r2 = sq_norm(x);
            o[0] = -T::lit(2.0) * r2 * x[0];
            o[1] = -T::lit(2.0) * r2 * x[1];
        },
        |x: &[T], o: &mut [T]| {
            let s = T::lit(2.0 * 2f64.sqrt()) * sq_norm(x);
            o[0] = s;
            o[1] = T::zero();
            o[2] = T::zero();
            o[3] = s;
        },
    )?
    .with_equilibrium(vec![T::zero(); 2])?;
    // |D2V| = 2 sqrt 2 for d = 2, so c = 3 covers both bounds.
    let lyapunov = quadratic_lyapunov(2, rho, T::lit(3.0))?;
    let decay = DecayFunction::new(move |x: &[T]| T::lit(0.25) * norm(x).powf(T::lit(2.0) * rho + T::lit(2.0)), true);
    let envelope = MonotoneEnvelope::new("16(u+2)^2", |u: T| T::lit(16.0) * (u + T::lit(2.0)).powi(2))
        .with_inverse(|v: T| T::lit(0.25) * v.sqrt() - T::lit(2.0));
    let x0 = vec![T::one(), T::lit(3f64.sqrt())];
    let k = envelope.forward(norm(&x0).max(T::one()));
    let policy = TruncationPolicy::new(TruncationVariant::StabilityBar, envelope, k, T::lit(0.4), T::lit(1e-4))?;
    ModelBundle {
        name: "planar-quartic".into(),
        system,
        lyapunov,
        decay: Some(decay),
        policy,
        x0,
        lambda: T::zero(),
        rate: None,
        convergence_x0: None,
        notes: vec![
            "LV^rho = 4 rho (4 rho - 1) |x|^{2 rho + 2} = -w(x) with rho = 1/8".into(),
            "envelope 16(u+2)^2 with inverse 0.25 sqrt(v) - 2".into(),
            "K dt^{-theta} = envelope(|x0| v 1) dt^{-0.4} = 256 dt^{-0.4}; radius 4 dt^{-0.2} - 2".into(),
            "no exponential rate mu: the model is not moment exponentially stable".into(),
        ],
    }
    .validated()
}

/// Scalar SDE `dX = (-0.5 X - X^3) dt + X dB` with `V = x^2` and `rho = 1/2`.
pub fn example_scalar_cubic<T: Scalar>() -> Result<ModelBundle<T>> {
    example_scalar_cubic_with_rho(T::lit(0.5))
}

/// Scalar cubic model for any `rho` in (0, 1).
///
/// The decay function is the exact `-LV^rho = 2 rho |x|^{2 rho + 2} +
/// 2 rho (1 - rho) |x|^{2 rho}`, so `w >= mu V^rho` with `mu = 2 rho (1 - rho)`.
/// The envelope is `s (u^2 + 1)` and `K = 110 s` with
/// `s = max(1, 1 / (4 rho (1 - rho)))`; for `rho = 1/2` this is exactly
/// `u^2 + 1`, `K = 110`, and for every `rho` the radius is
/// `sqrt(110 dt^{-1/4} - 1)`.
pub fn example_scalar_cubic_with_rho<T: Scalar>(rho: T) -> Result<ModelBundle<T>> {
    if !(rho > T::zero() && rho < T::one()) {
        return Err(Error::Config(format!("rho = {rho} must lie in (0, 1)")));
    }
    let two = T::lit(2.0);
    let mu = two * rho * (T::one() - rho);
    let s = T::one().max(T::one() / (two * mu));
    let system = SdeSystem::new(
        1,
        1,
        |x: &[T], o: &mut [T]| o[0] = -T::lit(0.5) * x[0] - x[0] * x[0] * x[0],
        |x: &[T], o: &mut [T]| o[0] = x[0],
    )?
    .with_equilibrium(vec![T::zero()])?;
    let lyapunov = quadratic_lyapunov(1, rho, two)?;
    let decay = DecayFunction::new(
        move |x: &[T]| {
            let a = x[0].abs();
            two * rho * a.powf(two * rho + two) + mu * a.powf(two * rho)
        },
        true,
    )
    .with_mu(mu);
    let envelope = MonotoneEnvelope::new("s(u^2+1)", move |u: T| s * (u * u + T::one()))
        .with_inverse(move |v: T| (v / s - T::one()).sqrt());
    let policy = TruncationPolicy::new(
        TruncationVariant::StabilityBar,
        envelope,
        T::lit(110.0) * s,
        T::lit(0.25),
        T::lit(0.008),
    )?;
    ModelBundle {
        name: "scalar-cubic".into(),
        system,
        lyapunov,
        decay: Some(decay),
        policy,
        x0: vec![T::lit(19.0)],
        lambda: T::zero(),
        rate: None,
        convergence_x0: Some(vec![T::lit(2.0)]),
        notes: vec![
            "LV^rho <= -2 rho (1 - rho) V^rho; exponentially stable for rho in (0, 1)".into(),
            "envelope u^2 + 1 with inverse sqrt(v - 1); K dt^{-theta} = 110 dt^{-1/4}; delta_star = 0.008".into(),
            "radius sqrt(110 dt^{-1/4} - 1); 110 * 0.008^{-1/4} ~ 367.84 >= envelope(19) = 362".into(),
            format!("envelope and K scaled by s = {s} so the Lambda_rho-weighted bound holds at this rho"),
        ],
    }
    .validated()
}

/// Duffing-van der Pol oscillator `z'' + 3z + 2z' + 2 z' z^2 + z^3 =
/// sqrt(2) z dB1 + sqrt(2.5) z' dB2` in state `(z, z')`.
pub fn example_duffing_vdp<T: Scalar>() -> Result<ModelBundle<T>> {
    let system = SdeSystem::new(
        2,
        2,
        |x: &[T], o: &mut [T]| {
            let (x1, x2) = (x[0], x[1]);
            o[0] = x2;
            o[1] = -T::lit(3.0) * x1 - T::lit(2.0) * x2 - T::lit(2.0) * x2 * x1 * x1 - x1 * x1 * x1;
        },
        |x: &[T], o: &mut [T]| {
            o[0] = T::zero();
            o[1] = T::zero();
            o[2] = T::lit(2f64.sqrt()) * x[0];
            o[3] = T::lit(2.5f64.sqrt()) * x[1];
        },
    )?
    .with_equilibrium(vec![T::zero(); 2])?;
    let lyapunov = LyapunovSpec::new(
        |x: &[T]| {
            let (x1, x2) = (x[0], x[1]);
            x1.powi(4) + x2 * x2 + x1 * x2 + T::lit(4.0) * x1 * x1
        },
        |x: &[T], o: &mut [T]| {
            let (x1, x2) = (x[0], x[1]);
            o[0] = T::lit(4.0) * x1.powi(3) + x2 + T::lit(8.0) * x1;
            o[1] = T::lit(2.0) * x2 + x1;
        },
        |x: &[T], o: &mut [T]| {
            o[0] = T::lit(12.0) * x[0] * x[0] + T::lit(8.0);
            o[1] = T::one();
            o[2] = T::one();
            o[3] = T::lit(2.0);
        },
        T::one(),
        4,
        4,
        T::lit(16.0),
        LyapunovClass::Hat,
    )?;
    let decay = DecayFunction::new(|x: &[T]| T::lit(0.5) * sq_norm(x), true);
    let envelope = MonotoneEnvelope::new("(36+16u^4)^{3/4}", |u: T| {
        (T::lit(36.0) + T::lit(16.0) * u.powi(4)).powf(T::lit(0.75))
    })
    .with_inverse(|v: T| T::lit(0.5) * (v.powf(T::lit(4.0 / 3.0)) - T::lit(36.0)).powf(T::lit(0.25)));
    let x0 = vec![T::one(), T::one()];
    let k = envelope.forward(norm(&x0).max(T::one()));
    let policy = TruncationPolicy::new(TruncationVariant::StabilityHat, envelope, k, T::lit(0.4), T::lit(0.01))?;
    ModelBundle {
        name: "duffing-vdp".into(),
        system,
        lyapunov,
        decay: Some(decay),
        policy,
        x0,
        lambda: T::zero(),
        rate: None,
        convergence_x0: None,
        notes: vec![
            "LV = -4 x1^2 x2^2 - x1^2 - 0.5 x2^2 - x1^4 <= -0.5 |x|^2 = -w(x); rho = 1, delta = 1/4".into(),
            "envelope (36 + 16 u^4)^{3/4} with inverse 0.5 (v^{4/3} - 36)^{1/4}".into(),
            "K dt^{-theta} = envelope(|x0| v 1) dt^{-0.4}; radius = envelope^{-1}(K dt^{-0.4})".into(),
            "the worked scheme display truncates at (|x0| v 1) dt^{-0.4} instead; not used here".into(),
            "x0 = (1, 1) and delta_star = 0.01 are not fixed by the model and were chosen here".into(),
        ],
    }
    .validated()
}
