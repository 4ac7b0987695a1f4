//! Text descriptions of polynomial models.
//!
//! One `key = value` assignment per line (or separated by `;`), `#` starts a
//! comment. Polynomials follow the grammar in [`super::polynomial`].
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `f`, `f1`..`fd` | drift components; `d` is the largest index | required |
//! | `g`, `gi`, `gi_j` | diffusion entry `(i, j)`; `gi` is `gi_1` | zero, `m = 1` |
//! | `V` | Lyapunov function | required |
//! | `w` | decay function (kernel taken to be the origin) | required for stability variants |
//! | `phi` | envelope, a polynomial in `u` | `u^2 + 1` |
//! | `rho`, `delta`, `order`, `c` | Lyapunov exponent, `delta` with integer `1/delta`, smoothness order, growth constant | `1/2`, `1/2`, `2`, `2` |
//! | `class` | `offset`, `kernel-zero` or `hat` | `kernel-zero` if `V(0) = 0`, else `offset` |
//! | `variant` | `finite`, `bar` or `hat` | `finite` |
//! | `theta`, `delta_star` | truncation exponents | `1/2`, `1` (finite); `1/4`, `1/2` (stability) |
//! | `K` | truncation constant | `phi(|x0| v 1) delta_star^theta` |
//! | `x0` | comma-separated initial state | all ones |
//! | `lambda`, `mu` | structure constant, exponential decay rate | `0`, none |
//! | `name` | bundle name | `polynomial` |
//!
//! Missing drift components are zero. Gradient and Hessian of `V` are
//! derived exactly from its coefficients.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::polynomial::{parse_rational, CompiledPolynomial, Polynomial};
use super::ModelBundle;
use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};
use crate::sde::{DecayFunction, LyapunovClass, LyapunovSpec, SdeSystem};
use crate::truncation::{MonotoneEnvelope, TruncationPolicy, TruncationVariant};

struct Entry {
    value: String,
    line: usize,
}

fn canonical_key(key: &str) -> Result<String> {
    let indexed = |prefix: &str| -> Option<&str> {
        key.strip_prefix(prefix)
            .filter(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit() || c == '_'))
    };
    Ok(match key {
        "f" => "f1".into(),
        "g" => "g1_1".into(),
        _ if indexed("f").is_some() => key.into(),
        _ if indexed("g").is_some() => {
            if key.contains('_') {
                key.into()
            } else {
                format!("{key}_1")
            }
        }
        "V" | "w" | "phi" | "rho" | "delta" | "order" | "c" | "class" | "variant" | "K" | "theta"
        | "delta_star" | "x0" | "lambda" | "mu" | "name" => key.into(),
        _ => return Err(Error::Config(format!("unknown key `{key}`"))),
    })
}

fn split_entries(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        for piece in body.split(';') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let (k, v) = piece
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`, got `{piece}`")))?;
            let key = canonical_key(k.trim()).map_err(|e| Error::Config(format!("line {line}: {e}")))?;
            if let Some(prev) = out.get(&key) {
                return Err(Error::Config(format!(
                    "duplicate key `{key}` on lines {} and {line}",
                    prev.line
                )));
            }
            out.insert(
                key,
                Entry {
                    value: v.trim().to_string(),
                    line,
                },
            );
        }
    }
    Ok(out)
}

fn index_of(key: &str, prefix: &str) -> Result<(usize, usize)> {
    let rest = &key[prefix.len()..];
    let mut parts = rest.split('_');
    let parse = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Config(format!("bad index in `{key}`")))
    };
    let i = parse(parts.next())?;
    let j = if prefix == "g" { parse(parts.next())? } else { 1 };
    if parts.next().is_some() {
        return Err(Error::Config(format!("bad index in `{key}`")));
    }
    Ok((i, j))
}

fn poly(entry: &Entry) -> Result<Polynomial> {
    Polynomial::parse(&entry.value).map_err(|e| Error::Config(format!("line {}: {e}", entry.line)))
}

fn rational(entry: &Entry) -> Result<BigRational> {
    parse_rational(&entry.value).map_err(|e| Error::Config(format!("line {}: {e}", entry.line)))
}

fn number<T: Scalar>(entries: &BTreeMap<String, Entry>, key: &str) -> Result<Option<T>> {
    entries
        .get(key)
        .map(|e| {
            rational(e)?
                .to_f64()
                .map(T::lit)
                .ok_or_else(|| Error::Config(format!("line {}: `{key}` out of range", e.line)))
        })
        .transpose()
}

fn small_int(entries: &BTreeMap<String, Entry>, key: &str, default: u32) -> Result<u32> {
    match entries.get(key) {
        None => Ok(default),
        Some(e) => {
            let r = rational(e)?;
            r.is_integer()
                .then(|| r.to_integer().to_u32())
                .flatten()
                .ok_or_else(|| Error::Config(format!("line {}: `{key}` must be a nonnegative integer", e.line)))
        }
    }
}

/// Builds and validates a bundle from a text description.
pub fn build_polynomial_model<T: Scalar>(text: &str) -> Result<ModelBundle<T>> {
    let entries = split_entries(text)?;

    let mut drift_polys: BTreeMap<usize, Polynomial> = BTreeMap::new();
    let mut diff_polys: BTreeMap<(usize, usize), Polynomial> = BTreeMap::new();
    for (key, entry) in &entries {
        if key.starts_with('f') {
            drift_polys.insert(index_of(key, "f")?.0, poly(entry)?);
        } else if key.starts_with('g') {
            diff_polys.insert(index_of(key, "g")?, poly(entry)?);
        }
    }
    let d = *drift_polys
        .keys()
        .max()
        .ok_or_else(|| Error::Config("no drift given (`f = ...`)".into()))?;
    let m = diff_polys.keys().map(|&(_, j)| j).max().unwrap_or(1);
    if let Some(&(i, _)) = diff_polys.keys().find(|&&(i, _)| i > d) {
        return Err(Error::Config(format!("diffusion row {i} exceeds the state dimension {d}")));
    }

    let v_entry = entries.get("V").ok_or_else(|| Error::Config("no Lyapunov function (`V = ...`)".into()))?;
    let v_poly = poly(v_entry)?;

    let mut drift: Vec<CompiledPolynomial<T>> = Vec::with_capacity(d);
    for i in 1..=d {
        drift.push(drift_polys.get(&i).cloned().unwrap_or_default().compile(d)?);
    }
    let mut diffusion: Vec<(usize, CompiledPolynomial<T>)> = Vec::new();
    for (&(i, j), p) in &diff_polys {
        diffusion.push(((i - 1) * m + (j - 1), p.compile(d)?));
    }
    let origin = vec![BigRational::zero(); d];
    let equilibrium_at_origin = drift_polys.values().chain(diff_polys.values()).all(|p| p.eval_exact(&origin).is_zero());

    let system = SdeSystem::new(
        d,
        m,
        move |x: &[T], o: &mut [T]| {
            for (oi, p) in o.iter_mut().zip(&drift) {
                *oi = p.eval(x);
            }
        },
        move |x: &[T], o: &mut [T]| {
            o.iter_mut().for_each(|v| *v = T::zero());
            for (k, p) in &diffusion {
                o[*k] = p.eval(x);
            }
        },
    )?;
    let system = if equilibrium_at_origin {
        system.with_equilibrium(vec![T::zero(); d])?
    } else {
        system
    };

    let value = v_poly.compile::<T>(d)?;
    let grad: Vec<CompiledPolynomial<T>> = (0..d).map(|i| v_poly.derivative(i).compile(d)).collect::<Result<_>>()?;
    let hess: Vec<CompiledPolynomial<T>> = (0..d * d)
        .map(|k| v_poly.derivative(k / d).derivative(k % d).compile(d))
        .collect::<Result<_>>()?;

    let rho = number(&entries, "rho")?.unwrap_or(T::lit(0.5));
    let delta_inv = match entries.get("delta") {
        None => 2,
        Some(e) => {
            let r = rational(e)?;
            let inv = if r.is_zero() { None } else { Some(r.recip()) };
            inv.filter(|q| q.is_integer())
                .and_then(|q| q.to_integer().to_u32())
                .ok_or_else(|| Error::Config(format!("line {}: 1/delta must be a positive integer", e.line)))?
        }
    };
    let order = small_int(&entries, "order", 2)?;
    let c = number(&entries, "c")?.unwrap_or(T::lit(2.0));
    let class = match entries.get("class").map(|e| e.value.as_str()) {
        None if v_poly.eval_exact(&origin).is_zero() => LyapunovClass::KernelZero,
        None => LyapunovClass::Offset,
        Some("offset") => LyapunovClass::Offset,
        Some("kernel-zero") => LyapunovClass::KernelZero,
        Some("hat") => LyapunovClass::Hat,
        Some(other) => return Err(Error::Config(format!("unknown class `{other}`"))),
    };
    let lyapunov = LyapunovSpec::new(
        move |x: &[T]| value.eval(x),
        move |x: &[T], o: &mut [T]| {
            for (oi, p) in o.iter_mut().zip(&grad) {
                *oi = p.eval(x);
            }
        },
        move |x: &[T], o: &mut [T]| {
            for (oi, p) in o.iter_mut().zip(&hess) {
                *oi = p.eval(x);
            }
        },
        rho,
        delta_inv,
        order,
        c,
        class,
    )?;

    let variant = match entries.get("variant").map(|e| e.value.as_str()) {
        None | Some("finite") => TruncationVariant::FiniteTime,
        Some("bar") => TruncationVariant::StabilityBar,
        Some("hat") => TruncationVariant::StabilityHat,
        Some(other) => return Err(Error::Config(format!("unknown variant `{other}`"))),
    };

    let decay = match entries.get("w") {
        Some(e) => {
            let w = poly(e)?.compile::<T>(d)?;
            let mut decay = DecayFunction::new(move |x: &[T]| w.eval(x), true);
            if let Some(mu) = number(&entries, "mu")? {
                decay = decay.with_mu(mu);
            }
            Some(decay)
        }
        None if variant.is_stability() => {
            return Err(Error::Config("stability variants need a decay function (`w = ...`)".into()))
        }
        None => None,
    };

    let phi_text = entries.get("phi").map(|e| e.value.clone()).unwrap_or_else(|| "u^2 + 1".into());
    let phi_poly = match entries.get("phi") {
        Some(e) => poly(e)?,
        None => Polynomial::parse(&phi_text)?,
    };
    if phi_poly.num_vars() > 1 {
        return Err(Error::Config("envelope `phi` must be a polynomial in u alone".into()));
    }
    let phi = phi_poly.compile::<T>(1)?;
    let envelope = MonotoneEnvelope::new(phi_text, move |u: T| phi.eval(&[u]));

    let x0 = match entries.get("x0") {
        None => vec![T::one(); d],
        Some(e) => e
            .value
            .split(',')
            .map(|s| {
                parse_rational(s.trim())
                    .ok()
                    .and_then(|r| r.to_f64())
                    .map(T::lit)
                    .ok_or_else(|| Error::Config(format!("line {}: bad x0 component `{}`", e.line, s.trim())))
            })
            .collect::<Result<Vec<T>>>()?,
    };
    if x0.len() != d {
        return Err(Error::Config(format!("x0 has {} components, state dimension is {d}", x0.len())));
    }

    let stab = variant.is_stability();
    let theta = number(&entries, "theta")?.unwrap_or(T::lit(if stab { 0.25 } else { 0.5 }));
    let delta_star = number(&entries, "delta_star")?.unwrap_or(T::lit(if stab { 0.5 } else { 1.0 }));
    let k_const = match number(&entries, "K")? {
        Some(k) => k,
        None => envelope.forward(norm(&x0).max(T::one())) * delta_star.powf(theta),
    };
    let policy = TruncationPolicy::new(variant, envelope, k_const, theta, delta_star)?;
    let lambda = number(&entries, "lambda")?.unwrap_or(T::zero());
    let name = entries.get("name").map(|e| e.value.clone()).unwrap_or_else(|| "polynomial".into());

    let mut notes = vec![format!("V = {v_poly}")];
    for (i, p) in &drift_polys {
        notes.push(format!("f{i} = {p}"));
    }
    for ((i, j), p) in &diff_polys {
        notes.push(format!("g{i}_{j} = {p}"));
    }
    notes.push(format!("K = {k_const}, theta = {theta}, delta_star = {delta_star}"));

    ModelBundle {
        name,
        system,
        lyapunov,
        decay,
        policy,
        x0,
        lambda,
        rate: None,
        convergence_x0: None,
        notes,
    }
    .validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::generator;

    #[test]
    fn cubic_without_linear_term() {
        let b: ModelBundle<f64> = build_polynomial_model("f = -x^3; g = x; V = x^2").unwrap();
        assert_eq!(generator(&b.lyapunov, &b.system, &[1.0]).unwrap(), -1.0);
        assert_eq!(b.lyapunov.class, LyapunovClass::KernelZero);
    }

    #[test]
    fn empty_diffusion_is_an_ode() {
        let b: ModelBundle<f64> = build_polynomial_model("f = -x^3\nV = x^2").unwrap();
        assert_eq!(b.system.noise_dim(), 1);
        assert_eq!(b.system.diffusion_at(&[3.0]), vec![0.0]);
        let x = [1.5f64];
        let expect = 2.0 * x[0] * -x[0].powi(3);
        assert_eq!(generator(&b.lyapunov, &b.system, &x).unwrap(), expect);
    }

    #[test]
    fn duffing_from_text() {
        let text = "
            # Duffing-van der Pol
            f1 = x2
            f2 = -3*x1 - 2*x2 - 2*x2*x1^2 - x1^3
            g2_1 = 1.4142135623730951*x1
            g2_2 = 1.5811388300841898*x2
            V = x1^4 + x2^2 + x1*x2 + 4*x1^2
            w = 0.5*x1^2 + 0.5*x2^2
            phi = (36 + 16*u^4)^2   # looser than the closed form, still valid
            class = hat; variant = hat
            rho = 1; delta = 1/4; order = 4; c = 16
            theta = 0.4; delta_star = 0.01; x0 = 1, 1
        ";
        let b: ModelBundle<f64> = build_polynomial_model(text).unwrap();
        assert_eq!(b.state_dim(), 2);
        assert_eq!(b.system.noise_dim(), 2);
        let lv = generator(&b.lyapunov, &b.system, &[1.0, 1.0]).unwrap();
        assert!((lv + 6.5).abs() < 1e-12, "{lv}");
    }

    #[test]
    fn malformed_exponent_is_config_error() {
        let e = build_polynomial_model::<f64>("f = -x^1.5; V = x^2").unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
    }

    #[test]
    fn duplicate_keys_report_both_lines() {
        let e = build_polynomial_model::<f64>("f = -x\nV = x^2\nf1 = -x^3").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("lines 1 and 3"), "{msg}");
    }

    #[test]
    fn failing_validator_is_validation_error() {
        // gradient bound |2x| <= c V^{1/2} fails for c = 1
        let e = build_polynomial_model::<f64>("f = -x^3; g = x; V = x^2; c = 1").unwrap_err();
        assert!(matches!(e, Error::Validation { .. }), "{e}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            build_polynomial_model::<f64>("f = -x; V = x^2; speed = 3"),
            Err(Error::Config(_))
        ));
    }
}
