//! Model bundles: an SDE together with everything the schemes and validators
//! need (Lyapunov data, decay function, truncation policy, initial state).

pub mod description;
mod examples;
pub mod polynomial;

pub use description::build_polynomial_model;
pub use examples::{
    example_duffing_vdp, example_planar_quartic, example_scalar_cubic, example_scalar_cubic_with_rho,
    BUILTIN_MODELS,
};

use crate::error::{Error, Result};
use crate::sde::{DecayFunction, LyapunovSpec, RateAssumption, SdeSystem};
use crate::scalar::{norm, to_f64_vec, Scalar};
use crate::truncation::{envelope_validate, TruncationPolicy};
use crate::validate::{
    sample_set, validate_class_membership, validate_decay, validate_derivatives, validate_radial_growth,
    validate_structure_condition, ValidationReport, DEFAULT_DERIVATIVE_TOL,
};

const SAMPLE_COUNT: usize = 256;
const ENVELOPE_DIRECTIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct ModelBundle<T> {
    pub name: String,
    pub system: SdeSystem<T>,
    pub lyapunov: LyapunovSpec<T>,
    pub decay: Option<DecayFunction<T>>,
    pub policy: TruncationPolicy<T>,
    pub x0: Vec<T>,
    /// Constant in `L(1+V)^rho <= lambda (1 + V^rho)`.
    pub lambda: T,
    pub rate: Option<RateAssumption<T>>,
    /// Initial state used by convergence studies when none is given.
    pub convergence_x0: Option<Vec<T>>,
    /// Where each constant came from.
    pub notes: Vec<String>,
}

impl<T: Scalar> ModelBundle<T> {
    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    /// Half-width of the validator sample box, `2 (|x0| v 1)`.
    pub fn sample_half_width(&self) -> T {
        T::lit(2.0) * norm(&self.x0).max(T::one())
    }

    pub fn default_samples(&self) -> Vec<Vec<T>> {
        let mut extra: Vec<&[T]> = vec![&self.x0];
        if let Some(eq) = self.system.equilibrium() {
            extra.push(eq);
        }
        sample_set(self.state_dim(), self.sample_half_width(), SAMPLE_COUNT, &extra)
    }

    fn derivative_tol() -> T {
        if T::epsilon() > T::lit(1e-10) {
            T::lit(1e-2)
        } else {
            T::lit(DEFAULT_DERIVATIVE_TOL)
        }
    }

    /// Runs every validator on the default sample box.
    pub fn validate_all(&self) -> Result<Vec<ValidationReport>> {
        let samples = self.default_samples();
        let mut reports = vec![
            validate_derivatives(&self.lyapunov, &samples, Self::derivative_tol())?,
            validate_class_membership(&self.lyapunov, &samples),
            validate_radial_growth(&self.lyapunov, &samples),
        ];
        if let Some(decay) = &self.decay {
            reports.push(validate_decay(decay, &self.lyapunov, &samples, T::lit(1e-9)));
        }
        let top = self.sample_half_width();
        let radii: Vec<T> = (0..8)
            .map(|i| top.powf(T::lit(i as f64 / 7.0)))
            .collect();
        let mut grid = radii.clone();
        grid.insert(0, self.policy.envelope.domain_floor());
        reports.push(self.policy.envelope.check(&grid));
        let (env, _) = envelope_validate(
            &self.policy,
            &self.lyapunov,
            &self.system,
            self.decay.as_ref(),
            &radii,
            ENVELOPE_DIRECTIONS,
        )?;
        reports.push(env);
        reports.push(validate_structure_condition(
            &self.lyapunov,
            &self.system,
            self.lambda,
            &samples,
        )?);
        let mut feas = ValidationReport::new("policy feasibility");
        feas.checked = 1;
        let lhs = self.policy.level(self.policy.delta_star);
        let rhs = self.policy.envelope.forward(norm(&self.x0).max(T::one()));
        if !(lhs >= rhs) {
            feas.record(&self.x0, rhs, lhs, "envelope(|x0| v 1) exceeds K delta_star^{-theta}");
        }
        reports.push(feas);
        Ok(reports)
    }

    /// Fails with the first violated validator.
    pub fn validated(self) -> Result<Self> {
        for r in self.validate_all()? {
            r.into_result()?;
        }
        Ok(self)
    }

    /// Same model from another initial state. `K` and `theta` are kept and
    /// `delta_star` becomes the largest feasible step, capped at 1/2 for the
    /// stability variants and 1 otherwise.
    pub fn with_initial_state(&self, x0: Vec<T>) -> Result<Self> {
        if x0.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "initial state {:?} has wrong dimension",
                to_f64_vec(&x0)
            )));
        }
        let cap = if self.policy.variant.is_stability() {
            T::lit(0.5)
        } else {
            T::one()
        };
        let mut policy = self.policy.clone();
        policy.delta_star = policy.max_feasible_step(&x0, cap);
        let policy = TruncationPolicy::new(
            policy.variant,
            policy.envelope,
            policy.k_const,
            policy.theta,
            policy.delta_star,
        )?;
        let mut bundle = self.clone();
        bundle.notes.push(format!(
            "initial state moved to {:?}; delta_star re-derived as {}",
            to_f64_vec(&x0),
            policy.delta_star
        ));
        bundle.x0 = x0;
        bundle.policy = policy;
        bundle.validated()
    }
}

/// Built-in model by CLI name, or a polynomial description file by path.
pub fn load_model<T: Scalar>(name_or_path: &str) -> Result<ModelBundle<T>> {
    match name_or_path {
        "planar-quartic" => example_planar_quartic(),
        "scalar-cubic" => example_scalar_cubic(),
        "duffing-vdp" => example_duffing_vdp(),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("unknown model `{path}` (not built in, and not readable: {e})"))
            })?;
            build_polynomial_model(&text)
        }
    }
}
