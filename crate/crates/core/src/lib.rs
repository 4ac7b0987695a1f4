//! V-truncated Euler-Maruyama schemes for SDEs whose drift and diffusion grow
//! superlinearly, with validators for the Lyapunov-function hypotheses and a
//! Monte Carlo harness for moments, strong errors and long-time stability.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the built-in models and
//! the command-line tool use.
//!
//! ```
//! use vtem::{example_scalar_cubic, generator};
//!
//! let model = example_scalar_cubic::<f64>().unwrap();
//! let lv = generator(&model.lyapunov, &model.system, &[1.0]).unwrap();
//! assert!((lv + 2.0).abs() < 1e-12);
//! ```

pub mod brownian;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod scalar;
pub mod scheme;
pub mod sde;
pub mod truncation;
pub mod validate;

pub use brownian::{step_count, step_ratio, BrownianGrid};
pub use error::{Error, Result};
pub use models::{
    build_polynomial_model, example_duffing_vdp, example_planar_quartic, example_scalar_cubic,
    example_scalar_cubic_with_rho, load_model, ModelBundle, BUILTIN_MODELS,
};
pub use montecarlo::{
    distance_to_kernel, estimate_lyapunov, estimate_moment_sup, estimate_strong_error, fit_loglog,
    stability_experiment, ErrorReport, ErrorRow, LyapunovEstimate, MomentReport, MonteCarloSettings,
    StabilityReport,
};
pub use scalar::Scalar;
pub use scheme::{interpolate_auxiliary, simulate, step_classical, step_truncated, PathResult, Scheme, SchemeConfig};
pub use sde::{
    generator, generator_power, DecayFunction, LyapunovClass, LyapunovSpec, RateAssumption, SdeSystem,
};
pub use truncation::{
    envelope_validate, growth_bound_check, MonotoneEnvelope, TruncationPolicy, TruncationVariant,
};
pub use validate::{
    validate_class_membership, validate_decay, validate_derivatives, validate_radial_growth,
    validate_rate_assumption, validate_structure_condition, ValidationReport,
};

pub type SdeSystemF64 = SdeSystem<f64>;
pub type LyapunovSpecF64 = LyapunovSpec<f64>;
pub type TruncationPolicyF64 = TruncationPolicy<f64>;
pub type BrownianGridF64 = BrownianGrid<f64>;
pub type PathResultF64 = PathResult<f64>;
pub type ModelBundleF64 = ModelBundle<f64>;
pub type ModelBundleF32 = ModelBundle<f32>;
pub type ErrorReportF64 = ErrorReport<f64>;
pub type StabilityReportF64 = StabilityReport<f64>;
