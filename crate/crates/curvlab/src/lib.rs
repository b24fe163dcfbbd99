//! Numerical laboratory for the functional R_p(g) = ∫_M |R(g)|^p dv_g on
//! constant-curvature model geometries.
//!
//! The crate builds discrete models of spheres, real hyperbolic space (as a
//! compactly supported perturbation problem on a Poincaré-ball chart), Berger
//! spheres, and products of these, then evaluates the gradient and second
//! variation of R_p and cross-checks every closed-form expression three ways:
//! exact coefficient algebra, quadrature of the defining integrals, and
//! finite differences of R_p itself along metric lines g + t h.
//!
//! Everything is deterministic: seeded probe fields, fixed reduction order,
//! and thread-count-independent results.

pub mod coeff;
pub mod grid;
pub mod field;
pub mod manifold;
pub mod ops;
pub mod variation;
pub mod functional;
pub mod decompose;
pub mod hessian;
pub mod sep;
pub mod product;
pub mod stability;
pub mod report;

/// Scalar type used by the discretized grid stack. The exact coefficient
/// algebra in [`hessian`] and [`stability`] is generic over [`coeff::Coeff`]
/// instead, so rational arithmetic can drive the same formulas.
pub type Real = f64;

/// Exact rational scalar for coefficient-level identities.
pub type Rat = num_rational::Rational64;

/// Default tolerance for identity residuals measured relative to the norm of
/// the largest term entering the identity.
pub const TOL_IDENTITY: Real = 1e-6;

/// Default tolerance for finite-difference cross-checks of Hessian values.
pub const TOL_FD: Real = 1e-3;

/// Default tolerance for eigenvalue-style scalar checks (harmonic Hessian
/// values on the sphere).
pub const TOL_EIGEN: Real = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported exponent p = {0}: the integrand |R|^p is C^2 in the metric only for p >= 2")]
    UnsupportedExponent(Real),
    #[error("Berger metrics are handled algebraically; use the berger-scan entry point instead of a grid build")]
    BergerNeedsScan,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
