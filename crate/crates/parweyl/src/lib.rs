//! Numerical differential geometry for pseudo-Riemannian metrics with a
//! parallel Weyl tensor.
//!
//! The crate builds coordinate metric fields from a small closed-form
//! expression vocabulary, differentiates them exactly to third order with
//! truncated-Taylor forward jets, assembles the full curvature bundle
//! (connection, Riemann, Ricci, scalar, Schouten, Weyl, and the covariant
//! derivatives of Riemann and Weyl), and verifies the structural claims that
//! characterize conformally symmetric metrics: nullity and parallelism of the
//! Olszak distribution, rank of the Weyl operator on 2-forms, curvature
//! decompositions, the local-symmetry dichotomies of the two explicit metric
//! families, and the exponential-map pullback normal form.
//!
//! Everything is generic over the floating-point scalar via [`Real`]; the
//! verification harness in [`verify`] is pinned to `f64`.

pub mod chart;
pub mod curvature;
pub mod expr;
pub mod families;
pub mod geodesic;
pub mod jet;
pub mod linalg;
pub mod olszak;
pub mod scalar;
pub mod tensor;
pub mod verify;

pub use chart::{ChartSpec, MetricField, MetricJet};
pub use curvature::{ConnectionCoefficients, CurvatureBundle};
pub use expr::{Expr, PiecewisePoly, Poly};
pub use families::{D1FamilySpec, D2FamilySpec, SurfaceConnectionSpec};
pub use geodesic::{FMapSpec, GeodesicState};
pub use olszak::{DistributionBasis, OmegaForm};
pub use scalar::Real;
pub use tensor::{DenseTensor, SignatureDiagnostic, Variance};
pub use verify::{CheckResult, Report, VerificationConfig};

/// Single-precision jet alias; useful for smoke-testing genericity.
pub type Jet32 = jet::Jet<f32>;
/// Double-precision jet, the working type of the verifier.
pub type Jet64 = jet::Jet<f64>;
/// Double-precision dense tensor.
pub type Tensor64 = tensor::DenseTensor<f64>;
/// Double-precision metric jet.
pub type MetricJet64 = chart::MetricJet<f64>;
/// Double-precision curvature bundle.
pub type CurvatureBundle64 = curvature::CurvatureBundle<f64>;
