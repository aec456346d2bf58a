//! Numerical laboratory for observability and null-control of the 1D heat
//! equation ∂ₜu − ∂ₓ²u + V(x)u = h·𝟙_Ω with a power-growth potential V.
//!
//! The crate builds every computable object of that story at desk scale:
//!
//! * [`potential`] — potential families V with growth certificates
//!   c₁(|x|−c₃)₊^{β₁} ≤ V(x) ≤ c₂⟨x⟩^{β₂} and the V = V₁ + V₂ regularity split;
//! * [`thick`] — thick control sets Ω with decaying density, the adapted
//!   interval partition xₙ₊₁ = xₙ + L·xₙ^{−s}, and seeded generators;
//! * [`spectrum`] — finite-difference eigenbases of H = −∂ₓ² + V on a
//!   certified localization interval, plus localization / Caccioppoli /
//!   eigenvalue-count checks;
//! * [`lift`] — ghost-dimension elliptic lifts Φ(x,y) = Σ bₖ·cosh(λₖy)·φₖ(x)
//!   (and the odd sinh variant), their discrete residuals, and the auxiliary
//!   ODE −φ″ + Vφ = 0 used for the divergence-form reduction;
//! * [`smallness`] — empirical propagation-of-smallness exponents α and
//!   constants C fitted against the predicted bands exp(±d·Λ²)/|log|ω||²;
//! * [`gram`] — spectral projector Gram matrices over Ω, the best spectral
//!   inequality constant K(λ) = λ_min(G)^{−1/2}, and scaling sweeps in λ;
//! * [`control`] — HUM null-control synthesis for the truncated heat system,
//!   Lebeau–Robbiano staged control, and observability-cost law sweeps.
//!
//! All randomness is seed-explicit (ChaCha8); all artifacts are deterministic.

pub mod control;
pub mod fit;
pub mod gram;
pub mod grid;
pub mod lift;
pub mod potential;
pub mod report;
pub mod smallness;
pub mod spectrum;
pub mod thick;
pub mod tridiag;

/// Errors reported by fallible laboratory operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration field failed semantic validation; `field` is a
    /// dotted path into the offending structure.
    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },
    /// A numerical routine failed to meet its contract (no convergence,
    /// singular system, overflow guard tripped).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Crate version, for artifact metadata.
pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Japanese bracket ⟨x⟩ = (1 + x²)^{1/2}.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// (a)₊ = max(a, 0), the positive part. Exact, no smoothing.
#[inline]
pub fn pos(a: f64) -> f64 {
    a.max(0.0)
}
