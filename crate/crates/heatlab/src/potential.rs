//! Potential families V ≥ 0 with power growth, and numerical certificates for
//! the two standing assumptions:
//!
//! * growth: c₁(|x|−c₃)₊^{β₁} ≤ V(x) ≤ c₂⟨x⟩^{β₂} with β₂ ≥ β₁ > 0;
//! * regularity split: V = V₁ + V₂ with
//!   |V₁(x)| + |DV₁(x)| + |V₂(x)|^{4/3} ≤ c₄⟨x⟩^{β₂}.
//!
//! Checks are sampled over finite grids, not proved: potentials may be
//! black-box tables, so pointwise-for-all certification is out of reach.

use serde::{Deserialize, Serialize};

use crate::{bracket, pos, Error, Result};

/// Growth envelope constants: c₁(|x|−c₃)₊^{β₁} ≤ V(x) ≤ c₂⟨x⟩^{β₂}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl GrowthBounds {
    pub fn new(c1: f64, c2: f64, c3: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let b = GrowthBounds { c1, c2, c3, beta1, beta2 };
        b.validate()?;
        Ok(b)
    }

    /// Invariants: β₂ ≥ β₁ > 0, c₁ > 0, c₂ > 0, c₃ ≥ 0, all finite.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::config(format!("bounds.{name}"), "must be finite"));
            }
        }
        if self.c1 <= 0.0 {
            return Err(Error::config("bounds.c1", "must be > 0"));
        }
        if self.c2 <= 0.0 {
            return Err(Error::config("bounds.c2", "must be > 0"));
        }
        if self.c3 < 0.0 {
            return Err(Error::config("bounds.c3", "must be ≥ 0"));
        }
        if self.beta1 <= 0.0 {
            return Err(Error::config("bounds.beta1", "must be > 0"));
        }
        if self.beta2 < self.beta1 {
            return Err(Error::config("bounds.beta2", "must be ≥ beta1"));
        }
        Ok(())
    }

    /// Lower envelope c₁(|x|−c₃)₊^{β₁}.
    pub fn lower(&self, x: f64) -> f64 {
        self.c1 * pos(x.abs() - self.c3).powf(self.beta1)
    }

    /// Upper envelope c₂⟨x⟩^{β₂}.
    pub fn upper(&self, x: f64) -> f64 {
        self.c2 * bracket(x).powf(self.beta2)
    }
}

/// Concrete potential families. All evaluate to finite nonnegative values;
/// `Monomial` and `OscillatingExample` are even in x by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PotentialKind {
    /// V(x) = |x|^β.
    Monomial { beta: f64 },
    /// V(x) = |x|^{β₂}(sin(x²) + 1) + |x|^{β₁}: grows like ⟨x⟩^{β₂} along
    /// x² ≡ π/2 (mod 2π) but collapses to the |x|^{β₁} floor along
    /// x² ≡ 3π/2 (mod 2π).
    OscillatingExample { beta1: f64, beta2: f64 },
    /// V(x) = (|x|−c₃)₊^β + θ, the growth floor itself as a potential.
    ShiftedMonomial { beta: f64, c3: f64, theta: f64 },
    /// Piecewise-linear interpolation of sampled values; clamped to the
    /// boundary values outside the tabulated range.
    TabulatedSamples { xs: Vec<f64>, values: Vec<f64> },
}

impl PotentialKind {
    fn validate(&self) -> Result<()> {
        match self {
            PotentialKind::Monomial { beta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::config("params.beta", "must be finite and > 0"));
                }
            }
            PotentialKind::OscillatingExample { beta1, beta2 } => {
                if !(beta1.is_finite() && *beta1 > 0.0) {
                    return Err(Error::config("params.beta1", "must be finite and > 0"));
                }
                if !(beta2.is_finite() && *beta2 >= *beta1) {
                    return Err(Error::config("params.beta2", "must be finite and ≥ beta1"));
                }
            }
            PotentialKind::ShiftedMonomial { beta, c3, theta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::config("params.beta", "must be finite and > 0"));
                }
                if !(c3.is_finite() && *c3 >= 0.0) {
                    return Err(Error::config("params.c3", "must be finite and ≥ 0"));
                }
                if !(theta.is_finite() && *theta >= 0.0) {
                    return Err(Error::config("params.theta", "must be finite and ≥ 0"));
                }
            }
            PotentialKind::TabulatedSamples { xs, values } => {
                if xs.len() < 2 {
                    return Err(Error::config("params.xs", "need at least 2 sample points"));
                }
                if xs.len() != values.len() {
                    return Err(Error::config("params.values", "length must match xs"));
                }
                if !xs.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::config("params.xs", "must be strictly increasing"));
                }
                if !xs.iter().all(|v| v.is_finite()) {
                    return Err(Error::config("params.xs", "must be finite"));
                }
                if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return Err(Error::config("params.values", "must be finite and ≥ 0"));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialKind::Monomial { beta } => x.abs().powf(*beta),
            PotentialKind::OscillatingExample { beta1, beta2 } => {
                let ax = x.abs();
                ax.powf(*beta2) * ((x * x).sin() + 1.0) + ax.powf(*beta1)
            }
            PotentialKind::ShiftedMonomial { beta, c3, theta } => {
                pos(x.abs() - c3).powf(*beta) + theta
            }
            PotentialKind::TabulatedSamples { xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                if x >= *xs.last().unwrap() {
                    return *values.last().unwrap();
                }
                let j = xs.partition_point(|&t| t <= x); // xs[j-1] <= x < xs[j]
                let (x0, x1) = (xs[j - 1], xs[j]);
                let (v0, v1) = (values[j - 1], values[j]);
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// A potential together with its claimed growth envelope and an additive
/// offset (the V + θ gauge used to normalize V ≥ 1 before control runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub bounds: GrowthBounds,
    /// Additive offset applied on evaluation; see [`shift_potential`].
    #[serde(default)]
    pub shift: f64,
}

impl Potential {
    pub fn new(kind: PotentialKind, bounds: GrowthBounds) -> Result<Self> {
        kind.validate()?;
        bounds.validate()?;
        Ok(Potential { kind, bounds, shift: 0.0 })
    }

    /// Monomial |x|^β with the tight envelope (c₁, c₂, c₃) = (1, 1, 0):
    /// |x|^β ≤ ⟨x⟩^β holds pointwise and the lower bound is an identity.
    pub fn monomial(beta: f64) -> Result<Self> {
        Potential::new(
            PotentialKind::Monomial { beta },
            GrowthBounds::new(1.0, 1.0, 0.0, beta, beta)?,
        )
    }

    /// The oscillating example |x|^{β₂}(sin(x²)+1) + |x|^{β₁} with the
    /// default envelope (c₁, c₂, c₃) = (1, 3, 0), the tightest of the
    /// obvious choices since sin + 1 ≤ 2 and |x|^β ≤ ⟨x⟩^β.
    pub fn oscillating(beta1: f64, beta2: f64) -> Result<Self> {
        Potential::new(
            PotentialKind::OscillatingExample { beta1, beta2 },
            GrowthBounds::new(1.0, 3.0, 0.0, beta1, beta2)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        self.bounds.validate()?;
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(Error::config("shift", "must be finite and ≥ 0"));
        }
        Ok(())
    }

    /// Evaluate V(x). Errors on non-finite x; the result is always finite
    /// and nonnegative for valid potentials.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("potential evaluated at non-finite x = {x}")));
        }
        Ok(self.kind.eval(x) + self.shift)
    }

    /// Evaluate on a whole grid.
    pub fn evaluate_on(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Sup of V over a uniform sample of `[a, b]` (n points).
    pub fn sup_on(&self, a: f64, b: f64, n: usize) -> Result<f64> {
        let xs = crate::grid::uniform_grid(a, b, n)?;
        Ok(self
            .evaluate_on(&xs)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Report of a sampled envelope check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub holds: bool,
    /// Largest signed violation max(lower − V, V − upper) over the samples;
    /// ≤ 0 when both envelope inequalities hold everywhere.
    pub worst_violation: f64,
    /// Sample point attaining `worst_violation`.
    pub witness: f64,
}

/// Check c₁(|x|−c₃)₊^{β₁} ≤ V(x) ≤ c₂⟨x⟩^{β₂} on the given samples.
pub fn verify_growth_bounds(p: &Potential, b: &GrowthBounds, xs: &[f64]) -> Result<GrowthReport> {
    if xs.is_empty() {
        return Err(Error::Domain("verify_growth_bounds: empty sample grid".into()));
    }
    b.validate()?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = xs[0];
    for &x in xs {
        let v = p.evaluate(x)?;
        let violation = (b.lower(x) - v).max(v - b.upper(x));
        if violation > worst {
            worst = violation;
            witness = x;
        }
    }
    Ok(GrowthReport { holds: worst <= 0.0, worst_violation: worst, witness })
}

/// Gauge shift V ↦ V + θ (θ ≥ 0), used to normalize potentials so that
/// V ≥ 1: the substitution U(t) = e^{−θt}u maps solutions to solutions, so
/// control questions are invariant under it.
pub fn shift_potential(p: &Potential, theta: f64) -> Result<Potential> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Domain(format!("shift_potential: θ = {theta} must be ≥ 0")));
    }
    let mut q = p.clone();
    q.shift += theta;
    Ok(q)
}

/// Regularity split V = V₁ + V₂ claimed to satisfy
/// |V₁| + |DV₁| + |V₂|^{4/3} ≤ c₄⟨x⟩^{β₂}. The exponent β₂ is carried
/// explicitly because the combined potential, not the parts, owns the
/// growth envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct A2Split {
    pub v1: Potential,
    pub v2: Potential,
    pub c4: f64,
    pub beta2: f64,
}

/// Report of a sampled regularity-split check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct A2Report {
    pub holds: bool,
    /// max over samples of (|V₁| + |DV₁| + |V₂|^{4/3}) / ⟨x⟩^{β₂}.
    pub max_ratio: f64,
    pub witness: f64,
}

/// Check the regularity split on the given samples. DV₁ is a central
/// difference with step `h`; tabulated potentials have no symbolic
/// derivative, so the sampled derivative is the certification object.
pub fn verify_a2(split: &A2Split, xs: &[f64], h: f64) -> Result<A2Report> {
    if xs.is_empty() {
        return Err(Error::Domain("verify_a2: empty sample grid".into()));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("verify_a2: step h = {h} must be > 0")));
    }
    if !(split.c4 > 0.0 && split.beta2 > 0.0) {
        return Err(Error::Domain("verify_a2: need c4 > 0 and beta2 > 0".into()));
    }
    let mut max_ratio = f64::NEG_INFINITY;
    let mut witness = xs[0];
    for &x in xs {
        let v1 = split.v1.evaluate(x)?;
        let dv1 = (split.v1.evaluate(x + h)? - split.v1.evaluate(x - h)?) / (2.0 * h);
        let v2 = split.v2.evaluate(x)?;
        let ratio = (v1.abs() + dv1.abs() + v2.abs().powf(4.0 / 3.0)) / bracket(x).powf(split.beta2);
        if ratio > max_ratio {
            max_ratio = ratio;
            witness = x;
        }
    }
    Ok(A2Report { holds: max_ratio <= split.c4, max_ratio, witness })
}
