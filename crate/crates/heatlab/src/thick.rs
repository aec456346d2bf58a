//! Interval-set algebra, the adapted partition recurrence, and thickness
//! certificates for control sets with decaying density.
//!
//! A set Ω is (γ, L)-thick of type (ρ, τ) when
//! |Ω ∩ I_{Lρ(x)}(x)| ≥ γ^{⟨x⟩^τ}·|I_{Lρ(x)}(x)| for all x, with
//! I_r(x) = [x−r, x+r]. Three scale functions ρ are supported: the power
//! scale ⟨x⟩^{−s}, the loglog scale min{(R·loglog⟨x⟩ − R^{−1})·⟨x⟩^{−β₂/2}, 1}
//! (with an alternative square root on the bracket — the source statements
//! disagree, so both live behind a flag), and the unit scale ρ ≡ 1.
//!
//! The pointwise condition is equivalent, up to constants, to a per-piece
//! density bound over the partition x₀ = 0, x₁ = L, xₙ₊₁ = xₙ + L·xₙ^{−s},
//! which is what the generator and the partition-wise checker use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{bracket, Error, Result};

/// Finite union of closed intervals, kept sorted and disjoint
/// (touching intervals are merged on construction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<[f64; 2]>> for IntervalSet {
    type Error = Error;
    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        IntervalSet::new(pairs.into_iter().map(|p| (p[0], p[1])).collect())
    }
}

impl From<IntervalSet> for Vec<[f64; 2]> {
    fn from(set: IntervalSet) -> Self {
        set.intervals.iter().map(|&(a, b)| [a, b]).collect()
    }
}

impl IntervalSet {
    /// Normalize a list of closed intervals: sort, merge overlaps and
    /// touching neighbors. Rejects NaN endpoints and a > b.
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &pairs {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Domain(format!("interval [{a}, {b}] has non-finite endpoint")));
            }
            if a > b {
                return Err(Error::Domain(format!("interval [{a}, {b}] has a > b")));
            }
        }
        pairs.sort_by(|x, y| x.partial_cmp(y).expect("finite endpoints"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(IntervalSet { intervals: merged })
    }

    pub fn empty() -> Self {
        IntervalSet { intervals: Vec::new() }
    }

    /// Single interval [a, b].
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        IntervalSet::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length Σ(b − a).
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Smallest interval containing the set, if nonempty.
    pub fn hull(&self) -> Option<(f64, f64)> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(&(a, _)), Some(&(_, b))) => Some((a, b)),
            _ => None,
        }
    }

    /// A ∪ B.
    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut pairs = self.intervals.clone();
        pairs.extend_from_slice(&other.intervals);
        IntervalSet::new(pairs).expect("normalized inputs stay valid")
    }

    /// A ∩ B by a two-pointer sweep over the sorted lists.
    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a1, b1) = self.intervals[i];
            let (a2, b2) = other.intervals[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo <= hi {
                out.push((lo, hi));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }

    /// |self ∩ [a, b]| without materializing the intersection.
    pub fn overlap_measure(&self, a: f64, b: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(x, y)| (y.min(b) - x.max(a)).max(0.0))
            .sum()
    }

    /// Complement of the set within the window [a, b].
    pub fn complement_within(&self, a: f64, b: f64) -> Result<IntervalSet> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Domain(format!("bad window [{a}, {b}]")));
        }
        let mut gaps = Vec::new();
        let mut cursor = a;
        for &(x, y) in &self.intervals {
            if y < a {
                continue;
            }
            if x > b {
                break;
            }
            if x > cursor {
                gaps.push((cursor, x));
            }
            cursor = cursor.max(y);
        }
        if cursor < b {
            gaps.push((cursor, b));
        }
        Ok(IntervalSet { intervals: gaps })
    }
}

/// Which power the loglog bracket carries: the theorem statement uses the
/// bracket itself, the proof recalls it under a square root. Neither is
/// canonical; both are implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoglogBracket {
    #[default]
    Plain,
    Sqrt,
}

/// Scale function ρ for the thickness condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoKind {
    /// ρ_s(x) = ⟨x⟩^{−s}.
    Power { s: f64 },
    /// ρ(x) = min{(R·loglog⟨x⟩ − R^{−1})^{p}·⟨x⟩^{−β₂/2}, 1} with p ∈ {1, ½}.
    Loglog {
        r: f64,
        beta2: f64,
        #[serde(default)]
        bracket: LoglogBracket,
    },
    /// ρ ≡ 1 (pieces of unit scale L).
    Unit,
}

/// Outcome of evaluating a scale function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Value(f64),
    /// The loglog bracket R·loglog⟨x⟩ − R^{−1} is nonpositive here.
    Degenerate,
}

/// Thickness profile: scale kind plus the density parameters (γ, L, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessProfile {
    #[serde(flatten)]
    pub kind: RhoKind,
    pub gamma: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub tau: f64,
}

impl ThicknessProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("profile.gamma", "must lie in (0, 1)"));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::config("profile.L", "must be finite and > 0"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::config("profile.tau", "must be finite and ≥ 0"));
        }
        match self.kind {
            RhoKind::Power { s } => {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::config("profile.s", "must be finite and ≥ 0"));
                }
            }
            RhoKind::Loglog { r, beta2, .. } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::config("profile.r", "must be finite and > 0"));
                }
                if !(beta2.is_finite() && beta2 > 0.0) {
                    return Err(Error::config("profile.beta2", "must be finite and > 0"));
                }
            }
            RhoKind::Unit => {}
        }
        Ok(())
    }

    /// Evaluate ρ(x).
    pub fn rho(&self, x: f64) -> Rho {
        match self.kind {
            RhoKind::Power { s } => Rho::Value(bracket(x).powf(-s)),
            RhoKind::Loglog { r, beta2, bracket: pow } => {
                let b = r * bracket(x).ln().ln() - 1.0 / r;
                if !(b > 0.0) {
                    return Rho::Degenerate;
                }
                let factor = match pow {
                    LoglogBracket::Plain => b,
                    LoglogBracket::Sqrt => b.sqrt(),
                };
                Rho::Value((factor * bracket(x).powf(-beta2 / 2.0)).min(1.0))
            }
            RhoKind::Unit => Rho::Value(1.0),
        }
    }

    /// Required density γ^{⟨x⟩^τ} at the point x.
    pub fn required_density(&self, x: f64) -> f64 {
        self.gamma.powf(bracket(x).powf(self.tau))
    }
}

/// Adapted partition: centers x₀ = 0, x₁ = L, xₙ₊₁ = xₙ + L·xₙ^{−s}, with
/// pieces I₀ = [−L, L], Iₙ = [xₙ, xₙ₊₁], I₋ₙ = −Iₙ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    #[serde(rename = "L")]
    pub l: f64,
    pub s: f64,
    /// Nonnegative centers x₀, x₁, …; the negative side is the mirror image.
    pub centers: Vec<f64>,
}

/// One partition piece: signed index, interval, and the label xₙ whose
/// bracket enters the density requirement (x₋ₙ and xₙ share ⟨xₙ⟩).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub n: i64,
    pub a: f64,
    pub b: f64,
    pub label: f64,
}

impl Partition {
    /// Number of pieces per side (the centers list holds N + 2 entries).
    pub fn pieces_per_side(&self) -> usize {
        self.centers.len().saturating_sub(2)
    }

    /// All pieces I₋ₙ, …, I₀, …, Iₙ in ascending spatial order.
    pub fn pieces(&self) -> Vec<Piece> {
        let n_side = self.pieces_per_side() as i64;
        let mut out = Vec::with_capacity(2 * n_side as usize + 1);
        for n in -n_side..=n_side {
            out.push(self.piece(n));
        }
        out
    }

    /// Piece by signed index; |n| ≤ pieces_per_side().
    pub fn piece(&self, n: i64) -> Piece {
        let k = n.unsigned_abs() as usize;
        debug_assert!(k + 1 < self.centers.len());
        if n == 0 {
            return Piece { n: 0, a: -self.l, b: self.l, label: 0.0 };
        }
        let (lo, hi) = (self.centers[k], self.centers[k + 1]);
        if n > 0 {
            Piece { n, a: lo, b: hi, label: lo }
        } else {
            Piece { n, a: -hi, b: -lo, label: -lo }
        }
    }
}

/// Iterate the recurrence to produce `n_pieces` pieces on each side of I₀.
pub fn build_partition(l: f64, s: f64, n_pieces: usize) -> Result<Partition> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Domain(format!("build_partition: L = {l} must be > 0")));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::Domain(format!("build_partition: s = {s} must be ≥ 0")));
    }
    if n_pieces == 0 {
        return Err(Error::Domain("build_partition: need at least one piece".into()));
    }
    let mut centers = Vec::with_capacity(n_pieces + 2);
    centers.push(0.0);
    centers.push(l);
    let mut x = l;
    for _ in 0..n_pieces {
        // x^{-s} via powf; s = 0 gives the constant step L exactly.
        let step = if s == 0.0 { l } else { l * x.powf(-s) };
        x += step;
        centers.push(x);
    }
    Ok(Partition { l, s, centers })
}

/// Ratios xₙ / ((s+1)·L·n)^{1/(s+1)} for n ≥ 1; they approach 1.
pub fn partition_asymptotics(p: &Partition) -> Vec<f64> {
    let e = 1.0 / (p.s + 1.0);
    p.centers
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, &x)| x / ((p.s + 1.0) * p.l * n as f64).powf(e))
        .collect()
}

/// Slack absorbing endpoint rounding in density comparisons. Densities lie
/// in [0, 1], so the absolute form dominates the relative one and also covers
/// generated pieces whose target length is below rounding resolution.
const DENSITY_SLACK: f64 = 1e-12;

fn density_ok(measured: f64, required: f64) -> bool {
    measured >= required - DENSITY_SLACK * required.max(1.0)
}

/// Pointwise thickness report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub holds: bool,
    /// Sample minimizing measured/required density.
    pub worst_x: f64,
    /// Measured density |Ω ∩ I_{Lρ}(x)| / |I_{Lρ}(x)| at the worst sample.
    pub worst_ratio: f64,
    /// Required density γ^{⟨x⟩^τ} at the worst sample.
    pub worst_required: f64,
    /// Samples where the loglog bracket was nonpositive (excluded from `holds`).
    pub degenerate: Vec<f64>,
    /// True when some window pokes outside the hull of Ω's description:
    /// thickness beyond the described range is unchecked, never true.
    pub truncated: bool,
}

/// Check |Ω ∩ I_{Lρ(x)}(x)| ≥ γ^{⟨x⟩^τ}|I_{Lρ(x)}(x)| at every sample.
pub fn is_thick_pointwise(
    omega: &IntervalSet,
    profile: &ThicknessProfile,
    xs: &[f64],
) -> Result<PointwiseReport> {
    profile.validate()?;
    if xs.is_empty() {
        return Err(Error::Domain("is_thick_pointwise: empty sample grid".into()));
    }
    let hull = omega.hull();
    let mut holds = true;
    let mut worst = (xs[0], f64::INFINITY, 1.0); // (x, ratio/required, ratio)
    let mut worst_required = 1.0;
    let mut degenerate = Vec::new();
    let mut truncated = false;
    for &x in xs {
        let rho = match profile.rho(x) {
            Rho::Value(v) => v,
            Rho::Degenerate => {
                degenerate.push(x);
                continue;
            }
        };
        let r = profile.l * rho;
        let (lo, hi) = (x - r, x + r);
        match hull {
            Some((ha, hb)) if lo >= ha && hi <= hb => {}
            _ => truncated = true,
        }
        let ratio = omega.overlap_measure(lo, hi) / (hi - lo);
        let required = profile.required_density(x);
        if !density_ok(ratio, required) {
            holds = false;
        }
        let deficit = ratio / required;
        if deficit < worst.1 {
            worst = (x, deficit, ratio);
            worst_required = required;
        }
    }
    Ok(PointwiseReport {
        holds,
        worst_x: worst.0,
        worst_ratio: worst.2,
        worst_required,
        degenerate,
        truncated,
    })
}

/// Per-piece thickness report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    pub holds: bool,
    /// (piece index, measured density, required density) per piece.
    pub pieces: Vec<(i64, f64, f64)>,
    pub worst_piece: i64,
}

/// Check |Ω ∩ Iₙ| ≥ γ^{⟨xₙ⟩^τ}|Iₙ| on every partition piece.
pub fn is_thick_partitionwise(
    omega: &IntervalSet,
    p: &Partition,
    gamma: f64,
    tau: f64,
) -> Result<PartitionReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("is_thick_partitionwise: γ = {gamma} not in (0,1)")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!("is_thick_partitionwise: τ = {tau} must be ≥ 0")));
    }
    let mut holds = true;
    let mut pieces = Vec::new();
    let mut worst = (0i64, f64::INFINITY);
    for piece in p.pieces() {
        let len = piece.b - piece.a;
        let measured = omega.overlap_measure(piece.a, piece.b) / len;
        let required = gamma.powf(bracket(piece.label).powf(tau));
        if !density_ok(measured, required) {
            holds = false;
        }
        let deficit = measured / required;
        if deficit < worst.1 {
            worst = (piece.n, deficit);
        }
        pieces.push((piece.n, measured, required));
    }
    Ok(PartitionReport { holds, pieces, worst_piece: worst.0 })
}

/// Output of [`generate_thick`]: the set plus a completeness flag.
#[derive(Debug, Clone)]
pub struct GeneratedThick {
    pub set: IntervalSet,
    /// Piece index at which γ^{⟨xₙ⟩^τ}|Iₙ| underflowed to zero, if any;
    /// generation stops there and the set only covers |n| < stopped_at.
    pub stopped_at: Option<i64>,
}

/// Place one subinterval of length exactly γ^{⟨xₙ⟩^τ}|Iₙ| at a seeded
/// uniform offset inside each partition piece. Deterministic in `seed`.
pub fn generate_thick(
    profile: &ThicknessProfile,
    p: &Partition,
    seed: u64,
) -> Result<GeneratedThick> {
    profile.validate()?;
    match profile.kind {
        RhoKind::Power { s } => {
            if profile.l != p.l || s != p.s {
                return Err(Error::Domain(
                    "generate_thick: power profile (L, s) must match the partition".into(),
                ));
            }
        }
        RhoKind::Unit => {
            if profile.l != p.l || p.s != 0.0 {
                return Err(Error::Domain(
                    "generate_thick: unit profile needs an s = 0 partition with the same L".into(),
                ));
            }
        }
        RhoKind::Loglog { beta2, .. } => {
            // The natural partition for the loglog scale decays like the
            // power β₂/2; anything else mismatches the piece lengths.
            if profile.l != p.l || p.s != beta2 / 2.0 {
                return Err(Error::Domain(
                    "generate_thick: loglog profile needs s = β₂/2 and the same L".into(),
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut stopped_at = None;
    for piece in p.pieces() {
        let len_piece = piece.b - piece.a;
        let len = profile.required_density(piece.label) * len_piece;
        if len == 0.0 {
            stopped_at = Some(piece.n);
            break;
        }
        let offset: f64 = rng.gen_range(0.0..1.0) * (len_piece - len);
        pairs.push((piece.a + offset, piece.a + offset + len));
    }
    Ok(GeneratedThick { set: IntervalSet::new(pairs)?, stopped_at })
}
