//! Configuration schema and validation for the experiment driver.
//!
//! A config file is JSON: either a single experiment object or a batch
//! `{"experiments": [...]}`. Each entry names its kind, an output
//! directory, and a kind-specific `spec` payload. Two rules hold
//! everywhere:
//!
//! * unknown fields are rejected at any depth with a dotted field path;
//! * every semantic precondition (γ ∈ (0,1), ζ ∈ (0,2), ordered grids,
//!   spanning frequency lists, overflow guards) is checked here, before
//!   any computation or file write happens.
//!
//! Validation separates hard errors (the run cannot proceed, exit 2) from
//! warnings (the run is well-posed but sits outside some quantitative
//! regime, e.g. a thickness scale decaying slower than the potential's
//! growth envelope guarantees).

use std::fmt;
use std::path::{Path, PathBuf};

use heatlab::control::{ControlConfig, LrParameters};
use heatlab::gram::regular_set;
use heatlab::grid::Grid1D;
use heatlab::lift::{LiftKind, OVERFLOW_GUARD};
use heatlab::potential::Potential;
use heatlab::smallness::LiftGeometry;
use heatlab::spectrum::{build_hamiltonian, eigen_decompose, seeded_unit_coefficients, EigenBasis};
use heatlab::thick::{build_partition, generate_thick, IntervalSet, Partition, RhoKind, ThicknessProfile};
use heatlab::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Experiment kinds the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Partition,
    Thickness,
    Eigen,
    Lift,
    Smallness,
    SpectralSweep,
    Control,
    Costlaw,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Partition => "partition",
            Kind::Thickness => "thickness",
            Kind::Eigen => "eigen",
            Kind::Lift => "lift",
            Kind::Smallness => "smallness",
            Kind::SpectralSweep => "spectral-sweep",
            Kind::Control => "control",
            Kind::Costlaw => "costlaw",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry as written in the file; `spec` stays untyped until the kind
/// is known.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    experiment: Kind,
    #[serde(default)]
    name: Option<String>,
    output: PathBuf,
    spec: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Batch {
    experiments: Vec<RawExperiment>,
}

/// A parsed, kind-typed experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub kind: Kind,
    pub name: Option<String>,
    /// Output directory as written in the config.
    pub output: PathBuf,
    pub spec: Spec,
}

/// Typed experiment payloads.
#[derive(Debug, Clone)]
pub enum Spec {
    Partition(PartitionSpec),
    Thickness(ThicknessSpec),
    Eigen(EigenSpec),
    Lift(LiftSpec),
    Smallness(SmallnessSpec),
    SpectralSweep(SweepSpec),
    Control(ControlSpec),
    Costlaw(CostlawSpec),
}

impl Spec {
    /// Canonical JSON of the payload, defaults materialized.
    pub fn to_value(&self) -> Result<Value> {
        let v = match self {
            Spec::Partition(s) => serde_json::to_value(s),
            Spec::Thickness(s) => serde_json::to_value(s),
            Spec::Eigen(s) => serde_json::to_value(s),
            Spec::Lift(s) => serde_json::to_value(s),
            Spec::Smallness(s) => serde_json::to_value(s),
            Spec::SpectralSweep(s) => serde_json::to_value(s),
            Spec::Control(s) => serde_json::to_value(s),
            Spec::Costlaw(s) => serde_json::to_value(s),
        }?;
        Ok(v)
    }
}

/// Parse a config file into its experiment list. Entries may later run in
/// parallel, so each needs its own output directory; duplicates are
/// rejected by [`check_distinct_outputs`] once the root override is known.
pub fn load(path: &Path) -> Result<Vec<Experiment>> {
    // An unreadable or syntactically broken config file is a configuration
    // problem (exit 2), not a runtime failure, so io/json errors are wrapped.
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let root: Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let raws: Vec<(String, RawExperiment)> =
        if root.is_object() && root.get("experiments").is_some() {
            let batch: Batch = parse_at(&root, "")?;
            batch
                .experiments
                .into_iter()
                .enumerate()
                .map(|(i, raw)| (format!("experiments[{i}]."), raw))
                .collect()
        } else {
            vec![(String::new(), parse_at(&root, "")?)]
        };

    let mut experiments = Vec::with_capacity(raws.len());
    for (ctx, raw) in raws {
        let spec = parse_spec(raw.experiment, &raw.spec, &ctx)?;
        experiments.push(Experiment {
            kind: raw.experiment,
            name: raw.name,
            output: raw.output,
            spec,
        });
    }
    Ok(experiments)
}

/// Reject output-directory collisions after resolving the root override.
pub fn check_distinct_outputs(experiments: &[Experiment], root: Option<&Path>) -> Result<()> {
    for i in 0..experiments.len() {
        for j in (i + 1)..experiments.len() {
            if experiments[i].resolved_output(root) == experiments[j].resolved_output(root) {
                return Err(Error::config(
                    format!("experiments[{j}].output"),
                    format!("duplicates experiments[{i}].output; parallel entries need distinct directories"),
                ));
            }
        }
    }
    Ok(())
}

/// Deserialize with a dotted-path diagnostic on failure; `prefix` scopes
/// the path (e.g. "experiments[2].spec.").
fn parse_at<T: serde::de::DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(
        |e: serde_path_to_error::Error<serde_json::Error>| {
            let path = e.path().to_string();
            let field = if path == "." {
                prefix.trim_end_matches('.').to_string()
            } else {
                format!("{prefix}{path}")
            };
            let field = if field.is_empty() { "config".to_string() } else { field };
            Error::config(field, e.into_inner().to_string())
        },
    )
}

fn parse_spec(kind: Kind, value: &Value, ctx: &str) -> Result<Spec> {
    let prefix = format!("{ctx}spec.");
    let spec = match kind {
        Kind::Partition => Spec::Partition(parse_at(value, &prefix)?),
        Kind::Thickness => Spec::Thickness(parse_at(value, &prefix)?),
        Kind::Eigen => Spec::Eigen(parse_at(value, &prefix)?),
        Kind::Lift => Spec::Lift(parse_at(value, &prefix)?),
        Kind::Smallness => Spec::Smallness(parse_at(value, &prefix)?),
        Kind::SpectralSweep => Spec::SpectralSweep(parse_at(value, &prefix)?),
        Kind::Control => Spec::Control(parse_at(value, &prefix)?),
        Kind::Costlaw => Spec::Costlaw(parse_at(value, &prefix)?),
    };
    reject_unknown_fields(value, &spec.to_value()?, &format!("{ctx}spec"))?;
    Ok(spec)
}

/// Compare the user's JSON against the canonical re-serialization of the
/// typed spec and reject any key the schema did not consume. serde's
/// `deny_unknown_fields` cannot see through the `flatten`ed library types
/// (potentials, thickness profiles), so this round trip closes the gap.
fn reject_unknown_fields(user: &Value, canonical: &Value, path: &str) -> Result<()> {
    match (user, canonical) {
        (Value::Object(u), Value::Object(c)) => {
            for (key, uv) in u {
                match c.get(key) {
                    Some(cv) => reject_unknown_fields(uv, cv, &format!("{path}.{key}"))?,
                    None => {
                        return Err(Error::config(
                            format!("{path}.{key}"),
                            format!("unknown field `{key}`"),
                        ))
                    }
                }
            }
            Ok(())
        }
        // Index-aligned only when the round trip kept the length (interval
        // lists may merge on normalization); plain numeric arrays carry no
        // keys to check.
        (Value::Array(u), Value::Array(c)) if u.len() == c.len() => {
            for (i, (uv, cv)) in u.iter().zip(c).enumerate() {
                reject_unknown_fields(uv, cv, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Scope an error to a config path: config errors get the prefix glued on,
/// constructor domain errors become config errors at the prefix itself.
fn at(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        Error::Domain(message) => Error::config(prefix, message),
        other => other,
    }
}

/// Uniform grid window for the eigensolver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self, prefix: &str) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n).map_err(|e| at(prefix, e))
    }
}

/// Potential, grid window, and spectral reach: everything the eigensolver
/// needs to produce a basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub potential: Potential,
    pub grid: GridSpec,
    /// Keep eigenpairs with λₖ² ≤ lambda_max².
    pub lambda_max: f64,
}

impl BasisSpec {
    fn validate(&self, prefix: &str, warnings: &mut Vec<String>) -> Result<()> {
        self.potential
            .validate()
            .map_err(|e| at(&format!("{prefix}.potential"), e))?;
        let grid = self.grid.build(&format!("{prefix}.grid"))?;
        if !(self.lambda_max.is_finite() && self.lambda_max > 0.0) {
            return Err(Error::config(
                format!("{prefix}.lambda_max"),
                "must be finite and > 0",
            ));
        }
        let guideline = std::f64::consts::PI / (8.0 * self.lambda_max);
        if grid.h() > guideline {
            warnings.push(format!(
                "{prefix}.grid: spacing h = {:.3e} exceeds the pi/(8 lambda_max) = {:.3e} guideline; eigenpairs near the cutoff may be under-resolved",
                grid.h(),
                guideline
            ));
        }
        Ok(())
    }

    /// Solve the eigenproblem below `lambda_max` (the heavy step; only
    /// called from `run`, never during validation).
    pub fn build(&self) -> Result<EigenBasis> {
        let grid = Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.n)?;
        let h = build_hamiltonian(&self.potential, &grid)?;
        eigen_decompose(&h, self.lambda_max)
    }
}

/// Adapted-partition parameters; centers grow like ((s+1)Ln)^{1/(s+1)}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(rename = "L")]
    pub l: f64,
    pub s: f64,
    pub n_pieces: usize,
}

impl PartitionSpec {
    pub fn build(&self, prefix: &str) -> Result<Partition> {
        build_partition(self.l, self.s, self.n_pieces).map_err(|e| at(prefix, e))
    }
}

/// Initial element: a seeded random unit vector or explicit coefficients
/// over the modes below the experiment's cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    /// ChaCha8 unit vector; the dimension follows the cutoff.
    Seed(u64),
    /// Explicit coefficients; the length must match the subspace dimension.
    Coefficients(Vec<f64>),
}

impl ElementSpec {
    fn validate(&self, prefix: &str) -> Result<()> {
        if let ElementSpec::Coefficients(c) = self {
            if c.is_empty() {
                return Err(Error::config(
                    format!("{prefix}.coefficients"),
                    "must be nonempty",
                ));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(
                    format!("{prefix}.coefficients"),
                    "entries must be finite",
                ));
            }
        }
        Ok(())
    }

    /// Coefficients over a `dim`-mode subspace plus the seed consumed.
    pub fn resolve(&self, dim: usize) -> (Vec<f64>, Option<u64>) {
        match self {
            ElementSpec::Seed(s) => (seeded_unit_coefficients(dim, *s), Some(*s)),
            ElementSpec::Coefficients(c) => (c.clone(), None),
        }
    }
}

/// Control/observation set described in config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// Union of closed intervals, given explicitly.
    Explicit { intervals: Vec<[f64; 2]> },
    /// Seeded thick set: one subinterval of exactly the required measure
    /// inside each partition piece.
    Thick {
        profile: ThicknessProfile,
        partition: PartitionSpec,
        seed: u64,
    },
    /// Periodic set: an interval of radius radius·⟨k⟩^{−sigma} around
    /// every integer |k| ≤ n_cells.
    Regular { radius: f64, sigma: f64, n_cells: u32 },
}

/// A built set plus the bookkeeping the run artifacts need.
pub struct ResolvedSet {
    pub set: IntervalSet,
    pub seed: Option<u64>,
    /// Thick generation stopped early: required measure underflowed.
    pub stopped_at: Option<i64>,
}

impl SetSpec {
    /// Build the set; cheap enough to run during validation.
    pub fn resolve(&self, prefix: &str) -> Result<ResolvedSet> {
        match self {
            SetSpec::Explicit { intervals } => {
                let set = IntervalSet::try_from(intervals.clone())
                    .map_err(|e| at(&format!("{prefix}.explicit.intervals"), e))?;
                Ok(ResolvedSet { set, seed: None, stopped_at: None })
            }
            SetSpec::Thick { profile, partition, seed } => {
                profile
                    .validate()
                    .map_err(|e| at(&format!("{prefix}.thick"), e))?;
                let p = partition.build(&format!("{prefix}.thick.partition"))?;
                let gen = generate_thick(profile, &p, *seed)
                    .map_err(|e| at(&format!("{prefix}.thick"), e))?;
                Ok(ResolvedSet {
                    set: gen.set,
                    seed: Some(*seed),
                    stopped_at: gen.stopped_at,
                })
            }
            SetSpec::Regular { radius, sigma, n_cells } => {
                let set = regular_set(*radius, *sigma, *n_cells)
                    .map_err(|e| at(&format!("{prefix}.regular"), e))?;
                Ok(ResolvedSet { set, seed: None, stopped_at: None })
            }
        }
    }

    fn validate(&self, prefix: &str, warnings: &mut Vec<String>) -> Result<ResolvedSet> {
        let resolved = self.resolve(prefix)?;
        if resolved.set.is_empty() {
            return Err(Error::config(prefix, "the set is empty"));
        }
        if let Some(n) = resolved.stopped_at {
            warnings.push(format!(
                "{prefix}: thick generation stops at piece |n| = {n}; the required measure underflows beyond it"
            ));
        }
        Ok(resolved)
    }
}

/// `thickness`: generate a seeded thick set, then verify the per-piece
/// density bound and probe the windowed (pointwise) one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThicknessSpec {
    pub profile: ThicknessProfile,
    pub partition: PartitionSpec,
    pub seed: u64,
    /// Sample count for the windowed density probe.
    #[serde(default = "default_n_probe")]
    pub n_probe: usize,
}

fn default_n_probe() -> usize {
    200
}

/// `eigen`: solve the eigenproblem, emit the spectrum, check residuals
/// and orthonormality.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSpec {
    pub basis: BasisSpec,
    /// Also write the mode table (large: every grid point × every mode).
    #[serde(default)]
    pub emit_modes: bool,
}

/// `lift`: extend an element to the 2D field harmonic in the extra
/// variable and check the elliptic identity and energy bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub basis: BasisSpec,
    /// Frequency cutoff of the lifted element.
    pub cutoff: f64,
    pub element: ElementSpec,
    pub y_max: f64,
    /// y-grid size (odd, so y = 0 is a grid line).
    pub m: usize,
    pub kind: LiftKind,
}

/// `smallness`: sample sup-norm triples over nested boxes and fit the
/// interpolation exponent sup_inner ≤ C·sup_ω^α·sup_outer^{1−α}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallnessSpec {
    pub basis: BasisSpec,
    pub lambda_list: Vec<f64>,
    /// Base-line interval [a, b]; its measure must lie in (0, 1/2).
    pub omega: [f64; 2],
    /// Nested sampling boxes; defaults to the unit/tripled pair.
    #[serde(default = "heatlab::smallness::proposition_geometry")]
    pub geometry: LiftGeometry,
    /// Random draws per frequency.
    pub n_random: usize,
    /// y-grid size for the lifts.
    pub m: usize,
    pub seed: u64,
    /// Line-constant bracket (d₁, d₂) for the theoretical α/C band.
    #[serde(default = "default_band")]
    pub band_d: [f64; 2],
}

fn default_band() -> [f64; 2] {
    [1.0, 1.0]
}

/// `spectral-sweep`: the inequality constant K(λ) over a frequency list
/// with pinned-exponent and free-exponent growth fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub basis: BasisSpec,
    pub omega: SetSpec,
    pub lambda_list: Vec<f64>,
    /// Exponent the pinned fit regresses against.
    pub target_zeta: f64,
    /// Multiply the pinned regressor by log(λ + 1).
    #[serde(default)]
    pub with_log: bool,
}

/// Control-problem block shared by the single-shot and staged paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBody {
    pub horizon: f64,
    pub cutoff: f64,
    pub omega: SetSpec,
    pub time_nodes: usize,
    #[serde(default)]
    pub lr: LrParameters,
}

/// `control`: synthesize the minimal-norm null control, either one global
/// solve or the staged frequency ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub basis: BasisSpec,
    pub control: ControlBody,
    pub element: ElementSpec,
    /// Run the staged plan instead of one global solve.
    #[serde(default)]
    pub staged: bool,
}

/// `costlaw`: single-shot costs over a horizon list, fitted against the
/// observability cost-law regressor T^{−ζ/(2−ζ)}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostlawSpec {
    pub basis: BasisSpec,
    pub cutoff: f64,
    pub omega: SetSpec,
    pub time_nodes: usize,
    #[serde(default)]
    pub lr: LrParameters,
    pub element: ElementSpec,
    /// Ascending horizons spanning at least an 8x range.
    pub horizons: Vec<f64>,
}

impl Experiment {
    /// `name` if present, else the kind.
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }

    /// Output directory after applying the optional root override.
    pub fn resolved_output(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output.is_relative() => r.join(&self.output),
            _ => self.output.clone(),
        }
    }

    /// All semantic checks. Hard failures error out with a field path;
    /// soft regime issues come back as warning strings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        match &self.spec {
            Spec::Partition(s) => {
                s.build("spec")?;
            }
            Spec::Thickness(s) => validate_thickness(s, &mut warnings)?,
            Spec::Eigen(s) => s.basis.validate("spec.basis", &mut warnings)?,
            Spec::Lift(s) => validate_lift(s, &mut warnings)?,
            Spec::Smallness(s) => validate_smallness(s, &mut warnings)?,
            Spec::SpectralSweep(s) => validate_sweep(s, &mut warnings)?,
            Spec::Control(s) => validate_control(s, &mut warnings)?,
            Spec::Costlaw(s) => validate_costlaw(s, &mut warnings)?,
        }
        Ok(warnings)
    }
}

fn validate_thickness(s: &ThicknessSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.profile.validate().map_err(|e| at("spec", e))?;
    let p = s.partition.build("spec.partition")?;
    if s.n_probe < 2 {
        return Err(Error::config("spec.n_probe", "need at least two probe samples"));
    }
    let gen = generate_thick(&s.profile, &p, s.seed).map_err(|e| at("spec", e))?;
    if let Some(n) = gen.stopped_at {
        warnings.push(format!(
            "spec.profile: generation stops at piece |n| = {n}; the required measure underflows beyond it"
        ));
    }
    Ok(())
}

fn validate_lift(s: &LiftSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.basis.validate("spec.basis", warnings)?;
    if !(s.cutoff.is_finite() && s.cutoff > 0.0) {
        return Err(Error::config("spec.cutoff", "must be finite and > 0"));
    }
    if s.cutoff > s.basis.lambda_max {
        warnings.push(format!(
            "spec.cutoff: exceeds basis.lambda_max = {}; the subspace saturates at the basis reach",
            s.basis.lambda_max
        ));
    }
    if !(s.y_max.is_finite() && s.y_max > 0.0) {
        return Err(Error::config("spec.y_max", "must be finite and > 0"));
    }
    if s.m < 3 || s.m % 2 == 0 {
        return Err(Error::config("spec.m", "must be odd and >= 3"));
    }
    if s.cutoff * s.y_max > OVERFLOW_GUARD {
        return Err(Error::config(
            "spec.y_max",
            format!(
                "cutoff * y_max = {:.3} exceeds the overflow guard {OVERFLOW_GUARD}",
                s.cutoff * s.y_max
            ),
        ));
    }
    s.element.validate("spec.element")
}

fn validate_smallness(s: &SmallnessSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.basis.validate("spec.basis", warnings)?;
    if s.lambda_list.is_empty() {
        return Err(Error::config("spec.lambda_list", "must be nonempty"));
    }
    if s.lambda_list.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::config("spec.lambda_list", "entries must be finite and > 0"));
    }
    s.geometry.validate().map_err(|e| at("spec.geometry", e))?;
    if s.geometry.outer_x.0 < s.basis.grid.x_min || s.geometry.outer_x.1 > s.basis.grid.x_max {
        return Err(Error::config(
            "spec.geometry",
            "the outer box must sit inside the grid window",
        ));
    }
    let [a, b] = s.omega;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::config("spec.omega", "must be an ordered interval [a, b]"));
    }
    let measure = b - a;
    if !(measure > 0.0 && measure < 0.5) {
        return Err(Error::config(
            "spec.omega",
            format!("measure {measure} must lie in (0, 1/2)"),
        ));
    }
    if a < s.geometry.inner_x.0 || b > s.geometry.inner_x.1 {
        return Err(Error::config(
            "spec.omega",
            format!(
                "must sit on the inner box's base line [{}, {}]",
                s.geometry.inner_x.0, s.geometry.inner_x.1
            ),
        ));
    }
    if s.n_random == 0 {
        return Err(Error::config("spec.n_random", "must be >= 1"));
    }
    let total = s.lambda_list.len() * s.n_random;
    if total < 30 {
        return Err(Error::config(
            "spec.n_random",
            format!("the exponent fit needs at least 30 samples; lambda_list x n_random = {total}"),
        ));
    }
    if s.m < 3 || s.m % 2 == 0 {
        return Err(Error::config("spec.m", "must be odd and >= 3"));
    }
    let top = s.lambda_list.iter().cloned().fold(0.0, f64::max);
    if top * s.geometry.outer_y.1 > OVERFLOW_GUARD {
        return Err(Error::config(
            "spec.lambda_list",
            format!(
                "largest frequency times the outer box height = {:.3} exceeds the overflow guard {OVERFLOW_GUARD}",
                top * s.geometry.outer_y.1
            ),
        ));
    }
    let [d1, d2] = s.band_d;
    if !(d1 > 0.0 && d2 >= d1 && d2.is_finite()) {
        return Err(Error::config("spec.band_d", "need 0 < d1 <= d2"));
    }
    if top >= s.basis.lambda_max {
        warnings.push(format!(
            "spec.lambda_list: frequencies at or above basis.lambda_max = {} saturate at the basis reach",
            s.basis.lambda_max
        ));
    }
    Ok(())
}

fn validate_sweep(s: &SweepSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.basis.validate("spec.basis", warnings)?;
    s.omega.validate("spec.omega", warnings)?;
    let ls = &s.lambda_list;
    if ls.len() < 5 {
        return Err(Error::config("spec.lambda_list", "need at least five frequencies"));
    }
    if ls[0] <= 0.0 || ls.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(
            "spec.lambda_list",
            "frequencies must be positive and strictly increasing",
        ));
    }
    let span = (ls[ls.len() - 1] / ls[0]).powi(2);
    if span < 4.0 - 1e-12 {
        return Err(Error::config(
            "spec.lambda_list",
            format!("frequencies span only {span:.3}x in energy; need at least 4x"),
        ));
    }
    if !(s.target_zeta.is_finite() && s.target_zeta > 0.0) {
        return Err(Error::config("spec.target_zeta", "must be finite and > 0"));
    }
    if ls[ls.len() - 1] >= s.basis.lambda_max {
        return Err(Error::config(
            "spec.lambda_list",
            format!(
                "the largest frequency must stay strictly below basis.lambda_max = {} so its subspace is complete",
                s.basis.lambda_max
            ),
        ));
    }
    warnings.extend(regime_warnings(&s.omega, &s.basis.potential, "spec.omega"));
    Ok(())
}

fn validate_control(s: &ControlSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.basis.validate("spec.basis", warnings)?;
    let resolved = s.control.omega.validate("spec.control.omega", warnings)?;
    let cfg = ControlConfig {
        horizon: s.control.horizon,
        cutoff: s.control.cutoff,
        omega: resolved.set,
        time_nodes: s.control.time_nodes,
        lr: s.control.lr,
    };
    cfg.validate().map_err(|e| at("spec.control", e))?;
    if s.control.cutoff > s.basis.lambda_max {
        warnings.push(format!(
            "spec.control.cutoff: exceeds basis.lambda_max = {}; the truncation saturates at the basis reach",
            s.basis.lambda_max
        ));
    }
    s.element.validate("spec.element")?;
    warnings.extend(regime_warnings(&s.control.omega, &s.basis.potential, "spec.control.omega"));
    Ok(())
}

fn validate_costlaw(s: &CostlawSpec, warnings: &mut Vec<String>) -> Result<()> {
    s.basis.validate("spec.basis", warnings)?;
    let resolved = s.omega.validate("spec.omega", warnings)?;
    let hs = &s.horizons;
    if hs.len() < 4 {
        return Err(Error::config("spec.horizons", "need at least four horizons"));
    }
    if hs[0] <= 0.0 || hs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(
            "spec.horizons",
            "horizons must be positive and strictly increasing",
        ));
    }
    if hs[hs.len() - 1] / hs[0] < 8.0 - 1e-12 {
        return Err(Error::config("spec.horizons", "horizons must span at least an 8x range"));
    }
    let cfg = ControlConfig {
        horizon: hs[hs.len() - 1],
        cutoff: s.cutoff,
        omega: resolved.set,
        time_nodes: s.time_nodes,
        lr: s.lr,
    };
    cfg.validate().map_err(|e| at("spec", e))?;
    if s.cutoff > s.basis.lambda_max {
        warnings.push(format!(
            "spec.cutoff: exceeds basis.lambda_max = {}; the truncation saturates at the basis reach",
            s.basis.lambda_max
        ));
    }
    s.element.validate("spec.element")?;
    warnings.extend(regime_warnings(&s.omega, &s.basis.potential, "spec.omega"));
    Ok(())
}

/// Soft checks tying a thick control set to the potential's growth
/// envelope: the quantitative guarantees want τ < β₁/4 strictly and a
/// scale decaying at least like β₂/2.
fn regime_warnings(set: &SetSpec, potential: &Potential, prefix: &str) -> Vec<String> {
    let mut w = Vec::new();
    if let SetSpec::Thick { profile, .. } = set {
        let bounds = &potential.bounds;
        let tau_cap = bounds.beta1 / 4.0;
        if profile.tau >= tau_cap {
            w.push(format!(
                "{prefix}.thick.profile.tau: tau = {} does not satisfy the strict inequality tau < beta1/4 = {tau_cap}; the quantitative guarantee does not apply",
                profile.tau
            ));
        }
        if let RhoKind::Power { s } = profile.kind {
            let s_floor = bounds.beta2 / 2.0;
            if s < s_floor {
                w.push(format!(
                    "{prefix}.thick.profile.s: scale decay s = {s} is below beta2/2 = {s_floor}; the scaling guarantee expects s >= beta2/2"
                ));
            }
        }
    }
    w
}
