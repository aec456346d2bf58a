//! Ghost-dimension lifts of spectral elements, the auxiliary positive ODE
//! solution, and discrete residuals of the two elliptic identities.
//!
//! A spectral element φ = Σ bₖφₖ lifts to a 2D solution of −ΔΦ + VΦ = 0 by
//! weighting mode k with cosh(λₖy) (even lift, Φ(x,0) = φ) or with
//! sinh(λₖy)/λₖ (odd lift, ∂_yΦ(x,0) = φ). The divergence-form reduction
//! ∇·(φ_aux²∇(Φ/φ_aux)) = 0 uses a positive solution of −φ″ + Vφ = 0 with
//! boundary value exp((b−a)‖V‖^{1/2}), which stays pinned in
//! [1, exp((b−a)‖V‖^{1/2})].
//!
//! Rescaling to the unit geometry maps Φ to f(z) = Φ(z/aₙ) with aₙ = |Iₙ|^{−1},
//! which turns the potential into Ṽ(x) = aₙ^{−2}V(x/aₙ); for partitions with
//! s ≥ β₂/2 the sup of Ṽ over the tripled piece stays bounded in n, which is
//! the entire point of the adapted partition.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{gradient, Grid1D};
use crate::potential::{Potential, PotentialKind};
use crate::spectrum::{EigenBasis, SpectralElement};
use crate::thick::Piece;
use crate::tridiag::SymTridiag;
use crate::{Error, Result};

/// cosh(λy) keeps the element on the y = 0 line; sinh(λy)/λ puts it in the
/// y-derivative instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftKind {
    Cosh,
    Sinh,
}

/// Largest λ·y_max accepted: cosh(40) ≈ 1.2e17 is still exact-safe in f64.
pub const OVERFLOW_GUARD: f64 = 40.0;

/// 2D field sampled on an x-grid times a symmetric y-grid with y = 0 as a
/// grid line. Rows are stored y-ascending, each row one x-slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    pub x: Grid1D,
    pub y_max: f64,
    /// Odd row count, so the middle row sits at y = 0 exactly.
    pub m: usize,
    pub kind: LiftKind,
    pub values: Vec<Vec<f64>>,
}

impl LiftedField {
    /// Wrap externally produced samples (analytic fields in tests, resampled
    /// fields from rescaling) after shape validation.
    pub fn from_values(
        x: Grid1D,
        y_max: f64,
        kind: LiftKind,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = values.len();
        if m < 3 || m % 2 == 0 {
            return Err(Error::Domain(format!("field needs an odd row count ≥ 3, got {m}")));
        }
        if !(y_max.is_finite() && y_max > 0.0) {
            return Err(Error::Domain(format!("y_max = {y_max} must be > 0")));
        }
        for row in &values {
            if row.len() != x.n {
                return Err(Error::Domain(format!(
                    "row length {} does not match the x-grid ({})",
                    row.len(),
                    x.n
                )));
            }
        }
        Ok(LiftedField { x, y_max, m, kind, values })
    }

    pub fn mid(&self) -> usize {
        (self.m - 1) / 2
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.y_max / (self.m - 1) as f64
    }

    /// y of row j; the center row is exactly 0 and rows mirror exactly.
    pub fn y_point(&self, j: usize) -> f64 {
        (j as f64 - self.mid() as f64) * self.dy()
    }

    pub fn y_points(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.y_point(j)).collect()
    }

    /// The y = 0 slice.
    pub fn center_row(&self) -> &[f64] {
        &self.values[self.mid()]
    }

    /// Max |∂_yΦ| on the y = 0 line by the central difference; identically
    /// zero for cosh lifts because rows mirror bitwise.
    pub fn center_dy_max(&self) -> f64 {
        let mid = self.mid();
        let dy = self.dy();
        self.values[mid + 1]
            .iter()
            .zip(&self.values[mid - 1])
            .map(|(p, m)| ((p - m) / (2.0 * dy)).abs())
            .fold(0.0, f64::max)
    }
}

/// Direct summation lift of an element over the basis modes below its
/// cutoff. `m` must be odd; every retained λₖ·y_max must stay within the
/// overflow guard.
pub fn lift(
    basis: &EigenBasis,
    element: &SpectralElement,
    y_max: f64,
    m: usize,
    kind: LiftKind,
) -> Result<LiftedField> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::Domain(format!("lift: m = {m} must be odd and ≥ 3")));
    }
    if !(y_max.is_finite() && y_max > 0.0) {
        return Err(Error::Domain(format!("lift: y_max = {y_max} must be > 0")));
    }
    let dim = basis.modes_below(element.cutoff);
    if element.coefficients.len() != dim {
        return Err(Error::Domain(format!(
            "lift: element has {} coefficients, subspace dimension is {dim}",
            element.coefficients.len()
        )));
    }
    for k in 0..dim {
        let product = basis.lambda(k) * y_max;
        if product > OVERFLOW_GUARD {
            return Err(Error::Domain(format!(
                "lift: λ_{k}·y_max = {product:.3} exceeds the overflow guard {OVERFLOW_GUARD}; shrink y_max"
            )));
        }
    }

    let n = basis.grid.n;
    let mid = (m - 1) / 2;
    let dy = 2.0 * y_max / (m - 1) as f64;
    let mut values = vec![vec![0.0; n]; m];
    for t in 0..=mid {
        let y = t as f64 * dy;
        let mut row = vec![0.0; n];
        for k in 0..dim {
            let lambda = basis.lambda(k);
            let weight = match kind {
                LiftKind::Cosh => (lambda * y).cosh(),
                LiftKind::Sinh => (lambda * y).sinh() / lambda,
            };
            let scale = element.coefficients[k] * weight;
            for (r, p) in row.iter_mut().zip(&basis.modes[k]) {
                *r += scale * p;
            }
        }
        // Mirror instead of re-evaluating, so symmetry is exact by
        // construction, not up to libm symmetry.
        match kind {
            LiftKind::Cosh => {
                values[mid + t] = row.clone();
                values[mid - t] = row;
            }
            LiftKind::Sinh => {
                values[mid - t] = row.iter().map(|v| -v).collect();
                values[mid + t] = row;
            }
        }
    }
    LiftedField::from_values(basis.grid, y_max, kind, values)
}

/// Interior residual norms of a discrete elliptic identity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualReport {
    /// √(hx·hy·Σ r²) over interior points.
    pub l2: f64,
    /// l2 divided by the field's interior L² norm (0 for the zero field,
    /// with the degenerate flag raised).
    pub relative: f64,
    /// l2 divided by ‖VΦ‖ where defined; the nondivergence form only.
    pub relative_to_potential: Option<f64>,
    /// Set when a normalizer vanished (zero field or zero potential term).
    pub degenerate: bool,
}

/// ‖−Δ_hΦ + VΦ‖ over interior points, 5-point stencil, second-order small
/// for smooth exact solutions.
pub fn residual_nondivergence(field: &LiftedField, p: &Potential) -> Result<ResidualReport> {
    let v = p.evaluate_on(&field.x.points())?;
    let hx2 = field.x.h() * field.x.h();
    let hy2 = field.dy() * field.dy();
    let cell = field.x.h() * field.dy();
    let w = &field.values;
    let mut sum_r2 = 0.0;
    let mut sum_phi2 = 0.0;
    let mut sum_vphi2 = 0.0;
    for j in 1..field.m - 1 {
        for i in 1..field.x.n - 1 {
            let ddx = (w[j][i + 1] - w[j][i]) - (w[j][i] - w[j][i - 1]);
            let ddy = (w[j + 1][i] - w[j][i]) - (w[j][i] - w[j - 1][i]);
            let lap = ddx / hx2 + ddy / hy2;
            let vphi = v[i] * w[j][i];
            let r = vphi - lap;
            sum_r2 += r * r;
            sum_phi2 += w[j][i] * w[j][i];
            sum_vphi2 += vphi * vphi;
        }
    }
    Ok(finish_residual(cell, sum_r2, sum_phi2, Some(sum_vphi2)))
}

fn finish_residual(
    cell: f64,
    sum_r2: f64,
    sum_phi2: f64,
    sum_vphi2: Option<f64>,
) -> ResidualReport {
    let l2 = (cell * sum_r2).sqrt();
    let phi = (cell * sum_phi2).sqrt();
    let degenerate_field = phi == 0.0;
    let relative = if degenerate_field { 0.0 } else { l2 / phi };
    let (relative_to_potential, degenerate_pot) = match sum_vphi2 {
        Some(s) => {
            let vphi = (cell * s).sqrt();
            if vphi == 0.0 {
                (Some(if l2 == 0.0 { 0.0 } else { f64::INFINITY }), true)
            } else {
                (Some(l2 / vphi), false)
            }
        }
        None => (None, false),
    };
    ResidualReport {
        l2,
        relative,
        relative_to_potential,
        degenerate: degenerate_field || degenerate_pot,
    }
}

/// Positive solution of −φ″ + Vφ = 0 with both boundary values at
/// exp((b−a)‖V‖^{1/2}); pinned between 1 and that boundary value.
#[derive(Debug, Clone)]
pub struct AuxOdeSolution {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    /// max of V over the solve samples.
    pub sup_v: f64,
    /// The imposed boundary value exp((b−a)·sup_v^{1/2}).
    pub boundary: f64,
}

impl AuxOdeSolution {
    /// The exactly-one solution (V ≡ 0 analytically); used where the
    /// divergence form must degenerate to the plain Laplacian bitwise.
    pub fn constant_one(grid: Grid1D) -> Self {
        AuxOdeSolution { values: vec![1.0; grid.n], grid, sup_v: 0.0, boundary: 1.0 }
    }

    /// Lemma bounds at every sample, with `slack` absorbing the O(h²)
    /// discretization error.
    pub fn bounds_ok(&self, slack: f64) -> bool {
        let lo = 1.0 - slack;
        let hi = self.boundary + slack;
        self.values.iter().all(|&v| v >= lo && v <= hi)
    }
}

/// Solve the two-point boundary problem on `n` samples of [a, b] by one
/// tridiagonal solve. V must be nonnegative and bounded on the interval.
pub fn solve_aux_ode(p: &Potential, a: f64, b: f64, n: usize) -> Result<AuxOdeSolution> {
    let grid = Grid1D::new(a, b, n)?;
    let v = p.evaluate_on(&grid.points())?;
    let sup_v = v.iter().fold(0.0f64, |m, &x| m.max(x));
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("aux ODE needs V ≥ 0 on the interval".into()));
    }
    let boundary = ((b - a) * sup_v.sqrt()).exp();
    if !boundary.is_finite() {
        return Err(Error::Domain(format!(
            "aux ODE boundary value exp({:.3}) overflows; shrink the interval",
            (b - a) * sup_v.sqrt()
        )));
    }
    let h2 = grid.h() * grid.h();
    // Interior unknowns with the Dirichlet data folded into the right side.
    let inner = n - 2;
    let diag: Vec<f64> = (0..inner).map(|i| 2.0 / h2 + v[i + 1]).collect();
    let off = vec![-1.0 / h2; inner - 1];
    let matrix = SymTridiag::new(diag, off)?;
    let mut rhs = vec![0.0; inner];
    rhs[0] += boundary / h2;
    rhs[inner - 1] += boundary / h2;
    let interior = matrix.solve_shifted(0.0, &rhs);
    if interior.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("aux ODE tridiagonal solve produced non-finite values".into()));
    }
    let mut values = Vec::with_capacity(n);
    values.push(boundary);
    values.extend(interior);
    values.push(boundary);
    Ok(AuxOdeSolution { grid, values, sup_v, boundary })
}

/// ‖∇·(φ_aux²∇(Φ/φ_aux))‖ over interior points in flux form with
/// arithmetic-mean face coefficients. With φ_aux ≡ 1 this is exactly the
/// plain 5-point Laplacian of Φ.
pub fn residual_divergence(field: &LiftedField, aux: &AuxOdeSolution) -> Result<ResidualReport> {
    let a = aux_on_grid(aux, &field.x)?;
    let hx2 = field.x.h() * field.x.h();
    let hy2 = field.dy() * field.dy();
    let cell = field.x.h() * field.dy();
    let n = field.x.n;
    let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
    // w = Φ/φ_aux row by row.
    let w: Vec<Vec<f64>> = field
        .values
        .iter()
        .map(|row| row.iter().zip(&a).map(|(phi, ai)| phi / ai).collect())
        .collect();
    let mut sum_r2 = 0.0;
    let mut sum_phi2 = 0.0;
    for j in 1..field.m - 1 {
        for i in 1..n - 1 {
            let c_plus = (a2[i] + a2[i + 1]) / 2.0;
            let c_minus = (a2[i - 1] + a2[i]) / 2.0;
            let ddx = c_plus * (w[j][i + 1] - w[j][i]) - c_minus * (w[j][i] - w[j][i - 1]);
            // The coefficient has no y-dependence, so both y-faces carry a²ᵢ.
            let ddy = a2[i] * ((w[j + 1][i] - w[j][i]) - (w[j][i] - w[j - 1][i]));
            let div = ddx / hx2 + ddy / hy2;
            let r = -div;
            sum_r2 += r * r;
            sum_phi2 += field.values[j][i] * field.values[j][i];
        }
    }
    Ok(finish_residual(cell, sum_r2, sum_phi2, None))
}

/// Aux samples on the field grid: pass through when the grids coincide,
/// linear interpolation when the aux interval strictly covers the field.
fn aux_on_grid(aux: &AuxOdeSolution, g: &Grid1D) -> Result<Vec<f64>> {
    if aux.grid == *g {
        return Ok(aux.values.clone());
    }
    if aux.grid.x_min > g.x_min || aux.grid.x_max < g.x_max {
        return Err(Error::Domain(format!(
            "aux interval [{}, {}] does not cover the field range [{}, {}]",
            aux.grid.x_min, aux.grid.x_max, g.x_min, g.x_max
        )));
    }
    let xs: Vec<f64> = aux.grid.points();
    Ok(g.points()
        .iter()
        .map(|&x| {
            let idx = xs.partition_point(|&t| t < x).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[idx - 1], xs[idx]);
            let t = (x - x0) / (x1 - x0);
            aux.values[idx - 1] * (1.0 - t) + aux.values[idx] * t
        })
        .collect())
}

/// H¹(x-range × (−y_max, y_max)) squared norm of the field by trapezoid in
/// both directions: ∫∫ Φ² + Φₓ² + Φ_y².
pub fn h1_norm_sq(field: &LiftedField) -> f64 {
    let m = field.m;
    let n = field.x.n;
    let dy = field.dy();
    // Per-row L² masses of Φ and Φₓ.
    let mut row_mass = vec![0.0; m];
    for (j, row) in field.values.iter().enumerate() {
        let dx_row = gradient(&field.x, row);
        row_mass[j] = field.x.inner(row, row) + field.x.inner(&dx_row, &dx_row);
    }
    // Φ_y columnwise: central inside, one-sided at the extreme rows.
    let mut dyv = vec![vec![0.0; n]; m];
    for i in 0..n {
        dyv[0][i] = (field.values[1][i] - field.values[0][i]) / dy;
        for j in 1..m - 1 {
            dyv[j][i] = (field.values[j + 1][i] - field.values[j - 1][i]) / (2.0 * dy);
        }
        dyv[m - 1][i] = (field.values[m - 1][i] - field.values[m - 2][i]) / dy;
    }
    for (j, row) in dyv.iter().enumerate() {
        row_mass[j] += field.x.inner(row, row);
    }
    // Trapezoid across y.
    let mut total = 0.5 * (row_mass[0] + row_mass[m - 1]);
    for rm in row_mass.iter().take(m - 1).skip(1) {
        total += rm;
    }
    dy * total
}

/// The Lemma B.3 sandwich for a sinh lift of a unit element:
/// 2ρ ≤ ‖Φ‖²_{H¹(ℝ×(−ρ,ρ))} ≤ 2ρ(1 + ρ²/3·(1+λ²)e^{2ρλ}).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReport {
    pub h1_sq: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Evaluate the sandwich with ρ = the field's y_max; `norm_sq` is ‖φ‖² of
/// the lifted element (Σbₖ² for a basis element) and λ its cutoff.
pub fn energy_sandwich(field: &LiftedField, norm_sq: f64, lambda: f64) -> EnergyReport {
    let rho = field.y_max;
    let h1 = h1_norm_sq(field);
    let lower = 2.0 * rho * norm_sq;
    let upper = 2.0
        * rho
        * (1.0 + rho * rho / 3.0 * (1.0 + lambda * lambda) * (2.0 * rho * lambda).exp())
        * norm_sq;
    EnergyReport { h1_sq: h1, lower, upper }
}

/// Rescaled-to-unit data: the dilated field over the tripled piece, the
/// rescaled potential tabulated on the new grid, and the sup comparison.
#[derive(Debug, Clone)]
pub struct RescaledUnit {
    pub field: LiftedField,
    /// Ṽ(x) = aₙ^{−2} V(x/aₙ) tabulated on the rescaled subgrid.
    pub potential: Potential,
    pub a_n: f64,
    /// sup of Ṽ over the rescaled window.
    pub sup_v_tilde: f64,
    /// The growth-bound envelope c₂·aₙ^{−2}·⟨t⟩^{β₂} maximized over the window.
    pub envelope: f64,
}

/// sup of the rescaled potential aₙ^{−2}·V(t) over the tripled piece
/// I_{3,n} = [a − 2|Iₙ|, b + 2|Iₙ|], together with the envelope value.
pub fn rescaled_potential_sup(
    p: &Potential,
    piece: &Piece,
    a_n: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    let len = piece.b - piece.a;
    let (lo, hi) = (piece.a - 2.0 * len, piece.b + 2.0 * len);
    let sup_v = p.sup_on(lo, hi, samples)?;
    let scale = 1.0 / (a_n * a_n);
    let bracket_max = crate::bracket(lo.abs().max(hi.abs()));
    let envelope = p.bounds.c2 * scale * bracket_max.powf(p.bounds.beta2);
    Ok((scale * sup_v, envelope))
}

/// Dilate a lifted field to the unit geometry of one partition piece:
/// f(z) = Φ(z/aₙ) restricted to the tripled piece, with aₙ = |Iₙ|^{−1}.
pub fn rescale_to_unit(
    field: &LiftedField,
    p: &Potential,
    piece: &Piece,
    a_n: f64,
) -> Result<RescaledUnit> {
    let len = piece.b - piece.a;
    if (a_n * len - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "rescale_to_unit: aₙ = {a_n} is not |Iₙ|^(-1) = {}",
            1.0 / len
        )));
    }
    let (lo, hi) = (piece.a - 2.0 * len, piece.b + 2.0 * len);
    if lo < field.x.x_min || hi > field.x.x_max {
        return Err(Error::Domain(format!(
            "rescale_to_unit: window [{lo}, {hi}] exits the field range [{}, {}]",
            field.x.x_min, field.x.x_max
        )));
    }
    let h = field.x.h();
    let i_lo = ((lo - field.x.x_min) / h).ceil() as usize;
    let i_hi = ((hi - field.x.x_min) / h).floor() as usize;
    if i_hi < i_lo + 2 {
        return Err(Error::Domain("rescale_to_unit: window holds fewer than 3 grid points".into()));
    }
    // Pure dilation: the subgrid coordinates scale by aₙ, values carry over.
    let sub_x = Grid1D::new(a_n * field.x.point(i_lo), a_n * field.x.point(i_hi), i_hi - i_lo + 1)?;
    let values: Vec<Vec<f64>> =
        field.values.iter().map(|row| row[i_lo..=i_hi].to_vec()).collect();
    let rescaled = LiftedField::from_values(sub_x, a_n * field.y_max, field.kind, values)?;

    let scale = 1.0 / (a_n * a_n);
    let xs = rescaled.x.points();
    let mut tilde = Vec::with_capacity(xs.len());
    for &z in &xs {
        tilde.push(scale * p.evaluate(z / a_n)?);
    }
    let sup_v_tilde = tilde.iter().fold(0.0f64, |m, &x| m.max(x));
    let (_, envelope) = rescaled_potential_sup(p, piece, a_n, 1001)?;
    let potential = Potential::new(
        PotentialKind::TabulatedSamples { xs, values: tilde },
        p.bounds,
    )?;
    Ok(RescaledUnit { field: rescaled, potential, a_n, sup_v_tilde, envelope })
}

/// Write the field as (x, y, value) triplets plus a metadata sidecar.
pub fn export_field(field: &LiftedField, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("x,y,phi\n");
    let ys = field.y_points();
    for (j, row) in field.values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            csv.push_str(&format!("{:.16e},{:.16e},{v:.16e}\n", field.x.point(i), ys[j]));
        }
    }
    std::fs::write(dir.join("field.csv"), csv)?;
    let metadata = serde_json::json!({
        "kind": match field.kind { LiftKind::Cosh => "cosh", LiftKind::Sinh => "sinh" },
        "x": { "x_min": field.x.x_min, "x_max": field.x.x_max, "n": field.x.n },
        "y_max": field.y_max,
        "m": field.m,
        "overflow_guard": OVERFLOW_GUARD,
        "face_average": "arithmetic",
    });
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&metadata)?)?;
    Ok(())
}
