//! Empirical spectral-inequality constants through Gram matrices.
//!
//! For the spectral subspace span{φₖ : λₖ ≤ λ} and a control set Ω, the
//! matrix Gⱼₖ = ∫_Ω φⱼφₖ encodes the restricted L² form; the optimal
//! constant K in ‖φ‖_{L²} ≤ K‖φ‖_{L²(Ω)} over the discretized subspace is
//! exactly λ_min(G)^{−1/2} by the Rayleigh quotient. Theory predicts an
//! upper envelope K(λ) ≤ C·exp(Cλ^ζ) (with an optional log(λ+1) factor and
//! ζ determined by the thickness decay τ and the potential growth β₁, β₂),
//! so sweeps fit log K against λ^ζ and report a free two-parameter power
//! fit ζ̂ alongside the pinned-exponent fit. Fits compare growth rates only;
//! the theoretical constants are non-explicit and never reproduced.
//!
//! Quadrature over Ω splits trapezoid cells exactly at interval endpoints
//! (partial cells weighted by overlap), because the control sets of
//! interest contain many intervals comparable to the grid step. Each cell
//! contributes a positive-semidefinite rank-≤2 form, so eigenvalues of G
//! stay in [0, 1] up to the orthonormality defect of the basis.
//!
//! Gram matrices here are small (tens of modes), so assembly stays
//! sequential per matrix; sweeps run the per-frequency assemblies on
//! scoped threads.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::fit::{fit_line, fit_power, LineFit, PowerFit};
use crate::report::{write_csv, write_json};
use crate::spectrum::EigenBasis;
use crate::thick::IntervalSet;
use crate::{bracket, Error, Result};

/// λ_min at or below this is reported as "not observable at this
/// precision": K would exceed 1e7 and the eigensolve itself carries
/// comparable absolute error.
pub const OBSERVABILITY_FLOOR: f64 = 1e-14;

/// Slack on the mathematical eigenvalue range [0, 1] of a Gram matrix.
pub const GRAM_RANGE_SLACK: f64 = 1e-10;

/// Gram matrix Gⱼₖ = ∫_Ω φⱼφₖ over the modes with λₖ ≤ cutoff.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub cutoff: f64,
    pub dim: usize,
    /// Row-major dim×dim entries; exactly symmetric (each pair computed
    /// once and mirrored).
    pub entries: Vec<f64>,
    /// Ω misses the truncation interval entirely; the matrix is zero.
    pub empty_window: bool,
}

impl GramMatrix {
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.dim + k]
    }

    /// Eigenvalues in ascending order via a dense symmetric eigensolve.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        let m = DMatrix::from_fn(self.dim, self.dim, |r, c| self.entry(r, c));
        let mut evs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        evs.sort_by(|a, b| a.partial_cmp(b).expect("symmetric eigenvalues are finite"));
        evs
    }

    /// Whether every eigenvalue lies in [0, 1] within [`GRAM_RANGE_SLACK`].
    pub fn range_ok(&self) -> bool {
        self.eigenvalues()
            .iter()
            .all(|&e| (-GRAM_RANGE_SLACK..=1.0 + GRAM_RANGE_SLACK).contains(&e))
    }
}

/// Assemble the Gram matrix of the spectral subspace below `cutoff` on Ω.
///
/// The basis must be complete below the cutoff: if every retained mode sits
/// below `cutoff` and the basis's top eigenvalue does too, modes in between
/// may be missing and the call is rejected. Build the basis with a strictly
/// larger frequency bound than any cutoff it will be queried at.
pub fn gram_matrix(basis: &EigenBasis, cutoff: f64, omega: &IntervalSet) -> Result<GramMatrix> {
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::Domain(format!("gram_matrix: cutoff λ = {cutoff} must be > 0")));
    }
    let dim = basis.modes_below(cutoff);
    if dim == 0 {
        return Err(Error::Domain(format!("gram_matrix: no modes below cutoff λ = {cutoff}")));
    }
    if dim == basis.len() && cutoff * cutoff > *basis.eigenvalues.last().expect("dim > 0") {
        return Err(Error::Domain(format!(
            "gram_matrix: basis only reaches λ² = {:.6}, not complete below cutoff λ = {cutoff}",
            basis.eigenvalues.last().unwrap()
        )));
    }
    let g = &basis.grid;
    let truncation = IntervalSet::interval(g.x_min, g.x_max)?;
    let window = omega.intersection(&truncation);
    let empty_window = window.is_empty();

    let mut entries = vec![0.0; dim * dim];
    for j in 0..dim {
        for k in j..dim {
            let mut sum = 0.0;
            for &(a, b) in window.intervals() {
                sum += g.window_inner(&basis.modes[j], &basis.modes[k], a, b);
            }
            entries[j * dim + k] = sum;
            entries[k * dim + j] = sum;
        }
    }
    Ok(GramMatrix { cutoff, dim, entries, empty_window })
}

/// The spectral-inequality constant extracted from one Gram matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BestConstant {
    pub lambda_min: f64,
    /// K = λ_min^{−1/2}; ∞ when the subspace is not observable on Ω at
    /// this precision.
    pub constant: f64,
    pub observable: bool,
}

/// K = λ_min(G)^{−1/2}, the exact optimal constant on the discretized
/// subspace.
pub fn best_constant(g: &GramMatrix) -> BestConstant {
    let lambda_min = g.eigenvalues().first().copied().unwrap_or(0.0);
    if lambda_min <= OBSERVABILITY_FLOOR {
        BestConstant { lambda_min, constant: f64::INFINITY, observable: false }
    } else {
        BestConstant { lambda_min, constant: 1.0 / lambda_min.sqrt(), observable: true }
    }
}

/// Independent oracle for [`best_constant`] in dimensions 2 and 3: minimize
/// the quadratic form bᵀGb over the unit coefficient sphere by a dense
/// angular sweep (`steps` samples) plus three local refinement rounds, then
/// invert the square root. Shares the quadrature with [`gram_matrix`] but
/// bypasses the eigensolve entirely.
pub fn brute_force_constant(
    basis: &EigenBasis,
    cutoff: f64,
    omega: &IntervalSet,
    steps: usize,
) -> Result<f64> {
    let g = gram_matrix(basis, cutoff, omega)?;
    if steps < 16 {
        return Err(Error::Domain("brute_force_constant: need at least 16 sweep steps".into()));
    }
    let quad = |b: &[f64]| -> f64 {
        let mut q = 0.0;
        for j in 0..g.dim {
            for k in 0..g.dim {
                q += b[j] * g.entry(j, k) * b[k];
            }
        }
        q
    };
    let min_q = match g.dim {
        2 => {
            let eval = |theta: f64| quad(&[theta.cos(), theta.sin()]);
            let mut best = (0.0f64, eval(0.0));
            let mut center = 0.0;
            let mut half_width = std::f64::consts::PI; // sweep [0, 2π)
            let mut count = steps;
            for _ in 0..4 {
                for i in 0..=count {
                    let t = center - half_width + 2.0 * half_width * i as f64 / count as f64;
                    let q = eval(t);
                    if q < best.1 {
                        best = (t, q);
                    }
                }
                center = best.0;
                half_width = 2.0 * half_width / count as f64;
                count = 64;
            }
            best.1
        }
        3 => {
            // Antipodal symmetry: θ ∈ [0, π], azimuth ∈ [0, π] covers every
            // coefficient line through the origin.
            let eval = |theta: f64, phi: f64| {
                quad(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
            };
            let side = (steps as f64).sqrt().ceil() as usize;
            let mut best = (0.0f64, 0.0f64, eval(0.0, 0.0));
            let mut ct = std::f64::consts::FRAC_PI_2;
            let mut cp = std::f64::consts::FRAC_PI_2;
            let mut hw = std::f64::consts::FRAC_PI_2;
            let mut count = side;
            for _ in 0..4 {
                for i in 0..=count {
                    let t = ct - hw + 2.0 * hw * i as f64 / count as f64;
                    for j in 0..=count {
                        let p = cp - hw + 2.0 * hw * j as f64 / count as f64;
                        let q = eval(t, p);
                        if q < best.2 {
                            best = (t, p, q);
                        }
                    }
                }
                ct = best.0;
                cp = best.1;
                hw = 2.0 * hw / count as f64;
                count = 32;
            }
            best.2
        }
        d => {
            return Err(Error::Domain(format!(
                "brute_force_constant: sphere sweep covers dimensions 2-3, got {d}"
            )))
        }
    };
    let min_q = min_q.max(0.0);
    if min_q <= OBSERVABILITY_FLOOR {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / min_q.sqrt())
    }
}

/// One frequency of a scaling sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub lambda: f64,
    pub dim: usize,
    pub lambda_min: f64,
    pub constant: f64,
    /// K was infinite; the point is excluded from the fits.
    pub dropped: bool,
}

/// Fit of log K(λ) against the target exponent and the free power fit.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub points: Vec<SweepPoint>,
    pub target_zeta: f64,
    pub with_log: bool,
    /// log K ≈ c₀ + c₁·λ^{ζ_target}·(log(λ+1) if `with_log`).
    pub pinned: LineFit,
    /// log K ≈ c₀ + c₁·λ^{ζ̂} with ζ̂ free; `free.zeta` is the empirical
    /// exponent.
    pub free: PowerFit,
    pub dropped_any: bool,
}

/// Sweep K(λ) over a frequency list and fit its growth.
///
/// Requires at least five frequencies spanning a 4× range in energy λ².
/// The basis must extend strictly beyond the largest frequency so every
/// subspace is complete.
pub fn scaling_sweep(
    basis: &EigenBasis,
    lambdas: &[f64],
    omega: &IntervalSet,
    target_zeta: f64,
    with_log: bool,
) -> Result<ScalingFit> {
    if lambdas.len() < 5 {
        return Err(Error::Domain("scaling_sweep: need at least 5 frequencies".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas[0] <= 0.0 {
        return Err(Error::Domain("scaling_sweep: frequencies must be positive and increasing".into()));
    }
    let span = (lambdas[lambdas.len() - 1] / lambdas[0]).powi(2);
    if span < 4.0 - 1e-12 {
        return Err(Error::Domain(format!(
            "scaling_sweep: frequencies span only {span:.3}x in energy, need at least 4x"
        )));
    }
    if !(target_zeta > 0.0 && target_zeta.is_finite()) {
        return Err(Error::Domain(format!("scaling_sweep: target ζ = {target_zeta} must be > 0")));
    }

    let points: Vec<SweepPoint> = std::thread::scope(|scope| {
        let handles: Vec<_> = lambdas
            .iter()
            .map(|&lambda| {
                scope.spawn(move || -> Result<SweepPoint> {
                    let g = gram_matrix(basis, lambda, omega)?;
                    let bc = best_constant(&g);
                    Ok(SweepPoint {
                        lambda,
                        dim: g.dim,
                        lambda_min: bc.lambda_min,
                        constant: bc.constant,
                        dropped: !bc.observable,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    let kept: Vec<&SweepPoint> = points.iter().filter(|p| !p.dropped).collect();
    if kept.len() < 3 {
        return Err(Error::Numerical(format!(
            "scaling_sweep: only {} of {} frequencies observable, cannot fit",
            kept.len(),
            points.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.lambda).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.constant.ln()).collect();
    let regressor: Vec<f64> = xs
        .iter()
        .map(|&l| l.powf(target_zeta) * if with_log { (l + 1.0).ln() } else { 1.0 })
        .collect();
    let pinned = fit_line(&regressor, &ys)?;
    let free = fit_power(&xs, &ys, 0.05, 3.0)?;
    let dropped_any = kept.len() < points.len();
    Ok(ScalingFit { points, target_zeta, with_log, pinned, free, dropped_any })
}

/// Regular control set: one interval of radius L·⟨k⟩^{−σ} centered on each
/// integer k with |k| ≤ n_cells. Radii stay ≤ L ≤ ½ so each interval sits
/// inside its own unit cell k + [−½, ½].
pub fn regular_set(l: f64, sigma: f64, n_cells: u32) -> Result<IntervalSet> {
    if !(l > 0.0 && l <= 0.5) {
        return Err(Error::Domain(format!("regular_set: L = {l} must lie in (0, 1/2]")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("regular_set: σ = {sigma} must be ≥ 0")));
    }
    let n = n_cells as i64;
    let mut pairs = Vec::with_capacity(2 * n_cells as usize + 1);
    for k in -n..=n {
        let x = k as f64;
        let r = l * bracket(x).powf(-sigma);
        pairs.push((x - r, x + r));
    }
    IntervalSet::new(pairs)
}

/// Scaling sweep over the regular set of [`regular_set`], covering every
/// unit cell of the truncation, fitted against a reference exponent
/// (β₂/β₁ for the auxiliary spectral inequality).
pub fn aux_regular_sweep(
    basis: &EigenBasis,
    lambdas: &[f64],
    l: f64,
    sigma: f64,
    reference_zeta: f64,
    with_log: bool,
) -> Result<ScalingFit> {
    let reach = basis.grid.x_min.abs().max(basis.grid.x_max.abs()).ceil();
    let omega = regular_set(l, sigma, reach as u32)?;
    scaling_sweep(basis, lambdas, &omega, reference_zeta, with_log)
}

#[derive(Serialize)]
struct FitSummary {
    model: String,
    target_zeta: f64,
    with_log: bool,
    pinned_slope: f64,
    pinned_intercept: f64,
    pinned_ssr: f64,
    pinned_r2: f64,
    zeta_hat: f64,
    free_slope: f64,
    free_intercept: f64,
    free_ssr: f64,
    free_r2: f64,
    dropped_any: bool,
}

/// Write `sweep.csv` (λ, dim, λ_min, K) and `fit.json` into `dir`.
pub fn export_sweep(fit: &ScalingFit, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = fit
        .points
        .iter()
        .map(|p| vec![p.lambda, p.dim as f64, p.lambda_min, p.constant])
        .collect();
    write_csv(&dir.join("sweep.csv"), "lambda,dim,lambda_min,constant", &rows)?;
    let model = if fit.with_log {
        "log K ~ c0 + c1 * lambda^zeta * log(lambda + 1)"
    } else {
        "log K ~ c0 + c1 * lambda^zeta"
    };
    let summary = FitSummary {
        model: model.into(),
        target_zeta: fit.target_zeta,
        with_log: fit.with_log,
        pinned_slope: fit.pinned.slope,
        pinned_intercept: fit.pinned.intercept,
        pinned_ssr: fit.pinned.ssr,
        pinned_r2: fit.pinned.r2,
        zeta_hat: fit.free.zeta,
        free_slope: fit.free.slope,
        free_intercept: fit.free.intercept,
        free_ssr: fit.free.ssr,
        free_r2: fit.free.r2,
        dropped_any: fit.dropped_any,
    };
    write_json(&dir.join("fit.json"), &summary)
}
