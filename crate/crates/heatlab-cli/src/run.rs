//! Experiment execution: build the configured objects, write deterministic
//! artifacts into the output directory, and grade each check.
//!
//! Checks come in two severities. A gated check (PASS/FAIL) asserts a
//! mathematical contract the run must meet: eigenpair residuals, per-piece
//! thickness, terminal control residuals, the duality bound. A REPORT-ONLY
//! check records a quantity with no sharp desk-scale threshold: fit
//! qualities, conditioning, windowed density probes. Near-singular Gramian
//! solves demote their gated checks to REPORT-ONLY, because astronomically
//! conditioned systems are the phenomenon under study, not a malfunction.
//!
//! Every directory receives `metadata.json` (the resolved config, crate
//! versions, and consumed seeds: enough to re-run the experiment) and
//! `checks.json` (what `report` re-prints). Both are written after the
//! experiment's own artifacts so they reflect a completed run.

use std::fmt;
use std::path::Path;

use heatlab::control::{
    cost_law_sweep, export_control, export_costlaw, lebeau_robbiano_schedule, run_lr_control,
    synthesize_hum_control, ControlConfig,
};
use heatlab::gram::{export_sweep, scaling_sweep};
use heatlab::grid::uniform_grid;
use heatlab::lift::{energy_sandwich, export_field, lift, residual_nondivergence, LiftKind};
use heatlab::report::{write_csv, write_json};
use heatlab::smallness::{
    collect_samples, export_samples, fit_alpha, theoretical_band, violations, FEASIBILITY_CAP,
};
use heatlab::spectrum::{export_basis, SpectralElement, ORTHONORMALITY_TOL, RESIDUAL_REL_TOL};
use heatlab::thick::{
    generate_thick, is_thick_partitionwise, is_thick_pointwise, partition_asymptotics, IntervalSet,
};
use heatlab::Result;
use serde::{Deserialize, Serialize};

use crate::config::{
    ControlSpec, CostlawSpec, EigenSpec, Experiment, LiftSpec, PartitionSpec, SmallnessSpec, Spec,
    SweepSpec, ThicknessSpec,
};

/// Relative terminal residual a single-shot control must reach.
const TERMINAL_RESIDUAL_TOL: f64 = 1e-8;
/// Relative terminal residual a staged run must reach.
const STAGED_RESIDUAL_TOL: f64 = 1e-6;
/// Relative slack on the duality bound cost²·λ_min ≤ ‖E(T)b₀‖².
const DUALITY_SLACK: f64 = 1e-9;
/// Relative slack on the two-sided lift energy bound.
const SANDWICH_SLACK: f64 = 1e-12;
/// Relative slack when testing λ_min(λ) for monotone decrease.
const MONOTONE_SLACK: f64 = 1e-10;
/// Relative slack when testing cost(T) for monotone decrease.
const COST_MONOTONE_SLACK: f64 = 1e-9;

/// Grade of one check line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "REPORT-ONLY")]
    ReportOnly,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::ReportOnly => "REPORT-ONLY",
        })
    }
}

/// One graded check with its human-readable evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn gate(name: &str, ok: bool, detail: String) -> Check {
        Check {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn report(name: &str, detail: String) -> Check {
        Check { name: name.to_string(), status: Status::ReportOnly, detail }
    }
}

/// Format one summary line; `prefix` scopes batch entries ("label/").
pub fn render(prefix: &str, c: &Check) -> String {
    format!("{:<12}{}{}: {}", c.status.to_string(), prefix, c.name, c.detail)
}

/// Read back the `checks.json` a run wrote into `dir`.
pub fn read_checks(dir: &Path) -> Result<Vec<Check>> {
    #[derive(Deserialize)]
    struct ChecksFile {
        checks: Vec<Check>,
    }
    let text = std::fs::read_to_string(dir.join("checks.json"))?;
    let parsed: ChecksFile = serde_json::from_str(&text)?;
    Ok(parsed.checks)
}

/// Execute one experiment into `dir`: artifacts, then metadata.json and
/// checks.json last (they overwrite any metadata a library exporter left,
/// and carry the full resolved config).
pub fn run_experiment(exp: &Experiment, dir: &Path) -> Result<Vec<Check>> {
    std::fs::create_dir_all(dir)?;
    let (checks, seeds) = match &exp.spec {
        Spec::Partition(s) => run_partition(s, dir)?,
        Spec::Thickness(s) => run_thickness(s, dir)?,
        Spec::Eigen(s) => run_eigen(s, dir)?,
        Spec::Lift(s) => run_lift(s, dir)?,
        Spec::Smallness(s) => run_smallness(s, dir)?,
        Spec::SpectralSweep(s) => run_sweep(s, dir)?,
        Spec::Control(s) => run_control(s, dir)?,
        Spec::Costlaw(s) => run_costlaw(s, dir)?,
    };
    let metadata = serde_json::json!({
        "experiment": {
            "experiment": exp.kind,
            "name": exp.name,
            "output": exp.output,
            "spec": exp.spec.to_value()?,
        },
        "resolved_output": dir,
        "seeds": seeds,
        "versions": {
            "heatlab": heatlab::version(),
            "heatlab-cli": env!("CARGO_PKG_VERSION"),
        },
    });
    write_json(&dir.join("metadata.json"), &metadata)?;
    write_json(&dir.join("checks.json"), &serde_json::json!({ "checks": checks }))?;
    Ok(checks)
}

fn run_partition(s: &PartitionSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let p = s.build("spec")?;
    let rows: Vec<Vec<f64>> = p
        .centers
        .iter()
        .enumerate()
        .map(|(n, &x)| vec![n as f64, x])
        .collect();
    write_csv(&dir.join("partition.csv"), "n,x_n", &rows)?;
    let ratios = partition_asymptotics(&p);
    let ratio_rows: Vec<Vec<f64>> = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| vec![(i + 1) as f64, r])
        .collect();
    write_csv(&dir.join("asymptotics.csv"), "n,ratio", &ratio_rows)?;
    let last = *ratios.last().expect("at least one piece, so at least one ratio");
    let checks = vec![Check::report(
        "partition-asymptotics",
        format!(
            "x_n/((s+1)Ln)^(1/(s+1)) = {last:.6} at n = {}; |ratio - 1| = {:.3e}",
            ratios.len(),
            (last - 1.0).abs()
        ),
    )];
    Ok((checks, Vec::new()))
}

fn run_thickness(s: &ThicknessSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let p = s.partition.build("spec.partition")?;
    let gen = generate_thick(&s.profile, &p, s.seed)?;
    let set_rows: Vec<Vec<f64>> = gen.set.intervals().iter().map(|&(a, b)| vec![a, b]).collect();
    write_csv(&dir.join("set.csv"), "a,b", &set_rows)?;

    let pw = is_thick_partitionwise(&gen.set, &p, s.profile.gamma, s.profile.tau)?;
    let piece_rows: Vec<Vec<f64>> = pw
        .pieces
        .iter()
        .map(|&(n, measured, required)| vec![n as f64, measured, required])
        .collect();
    write_csv(&dir.join("pieces.csv"), "n,measured,required", &piece_rows)?;

    let hull = *p.centers.last().expect("partition has centers");
    let xs = uniform_grid(-hull, hull, s.n_probe)?;
    let pt = is_thick_pointwise(&gen.set, &s.profile, &xs)?;
    write_json(
        &dir.join("report.json"),
        &serde_json::json!({
            "partitionwise": pw,
            "pointwise": pt,
            "stopped_at": gen.stopped_at,
        }),
    )?;

    let checks = vec![
        Check::gate(
            "partitionwise-thickness",
            pw.holds,
            format!(
                "per-piece density bound on {} pieces; worst piece n = {}",
                pw.pieces.len(),
                pw.worst_piece
            ),
        ),
        Check::report(
            "pointwise-thickness",
            format!(
                "windowed density {} on {} samples; worst ratio {:.3e} (required {:.3e}) at x = {:.3}{}",
                if pt.holds { "holds" } else { "dips below the per-piece bound" },
                s.n_probe,
                pt.worst_ratio,
                pt.worst_required,
                pt.worst_x,
                if pt.truncated { "; some windows poke outside the described range" } else { "" },
            ),
        ),
        Check::report(
            "generation-complete",
            match gen.stopped_at {
                None => "every piece received its required subinterval".to_string(),
                Some(n) => format!("required measure underflowed at piece |n| = {n}"),
            },
        ),
    ];
    Ok((checks, vec![s.seed]))
}

fn run_eigen(s: &EigenSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let rows: Vec<Vec<f64>> = basis
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &ev)| vec![k as f64, ev, ev.sqrt()])
        .collect();
    write_csv(&dir.join("spectrum.csv"), "k,lambda_sq,lambda", &rows)?;
    if s.emit_modes {
        export_basis(&basis, &s.basis.potential, dir)?;
    }
    let defect = basis.orthonormality_defect();
    let checks = vec![
        Check::gate(
            "eigenpair-residuals",
            basis.max_residual <= RESIDUAL_REL_TOL,
            format!(
                "max relative residual {:.3e} vs tolerance {RESIDUAL_REL_TOL:.0e}",
                basis.max_residual
            ),
        ),
        Check::gate(
            "orthonormality",
            defect <= ORTHONORMALITY_TOL,
            format!("defect {defect:.3e} vs tolerance {ORTHONORMALITY_TOL:.0e}"),
        ),
        Check::report(
            "grid-resolution",
            if basis.resolution_warning {
                "spacing exceeds the pi/(8 lambda_max) guideline; top modes may be under-resolved"
                    .to_string()
            } else {
                "within the pi/(8 lambda_max) guideline".to_string()
            },
        ),
        Check::report(
            "mode-count",
            format!("{} modes below lambda_max = {}", basis.len(), s.basis.lambda_max),
        ),
    ];
    Ok((checks, Vec::new()))
}

fn run_lift(s: &LiftSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let dim = basis.modes_below(s.cutoff);
    let (coefficients, seed) = s.element.resolve(dim);
    let element = SpectralElement::new(&basis, coefficients, s.cutoff)?;
    let field = lift(&basis, &element, s.y_max, s.m, s.kind)?;
    export_field(&field, dir)?;

    let residual = residual_nondivergence(&field, &s.basis.potential)?;
    let energy = energy_sandwich(&field, element.norm_sq(), s.cutoff);
    write_json(
        &dir.join("report.json"),
        &serde_json::json!({
            "nondivergence_residual": residual,
            "energy": energy,
        }),
    )?;

    let mut checks = vec![Check::report(
        "nondivergence-residual",
        format!(
            "relative interior residual {:.3e}{}{}",
            residual.relative,
            residual
                .relative_to_potential
                .map(|r| format!(", {r:.3e} against the potential term"))
                .unwrap_or_default(),
            if residual.degenerate { "; a normalizer vanished" } else { "" },
        ),
    )];
    match s.kind {
        LiftKind::Sinh => checks.push(Check::gate(
            "energy-sandwich",
            energy.lower * (1.0 - SANDWICH_SLACK) <= energy.h1_sq
                && energy.h1_sq <= energy.upper * (1.0 + SANDWICH_SLACK),
            format!("{:.6e} <= {:.6e} <= {:.6e}", energy.lower, energy.h1_sq, energy.upper),
        )),
        LiftKind::Cosh => checks.push(Check::report(
            "h1-energy",
            format!(
                "interior H1 energy {:.6e} (the two-sided bound applies to sinh lifts)",
                energy.h1_sq
            ),
        )),
    }
    Ok((checks, seed.into_iter().collect()))
}

fn run_smallness(s: &SmallnessSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let omega = IntervalSet::interval(s.omega[0], s.omega[1])?;
    let samples = collect_samples(
        &basis,
        &s.basis.potential,
        &s.lambda_list,
        &omega,
        &s.geometry,
        s.n_random,
        s.m,
        s.seed,
    )?;
    let report = fit_alpha(&samples)?;
    export_samples(&samples, &report, dir)?;

    // All samples share one ellipticity: sup of the potential on the outer
    // box, tabulated once.
    let ellipticity = samples[0].ellipticity;
    let band = if ellipticity > 1.0 {
        Some(theoretical_band(ellipticity, omega.measure(), s.band_d[0], s.band_d[1])?)
    } else {
        None
    };
    write_json(
        &dir.join("band.json"),
        &serde_json::json!({
            "alpha_hat": report.alpha,
            "constant_hat": report.constant,
            "ellipticity": ellipticity,
            "band": band,
        }),
    )?;

    let violation_count = violations(&samples, report.alpha, report.constant);
    let checks = vec![
        Check::gate(
            "interpolation-violations",
            violation_count == 0,
            format!("{violation_count} of {} samples violate the fitted inequality", samples.len()),
        ),
        Check::gate(
            "constant-feasible",
            report.feasible,
            format!(
                "supporting constant {:.3e} vs cap {FEASIBILITY_CAP:.0e}",
                report.constant
            ),
        ),
        Check::report(
            "exponent-informative",
            format!(
                "alpha_hat = {:.4}{}{}",
                report.alpha,
                if report.degenerate {
                    "; degenerate: sup_omega ~ sup_outer on every sample"
                } else {
                    ""
                },
                if report.alpha_clamped { "; least-squares slope clamped into (0, 1)" } else { "" },
            ),
        ),
        Check::report(
            "alpha-vs-band",
            match band {
                Some(b) => format!(
                    "alpha_hat = {:.4e} vs theoretical band [{:.4e}, {:.4e}]",
                    report.alpha, b.alpha_lower, b.alpha_upper
                ),
                None => format!(
                    "ellipticity {ellipticity} <= 1: band undefined (potential vanishes on the outer box)"
                ),
            },
        ),
    ];
    Ok((checks, vec![s.seed]))
}

fn run_sweep(s: &SweepSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let resolved = s.omega.resolve("spec.omega")?;
    let fit = scaling_sweep(&basis, &s.lambda_list, &resolved.set, s.target_zeta, s.with_log)?;
    export_sweep(&fit, dir)?;

    let kept: Vec<_> = fit.points.iter().filter(|p| !p.dropped).collect();
    let monotone = kept
        .windows(2)
        .all(|w| w[1].lambda_min <= w[0].lambda_min * (1.0 + MONOTONE_SLACK));
    let checks = vec![
        Check::gate(
            "observability-monotone",
            monotone,
            format!(
                "lambda_min non-increasing over {} kept frequencies (relative slack {MONOTONE_SLACK:.0e})",
                kept.len()
            ),
        ),
        Check::report(
            "dropped-frequencies",
            format!(
                "{} of {} frequencies dropped (constant overflowed)",
                fit.points.len() - kept.len(),
                fit.points.len()
            ),
        ),
        Check::report(
            "pinned-fit",
            format!(
                "log K vs lambda^{} r2 = {:.4}, slope = {:.4}",
                s.target_zeta, fit.pinned.r2, fit.pinned.slope
            ),
        ),
        Check::report(
            "free-exponent",
            format!("zeta_hat = {:.4} with r2 = {:.4}", fit.free.zeta, fit.free.r2),
        ),
    ];
    Ok((checks, resolved.seed.into_iter().collect()))
}

fn run_control(s: &ControlSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let resolved = s.control.omega.resolve("spec.control.omega")?;
    let cfg = ControlConfig {
        horizon: s.control.horizon,
        cutoff: s.control.cutoff,
        omega: resolved.set,
        time_nodes: s.control.time_nodes,
        lr: s.control.lr,
    };
    let dim = basis.modes_below(cfg.cutoff);
    let (coefficients, element_seed) = s.element.resolve(dim);
    let u0 = SpectralElement::new(&basis, coefficients, cfg.cutoff)?;
    let seeds: Vec<u64> = resolved.seed.into_iter().chain(element_seed).collect();

    let mut checks = Vec::new();
    if !s.staged {
        let result = synthesize_hum_control(&basis, &u0, &cfg)?;
        let t_stride = (result.nodes_used / 64).max(1);
        let x_stride = (basis.grid.n / 128).max(1);
        export_control(&result, &basis, &cfg.omega, dir, t_stride, x_stride)?;

        let g = &result.gramian;
        checks.push(Check::report(
            "gramian-conditioning",
            format!(
                "lambda_min = {:.3e}, lambda_max = {:.3e}, condition = {:.3e}{}",
                g.lambda_min,
                g.lambda_max,
                g.condition,
                if g.flagged { "; flagged near-singular, results are best-effort" } else { "" },
            ),
        ));
        let residual_detail = format!(
            "relative terminal residual {:.3e} vs tolerance {TERMINAL_RESIDUAL_TOL:.0e}",
            result.terminal_residual
        );
        checks.push(if g.flagged {
            Check::report("terminal-residual", format!("{residual_detail} (not gated: flagged Gramian)"))
        } else {
            Check::gate(
                "terminal-residual",
                result.terminal_residual <= TERMINAL_RESIDUAL_TOL,
                residual_detail,
            )
        });
        // cost² = qᵀΛ_T q and Λ_T q = −E(T)b₀ give cost²·λ_min ≤ ‖E(T)b₀‖²:
        // the synthesized cost realizes the observability bound 1/λ_min.
        let decayed_sq: f64 = u0
            .coefficients
            .iter()
            .zip(&basis.eigenvalues)
            .map(|(b, ev)| {
                let d = (-ev * cfg.horizon).exp() * b;
                d * d
            })
            .sum();
        let duality_detail = format!(
            "cost^2 * lambda_min = {:.6e} vs decayed norm^2 = {:.6e}",
            result.cost.powi(2) * g.lambda_min,
            decayed_sq
        );
        checks.push(if g.flagged {
            Check::report("duality-bound", format!("{duality_detail} (not gated: flagged Gramian)"))
        } else {
            Check::gate(
                "duality-bound",
                result.cost.powi(2) * g.lambda_min <= decayed_sq * (1.0 + DUALITY_SLACK),
                duality_detail,
            )
        });
    } else {
        let schedule = lebeau_robbiano_schedule(&cfg)?;
        let lr = run_lr_control(&basis, &u0, &cfg, &schedule)?;
        let stage_rows: Vec<Vec<f64>> = lr
            .stages
            .iter()
            .enumerate()
            .map(|(j, st)| {
                vec![
                    j as f64,
                    st.cutoff,
                    st.start,
                    st.duration,
                    st.cost,
                    if st.skipped { 1.0 } else { 0.0 },
                    st.residual_after,
                ]
            })
            .collect();
        write_csv(
            &dir.join("stages.csv"),
            "j,cutoff,start,duration,cost,skipped,residual_after",
            &stage_rows,
        )?;
        write_json(
            &dir.join("staged.json"),
            &serde_json::json!({
                "residual": lr.residual,
                "cost": lr.cost,
                "c_obs": lr.c_obs,
                "stages": lr.stages,
            }),
        )?;

        let skipped = lr.stages.iter().filter(|st| st.skipped).count();
        checks.push(Check::report(
            "stage-plan",
            format!(
                "{} dyadic stages, reference C_obs = {:.4e}, concatenated cost = {:.6e}{}",
                lr.stages.len(),
                lr.c_obs,
                lr.cost,
                if skipped > 0 {
                    format!("; {skipped} stage(s) skipped on flagged Gramians")
                } else {
                    String::new()
                },
            ),
        ));
        let detail = format!(
            "staged terminal residual {:.3e} vs tolerance {STAGED_RESIDUAL_TOL:.0e}",
            lr.residual
        );
        checks.push(if skipped > 0 {
            Check::report("staged-residual", format!("{detail} (not gated: {skipped} stage(s) skipped)"))
        } else {
            Check::gate("staged-residual", lr.residual <= STAGED_RESIDUAL_TOL, detail)
        });
    }
    Ok((checks, seeds))
}

fn run_costlaw(s: &CostlawSpec, dir: &Path) -> Result<(Vec<Check>, Vec<u64>)> {
    let basis = s.basis.build()?;
    let resolved = s.omega.resolve("spec.omega")?;
    let cfg = ControlConfig {
        horizon: *s.horizons.last().expect("validated: at least four horizons"),
        cutoff: s.cutoff,
        omega: resolved.set,
        time_nodes: s.time_nodes,
        lr: s.lr,
    };
    let dim = basis.modes_below(cfg.cutoff);
    let (coefficients, element_seed) = s.element.resolve(dim);
    let u0 = SpectralElement::new(&basis, coefficients, cfg.cutoff)?;
    let report = cost_law_sweep(&basis, &u0, &cfg, &s.horizons)?;
    export_costlaw(&report, dir)?;

    let monotone = report
        .costs
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + COST_MONOTONE_SLACK));
    let ratio_max = report
        .costs
        .iter()
        .zip(&report.references)
        .map(|(c, r)| c / r)
        .fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::gate(
            "cost-monotone",
            monotone,
            format!(
                "cost non-increasing in T over {} horizons spanning [{}, {}]",
                report.horizons.len(),
                report.horizons[0],
                report.horizons.last().expect("nonempty"),
            ),
        ),
        Check::report(
            "cost-law-shape",
            format!(
                "log cost vs T^(-zeta/(2-zeta)) with zeta = {}: slope = {:.4}, r2 = {:.4}",
                report.zeta, report.fit.slope, report.fit.r2
            ),
        ),
        Check::report(
            "reference-scale",
            format!("max cost / C_obs reference = {ratio_max:.4e}"),
        ),
    ];
    let seeds: Vec<u64> = resolved.seed.into_iter().chain(element_seed).collect();
    Ok((checks, seeds))
}
