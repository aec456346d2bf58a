//! Acceptance gate: thirteen numbered end-to-end criteria, one test and one
//! printed `criterion N: PASS|FAIL` line each (run with `--nocapture` to see
//! the lines as they come). Every numeric tolerance is pinned here, next to
//! the check it gates, and every reference value is independently derived:
//! closed forms, hand integrals, or frozen full-precision runs recorded in
//! the fixture comments.

use std::sync::OnceLock;
use std::time::Instant;

use heatlab::control::{
    lebeau_robbiano_schedule, run_lr_control, synthesize_hum_control, cost_law_sweep,
    ControlConfig, LrParameters,
};
use heatlab::gram::{best_constant, brute_force_constant, gram_matrix, scaling_sweep};
use heatlab::grid::Grid1D;
use heatlab::lift::{
    residual_divergence, residual_nondivergence, solve_aux_ode, LiftKind, LiftedField,
};
use heatlab::potential::{GrowthBounds, Potential, PotentialKind};
use heatlab::smallness::{collect_samples, fit_alpha, proposition_geometry, violations, FEASIBILITY_CAP};
use heatlab::spectrum::{
    build_hamiltonian, check_localization, eigen_decompose, localization_radius,
    seeded_unit_coefficients, EigenBasis, SpectralElement,
};
use heatlab::thick::{
    build_partition, generate_thick, is_thick_partitionwise, partition_asymptotics, IntervalSet,
    RhoKind, ThicknessProfile,
};

/// Fail the criterion with a formatted message unless `cond` holds.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

/// Print the criterion verdict line and fail the test on Err.
fn conclude(n: u32, what: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("criterion {n}: PASS - {what}"),
        Err(why) => println!("criterion {n}: FAIL - {what}: {why}"),
    }
    if let Err(why) = result {
        panic!("criterion {n} failed: {why}");
    }
}

/// Shared harmonic-oscillator basis: V = x^2 on [-12, 12], 2001 nodes,
/// every mode with lambda^2 <= 6.5^2 (21 modes, lambda_k^2 ~ 2k + 1).
fn harmonic() -> &'static EigenBasis {
    static BASIS: OnceLock<EigenBasis> = OnceLock::new();
    BASIS.get_or_init(|| {
        let p = Potential::monomial(2.0).expect("monomial");
        let g = Grid1D::new(-12.0, 12.0, 2001).expect("grid");
        eigen_decompose(&build_hamiltonian(&p, &g).expect("hamiltonian"), 6.5).expect("eigen")
    })
}

/// Committed thick observation set: gamma = 0.3, tau = 0, power scale s = 1
/// on the L = 1 adapted partition with 80 pieces per side.
fn thick_omega(seed: u64) -> IntervalSet {
    let profile =
        ThicknessProfile { kind: RhoKind::Power { s: 1.0 }, gamma: 0.3, l: 1.0, tau: 0.0 };
    let partition = build_partition(1.0, 1.0, 80).expect("partition");
    generate_thick(&profile, &partition, seed).expect("generate").set
}

#[test]
fn c01_harmonic_eigenvalues_match_odd_integers() {
    let started = Instant::now();
    let body = || -> Result<(), String> {
        let p = Potential::monomial(2.0).map_err(|e| e.to_string())?;
        let g = Grid1D::new(-12.0, 12.0, 4000).map_err(|e| e.to_string())?;
        let h = build_hamiltonian(&p, &g).map_err(|e| e.to_string())?;
        let basis = eigen_decompose(&h, 6.3).map_err(|e| e.to_string())?;
        ensure!(basis.len() >= 20, "only {} modes below 6.3", basis.len());
        for k in 0..20 {
            let exact = 2.0 * k as f64 + 1.0;
            let rel = (basis.eigenvalues[k] - exact).abs() / exact;
            ensure!(rel <= 1e-3, "mode {k}: lambda^2 = {} vs {exact}, rel {rel:.3e}", basis.eigenvalues[k]);
        }
        let elapsed = started.elapsed().as_secs_f64();
        ensure!(elapsed <= 30.0, "took {elapsed:.1}s, budget 30s");
        Ok(())
    };
    conclude(1, "harmonic eigenvalues within 1e-3 of 2k+1 for k < 20", body());
}

#[test]
fn c02_random_elements_localize_within_certified_radius() {
    let body = || -> Result<(), String> {
        let p = Potential::monomial(2.0).map_err(|e| e.to_string())?;
        for lambda in [3.0, 5.0] {
            let loc = localization_radius(&p, lambda, 1e-8).map_err(|e| e.to_string())?;
            ensure!(loc.radius <= 12.0, "radius {} exits the truncation window", loc.radius);
            let report = check_localization(harmonic(), lambda, loc.radius, 100, 17)
                .map_err(|e| e.to_string())?;
            ensure!(
                report.max_ratio <= 2.0,
                "lambda = {lambda}: worst full/local ratio {} > 2 at radius {}",
                report.max_ratio,
                loc.radius
            );
        }
        Ok(())
    };
    conclude(2, "100 random elements per frequency keep mass ratio <= 2", body());
}

#[test]
fn c03_partition_centers_follow_the_power_asymptotic() {
    let started = Instant::now();
    let body = || -> Result<(), String> {
        for (l, s) in [(1.0, 1.0), (3.0, 2.0)] {
            let p = build_partition(l, s, 1_000_000).map_err(|e| e.to_string())?;
            let ratios = partition_asymptotics(&p);
            let last = *ratios.last().expect("nonempty");
            ensure!(
                (last - 1.0).abs() <= 0.02,
                "(L, s) = ({l}, {s}): x_n ratio {last} at n = 10^6 is off by {:.3e}",
                (last - 1.0).abs()
            );
        }
        let elapsed = started.elapsed().as_secs_f64();
        ensure!(elapsed <= 5.0, "took {elapsed:.1}s, budget 5s");
        Ok(())
    };
    conclude(3, "x_n / ((s+1)Ln)^(1/(s+1)) within 2% at n = 10^6", body());
}

#[test]
fn c04_generated_thick_sets_verify_round_trip() {
    let body = || -> Result<(), String> {
        let partition = build_partition(1.0, 1.0, 80).map_err(|e| e.to_string())?;
        for (gamma, tau) in [(0.3, 0.0), (0.3, 0.5), (0.45, 1.0)] {
            let profile =
                ThicknessProfile { kind: RhoKind::Power { s: 1.0 }, gamma, l: 1.0, tau };
            for seed in 0..20u64 {
                let gen = generate_thick(&profile, &partition, seed).map_err(|e| e.to_string())?;
                ensure!(
                    gen.stopped_at.is_none(),
                    "(gamma, tau) = ({gamma}, {tau}) seed {seed}: generation stopped early"
                );
                let report = is_thick_partitionwise(&gen.set, &partition, gamma, tau)
                    .map_err(|e| e.to_string())?;
                ensure!(
                    report.holds,
                    "(gamma, tau) = ({gamma}, {tau}) seed {seed}: piece {} under density",
                    report.worst_piece
                );
            }
        }
        Ok(())
    };
    conclude(4, "20 seeds x 3 profiles generate and re-verify as thick", body());
}

#[test]
fn c05_best_constant_matches_coefficient_sphere_sweep() {
    let body = || -> Result<(), String> {
        let explicit = IntervalSet::interval(0.2, 1.7).map_err(|e| e.to_string())?;
        let thick = thick_omega(1);
        for omega in [&explicit, &thick] {
            for cutoff in [2.0, 2.5] {
                let g = gram_matrix(harmonic(), cutoff, omega).map_err(|e| e.to_string())?;
                let exact = best_constant(&g);
                ensure!(exact.observable, "cutoff {cutoff}: subspace not observable");
                let brute = brute_force_constant(harmonic(), cutoff, omega, 4000)
                    .map_err(|e| e.to_string())?;
                let rel = (exact.constant - brute).abs() / brute;
                ensure!(
                    rel <= 1e-6,
                    "cutoff {cutoff}: eigen {} vs sphere sweep {brute}, rel {rel:.3e}",
                    exact.constant
                );
            }
        }
        Ok(())
    };
    conclude(5, "eigen best constant matches brute-force sphere sweep to 1e-6", body());
}

#[test]
fn c06_observability_is_monotone_in_set_and_frequency() {
    let body = || -> Result<(), String> {
        let slack = 1e-10;
        // Set inclusion at fixed frequency: growing omega grows lambda_min,
        // i.e. shrinks K. Two committed chains, one explicit and one thick.
        let small = IntervalSet::interval(0.2, 1.7).map_err(|e| e.to_string())?;
        let big = small.union(&IntervalSet::interval(3.0, 4.0).map_err(|e| e.to_string())?);
        let thick = thick_omega(0);
        let clipped = thick.intersection(&IntervalSet::interval(-5.0, 5.0).map_err(|e| e.to_string())?);
        for (sub, sup) in [(&small, &big), (&clipped, &thick)] {
            let g_sub = gram_matrix(harmonic(), 3.0, sub).map_err(|e| e.to_string())?;
            let g_sup = gram_matrix(harmonic(), 3.0, sup).map_err(|e| e.to_string())?;
            let l_sub = best_constant(&g_sub).lambda_min;
            let l_sup = best_constant(&g_sup).lambda_min;
            ensure!(
                l_sup >= l_sub - slack,
                "inclusion violated: lambda_min {l_sub} on subset vs {l_sup} on superset"
            );
        }
        // Frequency growth at fixed omega: more modes can only shrink
        // lambda_min.
        let mut prev = f64::INFINITY;
        for cutoff in [2.0, 2.5, 3.0, 4.0] {
            let g = gram_matrix(harmonic(), cutoff, &small).map_err(|e| e.to_string())?;
            let lm = best_constant(&g).lambda_min;
            ensure!(
                lm <= prev + slack,
                "lambda_min rose from {prev} to {lm} at cutoff {cutoff}"
            );
            prev = lm;
        }
        Ok(())
    };
    conclude(6, "K non-increasing under inclusion, lambda_min non-increasing in frequency", body());
}

#[test]
fn c07_thick_sweep_exponent_lands_in_the_frozen_band() {
    let body = || -> Result<(), String> {
        // Frozen full-precision reference from the committed seed-0 run of
        // this exact scenario: zeta_hat = 1.0421.
        let oracle = 1.0421;
        let omega = thick_omega(0);
        let sweep = scaling_sweep(harmonic(), &[2.0, 3.0, 4.0, 5.0, 6.0], &omega, 1.0, false)
            .map_err(|e| e.to_string())?;
        let drift = (sweep.free.zeta - oracle).abs() / oracle;
        ensure!(
            drift <= 0.10,
            "free exponent {} vs frozen {oracle}, drift {:.1}%",
            sweep.free.zeta,
            100.0 * drift
        );
        Ok(())
    };
    conclude(7, "free-fit growth exponent within 10% of the frozen seed-0 value", body());
}

/// Tabulate phi(x, y) on an n x m grid over [x_lo, x_hi] x [-y_max, y_max].
fn tabulate(
    x_lo: f64,
    x_hi: f64,
    n: usize,
    y_max: f64,
    m: usize,
    phi: impl Fn(f64, f64) -> f64,
) -> LiftedField {
    let grid = Grid1D::new(x_lo, x_hi, n).expect("grid");
    let xs = grid.points();
    let values: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let y = -y_max + 2.0 * y_max * j as f64 / (m - 1) as f64;
            xs.iter().map(|&x| phi(x, y)).collect()
        })
        .collect();
    LiftedField::from_values(grid, y_max, LiftKind::Cosh, values).expect("field")
}

#[test]
fn c08_lift_residuals_converge_at_second_order() {
    let body = || -> Result<(), String> {
        // Nondivergence form against the closed form phi = cosh(y) sin(x),
        // which solves -Laplace(phi) + V phi = 0 for V = 0.
        let zero = Potential::new(
            PotentialKind::TabulatedSamples { xs: vec![-4.0, 4.0], values: vec![0.0, 0.0] },
            GrowthBounds::new(1.0, 1.0, 1.0, 0.5, 0.5).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let closed = |x: f64, y: f64| y.cosh() * x.sin();
        let coarse = tabulate(-3.0, 3.0, 301, 1.0, 31, closed);
        let fine = tabulate(-3.0, 3.0, 601, 1.0, 61, closed);
        let r_coarse = residual_nondivergence(&coarse, &zero).map_err(|e| e.to_string())?;
        let r_fine = residual_nondivergence(&fine, &zero).map_err(|e| e.to_string())?;
        let order = (r_coarse.relative / r_fine.relative).log2();
        ensure!(
            order >= 1.8,
            "nondivergence order {order:.2} ({} -> {})",
            r_coarse.relative,
            r_fine.relative
        );

        // Divergence form: phi = sin(x) cosh(sqrt(2) y) solves the V = 1
        // equation; the auxiliary ODE supplies the conjugation weight.
        let one = Potential::new(
            PotentialKind::TabulatedSamples { xs: vec![-1.0, 1.0], values: vec![1.0, 1.0] },
            GrowthBounds::new(1.0, 1.0, 1.0, 0.5, 0.5).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let lifted = |x: f64, y: f64| x.sin() * (std::f64::consts::SQRT_2 * y).cosh();
        let d_coarse = tabulate(-0.5, 0.5, 101, 0.5, 101, lifted);
        let d_fine = tabulate(-0.5, 0.5, 201, 0.5, 201, lifted);
        let aux_coarse = solve_aux_ode(&one, -0.5, 0.5, 101).map_err(|e| e.to_string())?;
        let aux_fine = solve_aux_ode(&one, -0.5, 0.5, 201).map_err(|e| e.to_string())?;
        let s_coarse = residual_divergence(&d_coarse, &aux_coarse).map_err(|e| e.to_string())?;
        let s_fine = residual_divergence(&d_fine, &aux_fine).map_err(|e| e.to_string())?;
        let order_div = (s_coarse.relative / s_fine.relative).log2();
        ensure!(
            order_div >= 1.8,
            "divergence order {order_div:.2} ({} -> {})",
            s_coarse.relative,
            s_fine.relative
        );
        Ok(())
    };
    conclude(8, "both lift residuals shrink at order >= 1.8 under 2x refinement", body());
}

#[test]
fn c09_auxiliary_ode_respects_the_lemma_bounds() {
    let body = || -> Result<(), String> {
        let bounds = GrowthBounds::new(1.0, 1.0, 1.0, 0.5, 0.5).map_err(|e| e.to_string())?;
        let tabulated = |v: f64| {
            Potential::new(
                PotentialKind::TabulatedSamples { xs: vec![-1.0, 1.0], values: vec![v, v] },
                bounds,
            )
            .expect("constant potential")
        };

        // V = 0: the solution is identically 1.
        let flat = solve_aux_ode(&tabulated(0.0), -0.5, 0.5, 20001).map_err(|e| e.to_string())?;
        ensure!(flat.bounds_ok(1e-8), "V = 0 bounds violated");
        let max_dev = flat.values.iter().map(|v| (v - 1.0).abs()).fold(0.0f64, f64::max);
        ensure!(max_dev <= 1e-8, "V = 0 deviates from 1 by {max_dev:.3e}");

        // V = 1 on [-1/2, 1/2]: phi = e cosh(x) / cosh(1/2), so the
        // midpoint is 2 e^{3/2} / (e + 1) = 2.41063...
        let unit = solve_aux_ode(&tabulated(1.0), -0.5, 0.5, 20001).map_err(|e| e.to_string())?;
        ensure!(unit.bounds_ok(1e-8), "V = 1 bounds violated");
        let mid = unit.values[unit.values.len() / 2];
        let oracle = 2.0 * (1.5f64).exp() / (1.0f64.exp() + 1.0);
        ensure!(
            (mid - oracle).abs() <= 1e-8,
            "V = 1 midpoint {mid} vs closed form {oracle}, err {:.3e}",
            (mid - oracle).abs()
        );

        // V = x^2 restricted to the same window.
        let restricted = solve_aux_ode(&Potential::monomial(2.0).map_err(|e| e.to_string())?, -0.5, 0.5, 20001)
            .map_err(|e| e.to_string())?;
        ensure!(restricted.bounds_ok(1e-8), "V = x^2 bounds violated");
        Ok(())
    };
    conclude(9, "auxiliary ODE solutions sit in [1, boundary] and match the V=1 closed form", body());
}

#[test]
fn c10_smallness_fits_are_feasible_and_track_the_log_square_law() {
    let body = || -> Result<(), String> {
        // Committed rescaled-piece family: V = x^2 dilated from piece 50 of
        // the (L, s) = (1, 1) partition to unit scale; nearly constant = 1.
        let partition = build_partition(1.0, 1.0, 60).map_err(|e| e.to_string())?;
        let piece = partition.piece(50);
        let a_n = 1.0 / (piece.b - piece.a);
        let shift = a_n * piece.a;
        let xs: Vec<f64> = (0..=4000).map(|i| -6.5 + 13.0 * i as f64 / 4000.0).collect();
        let values: Vec<f64> = xs.iter().map(|x| (x + shift).powi(2) / a_n.powi(4)).collect();
        let p = Potential::new(
            PotentialKind::TabulatedSamples { xs, values },
            GrowthBounds::new(1.0, 2.0, 0.0, 2.0, 2.0).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let g = Grid1D::new(-6.0, 6.0, 1201).map_err(|e| e.to_string())?;
        let basis = eigen_decompose(&build_hamiltonian(&p, &g).map_err(|e| e.to_string())?, 2.2)
            .map_err(|e| e.to_string())?;

        let mut products = Vec::new();
        for width in [0.2, 0.1, 0.05] {
            let omega = IntervalSet::interval(0.4 - width / 2.0, 0.4 + width / 2.0)
                .map_err(|e| e.to_string())?;
            let samples = collect_samples(
                &basis,
                &p,
                &[1.3, 1.6, 1.9],
                &omega,
                &proposition_geometry(),
                67,
                31,
                100,
            )
            .map_err(|e| e.to_string())?;
            ensure!(samples.len() == 201, "expected 201 samples, got {}", samples.len());
            let report = fit_alpha(&samples).map_err(|e| e.to_string())?;
            ensure!(
                violations(&samples, report.alpha, report.constant) == 0,
                "width {width}: fitted pair violates its own samples"
            );
            ensure!(
                report.constant <= FEASIBILITY_CAP,
                "width {width}: constant {:.3e} above cap",
                report.constant
            );
            products.push(report.alpha * width.ln().powi(2));
        }
        let spread = products.iter().cloned().fold(f64::MIN, f64::max)
            / products.iter().cloned().fold(f64::MAX, f64::min);
        ensure!(
            spread <= 3.0,
            "alpha |log omega|^2 spreads by {spread:.2} across widths (products {products:?})"
        );
        Ok(())
    };
    conclude(10, "zero violations, feasible constants, alpha ~ 1/log^2|omega| within factor 3", body());
}

#[test]
fn c11_hum_control_reaches_zero_and_matches_the_single_mode_cost() {
    let started = Instant::now();
    let body = || -> Result<(), String> {
        let basis = harmonic();
        // Thick observation set, all modes with lambda^2 <= 25, horizon 1.
        let cfg = ControlConfig {
            horizon: 1.0,
            cutoff: 5.0,
            omega: thick_omega(42),
            time_nodes: 64,
            lr: LrParameters::default(),
        };
        let dim = basis.modes_below(cfg.cutoff);
        let u0 = SpectralElement::new(basis, seeded_unit_coefficients(dim, 5), cfg.cutoff)
            .map_err(|e| e.to_string())?;
        let single = synthesize_hum_control(basis, &u0, &cfg).map_err(|e| e.to_string())?;
        ensure!(!single.gramian.flagged, "Gramian flagged near-singular");
        ensure!(
            single.terminal_residual <= 1e-8,
            "terminal residual {:.3e} above 1e-8",
            single.terminal_residual
        );

        // Full-interval single mode: cost^2 has the closed form
        // e^{-2 ev T} b0^2 2 ev / (1 - e^{-2 ev T}).
        let full = ControlConfig {
            horizon: 1.0,
            cutoff: 1.5,
            omega: IntervalSet::interval(-12.0, 12.0).map_err(|e| e.to_string())?,
            time_nodes: 64,
            lr: LrParameters::default(),
        };
        let b0 = 0.7;
        let one_mode = SpectralElement::new(basis, vec![b0], full.cutoff).map_err(|e| e.to_string())?;
        let result = synthesize_hum_control(basis, &one_mode, &full).map_err(|e| e.to_string())?;
        let ev = basis.eigenvalues[0];
        let decay = (-2.0 * ev * full.horizon).exp();
        let oracle_sq = decay * b0 * b0 * 2.0 * ev / (1.0 - decay);
        let rel = (result.cost * result.cost - oracle_sq).abs() / oracle_sq;
        ensure!(rel <= 1e-8, "single-mode cost^2 off by {rel:.3e}");

        // Staged dyadic scheme on the thick scenario.
        let schedule = lebeau_robbiano_schedule(&cfg).map_err(|e| e.to_string())?;
        let staged = run_lr_control(basis, &u0, &cfg, &schedule).map_err(|e| e.to_string())?;
        ensure!(
            staged.stages.iter().all(|s| !s.skipped),
            "a stage skipped on a flagged Gramian"
        );
        ensure!(
            staged.residual <= 1e-6,
            "staged residual {:.3e} above 1e-6",
            staged.residual
        );
        let elapsed = started.elapsed().as_secs_f64();
        ensure!(elapsed <= 60.0, "took {elapsed:.1}s, budget 60s");
        Ok(())
    };
    conclude(11, "HUM reaches zero on the thick scenario and matches the closed-form cost", body());
}

#[test]
fn c12_control_cost_follows_the_committed_short_time_law() {
    let body = || -> Result<(), String> {
        let basis = harmonic();
        let horizons = [0.125, 0.25, 0.5, 1.0];
        let lr = LrParameters { zeta: 0.4, ..LrParameters::default() };

        // Analytic full-interval single-mode case: the regressor
        // T^{-zeta/(2-zeta)} must explain the log-cost to R^2 >= 0.95.
        let full = ControlConfig {
            horizon: 1.0,
            cutoff: 1.5,
            omega: IntervalSet::interval(-12.0, 12.0).map_err(|e| e.to_string())?,
            time_nodes: 64,
            lr,
        };
        let one_mode = SpectralElement::new(basis, vec![0.7], full.cutoff).map_err(|e| e.to_string())?;
        let analytic = cost_law_sweep(basis, &one_mode, &full, &horizons).map_err(|e| e.to_string())?;
        ensure!(
            analytic.fit.r2 >= 0.95,
            "analytic case R^2 = {:.4} below 0.95",
            analytic.fit.r2
        );

        // Thick case: the cost must fall as the horizon grows.
        let thick = ControlConfig {
            horizon: 1.0,
            cutoff: 5.0,
            omega: thick_omega(42),
            time_nodes: 64,
            lr,
        };
        let dim = basis.modes_below(thick.cutoff);
        let u0 = SpectralElement::new(basis, seeded_unit_coefficients(dim, 5), thick.cutoff)
            .map_err(|e| e.to_string())?;
        let swept = cost_law_sweep(basis, &u0, &thick, &horizons).map_err(|e| e.to_string())?;
        for pair in swept.costs.windows(2) {
            ensure!(
                pair[1] <= pair[0] * (1.0 + 1e-9),
                "cost rose from {} to {} as the horizon grew",
                pair[0],
                pair[1]
            );
        }
        Ok(())
    };
    conclude(12, "cost law fits with R^2 >= 0.95 and cost falls with the horizon", body());
}

#[test]
fn c13_cli_reruns_are_byte_identical() {
    let body = || -> Result<(), String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = r#"{"experiments":[
            {"experiment":"partition","output":"p","spec":{"L":1.0,"s":1.0,"n_pieces":500}},
            {"experiment":"thickness","output":"t","spec":{
                "profile":{"kind":"power","gamma":0.3,"L":1.0,"tau":0.5,"s":1.0},
                "partition":{"L":1.0,"s":1.0,"n_pieces":80},"seed":42}},
            {"experiment":"eigen","output":"e","spec":{"basis":{
                "potential":{"kind":"monomial","params":{"beta":2.0},
                    "bounds":{"c1":1.0,"c2":1.0,"c3":0.0,"beta1":2.0,"beta2":2.0}},
                "grid":{"x_min":-10.0,"x_max":10.0,"n":401},"lambda_max":3.0}}}]}"#;
        let path = tmp.path().join("suite.json");
        std::fs::write(&path, config).map_err(|e| e.to_string())?;

        let run = |label: &str| -> Result<(String, Vec<(String, Vec<u8>)>), String> {
            let out = std::process::Command::new(env!("CARGO_BIN_EXE_heatlab"))
                .arg("run")
                .arg(&path)
                .env("HEATLAB_OUTPUT_ROOT", tmp.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(
                out.status.code() == Some(0),
                "{label} run exited {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            );
            let mut files = Vec::new();
            for dir in ["p", "t", "e"] {
                let base = tmp.path().join(dir);
                let mut entries: Vec<_> = std::fs::read_dir(&base)
                    .map_err(|e| e.to_string())?
                    .map(|e| e.expect("entry").path())
                    .collect();
                entries.sort();
                for file in entries {
                    let rel = format!("{dir}/{}", file.file_name().expect("name").to_string_lossy());
                    files.push((rel, std::fs::read(&file).map_err(|e| e.to_string())?));
                }
            }
            Ok((String::from_utf8_lossy(&out.stdout).into_owned(), files))
        };

        let (stdout_a, files_a) = run("first")?;
        let (stdout_b, files_b) = run("second")?;
        ensure!(stdout_a == stdout_b, "check summaries differ between reruns");
        ensure!(files_a.len() == files_b.len(), "artifact counts differ");
        for ((name_a, bytes_a), (name_b, bytes_b)) in files_a.iter().zip(&files_b) {
            ensure!(name_a == name_b, "artifact sets differ: {name_a} vs {name_b}");
            ensure!(bytes_a == bytes_b, "{name_a} changed between identical runs");
        }
        Ok(())
    };
    conclude(13, "repeated CLI runs reproduce artifacts byte for byte", body());
}
