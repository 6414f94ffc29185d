//! Acceptance suite: one test per advertised guarantee of the toolkit.
//!
//! Each test pins a quantitative statement about the discrete operators —
//! exact conservation laws, closed-form special cases, convergence rates of
//! the scaling limits, and bounds the schemes promise to keep. The
//! tolerances are part of the contract: they were fixed from the accuracy
//! the construction guarantees (round-off for identities, measured margins
//! for convergence rates) and are not to be widened to make a build pass.
//!
//! Run with `--nocapture` to see the one-line summary each criterion prints.

use nutrans::asymptotics::{
    default_sweep_problem, diffusion_operator_probe, epsilon_sweep, first_correction,
    moment_identities, F1Variant, LimitKind, SweepReport,
};
use nutrans::boltzmann::{solve, stable_dt, step, SolveOptions};
use nutrans::cli::compare_report;
use nutrans::grid::{DistributionField, MomentField, MomentRole, PhaseGrid};
use nutrans::idsa::{
    compute_sigma_ids, flux_factor, idsa_run, limit_sigma, limiter_bounds_check, trapped_step,
    IdsaOptions, LimiterVariant, Regime,
};
use nutrans::kinetics::{
    collision_full, collision_truncated, CollisionKernel, DiffScheme, OuterBoundary,
};
use nutrans::matter::{mean_free_path, GroupProfiles, MatterModel, Profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Static matter with uniform rates on the given energy groups.
fn uniform_model(j: f64, chi: f64, phi0: f64, phi1: f64, omega: &[f64], c: f64) -> MatterModel {
    let gp = |v: f64| GroupProfiles::shared(Profile::constant(v), omega.len()).unwrap();
    MatterModel::static_rates(gp(j), gp(chi), gp(phi0), gp(phi1), omega.to_vec(), c).unwrap()
}

fn max_abs_diff(a: &DistributionField, b: &DistributionField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// 1. The collision operators have a vanishing angular mean.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_collision_operators_conserve_the_angular_mean() {
    let grid = PhaseGrid::uniform(4, 1.0, 8, 1, 3.0, 1.3, 1.0).unwrap();
    let rule = grid.rule();
    let n = rule.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x01);
    let mut worst_full = 0.0f64;
    let mut worst_trunc = 0.0f64;
    for _ in 0..100 {
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for jj in 0..=i {
                let v = 2.0 * rng.gen::<f64>();
                k[i * n + jj] = v;
                k[jj * n + i] = v;
            }
        }
        let kernel = CollisionKernel::new(n, k).unwrap();
        let c_full = collision_full(&f, &kernel, rule).unwrap();
        let phi0 = 0.1 + 1.9 * rng.gen::<f64>();
        let phi1 = rng.gen::<f64>() - 0.5;
        let c_trunc = collision_truncated(&f, phi0, phi1, rule).unwrap();

        let mean = |c: &[f64]| -> f64 {
            c.iter().zip(rule.w()).map(|(&ci, &w)| 0.5 * w * ci).sum()
        };
        let scale = |c: &[f64]| c.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        worst_full = worst_full.max(mean(&c_full).abs() / scale(&c_full));
        worst_trunc = worst_trunc.max(mean(&c_trunc).abs() / scale(&c_trunc));
    }
    assert!(
        worst_full <= 1e-13,
        "full-kernel collision mean leaked: {worst_full:.3e}"
    );
    assert!(
        worst_trunc <= 1e-13,
        "truncated collision mean leaked: {worst_trunc:.3e}"
    );
    println!(
        "[criterion 1] PASS: collision null moment <= 1e-13 on 100 random slices \
         (full {worst_full:.2e}, truncated {worst_trunc:.2e})"
    );
}

// ---------------------------------------------------------------------------
// 2. Local equilibrium is a discrete fixed point of the kinetic solver.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_equilibrium_is_a_discrete_fixed_point() {
    let grid = PhaseGrid::uniform(24, 1.0, 8, 2, 3.0, 1.3, 1.0).unwrap();
    let model = uniform_model(0.3, 0.9, 0.5, 0.1, grid.omega(), 1.0);
    // j / chi_tilde = 0.3 / 1.2 everywhere
    let f0 = DistributionField::from_fn(&grid, |_, _, _| 0.25);
    let opts = SolveOptions {
        boundary: OuterBoundary::Bath,
        ..SolveOptions::default()
    };

    let dt = 0.8 * stable_dt(&model, &grid, 0.0, opts.scheme).unwrap();
    let f1 = step(&f0, &model, &grid, dt, 0.0, &opts, None).unwrap();
    let one = max_abs_diff(&f0, &f1);
    assert!(one <= 1e-13, "one step drifted off equilibrium by {one:.3e}");

    let sol = solve(&f0, &model, &grid, 5.0, &opts).unwrap();
    let long = max_abs_diff(&f0, &sol.final_f);
    assert!(
        long <= 1e-12,
        "{} steps drifted off equilibrium by {long:.3e}",
        sol.steps
    );
    println!(
        "[criterion 2] PASS: equilibrium held to {one:.2e} after one step, \
         {long:.2e} after {} steps",
        sol.steps
    );
}

// ---------------------------------------------------------------------------
// 3. The streaming composite reproduces the diffusion operator: exactly on
//    a quadratic with uniform rates, at second order on smooth fields.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_streaming_composite_reproduces_the_diffusion_operator() {
    let grid = PhaseGrid::uniform(16, 1.0, 8, 1, 3.0, 1.3, 1.0).unwrap();
    let model = uniform_model(0.4, 0.6, 0.7, 0.2, grid.omega(), 1.0);
    let s = model.evaluate_group(grid.r_centers()[0], 0, 0.0).unwrap();
    let lambda = mean_free_path(&s).unwrap();

    let f0 = DistributionField::from_fn(&grid, |r, _, _| r * r);
    let probe = diffusion_operator_probe(&f0, &model, &grid, 0.0).unwrap();
    let mut worst = 0.0f64;
    for ir in 0..grid.n_r() {
        worst = worst.max((probe.get(&grid, ir, 0) - 2.0 * lambda).abs());
    }
    assert!(
        worst <= 1e-12,
        "composite missed 2 lambda on r^2 by {worst:.3e}"
    );

    // Interior-window refinement against (lambda/3)(g'' + 2 g'/r).
    let w = 0.4f64;
    let err_at = |n_r: usize| -> f64 {
        let grid = PhaseGrid::uniform(n_r, 1.0, 8, 1, 3.0, 1.3, 1.0).unwrap();
        let f0 = DistributionField::from_fn(&grid, |r, _, _| (-(r / w) * (r / w)).exp());
        let probe = diffusion_operator_probe(&f0, &model, &grid, 0.0).unwrap();
        let mut e = 0.0f64;
        for ir in 0..grid.n_r() {
            let r = grid.r_centers()[ir];
            if !(0.2..=0.8).contains(&r) {
                continue;
            }
            let g = (-(r / w) * (r / w)).exp();
            let gp = -2.0 * r / (w * w) * g;
            let gpp = (-2.0 / (w * w) + 4.0 * r * r / (w * w * w * w)) * g;
            let want = lambda / 3.0 * (gpp + 2.0 * gp / r);
            e = e.max((probe.get(&grid, ir, 0) - want).abs());
        }
        e
    };
    let e40 = err_at(40);
    let e80 = err_at(80);
    let order = (e40 / e80).log2();
    assert!(
        (1.8..=2.2).contains(&order),
        "refinement order {order:.3} outside [1.8, 2.2] (errors {e40:.3e}, {e80:.3e})"
    );
    println!(
        "[criterion 3] PASS: composite = 2 lambda on r^2 to {worst:.2e}; \
         interior refinement order {order:.2}"
    );
}

// ---------------------------------------------------------------------------
// 4. The first correction to a linear leading term has the closed form
//    -lambda a mu, and its moment identities hold to round-off.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_first_correction_matches_the_closed_form() {
    let grid = PhaseGrid::uniform(24, 1.0, 8, 1, 3.0, 1.3, 1.0).unwrap();
    let model = uniform_model(0.4, 0.6, 0.7, 0.2, grid.omega(), 1.0);
    let s = model.evaluate_group(grid.r_centers()[0], 0, 0.0).unwrap();
    let lambda = mean_free_path(&s).unwrap();

    let a = 0.7;
    let f0 = DistributionField::from_fn(&grid, |r, _, _| a * r);
    let f1 = first_correction(
        &f0,
        &model,
        &grid,
        F1Variant::Minus,
        DiffScheme::CenteredPointwise,
        0.0,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for ir in 0..grid.n_r() {
        for (ik, &mu) in grid.rule().mu().iter().enumerate() {
            let want = -lambda * a * mu;
            worst = worst.max((f1.get(&grid, ir, 0, ik) - want).abs());
        }
    }
    assert!(
        worst <= 1e-12,
        "first correction missed -lambda a mu by {worst:.3e}"
    );

    let g = DistributionField::from_fn(&grid, |r, _, _| (-(r / 0.4) * (r / 0.4)).exp());
    let ids = moment_identities(
        &g,
        &model,
        &grid,
        F1Variant::Minus,
        DiffScheme::CenteredPointwise,
        0.0,
    )
    .unwrap();
    assert!(
        ids.zeroth <= 1e-12 && ids.first <= 1e-12 && ids.fick <= 1e-12,
        "moment identities leaked: zeroth {:.2e}, first {:.2e}, fick {:.2e}",
        ids.zeroth,
        ids.first,
        ids.fick
    );
    println!(
        "[criterion 4] PASS: closed form to {worst:.2e}; identities \
         ({:.1e}, {:.1e}, {:.1e})",
        ids.zeroth, ids.first, ids.fick
    );
}

// ---------------------------------------------------------------------------
// 5-7. The scaling-limit residuals decay across the epsilon ladder at the
//      advertised orders, consistently across two radial resolutions.
// ---------------------------------------------------------------------------

const LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn run_sweep(kind: LimitKind) -> SweepReport {
    let problem = default_sweep_problem(kind).unwrap();
    let report = epsilon_sweep(&problem, &LADDER).unwrap();
    for pair in report.errors.windows(2) {
        assert!(
            pair[1] < pair[0],
            "{} residuals not monotone: {:?}",
            kind.label(),
            report.errors
        );
    }
    assert!(
        report.resolution_consistent,
        "{} slope changed under coarsening: {:.3} vs {:.3}",
        kind.label(),
        report.slope,
        report.slope_half
    );
    let smallest = *report.errors.last().unwrap();
    assert!(
        report.floor_estimate * 10.0 <= smallest,
        "{} discretization floor {:.3e} too close to smallest residual {:.3e}",
        kind.label(),
        report.floor_estimate,
        smallest
    );
    report
}

#[test]
fn criterion_05_diffusion_scaling_residual_decays_at_second_order() {
    let r = run_sweep(LimitKind::Diffusion);
    assert!(
        r.slope >= 1.8,
        "diffusion-limit slope {:.3} below 1.8 (errors {:?})",
        r.slope,
        r.errors
    );
    println!(
        "[criterion 5] PASS: diffusion residual slope {:.2} (half-grid {:.2}), \
         {:.3e} -> {:.3e} across eps {:?}",
        r.slope,
        r.slope_half,
        r.errors[0],
        r.errors[r.errors.len() - 1],
        r.epsilons
    );
}

#[test]
fn criterion_06_reaction_scaling_residual_decays_at_first_order() {
    let r = run_sweep(LimitKind::Reaction);
    assert!(
        r.slope >= 0.8,
        "reaction-limit slope {:.3} below 0.8 (errors {:?})",
        r.slope,
        r.errors
    );
    println!(
        "[criterion 6] PASS: reaction residual slope {:.2} (half-grid {:.2}), \
         {:.3e} -> {:.3e} across eps {:?}",
        r.slope,
        r.slope_half,
        r.errors[0],
        r.errors[r.errors.len() - 1],
        r.epsilons
    );
}

#[test]
fn criterion_07_free_streaming_scaling_residual_decays_at_first_order() {
    let r = run_sweep(LimitKind::FreeStreaming);
    assert!(
        r.slope >= 0.8,
        "free-streaming-limit slope {:.3} below 0.8 (errors {:?})",
        r.slope,
        r.errors
    );
    println!(
        "[criterion 7] PASS: free-streaming residual slope {:.2} (half-grid {:.2}), \
         {:.3e} -> {:.3e} across eps {:?}",
        r.slope,
        r.slope_half,
        r.errors[0],
        r.errors[r.errors.len() - 1],
        r.epsilons
    );
}

// ---------------------------------------------------------------------------
// 8. The source limiter keeps the implied steady state inside the occupation
//    bounds, and the implicit trapped update contracts toward equilibrium at
//    the backward-Euler rate.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_limiter_bounds_hold_and_trapped_update_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x08);
    let samples: Vec<(f64, f64, f64, f64)> = (0..1000)
        .map(|_| {
            (
                2.0 * rng.gen::<f64>(),
                2.0 * rng.gen::<f64>(),
                6.0 * rng.gen::<f64>() - 3.0,
                rng.gen::<f64>(),
            )
        })
        .collect();
    let w_idsa = limiter_bounds_check(&samples, LimiterVariant::Idsa);
    let w_global = limiter_bounds_check(&samples, LimiterVariant::Global);
    assert_eq!(w_idsa, 0.0, "pointwise limiter violated its bounds");
    assert_eq!(w_global, 0.0, "global limiter violated its bounds");

    // Uniform pure-absorption problem: the update is a scalar backward-Euler
    // iteration contracting by exactly 1/(1 + c dt chi_tilde) per step.
    let grid = PhaseGrid::uniform(12, 1.0, 4, 1, 3.0, 1.3, 1.0).unwrap();
    let model = uniform_model(0.3, 0.7, 0.0, 0.0, grid.omega(), 1.0);
    let beta_star = 0.3; // j / chi_tilde
    let dt = 0.1; // c dt chi_tilde = 0.1, contraction 1/1.1
    let beta_s = MomentField::zeros(&grid, MomentRole::BetaStreaming);
    let mut beta = MomentField::zeros(&grid, MomentRole::BetaTrapped);
    for _ in 0..200 {
        let sigma_ids = compute_sigma_ids(&beta, &beta_s, &model, &grid, 0.0).unwrap();
        let source =
            limit_sigma(&sigma_ids, &beta_s, &model, &grid, LimiterVariant::Idsa, 0.0).unwrap();
        beta = trapped_step(&beta, &source, &beta_s, &model, &grid, dt, 0.0).unwrap();
    }
    let rel = beta
        .values()
        .iter()
        .map(|&b| (b - beta_star).abs())
        .fold(0.0f64, f64::max)
        / beta_star;
    // 1.1^-200 = 5.27e-9; the window checks the rate, not just convergence
    assert!(
        (1e-9..=1e-8).contains(&rel),
        "relative gap {rel:.3e} after 200 steps is off the backward-Euler rate"
    );
    println!(
        "[criterion 8] PASS: limiter violations exactly 0 on 1000 samples; \
         200-step contraction gap {rel:.2e} matches 1.1^-200"
    );
}

// ---------------------------------------------------------------------------
// 9. The geometric closure factor takes its closed-form value at twice the
//    sphere radius and behaves monotonically.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_flux_factor_closed_form_and_limits() {
    let got = flux_factor(2.0, 1.0);
    let want = 0.933_012_701_892_219_3_f64; // (1 + sqrt(3)/2) / 2
    assert!(
        (got - want).abs() <= 1e-15,
        "flux factor at 2 R was {got:.17}, want {want:.17}"
    );
    assert_eq!(flux_factor(0.5, 1.0), 0.5);
    assert_eq!(flux_factor(1.0, 1.0), 0.5);

    let mut prev = 0.5;
    for i in 1..=1000 {
        let r = 1.0 + 0.01 * i as f64;
        let ff = flux_factor(r, 1.0);
        assert!(ff >= prev && ff < 1.0, "flux factor not monotone at r = {r}");
        prev = ff;
    }
    assert!(flux_factor(1e8, 1.0) > 1.0 - 1e-12);
    println!("[criterion 9] PASS: FF(2R) = {got:.16}; monotone on (R, 11R], limit 1");
}

// ---------------------------------------------------------------------------
// 10. A two-zone star: the limiter maps the opaque core to diffusion or
//     reaction and the transparent envelope to free streaming, and the split
//     solution tracks the kinetic one better as the zones become more
//     extreme.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_two_zone_regime_map_and_contrast_trend() {
    // Two-zone star: an emitting core (r < 0.4, emissivity = absorptivity =
    // `strength`, so the core mean free path is 1/(2 strength)) falls off
    // linearly across r in [0.4, 0.6] to a quiet envelope with mean free
    // path 1/chi_env. The radiating skin — the band of the ramp with
    // outward optical depth ~ 1 — has width sqrt(0.2/strength); n_r scales
    // with sqrt(strength) to keep it resolved, so the measured gap is the
    // modeling error of the split, not interface discretization noise.
    let run = |strength: f64, chi_env: f64, n_r: usize, check_map: bool| -> f64 {
        let grid = PhaseGrid::uniform(n_r, 1.0, 6, 1, 3.0, 1.3, 1.0).unwrap();
        let j = Profile::new(&[(0.0, strength), (0.4, strength), (0.6, 0.0), (1.0, 0.0)]).unwrap();
        let chi = Profile::new(&[
            (0.0, strength),
            (0.4, strength),
            (0.6, chi_env),
            (1.0, chi_env),
        ])
        .unwrap();
        let gp = |p: Profile| GroupProfiles::shared(p, 1).unwrap();
        let model = MatterModel::static_rates(
            gp(j),
            gp(chi),
            gp(Profile::constant(0.0)),
            gp(Profile::constant(0.0)),
            grid.omega().to_vec(),
            1.0,
        )
        .unwrap();

        let equilibrium = |r: f64| {
            let s = model.evaluate_group(r, 0, 0.0).unwrap();
            s.j / s.chi_tilde
        };
        let beta0 = MomentField::from_fn(&grid, MomentRole::BetaTrapped, |r, _| equilibrium(r));
        let split = idsa_run(&beta0, &model, &grid, 4.0, &IdsaOptions::default()).unwrap();
        if check_map {
            // In the flat core the unlimited source is an exact tie at zero,
            // so its diffusion-vs-reaction label is round-off tie-breaking;
            // the physical claim is that core cells do not free-stream while
            // envelope cells do. Demand nine out of ten on each side.
            let (mut core, mut core_trapped) = (0usize, 0usize);
            let (mut env, mut env_streaming) = (0usize, 0usize);
            for ir in 0..grid.n_r() {
                let r = grid.r_centers()[ir];
                let regime = split.source.regime(ir, 0);
                if r < 0.4 {
                    core += 1;
                    core_trapped += (regime != Regime::FreeStreaming) as usize;
                }
                if r > 0.6 {
                    env += 1;
                    env_streaming += (regime == Regime::FreeStreaming) as usize;
                }
            }
            assert!(
                core_trapped * 10 >= core * 9,
                "only {core_trapped}/{core} core cells tagged diffusion-or-reaction"
            );
            assert!(
                env_streaming * 10 >= env * 9,
                "only {env_streaming}/{env} envelope cells tagged free-streaming"
            );
        }

        let f0 = DistributionField::from_fn(&grid, |r, _, _| equilibrium(r));
        let kinetic = solve(&f0, &model, &grid, 4.0, &SolveOptions::default()).unwrap();
        compare_report(&kinetic, &split, &grid).l2_diff
    };
    // A moderate pair of zones (core mean free path 0.1 R, envelope 1e2 R)
    // against an extreme pair (1e-3 R and 1e3 R, where the regime map is
    // also checked): the split commits visible errors while the interface
    // band is semi-transparent, and those errors fall away as the zones
    // sharpen toward their limits.
    let diff_moderate = run(5.0, 1e-2, 144, false);
    let diff_extreme = run(500.0, 1e-3, 456, true);
    assert!(
        diff_extreme < diff_moderate,
        "split-kinetic gap grew as the zones sharpened: \
         {diff_extreme:.3e} extreme vs {diff_moderate:.3e} moderate"
    );
    println!(
        "[criterion 10] PASS: core diffusive, envelope free-streaming; \
         kinetic gap {diff_moderate:.3e} -> {diff_extreme:.3e} as the zones sharpen"
    );
}

// ---------------------------------------------------------------------------
// 11. Upwind transport with implicit reactions keeps the occupation inside
//     the unit interval over a long integration.
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_occupation_stays_in_the_unit_interval() {
    let grid = PhaseGrid::uniform(32, 1.0, 4, 1, 3.0, 1.3, 1.0).unwrap();
    let model = uniform_model(0.4, 0.6, 0.8, 0.0, grid.omega(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b);
    let f0 = DistributionField::from_fn(&grid, |_, _, _| rng.gen::<f64>());
    let opts = SolveOptions {
        safety: 0.4,
        ..SolveOptions::default()
    };
    let t_end = 1000.0 * 0.4 * stable_dt(&model, &grid, 0.0, opts.scheme).unwrap();
    let sol = solve(&f0, &model, &grid, t_end, &opts).unwrap();
    assert!(sol.steps >= 1000, "wanted >= 1000 steps, took {}", sol.steps);
    let (lo, hi) = sol
        .final_f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    assert!(
        lo >= -1e-10 && hi <= 1.0 + 1e-10,
        "occupation left [0, 1]: range [{lo:.3e}, {hi:.12}]"
    );
    println!(
        "[criterion 11] PASS: {} upwind steps from random data stayed in \
         [{lo:.2e}, {hi:.12}]",
        sol.steps
    );
}
