//! Command-line front end.
//!
//! Every subcommand reads one scenario file, runs, and writes plain CSV
//! into the output directory together with a `manifest.txt` echoing the
//! scenario assignments (sorted) and the crate version, so a result
//! directory always states what produced it. All numbers are written with
//! `{:.12e}`, which makes reruns byte-identical.
//!
//! Exit codes: 0 on success, 2 for anything wrong with the invocation or
//! the scenario file, 3 for runtime failures (instability, singular
//! opacities, output I/O).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::asymptotics::{
    default_sweep_problem, epsilon_sweep, hierarchy_check, HierarchyReport, LimitKind,
    SweepProblem, SweepReport,
};
use crate::boltzmann::{solve, BoltzmannSolution};
use crate::error::Error;
use crate::grid::{MomentField, MomentRole, PhaseGrid};
use crate::idsa::{idsa_run, IdsaSolution};
use crate::matter::ScalingMode;
use crate::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "nutrans",
    version,
    about = "Spherically symmetric neutrino transport: a kinetic solver, a \
             trapped/streaming approximation, and a stiff-limit verification \
             harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (see the scenario module docs for the format).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Directory the CSV reports are written into (created if absent).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for parallel sweep members; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the kinetic equation; write moment histories, the final
    /// ordinate-resolved state, and the particle ledger.
    RunBoltzmann,
    /// Integrate the trapped/streaming split; write moment histories and
    /// the final source decomposition with its regime map.
    RunIdsa,
    /// Run both solvers on the same scenario and report how far apart the
    /// mean occupations land.
    Compare,
    /// Build the expansion of the configured scaling order by order and
    /// report level residuals and truncation defects.
    HierarchyCheck,
    /// Measure limit-equation residuals over the configured epsilon
    /// ladder, at full and half radial resolution.
    EpsilonSweep {
        /// Ignore --scenario and run a stock problem: one of `diffusion`,
        /// `reaction`, `free_streaming`, `free_streaming_2nd`.
        #[arg(long)]
        preset: Option<String>,
    },
}

enum Failure {
    /// Bad invocation or bad scenario: exit 2.
    Usage(String),
    /// The run itself failed: exit 3.
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parse `std::env::args`, dispatch, and map failures to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore the error: the global pool may already exist (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            3
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    match &cli.command {
        Command::RunBoltzmann => cmd_run_boltzmann(&load_scenario(cli)?, cli),
        Command::RunIdsa => cmd_run_idsa(&load_scenario(cli)?, cli),
        Command::Compare => cmd_compare(&load_scenario(cli)?, cli),
        Command::HierarchyCheck => cmd_hierarchy(&load_scenario(cli)?, cli),
        Command::EpsilonSweep { preset } => cmd_sweep(cli, preset.as_deref()),
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario, Failure> {
    let Some(path) = &cli.scenario else {
        return Err(Failure::Usage(
            "this subcommand needs --scenario <file>".into(),
        ));
    };
    Scenario::from_file(path)
        .map_err(|e| Failure::Usage(format!("scenario {}: {e}", path.display())))
}

fn require_t_end(sc: &Scenario) -> Result<f64, Failure> {
    sc.t_end
        .ok_or_else(|| Failure::Usage("scenario does not set solve.t_end".into()))
}

fn require_unscaled(sc: &Scenario, what: &str) -> Result<(), Failure> {
    if sc.model().scaling() != ScalingMode::None {
        return Err(Failure::Usage(format!(
            "{what} applies its own scalings; set scaling.mode = none"
        )));
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn write_out(cli: &Cli, name: &str, content: &str) -> Result<(), Failure> {
    std::fs::write(cli.out.join(name), content).map_err(Error::from)?;
    Ok(())
}

/// `manifest.txt`: crate version, the subcommand, and the sorted scenario
/// echo. Written by every subcommand that consumed a scenario.
fn write_manifest(cli: &Cli, sc: &Scenario, command: &str) -> Result<(), Failure> {
    let mut out = String::new();
    let _ = writeln!(out, "# nutrans {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {command}");
    out.push_str(&sc.manifest());
    write_out(cli, "manifest.txt", &out)
}

fn moment_history_csv(
    grid: &PhaseGrid,
    times: &[f64],
    a: &[MomentField],
    b: &[MomentField],
    header: &str,
) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (s, t) in times.iter().enumerate() {
        for ir in 0..grid.n_r() {
            for ig in 0..grid.n_omega() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt(*t),
                    fmt(grid.r_centers()[ir]),
                    fmt(grid.omega()[ig]),
                    fmt(a[s].get(grid, ir, ig)),
                    fmt(b[s].get(grid, ir, ig)),
                );
            }
        }
    }
    out
}

fn cmd_run_boltzmann(sc: &Scenario, cli: &Cli) -> Result<(), Failure> {
    let t_end = require_t_end(sc)?;
    let grid = sc.grid();
    let sol = solve(
        &sc.initial_field()?,
        sc.model(),
        grid,
        t_end,
        &sc.solve_options(),
    )?;

    write_out(
        cli,
        "boltzmann_moments.csv",
        &moment_history_csv(grid, &sol.times, &sol.beta, &sol.flux, "time,r,omega,beta,flux"),
    )?;

    let mut final_csv = String::from("r,omega,mu,f\n");
    for ir in 0..grid.n_r() {
        for ig in 0..grid.n_omega() {
            for (ik, &mu) in grid.rule().mu().iter().enumerate() {
                let _ = writeln!(
                    final_csv,
                    "{},{},{},{}",
                    fmt(grid.r_centers()[ir]),
                    fmt(grid.omega()[ig]),
                    fmt(mu),
                    fmt(sol.final_f.get(grid, ir, ig, ik)),
                );
            }
        }
    }
    write_out(cli, "boltzmann_final.csv", &final_csv)?;

    let l = &sol.ledger;
    let mut ledger_csv =
        String::from("group,omega,initial,final,emission,absorption,boundary_outflow,redistribution\n");
    for g in 0..grid.n_omega() {
        let _ = writeln!(
            ledger_csv,
            "{g},{},{},{},{},{},{},{}",
            fmt(grid.omega()[g]),
            fmt(l.initial[g]),
            fmt(l.current[g]),
            fmt(l.emission[g]),
            fmt(l.absorption[g]),
            fmt(l.boundary_outflow[g]),
            fmt(l.redistribution[g]),
        );
    }
    write_out(cli, "boltzmann_ledger.csv", &ledger_csv)?;
    write_manifest(cli, sc, "run-boltzmann")?;

    println!(
        "boltzmann: {} steps, dt = {}, ledger closure residual = {:.3e}",
        sol.steps,
        fmt(sol.dt),
        l.closure_residual()
    );
    Ok(())
}

fn cmd_run_idsa(sc: &Scenario, cli: &Cli) -> Result<(), Failure> {
    let t_end = require_t_end(sc)?;
    let grid = sc.grid();
    let beta_t0 = sc
        .initial_field()?
        .moment(grid, crate::grid::MomentOrder::Zeroth, MomentRole::BetaTrapped);
    let sol = idsa_run(&beta_t0, sc.model(), grid, t_end, &sc.idsa_options())?;

    write_out(
        cli,
        "idsa_moments.csv",
        &moment_history_csv(
            grid,
            &sol.times,
            &sol.beta_t,
            &sol.beta_s,
            "time,r,omega,beta_trapped,beta_streaming",
        ),
    )?;

    let mut final_csv = String::from(
        "r,omega,beta_trapped,beta_streaming,sigma_limited,sigma_raw,flux_factor,regime\n",
    );
    for ir in 0..grid.n_r() {
        for ig in 0..grid.n_omega() {
            let _ = writeln!(
                final_csv,
                "{},{},{},{},{},{},{},{}",
                fmt(grid.r_centers()[ir]),
                fmt(grid.omega()[ig]),
                fmt(sol.final_beta_t.get(grid, ir, ig)),
                fmt(sol.final_beta_s.get(grid, ir, ig)),
                fmt(sol.source.sigma.get(grid, ir, ig)),
                fmt(sol.sigma_ids.get(grid, ir, ig)),
                fmt(sol.flux_factor.get(grid, ir, ig)),
                sol.source.regime(ir, ig).label(),
            );
        }
    }
    write_out(cli, "idsa_final.csv", &final_csv)?;
    write_manifest(cli, sc, "run-idsa")?;

    println!(
        "idsa: {} steps, dt = {}, streaming clipped {} points (max {:.3e})",
        sol.steps,
        fmt(sol.dt),
        sol.streaming.clipped,
        sol.streaming.max_clip
    );
    Ok(())
}

/// How far apart the two solvers' mean occupations land on one scenario.
#[derive(Debug, Clone)]
pub struct CompareReport {
    /// Volume-weighted L2 norm of beta_kinetic - (beta_t + beta_s).
    pub l2_diff: f64,
    pub max_abs_diff: f64,
    /// Points the limiter classified as diffusion / reaction /
    /// free-streaming, in that order.
    pub regime_counts: [usize; 3],
}

pub fn compare_report(
    kinetic: &BoltzmannSolution,
    split: &IdsaSolution,
    grid: &PhaseGrid,
) -> CompareReport {
    let beta_k = kinetic.beta.last().expect("solution has snapshots");
    let mut diff = MomentField::zeros(grid, MomentRole::Residual);
    let mut max_abs = 0.0f64;
    let mut counts = [0usize; 3];
    for ir in 0..grid.n_r() {
        for ig in 0..grid.n_omega() {
            let d = beta_k.get(grid, ir, ig)
                - split.final_beta_t.get(grid, ir, ig)
                - split.final_beta_s.get(grid, ir, ig);
            diff.set(grid, ir, ig, d);
            max_abs = max_abs.max(d.abs());
            counts[split.source.regime(ir, ig) as usize] += 1;
        }
    }
    CompareReport {
        l2_diff: diff.weighted_l2(grid),
        max_abs_diff: max_abs,
        regime_counts: counts,
    }
}

fn cmd_compare(sc: &Scenario, cli: &Cli) -> Result<(), Failure> {
    let t_end = require_t_end(sc)?;
    let grid = sc.grid();
    let kinetic = solve(
        &sc.initial_field()?,
        sc.model(),
        grid,
        t_end,
        &sc.solve_options(),
    )?;
    let beta_t0 = sc
        .initial_field()?
        .moment(grid, crate::grid::MomentOrder::Zeroth, MomentRole::BetaTrapped);
    let split = idsa_run(&beta_t0, sc.model(), grid, t_end, &sc.idsa_options())?;

    let beta_k = kinetic.beta.last().expect("solution has snapshots");
    let mut csv =
        String::from("r,omega,beta_kinetic,beta_trapped,beta_streaming,diff,regime\n");
    for ir in 0..grid.n_r() {
        for ig in 0..grid.n_omega() {
            let bt = split.final_beta_t.get(grid, ir, ig);
            let bs = split.final_beta_s.get(grid, ir, ig);
            let bk = beta_k.get(grid, ir, ig);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                fmt(grid.r_centers()[ir]),
                fmt(grid.omega()[ig]),
                fmt(bk),
                fmt(bt),
                fmt(bs),
                fmt(bk - bt - bs),
                split.source.regime(ir, ig).label(),
            );
        }
    }
    write_out(cli, "compare.csv", &csv)?;
    write_manifest(cli, sc, "compare")?;

    let report = compare_report(&kinetic, &split, grid);
    println!(
        "compare: |beta_kinetic - beta_idsa| L2 = {:.6e}, max = {:.6e}; regimes \
         diffusion/reaction/free_streaming = {}/{}/{}",
        report.l2_diff,
        report.max_abs_diff,
        report.regime_counts[0],
        report.regime_counts[1],
        report.regime_counts[2]
    );
    Ok(())
}

fn hierarchy_csv(report: &HierarchyReport) -> String {
    let mut out = String::from("level,level_norm,defect_norm\n");
    for n in 0..3 {
        let _ = writeln!(
            out,
            "{n},{},{}",
            fmt(report.level_norms[n]),
            fmt(report.defect_norms[n]),
        );
    }
    out
}

fn cmd_hierarchy(sc: &Scenario, cli: &Cli) -> Result<(), Failure> {
    let Some(spec) = &sc.hierarchy else {
        return Err(Failure::Usage(
            "scenario has no hierarchy block (hierarchy.variant, hierarchy.epsilon)".into(),
        ));
    };
    require_unscaled(sc, "hierarchy-check")?;
    let report = hierarchy_check(sc.model(), sc.grid(), spec.variant, spec.epsilon, 0.0)?;
    write_out(cli, "hierarchy.csv", &hierarchy_csv(&report))?;
    write_manifest(cli, sc, "hierarchy-check")?;
    println!(
        "hierarchy {} at epsilon = {}: levels = [{:.3e}, {:.3e}, {:.3e}], defects = \
         [{:.3e}, {:.3e}, {:.3e}]",
        report.variant.label(),
        spec.epsilon,
        report.level_norms[0],
        report.level_norms[1],
        report.level_norms[2],
        report.defect_norms[0],
        report.defect_norms[1],
        report.defect_norms[2],
    );
    Ok(())
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("epsilon,error,error_half\n");
    for (i, &eps) in report.epsilons.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt(eps),
            fmt(report.errors[i]),
            fmt(report.errors_half[i]),
        );
    }
    out
}

fn parse_preset(name: &str) -> Result<LimitKind, Failure> {
    match name {
        "diffusion" => Ok(LimitKind::Diffusion),
        "reaction" => Ok(LimitKind::Reaction),
        "free_streaming" => Ok(LimitKind::FreeStreaming),
        "free_streaming_2nd" => Ok(LimitKind::FreeStreamingSecondOrder),
        other => Err(Failure::Usage(format!(
            "unknown preset `{other}` (one of: diffusion, reaction, free_streaming, \
             free_streaming_2nd)"
        ))),
    }
}

fn cmd_sweep(cli: &Cli, preset: Option<&str>) -> Result<(), Failure> {
    let (problem, epsilons, manifest_sc) = match preset {
        Some(name) => {
            let kind = parse_preset(name)?;
            (
                default_sweep_problem(kind)?,
                vec![0.2, 0.1, 0.05, 0.025],
                None,
            )
        }
        None => {
            let sc = load_scenario(cli)?;
            let Some(spec) = sc.sweep.clone() else {
                return Err(Failure::Usage(
                    "scenario has no sweep block (sweep.kind, sweep.epsilons, sweep.t_end)"
                        .into(),
                ));
            };
            require_unscaled(&sc, "epsilon-sweep")?;
            if sc.grid().n_r() % 2 != 0 {
                return Err(Failure::Usage(format!(
                    "the half-resolution check needs an even grid.n_r, got {}",
                    sc.grid().n_r()
                )));
            }
            let problem = SweepProblem {
                kind: spec.kind,
                model: sc.model().clone(),
                grid: sc.grid().clone(),
                t_end: spec.t_end,
            };
            (problem, spec.epsilons, Some(sc))
        }
    };

    let report = epsilon_sweep(&problem, &epsilons)?;
    write_out(cli, "sweep.csv", &sweep_csv(&report))?;
    match &manifest_sc {
        Some(sc) => write_manifest(cli, sc, "epsilon-sweep")?,
        None => {
            let text = format!(
                "# nutrans {}\n# command: epsilon-sweep --preset {}\n",
                env!("CARGO_PKG_VERSION"),
                report.kind.label()
            );
            write_out(cli, "manifest.txt", &text)?;
        }
    }
    println!(
        "sweep {}: slope = {:.3} (half-grid {:.3}), floor estimate = {:.3e}, \
         resolution consistent = {}",
        report.kind.label(),
        report.slope,
        report.slope_half,
        report.floor_estimate,
        report.resolution_consistent
    );
    Ok(())
}
