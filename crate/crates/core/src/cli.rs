//! Command-line driver. Exit codes: 0 success, 1 configuration or I/O
//! error, 2 non-convergence or a failed check.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::equilibrium::{verify_equilibrium, CERTIFY_REL_TOL};
use crate::error::{Error, Result};
use crate::io::{
    aggregates_table, emit_csv, histogram_table, oracle_check_table, parse_config, plot_directory, poa_table,
    profile_table, read_profile, report_table, robustness_table, valley_table, RunConfig, Scenario, Table,
};
use crate::oracle::{dual_oracle_agreement, DEFAULT_GRID_POINTS};
use crate::robust::RobustnessParams;
use crate::scenarios::{run_perturbation, run_poa, run_valley_filling, solve_sweep, EquilibriumRun};

/// Number of random instances in `oracle-check`.
const ORACLE_CASES: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "srwe",
    version,
    about = "Strategically robust Wardrop equilibria for EV charging games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Robustness radius; repeat for a sweep. Overrides the config.
    #[arg(long = "epsilon", allow_negative_numbers = true)]
    epsilons: Vec<f64>,
    /// Output directory. Overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed. Overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nominal equilibrium of the configured game.
    Wardrop(Common),
    /// Robust equilibrium for each radius.
    Srwe(Common),
    /// Total and EV demand per hour for each radius.
    Valley(Common),
    /// Realised costs under random load bumps.
    Perturb(Common),
    /// Price of anarchy across radii.
    Poa(Common),
    /// Best-response gaps of a stored profile.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Profile CSV written by `srwe` or `wardrop`.
        #[arg(long)]
        profile: PathBuf,
    },
    /// Dual worst-case cost against the grid oracle on random instances.
    OracleCheck(Common),
    /// Renders the CSVs in the output directory as SVG charts.
    Plot(Common),
}

/// Resolved settings of one invocation.
struct Context {
    cfg: RunConfig,
    out: PathBuf,
    svg: bool,
}

impl Context {
    fn load(common: &Common, default_scenario: Scenario) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => parse_config(path)?,
            None => RunConfig::new(default_scenario),
        };
        if !common.epsilons.is_empty() {
            cfg.robustness.epsilons = common.epsilons.clone();
            cfg.poa.epsilons = common.epsilons.clone();
        }
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok(Self {
            cfg,
            out,
            svg: common.format == Format::CsvSvg,
        })
    }

    fn write(&self, table: &Table) -> Result<()> {
        let path = self.out.join(table.schema.file_name());
        emit_csv(table, &table.schema, &path)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.svg {
            for p in plot_directory(&self.out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Ok(())
    }
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    /// Results were produced but something did not converge or certify.
    Failed,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(Status::Ok) => 0,
        Ok(Status::Failed) => 2,
        Err(e @ Error::NonConvergence { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("SRWE_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("thread pool already initialised");
            }
        }
        _ => eprintln!("warning: ignoring SRWE_THREADS={v}"),
    }
}

fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Wardrop(c) => {
            let mut ctx = Context::load(&c, Scenario::EvCharging)?;
            ctx.cfg.robustness.epsilons = vec![0.0];
            equilibria(&ctx)
        }
        Command::Srwe(c) => equilibria(&Context::load(&c, Scenario::EvCharging)?),
        Command::Valley(c) => valley(&Context::load(&c, Scenario::EvCharging)?),
        Command::Perturb(c) => perturb(&Context::load(&c, Scenario::EvCharging)?),
        Command::Poa(c) => poa(&Context::load(&c, Scenario::Poa)?),
        Command::Verify { common, profile } => {
            verify(&Context::load(&common, Scenario::EvCharging)?, &common, &profile)
        }
        Command::OracleCheck(c) => oracle_check(&Context::load(&c, Scenario::EvCharging)?),
        Command::Plot(c) => {
            let ctx = Context::load(&c, Scenario::EvCharging)?;
            let written = plot_directory(&ctx.out)?;
            if written.is_empty() {
                eprintln!("no plottable CSVs in {}", ctx.out.display());
            }
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(Status::Ok)
        }
    }
}

fn log_runs(runs: &[EquilibriumRun]) {
    for r in runs {
        eprintln!(
            "epsilon {}: {} after {} iterations (residual {:.3e}, certified {}, {:.3} s)",
            r.epsilon,
            if r.report.converged {
                "converged"
            } else {
                "NOT converged"
            },
            r.report.iterations,
            r.report.residual,
            r.report.certified,
            r.report.wall_time.as_secs_f64()
        );
    }
}

fn all_good(runs: &[EquilibriumRun]) -> Status {
    if runs.iter().all(|r| r.report.converged && r.report.certified) {
        Status::Ok
    } else {
        Status::Failed
    }
}

fn equilibria(ctx: &Context) -> Result<Status> {
    let game = ctx.cfg.game()?;
    let runs = solve_sweep(
        &game,
        &ctx.cfg.robustness.epsilons,
        ctx.cfg.robustness.order,
        &ctx.cfg.solver,
    )?;
    log_runs(&runs);
    ctx.write(&profile_table(&runs))?;
    ctx.write(&report_table(&runs, &game))?;
    ctx.write(&aggregates_table(&runs))?;
    ctx.finish()?;
    Ok(all_good(&runs))
}

fn valley(ctx: &Context) -> Result<Status> {
    let game = ctx.cfg.game()?;
    let v = run_valley_filling(
        &game,
        &ctx.cfg.robustness.epsilons,
        ctx.cfg.robustness.order,
        &ctx.cfg.solver,
    )?;
    log_runs(&v.runs);
    for eps in &v.failed {
        eprintln!("epsilon {eps}: omitted, solver did not converge");
    }
    ctx.write(&valley_table(&v))?;
    ctx.write(&aggregates_table(&v.runs))?;
    ctx.finish()?;
    Ok(if v.failed.is_empty() {
        Status::Ok
    } else {
        Status::Failed
    })
}

fn perturb(ctx: &Context) -> Result<Status> {
    let game = ctx.cfg.game()?;
    let runs = solve_sweep(
        &game,
        &ctx.cfg.robustness.epsilons,
        ctx.cfg.robustness.order,
        &ctx.cfg.solver,
    )?;
    log_runs(&runs);
    let (good, bad): (Vec<_>, Vec<_>) = runs.into_iter().partition(|r| r.report.converged);
    for r in &bad {
        eprintln!("epsilon {}: omitted, solver did not converge", r.epsilon);
    }
    let study = run_perturbation(&game, &good, &ctx.cfg.perturbation, ctx.cfg.seed)?;
    ctx.write(&robustness_table(&study))?;
    ctx.write(&histogram_table(&study))?;
    ctx.finish()?;
    Ok(if bad.is_empty() { Status::Ok } else { Status::Failed })
}

fn poa(ctx: &Context) -> Result<Status> {
    let points = run_poa(&ctx.cfg.poa, &ctx.cfg.solver)?;
    for p in &points {
        eprintln!("epsilon {}: price of anarchy {:.6}", p.epsilon, p.outcome.poa);
    }
    ctx.write(&poa_table(&points))?;
    ctx.finish()?;
    Ok(Status::Ok)
}

fn verify(ctx: &Context, common: &Common, path: &Path) -> Result<Status> {
    let game = ctx.cfg.game()?;
    let mut entries = read_profile(path)?;
    if !common.epsilons.is_empty() {
        entries.retain(|e| common.epsilons.contains(&e.epsilon));
        if entries.is_empty() {
            return Err(Error::Config(format!(
                "{} holds no profile for the requested epsilon",
                path.display()
            )));
        }
    }
    let mut status = Status::Ok;
    for entry in entries {
        let params = RobustnessParams::new(entry.epsilon, ctx.cfg.robustness.order, game.support)?;
        if entry.actions.len() != game.classes.len() {
            return Err(Error::Schema(format!(
                "profile has {} classes, the game has {}",
                entry.actions.len(),
                game.classes.len()
            )));
        }
        for (c, (x, class)) in entry.actions.iter().zip(&game.classes).enumerate() {
            if !class.space.contains(x, 1e-8) {
                eprintln!("epsilon {}: class {c} action is infeasible", entry.epsilon);
                status = Status::Failed;
            }
        }
        let cert = verify_equilibrium(&entry.actions, &game, &params, CERTIFY_REL_TOL)?;
        for (c, (gap, cost)) in cert.gaps.iter().zip(&cert.costs).enumerate() {
            eprintln!(
                "epsilon {}: class {c} robust cost {cost:.9} gap {gap:.3e}",
                entry.epsilon
            );
        }
        if !cert.certified {
            eprintln!("epsilon {}: NOT an equilibrium", entry.epsilon);
            status = Status::Failed;
        }
    }
    Ok(status)
}

fn oracle_check(ctx: &Context) -> Result<Status> {
    let cases = dual_oracle_agreement(ctx.cfg.seed, ORACLE_CASES, DEFAULT_GRID_POINTS)?;
    let failed = cases.iter().filter(|c| !c.passed()).count();
    eprintln!(
        "oracle check (seed {}): {} of {} instances agree",
        ctx.cfg.seed,
        cases.len() - failed,
        cases.len()
    );
    ctx.write(&oracle_check_table(&cases))?;
    Ok(if failed == 0 { Status::Ok } else { Status::Failed })
}
