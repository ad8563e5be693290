use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use congestion_core::learning::{discount_diagnostic, DiscountSequence};
use congestion_core::potential::{check_kkt, solve_nash_with, FrankWolfeVariant, SolverOptions};
use congestion_core::replicator::{integrate, StepControl};
use congestion_core::{EquilibriumResult, SolveError};
use congestion_sim::config::parse_blocks;
use congestion_sim::diagnostics::density_above;
use congestion_sim::export::{format_float, write_csv, write_run};
use congestion_sim::sampling::finite_sample_experiment;
use congestion_sim::spec::EXAMPLE_NETWORK;
use congestion_sim::{load_game, run_simulation, Algorithm, InitialDistribution, SimulationConfig};
use serde::Serialize;
use serde_json::json;

/// Congestion games: equilibria, learning dynamics and replicator flows.
#[derive(Parser)]
#[command(name = "congestion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Nash equilibrium and its KKT certificate (JSON on stdout).
    Solve(SolveArgs),
    /// Run population-level learning dynamics.
    Simulate(SimulateArgs),
    /// Integrate the replicator ODE.
    Ode(OdeArgs),
    /// Finite-population sampling variance experiment.
    Sample(SampleArgs),
    /// Partial sums of a discount sequence.
    Diag(DiagArgs),
}

#[derive(Args)]
struct GameArg {
    /// Built-in game name or path to a JSON game spec.
    #[arg(long, default_value = EXAMPLE_NETWORK)]
    game: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Pairwise,
    Vanilla,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    game: GameArg,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value = "pairwise")]
    variant: Variant,
    /// Use the open-loop 2/(t+2) step instead of exact line search.
    #[arg(long)]
    no_line_search: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArg,
    /// hedge, rep or mw-custom.
    #[arg(long, default_value = "hedge")]
    algorithm: Algorithm,
    /// Discount rule: `a/b` for a/(b+τ), `pow:p` or `pow:p:scale`.
    #[arg(long, default_value = "20/10")]
    rate: DiscountSequence,
    /// Learning rates decoupled from the discounts (exploration only;
    /// disables the regret bounds).
    #[arg(long)]
    learning_rate: Option<DiscountSequence>,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform, random, or explicit blocks such as `0.2,0.3,0.5;1,0,0`.
    #[arg(long, default_value = "uniform")]
    init: InitialDistribution,
    /// Output directory; the CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radius for the density of distant iterates.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Also write SVG plots into the output directory.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct OdeArgs {
    #[command(flatten)]
    game: GameArg,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Largest change of any coordinate in one RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    max_drift: f64,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    /// uniform, random, or explicit interior blocks.
    #[arg(long, default_value = "uniform")]
    init: InitialDistribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Strategies as blocks, e.g. `0.2,0.8;0.5,0.5`.
    #[arg(long)]
    pi: String,
    /// Comma-separated population sizes.
    #[arg(long, value_delimiter = ',', default_value = "10,40,160")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DiagArgs {
    #[arg(long, default_value = "20/10")]
    rate: DiscountSequence,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    /// Print every n-th row (the last row is always printed).
    #[arg(long, default_value_t = 1)]
    every: usize,
}

/// Marks failures that map to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("solver did not converge: nash gap {gap:e} after {iterations} iterations")]
struct ConvergenceFailure {
    gap: f64,
    iterations: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConvergenceFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// A closed downstream pipe (`congestion simulate | head`) is not a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    e.chain().any(|c| {
        if let Some(io) = c.downcast_ref::<std::io::Error>() {
            return io.kind() == BrokenPipe;
        }
        if let Some(json) = c.downcast_ref::<serde_json::Error>() {
            return json.io_error_kind() == Some(BrokenPipe);
        }
        matches!(
            c.downcast_ref::<csv::Error>().map(|e| e.kind()),
            Some(csv::ErrorKind::Io(io)) if io.kind() == BrokenPipe
        )
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => simulate(args),
        Command::Ode(args) => ode(args),
        Command::Sample(args) => sample(args),
        Command::Diag(args) => diag(args),
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let game = load_game(&args.game.game)?;
    let options = SolverOptions {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        variant: match args.variant {
            Variant::Pairwise => FrankWolfeVariant::Pairwise,
            Variant::Vanilla => FrankWolfeVariant::Vanilla,
        },
        line_search: !args.no_line_search,
    };
    let (result, converged): (EquilibriumResult, bool) =
        match solve_nash_with(&game.model, &options, None) {
            Ok(r) => (r, true),
            Err(SolveError::NotConverged { best }) => (*best, false),
            Err(SolveError::Invalid(e)) => return Err(e.into()),
        };
    let kkt = check_kkt(&game.model, &result.mu_star, 10.0 * args.tolerance)?;
    let violations: Vec<_> = kkt
        .violations
        .iter()
        .map(|v| json!({"population": v.population, "bundle": v.bundle, "kind": format!("{:?}", v.kind), "value": v.value}))
        .collect();
    let report = json!({
        "game": game.name,
        "converged": converged,
        "iterations": result.iterations,
        "bundle_labels": game.bundle_labels,
        "mu_star": result.mu_star.blocks(),
        "bundle_losses": result.bundle_losses,
        "potential": result.potential_value,
        "nash_gap": result.nash_gap,
        "kkt": {
            "tolerance": 10.0 * args.tolerance,
            "accepted": kkt.is_accepted(),
            "min_slack": kkt.min_slack,
            "max_complementarity": kkt.max_complementarity,
            "resource_prices": kkt.certificate.resource_prices,
            "multipliers": kkt.certificate.multipliers,
            "violations": violations,
        },
    });
    print_json(&report)?;
    if !converged {
        return Err(ConvergenceFailure {
            gap: result.nash_gap,
            iterations: result.iterations,
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    horizon: usize,
    final_nash_gap: f64,
    final_distance_to_reference: f64,
    final_cesaro_potential_gap: f64,
    final_density_above_epsilon: f64,
    epsilon: f64,
    final_regret: Vec<f64>,
    regret_bound_violations: Option<usize>,
    files: Vec<PathBuf>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = SimulationConfig {
        game: args.game.game,
        algorithm: args.algorithm,
        discounts: args.rate,
        learning_rates: args.learning_rate,
        horizon: args.horizon,
        init: args.init,
        seed: args.seed,
        out: args.out,
        density_epsilon: args.epsilon,
        write_svg: args.svg,
    };
    let game = load_game(&config.game)?;
    let sim = run_simulation(&game, &config)?;
    let Some(dir) = &config.out else {
        if config.write_svg {
            bail!("--svg needs --out");
        }
        let stdout = std::io::stdout();
        write_csv(&sim.records, stdout.lock()).context("writing CSV to stdout")?;
        return Ok(());
    };
    let files = write_run(&sim, dir, config.write_svg)?;
    let last = sim.last();
    let density = density_above(&sim.records, config.density_epsilon, &sim.reference.mu_star)?;
    let violations = sim.bounds.as_ref().map(|bounds| {
        sim.records
            .iter()
            .zip(bounds)
            .flat_map(|(r, b)| r.regret.iter().zip(b).filter(|(x, y)| x.max(0.0) > **y))
            .count()
    });
    let summary = SimulationSummary {
        horizon: config.horizon,
        final_nash_gap: last.nash_gap,
        final_distance_to_reference: sim
            .final_distribution()
            .linf_distance(&sim.reference.mu_star),
        final_cesaro_potential_gap: last.cesaro_potential - sim.reference.potential_value,
        final_density_above_epsilon: *density.last().expect("non-empty"),
        epsilon: config.density_epsilon,
        final_regret: last.regret.clone(),
        regret_bound_violations: violations,
        files,
    };
    print_json(&summary)?;
    Ok(())
}

fn ode(args: OdeArgs) -> Result<()> {
    let game = load_game(&args.game.game)?;
    let mu0 = args.init.resolve(&game.model, args.seed)?;
    if args.record_every == 0 {
        bail!("--record-every must be at least 1");
    }
    let control = StepControl::with_max_drift(args.max_drift).record_every(args.record_every);
    let traj = integrate(&game.model, &mu0, args.t_end, control)?;
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(&mut sink);
    w.write_record(["t", "pop", "bundle", "mu", "potential", "lyapunov"])?;
    for (i, state) in traj.states.iter().enumerate() {
        for (k, block) in state.blocks().iter().enumerate() {
            for (p, x) in block.iter().enumerate() {
                w.write_record([
                    format_float(traj.times[i]),
                    k.to_string(),
                    p.to_string(),
                    format_float(*x),
                    format_float(traj.potentials[i]),
                    format_float(traj.lyapunov[i]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let pi = parse_blocks(&args.pi)?;
    let rows = finite_sample_experiment(&pi, &args.sizes, args.trials, args.seed)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["n", "pop", "bundle", "variance"])?;
    for row in rows {
        for (k, v) in row.variance.iter().enumerate() {
            for (p, x) in v.iter().enumerate() {
                w.write_record([
                    row.sample_size.to_string(),
                    k.to_string(),
                    p.to_string(),
                    format_float(*x),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn diag(args: DiagArgs) -> Result<()> {
    if args.every == 0 {
        bail!("--every must be at least 1");
    }
    let rows = discount_diagnostic(&args.rate, args.horizon)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["t", "sum", "sum_sq", "ratio"])?;
    for row in &rows {
        if row.t % args.every == 0 || row.t == args.horizon {
            w.write_record([
                row.t.to_string(),
                format_float(row.sum),
                format_float(row.sum_sq),
                format_float(row.ratio),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
