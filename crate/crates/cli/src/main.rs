use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_sense_channel::{run_campaign, Campaign, EnvironmentKind, EnvironmentProfile, SweepConfig};
use ris_sense_core::checkpoint::{load_checkpoint, save_checkpoint};
use ris_sense_core::diagnostics::{run_checks, CheckTarget};
use ris_sense_dataset::{build_recipe, Recipe, Split};
use ris_sense_harness::{evaluate_split, run_grid, train, GridConfig, GridProgress, TrainConfig, DEFAULT_SEED};

type AnyResult<T> = std::result::Result<T, Box<dyn Error>>;

/// Thread count for the worker pool; 0 or unset means one per core.
const THREADS_VAR: &str = "RIS_SENSE_THREADS";

#[derive(Parser)]
#[command(name = "ris-sense", version, about = "LOS/NLOS sensing from RIS channel spectrograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a turntable campaign for one environment.
    Simulate(SimulateArgs),
    /// Dataset operations.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train the cCNN on a dataset manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split of a manifest.
    Eval(EvalArgs),
    /// Run the environment x recipe experiment grid.
    Grid(GridArgs),
    /// Finite-difference gradient checks.
    Gradcheck(GradcheckArgs),
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Build one recipe's images and manifest from a saved campaign.
    Build(BuildArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    env: EnvironmentKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Frequency points per sweep.
    #[arg(long)]
    points: Option<usize>,
    /// Turntable step in degrees.
    #[arg(long)]
    angle_step: Option<f64>,
    /// Also write each sweep as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    recipe: Recipe,
    /// Must match the environment stored in the campaign.
    #[arg(long)]
    env: EnvironmentKind,
    #[arg(long)]
    campaign: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated subset of chamber,meeting,hflab.
    #[arg(long, value_delimiter = ',')]
    envs: Option<Vec<EnvironmentKind>>,
    /// Comma-separated subset of measured,synthetic,mixed_measured,mixed_synthetic.
    #[arg(long, value_delimiter = ',')]
    recipes: Option<Vec<Recipe>>,
    /// Record wall-clock runtime per cell (makes the CSV run-dependent).
    #[arg(long)]
    runtime: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    /// all, conv, bn, relu, pool, linear, softmax or model.
    #[arg(long, default_value = "all")]
    module: CheckTarget,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> AnyResult<()> {
    let n = match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| format!("{THREADS_VAR} must be a non-negative integer, got {v:?}"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> AnyResult<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Dataset { command: DatasetCommand::Build(a) } => build(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Grid(a) => grid(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn simulate(a: SimulateArgs) -> AnyResult<()> {
    println!("seed: {}", a.seed);
    let mut cfg = SweepConfig::default();
    if let Some(n) = a.points {
        cfg.n_points = n;
    }
    if let Some(s) = a.angle_step {
        cfg.angle_step_deg = s;
    }
    let campaign = run_campaign(&EnvironmentProfile::for_kind(a.env), &cfg, a.seed)?;
    campaign.save(&a.out, a.csv)?;
    println!("wrote {} sweeps to {}", campaign.sweeps.len(), a.out.display());
    Ok(())
}

fn build(a: BuildArgs) -> AnyResult<()> {
    println!("seed: {}", a.seed);
    let campaign = Campaign::load(&a.campaign)?;
    let stored = campaign.profile.name;
    if stored != a.env {
        return Err(format!("campaign {} holds environment {stored}, not {}", a.campaign.display(), a.env).into());
    }
    let manifest = build_recipe(a.recipe, &campaign, &a.out, a.seed)?;
    let test = manifest.split(Split::Test).count();
    println!("{} entries ({} train, {} test) in {}", manifest.entries.len(), manifest.entries.len() - test, test, a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> AnyResult<()> {
    println!("seed: {}", a.seed);
    let mut cfg = TrainConfig { seed: a.seed, ..TrainConfig::default() };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.adam.lr = lr;
    }
    let outcome = train(&a.manifest, &cfg, |epoch, loss| println!("epoch {:>3}  loss {loss:.6}", epoch + 1))?;
    let meta = serde_json::json!({
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "lr": cfg.adam.lr,
        "manifest": a.manifest.display().to_string(),
        "loss_curve": outcome.loss_curve,
    });
    save_checkpoint(&outcome.model, &a.out, Some(a.seed), meta)?;
    println!("test accuracy {:.4} on {} images", outcome.report.accuracy, outcome.report.test_n);
    println!("checkpoint: {}", a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> AnyResult<()> {
    let (model, header) = load_checkpoint(&a.model)?;
    if let Some(s) = header.rng_seed {
        println!("seed: {s}");
    }
    let report = evaluate_split(&model, &a.manifest, Split::Test)?;
    println!("accuracy {:.4} on {} images", report.accuracy, report.test_n);
    println!("confusion (rows true los/nlos100/nlos75):");
    for row in report.confusion {
        println!("  {:>4} {:>4} {:>4}", row[0], row[1], row[2]);
    }
    if let Some(path) = a.json {
        write_text(&path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn grid(a: GridArgs) -> AnyResult<()> {
    println!("seed: {}", a.seed);
    let mut cfg = GridConfig { seed: a.seed, record_runtime: a.runtime, ..GridConfig::default() };
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(envs) = a.envs {
        cfg.environments = envs;
    }
    if let Some(recipes) = a.recipes {
        cfg.recipes = recipes;
    }
    let cells = run_grid(&cfg, &a.out, |p| match p {
        GridProgress::CellStart { environment, recipe } => println!("[{recipe} / {environment}]"),
        GridProgress::Epoch { epoch, loss, .. } => println!("  epoch {:>3}  loss {loss:.6}", epoch + 1),
        GridProgress::CellDone(cell) => match (&cell.report, &cell.error) {
            (Some(r), _) => println!("  accuracy {:.4}", r.accuracy),
            (None, Some(e)) => println!("  failed: {e}"),
            (None, None) => {}
        },
    })?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    println!("{} cells ({failed} failed); results in {}", cells.len(), a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> AnyResult<()> {
    let results = run_checks(a.module)?;
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        println!("{:<10} max rel error {:.3e} (tol {:.0e})  {verdict}", r.name, r.max_rel_error, r.tolerance);
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(format!("{failed} gradient check(s) failed").into());
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> AnyResult<()> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}
