use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfal_core::harness::{run_experiment, sweep, ExperimentConfig, FixtureSpec};
use cfal_core::hypothesis::{best_hypothesis, WorldDocument};
use cfal_core::sim::{LinearWorld, LinearWorldConfig};
use cfal_core::verify::{report_table, run_suite};
use cfal_core::CfalError;
use clap::{Args, Parser, Subcommand};

/// Counterfactual active learning experiments.
#[derive(Parser)]
#[command(name = "cfal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (first grid point) and emit its curves.
    Run(ExperimentArgs),
    /// Sweep the configured grid and keep the parameters with the smallest AUC.
    Sweep(ExperimentArgs),
    /// Run property suites and print a result table.
    Verify {
        /// Suite name, or `all`.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe a named fixture (`table1`, `example2`, `consistency`,
    /// `theorem2`, `linear`) or a fixture JSON file.
    World {
        fixture: String,
        /// Print the full world document instead of a summary.
        #[arg(long)]
        dump: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated components to switch off: clipping, regularizer,
    /// debias, mis, dbal.
    #[arg(long, value_delimiter = ',')]
    ablate: Option<Vec<String>>,
}

fn exit_code(e: &CfalError) -> u8 {
    match e {
        CfalError::Config(_) | CfalError::Input(_) => 2,
        CfalError::Runtime(_) | CfalError::Io(_) => 1,
    }
}

fn load_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CfalError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CfalError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(ablate) = &args.ablate {
        config.ablations = ablate.clone();
    }
    if let Some(out) = &args.out {
        config.out = Some(out.display().to_string());
    }
    config.validate().map_err(|e| match e {
        CfalError::Input(m) => CfalError::Config(m),
        other => other,
    })?;
    Ok(config)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, contents: &str) -> Result<(), CfalError> {
    fs::write(path, contents).map_err(|e| CfalError::Io(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn cmd_run(args: &ExperimentArgs) -> Result<(), CfalError> {
    let config = load_config(args)?;
    let out = run_experiment(&config)?;
    match &config.out {
        Some(path) => {
            let path = PathBuf::from(path);
            write(&path, &out.csv)?;
            write(&sibling(&path, ".meta.json"), &pretty(&out.metadata))?;
        }
        None => print!("{}", out.csv),
    }
    Ok(())
}

fn cmd_sweep(args: &ExperimentArgs) -> Result<(), CfalError> {
    let config = load_config(args)?;
    let out = sweep(&config)?;
    match &config.out {
        Some(path) => {
            let path = PathBuf::from(path);
            write(&path, &out.table_csv)?;
            write(&sibling(&path, ".curves.csv"), &out.curves_csv)?;
            write(&sibling(&path, ".meta.json"), &pretty(&out.metadata))?;
        }
        None => print!("{}", out.table_csv),
    }
    eprintln!("selected {} (AUC {})", out.best.label(), out.best_auc);
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64, out: Option<&Path>) -> Result<bool, CfalError> {
    let reports = run_suite(suite, seed)?;
    let table = report_table(&reports);
    match out {
        Some(p) => write(p, &table)?,
        None => print!("{table}"),
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn cmd_world(fixture: &str, dump: bool, seed: u64, out: Option<&Path>) -> Result<(), CfalError> {
    let text = if fixture == "linear" {
        let world = LinearWorld::generate(LinearWorldConfig::default(), seed)?;
        let mut v = serde_json::json!({
            "config": world.config,
            "seed": seed,
            "separator": world.separator,
            "bias": world.bias,
            "holdout": world.holdout.len(),
            "train": world.train.len(),
            "test": world.test.len(),
        });
        if dump {
            v["features"] = serde_json::json!(world.features);
            v["labels"] = serde_json::json!(world.labels);
        }
        pretty(&v)
    } else {
        let spec = if Path::new(fixture).is_file() {
            let raw = fs::read_to_string(fixture)?;
            serde_json::from_str::<FixtureSpec>(&raw)?
        } else {
            FixtureSpec::by_name(fixture)?
        };
        let (world, class) = spec.build().map_err(|e| match e {
            CfalError::Input(m) => CfalError::Config(m),
            other => other,
        })?;
        if dump {
            WorldDocument::new(&world, &class).to_json() + "\n"
        } else {
            let (best, err) = best_hypothesis(&world, &class)?;
            pretty(&serde_json::json!({
                "fixture": spec,
                "instances": world.len(),
                "hypotheses": class.len(),
                "best_hypothesis": best,
                "best_error": err,
                "min_q0": world.min_q0(),
            }))
        }
    };
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Verify { suite, seed, out } => cmd_verify(suite, *seed, out.as_deref()),
        Command::World { fixture, dump, seed, out } => cmd_world(fixture, *dump, *seed, out.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cfal: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
