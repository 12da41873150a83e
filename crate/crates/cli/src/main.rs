use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod table;

#[derive(Parser)]
#[command(
    name = "pedinet",
    version,
    about = "Pedigree cancer-risk simulation, training and evaluation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment configuration (JSON); missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Report wall-clock seconds per stage on stderr.
    #[arg(long, global = true)]
    pub bench: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PerturbMode {
    Misreport,
    Drop,
    Blank,
    Impute,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NetKind {
    Fcnn,
    Cnn,
    Logistic,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort; writes families and outcomes.
    Simulate {
        #[arg(long)]
        n: usize,
        /// Pedigree file format.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Apply misreporting, relative dropping, onset blanking or imputation.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: PerturbMode,
        /// Fraction of relatives (drop) or onset ages (blank) affected.
        #[arg(long, default_value_t = 0.0)]
        fraction: f64,
        /// Drop only unaffected relatives.
        #[arg(long)]
        unaffected_only: bool,
    },
    /// Standardize families onto a reference structure and flatten them.
    Encode {
        #[arg(long)]
        input: PathBuf,
        /// Preset name or reference JSON file; defaults to the config's.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Random hyperparameter search.
    Tune {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, value_enum)]
        model: NetKind,
        #[arg(long, default_value_t = 20)]
        budget: usize,
        /// Search-space JSON; defaults apply to missing fields.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Train a network and write a checkpoint.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, value_enum)]
        model: NetKind,
        /// Architecture JSON (for example the best spec from `tune`).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        reference: Option<String>,
    },
    /// Carrier posteriors and t-year risks.
    Predict {
        #[arg(long)]
        input: PathBuf,
        /// `mendelian` or a checkpoint path.
        #[arg(long, default_value = "mendelian")]
        model: String,
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Metrics, bootstrap comparisons and calibration tables.
    Evaluate {
        #[arg(long)]
        outcomes: PathBuf,
        /// `name=path` prediction files (repeatable).
        #[arg(long = "predictions", required = true)]
        predictions: Vec<String>,
        /// Model whose predictions the others are correlated with.
        #[arg(long)]
        reference_model: Option<String>,
        /// Use Spearman instead of Pearson correlation.
        #[arg(long)]
        spearman: bool,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Full simulation study driven by the configuration.
    Experiment,
    /// Risks for the five fixed scenario families.
    Scenario {
        /// `name=checkpoint` pairs (repeatable); the Mendelian model is always included.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
        #[arg(long)]
        horizon: Option<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let g = &cli.global;
    let result = match cli.command {
        Command::Simulate { n, format } => commands::simulate(g, n, &format),
        Command::Perturb {
            input,
            mode,
            fraction,
            unaffected_only,
        } => commands::perturb(g, &input, mode, fraction, unaffected_only),
        Command::Encode { input, reference } => commands::encode(g, &input, reference.as_deref()),
        Command::Tune {
            input,
            outcomes,
            model,
            budget,
            space,
        } => commands::tune(g, &input, &outcomes, model, budget, space.as_deref()),
        Command::Train {
            input,
            outcomes,
            model,
            spec,
            reference,
        } => commands::train(g, &input, &outcomes, model, spec.as_deref(), reference.as_deref()),
        Command::Predict { input, model, horizon } => commands::predict(g, &input, &model, horizon),
        Command::Evaluate {
            outcomes,
            predictions,
            reference_model,
            spearman,
            bootstrap,
        } => commands::evaluate(
            g,
            &outcomes,
            &predictions,
            reference_model.as_deref(),
            spearman,
            bootstrap,
        ),
        Command::Experiment => commands::experiment(g),
        Command::Scenario { checkpoints, horizon } => commands::scenario(g, &checkpoints, horizon),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .downcast_ref::<pedinet::Error>()
                .is_some_and(pedinet::Error::is_numeric);
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
