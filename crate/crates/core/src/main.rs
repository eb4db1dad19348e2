use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smece::binning::{Binning, ReliabilityTarget, UpperEdge, DEFAULT_NUM_BINS};
use smece::experiments::{ExperimentConfig, Parallelism, DEFAULT_MASTER_SEED};
use smece::generative::HardMode;
use smece::io::{self, Format, SampleColumns};
use smece::{Error, Result};

#[derive(Parser)]
#[command(
    name = "smece",
    version,
    about = "Soft-label calibration metrics and simulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute SMECE, ECE and Brier scores for a sample file.
    Metrics {
        input: PathBuf,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a simulated dataset with predictions from all five models.
    Simulate {
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value = "threshold")]
        hard_mode: HardMode,
        #[arg(long, env = "SMECE_SEED", default_value_t = DEFAULT_MASTER_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiment 1, 2, 3, 4 or `all` and write its tables and a manifest.
    Experiment(ExperimentArgs),
    /// Re-run the experiments recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Emit reliability-diagram points (mean prediction, mean target, weight).
    Reliability {
        input: PathBuf,
        #[command(flatten)]
        bins: BinArgs,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long, default_value = "soft")]
        target: ReliabilityTarget,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BinArgs {
    #[arg(long, default_value_t = DEFAULT_NUM_BINS)]
    bins: usize,
    /// `closed` puts predictions of exactly 1.0 in the last bin; `open` leaves them unbinned.
    #[arg(long, default_value = "closed")]
    upper_edge: UpperEdge,
}

impl BinArgs {
    fn binning(&self) -> Result<Binning> {
        Ok(Binning::new(self.bins)?.with_upper_edge(self.upper_edge))
    }
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value = "prediction")]
    prediction_column: String,
    #[arg(long, default_value = "soft_label")]
    soft_column: String,
    #[arg(long, default_value = "hard_label")]
    hard_column: String,
}

impl From<&ColumnArgs> for SampleColumns {
    fn from(c: &ColumnArgs) -> Self {
        SampleColumns {
            prediction: c.prediction_column.clone(),
            soft_label: c.soft_column.clone(),
            hard_label: c.hard_column.clone(),
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// 1, 2, 3, 4 or `all`.
    id: String,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    hard_mode: Option<HardMode>,
    #[arg(long)]
    upper_edge: Option<UpperEdge>,
    #[arg(long, env = "SMECE_SEED", default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        let ids: Vec<u8> = match self.id.as_str() {
            "all" => vec![1, 2, 3, 4],
            s => vec![s.parse().map_err(|_| {
                Error::Config(format!("experiment id must be 1..=4 or `all`, got `{s}`"))
            })?],
        };
        ids.into_iter()
            .map(|id| {
                let mut c = ExperimentConfig::standard(id)?.with_seed(self.seed);
                if let Some(k) = &self.k {
                    c.k_values = k.clone();
                }
                if let Some(n) = &self.n {
                    c.n_values = n.clone();
                }
                if let Some(reps) = self.reps {
                    c.replications = reps;
                }
                if let Some(bins) = self.bins {
                    c.num_bins = bins;
                }
                if let Some(mode) = self.hard_mode {
                    c.hard_mode = mode;
                }
                if let Some(edge) = self.upper_edge {
                    c.upper_edge = edge;
                }
                c.validate()?;
                Ok(c)
            })
            .collect()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metrics {
            input,
            bins,
            columns,
            format,
            out,
        } => {
            let (_, text) = io::cmd_metrics(&input, &(&columns).into(), &bins.binning()?, format)?;
            io::emit(out.as_deref(), &text)
        }
        Command::Simulate {
            k,
            n,
            hard_mode,
            seed,
            out,
        } => io::cmd_simulate(k, n, hard_mode, seed, out.as_deref()).map(|_| ()),
        Command::Experiment(args) => {
            let configs = args.configs()?;
            let parallelism = Parallelism {
                threads: args.threads,
            };
            let manifest = io::cmd_experiment(&configs, args.format, &args.out, &parallelism)?;
            for file in &manifest.outputs {
                println!("{}", args.out.join(file).display());
            }
            Ok(())
        }
        Command::Replay {
            manifest,
            out,
            threads,
        } => {
            let m = io::cmd_replay(&manifest, &out, &Parallelism { threads })?;
            for file in &m.outputs {
                println!("{}", out.join(file).display());
            }
            Ok(())
        }
        Command::Reliability {
            input,
            bins,
            columns,
            target,
            out,
        } => {
            let (_, text) =
                io::cmd_reliability(&input, &(&columns).into(), &bins.binning()?, target)?;
            io::emit(out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
