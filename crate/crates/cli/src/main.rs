//! `chainbal`: experiment driver for balanced-chain set systems.
//!
//! Exit codes: 0 success, 1 threshold not met, 2 usage or input error,
//! 3 capacity exceeded.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chainbal::config::Config;
use chainbal::Error;

#[derive(Parser, Debug)]
#[command(name = "chainbal", version, about = "Balanced-chain set systems: oracles, builder campaigns and rank checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed; defaults to the config's `master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Named constants profile from the config.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// JSON config file replacing the embedded defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Trial or sample count override.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chain-balance and the average-case fractions of a set system.
    Cbal {
        /// Set-system JSON file.
        system: PathBuf,
        /// Largest ground size for brute force.
        #[arg(long, default_value_t = 20)]
        max_n: usize,
    },
    /// Builder campaign: CSV summary plus JSONL traces.
    Build {
        #[arg(long)]
        n: Option<usize>,
    },
    /// One of the martingale audits.
    Martingale {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Evaluation point for the pgf suite.
        #[arg(long)]
        s: Option<f64>,
        /// Run the excursion suite with a deliberately biased sampler.
        #[arg(long)]
        negative_control: bool,
    },
    /// Full-rank check of the ABP built from a set system.
    Mabp {
        #[arg(long)]
        n: Option<usize>,
        /// Set-system JSON file; defaults to the power set of `[n]`.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Block size for the set-multilinear variant.
        #[arg(long)]
        block_size: Option<usize>,
    },
    /// Random-permutation reduction of an average-case system.
    Reduce {
        system: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long)]
        c: Option<u64>,
    },
    /// Enumerate the composite system for small `n`.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Print derived constants and hypothesis margins.
    CheckConstants {
        /// Largest segment length to check the hypotheses at.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Pgf,
    Mgf,
    Excursion,
    Descent,
    Deviation,
    Supermartingale,
}

/// Failure modes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Threshold(String),
    Usage(String),
    Capacity(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_capacity() {
            Failure::Capacity(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub struct Ctx {
    pub global: Global,
    pub config: Config,
}

impl Ctx {
    pub fn seed(&self) -> u64 {
        self.global.seed.unwrap_or(self.config.master_seed)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.global.out_dir)?;
        let path = self.global.out_dir.join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let ctx = Ctx {
        global: cli.global,
        config,
    };
    match cli.command {
        Command::Cbal { system, max_n } => commands::cbal(&ctx, &system, max_n),
        Command::Build { n } => commands::build(&ctx, n),
        Command::Martingale { suite, s, negative_control } => commands::martingale(&ctx, suite, s, negative_control),
        Command::Mabp { n, system, block_size } => commands::mabp(&ctx, n, system.as_deref(), block_size),
        Command::Reduce { system, k, c } => commands::reduce(&ctx, &system, k, c),
        Command::Enumerate { n, cap } => commands::enumerate(&ctx, n, cap),
        Command::CheckConstants { n } => commands::check_constants(&ctx, n),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(m)) => {
            eprintln!("threshold not met: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Capacity(m)) => {
            eprintln!("capacity exceeded: {m}");
            ExitCode::from(3)
        }
    }
}
