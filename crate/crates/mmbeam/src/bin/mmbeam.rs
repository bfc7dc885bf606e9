use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmbeam::config::{ExperimentConfig, Method, Scoring, SnrGrid};
use mmbeam::harness::{format_summary, run_experiment, summarize};
use mmbeam::io;
use mmbeam::probe::{format_probe, run_probe, summarize_probe};
use mmbeam::{HarnessError, Result};
use mmbeam_core::beamsel::Lemma1Config;

#[derive(Parser)]
#[command(name = "mmbeam", version, about = "Hybrid beam search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of the search methods over an SNR sweep.
    Run {
        /// TOML experiment config; defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<usize>>,
        /// `min:max:step` in dB, or a single value.
        #[arg(long)]
        snr: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        scoring: Option<Scoring>,
        /// Print the summary table to stdout.
        #[arg(long)]
        summary: bool,
    },
    /// Summary table and SNR gaps for a results CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Effective power of exact-AoA beams on random three-ray channels.
    ProbeLemma1 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [16, 64, 256])]
        sizes: Vec<usize>,
    },
    /// Write the default config as TOML.
    DefaultConfig {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            methods,
            p,
            snr,
            trials,
            scoring,
            summary,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(p) = p {
                cfg.p_values = p;
            }
            if let Some(s) = snr {
                cfg.snr = SnrGrid::parse(&s).ok_or_else(|| HarnessError::Config(format!("bad --snr `{s}`")))?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = scoring {
                cfg.scoring = s;
            }
            let rows = run_experiment(&cfg)?;
            io::write_csv(&rows, &out)?;
            if summary {
                print!("{}", format_summary(&summarize(&rows)?));
            }
        }
        Command::Summarize { input } => {
            let rows = io::read_results(&input)?;
            print!("{}", format_summary(&summarize(&rows)?));
        }
        Command::ProbeLemma1 {
            out,
            draws,
            seed,
            sizes,
        } => {
            let cfg = Lemma1Config {
                sizes,
                ..Lemma1Config::default()
            };
            let res = run_probe(seed, draws, &cfg)?;
            io::write_file(&out, &format_probe(&res))?;
            let s = summarize_probe(&res);
            for ((a, b), g) in s.min_growth {
                println!("N {a} -> {b}: minimum dominance growth x{g:.2}");
            }
            for (n, r) in s.ordering_rate {
                println!("N {n}: AoA power ordering matched in {:.0}% of draws", 100.0 * r);
            }
        }
        Command::DefaultConfig { out } => {
            io::write_file(&out, &ExperimentConfig::default().to_toml())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mmbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
