//! `vvclab`: train, evaluate and inspect delay-adaptive Volt/Var controllers.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vvc_core::bench::{self, ExperimentConfig};
use vvc_core::grid::{import_matpower_tables, ImportOptions, InverterConfig};
use vvc_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vvclab",
    version,
    about = "Delay-adaptive robust Volt/Var control laboratory"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML). Defaults apply to every key left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output (run) directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train one ensemble per delay candidate.
    Train,
    /// Evaluate the trained bank on the test segment.
    Eval,
    /// Exhaustive grid search of the robust problem on a small feeder.
    Bruteforce {
        /// Grid points per inverter (at most 21).
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        /// First decision step, counted from the end of the history window.
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Summarise a finished run directory.
    Report {
        /// Run directory; defaults to the configured output directory.
        run_dir: Option<PathBuf>,
    },
    /// Write the training and test profiles as CSV.
    GenProfiles,
    /// Convert MATPOWER-style bus/branch tables to a case file.
    ImportCase {
        #[arg(long)]
        bus: PathBuf,
        #[arg(long)]
        branch: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        base_mva: f64,
        #[arg(long, default_value = "imported")]
        name: String,
        /// Inverter as `bus,s_mva,p_max_mw,p_min_mw,beta`; repeatable.
        #[arg(long = "pv")]
        pv: Vec<String>,
        /// Region as a comma-separated bus list; repeatable.
        #[arg(long = "region")]
        region: Vec<String>,
        /// Output case file; stdout when absent.
        output: Option<PathBuf>,
    },
    /// Print the resolved configuration.
    ShowConfig,
}

fn resolve(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn numbers<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{what} '{text}': bad number '{t}'")))
        })
        .collect()
}

fn parse_pv(text: &str) -> Result<InverterConfig> {
    let v: Vec<f64> = numbers(text, "--pv")?;
    match v[..] {
        [bus, s_mva, p_max_mw, p_min_mw, beta] if bus >= 1.0 && bus.fract() == 0.0 => {
            Ok(InverterConfig {
                bus: bus as usize,
                s_mva,
                p_max_mw,
                p_min_mw,
                beta,
            })
        }
        _ => Err(Error::Config(format!(
            "--pv '{text}': expected bus,s_mva,p_max_mw,p_min_mw,beta"
        ))),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train => {
            let cfg = resolve(&cli.global)?;
            let bank = bench::cmd_train(&cfg)?;
            for e in &bank {
                println!(
                    "delay {:>2} ({:>6.3} s): {}",
                    e.index,
                    e.delay_s,
                    cfg.out_dir.join(&e.checkpoint).display()
                );
            }
        }
        Command::Eval => {
            let cfg = resolve(&cli.global)?;
            let report = bench::cmd_eval(&cfg)?;
            print!("{}", bench::metrics_table(&report.rows));
            println!("wall clock {:.2} s", report.wall_clock_s);
        }
        Command::Bruteforce {
            resolution,
            offset,
            steps,
        } => {
            let cfg = resolve(&cli.global)?;
            println!("t,value,no_control,ratios");
            for r in bench::cmd_bruteforce(&cfg, resolution, offset, steps)? {
                println!("{},{:.9},{:.9},{}", r.t, r.value, r.no_control, r.ratios);
            }
        }
        Command::Report { run_dir } => {
            let dir = match run_dir {
                Some(d) => d,
                None => resolve(&cli.global)?.out_dir,
            };
            print!("{}", bench::cmd_report(&dir)?.summary);
        }
        Command::GenProfiles => {
            let cfg = resolve(&cli.global)?;
            for p in bench::cmd_gen_profiles(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::ImportCase {
            bus,
            branch,
            base_mva,
            name,
            pv,
            region,
            output,
        } => {
            let options = ImportOptions {
                name,
                v_ref: None,
                inverters: pv.iter().map(|p| parse_pv(p)).collect::<Result<_>>()?,
                regions: region
                    .iter()
                    .map(|r| numbers(r, "--region"))
                    .collect::<Result<_>>()?,
            };
            let text = import_matpower_tables(
                &read_text(&bus)?,
                &read_text(&branch)?,
                base_mva,
                &options,
            )?;
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?,
                None => print!("{text}"),
            }
        }
        Command::ShowConfig => print!("{}", resolve(&cli.global)?.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // messages already embed their causes
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
