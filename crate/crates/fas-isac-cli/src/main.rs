//! Command-line front end for the secure ISAC / fluid-antenna Monte Carlo
//! harness.
//!
//! Exit codes: 0 on success, 2 on configuration/usage errors (bad scenario
//! name, malformed profile or `--set`, unwritable output), 3 when every trial
//! of a requested solver scheme is infeasible at some grid point.
//!
//! Worker-thread count is taken from the `FAS_ISAC_WORKERS` environment
//! variable (0 or unset = library default pool). Results are byte-identical
//! for a fixed seed regardless of worker count, unless `--timing` is enabled.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fas_isac::error::Error;
use fas_isac::experiments::{
    apply_config_text, apply_kv, run_beampattern, run_sweep, write_csv, write_json,
    write_pattern_csv, ResultRow, ScenarioConfig, Scheme, Sweep,
};

#[derive(Parser)]
#[command(
    name = "fas-isac",
    version,
    about = "Seeded Monte Carlo simulator for secure ISAC with fluid-antenna port selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one sweep scenario and write aggregated results to CSV or JSON.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Sweep to run: snr|area|zeta|ports|users|convergence|beampattern.
    #[arg(long)]
    scenario: String,

    /// `paper-default` for the built-in defaults, otherwise a path to a
    /// key=value profile file (# comments allowed).
    #[arg(long, default_value = "paper-default")]
    profile: String,

    /// Ad-hoc override applied after the profile, e.g. --set snr_db=0,10,20.
    /// Repeatable; later flags win.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Monte Carlo trials per grid point (overrides profile).
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed for the deterministic per-trial PRNG streams.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file. Beampattern runs also write `<stem>_pattern.<ext>`.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,

    /// Write JSON arrays instead of CSV.
    #[arg(long)]
    json: bool,

    /// Also run the exhaustive port-selection oracle as an extra scheme
    /// (refused when the subset count exceeds the safety guard).
    #[arg(long)]
    oracle: bool,

    /// Record mean wall-clock milliseconds per solve in `mean_ms`.
    /// This is the one option that breaks byte-for-byte output determinism.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Simulate(args) = cli.command;
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fas-isac: {err}");
            match err {
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(args: &SimulateArgs) -> Result<(), Error> {
    let sweep = Sweep::parse(&args.scenario)?;

    let mut cfg = ScenarioConfig::paper_default();
    cfg.apply_scenario_defaults(sweep);

    if args.profile != "paper-default" {
        let text = std::fs::read_to_string(&args.profile).map_err(|e| {
            Error::InvalidParameter(format!("profile `{}`: {e}", args.profile))
        })?;
        apply_config_text(&mut cfg, &text)?;
    }
    for kv in &args.set {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("--set `{kv}` is not of the form key=value"))
        })?;
        apply_kv(&mut cfg, key.trim(), value.trim(), 0)?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.timing {
        cfg.timing = true;
    }
    if args.oracle && !cfg.schemes.contains(&Scheme::Exhaustive) {
        cfg.schemes.push(Scheme::Exhaustive);
    }

    let workers = match std::env::var("FAS_ISAC_WORKERS") {
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            Error::InvalidParameter(format!("FAS_ISAC_WORKERS `{s}` is not a nonnegative integer"))
        })?,
        Err(_) => 0,
    };

    if sweep == Sweep::Beampattern {
        let (rows, pattern) = run_beampattern(&cfg, workers)?;
        write_rows(&args.out, &rows, args.json)?;
        let companion = companion_path(&args.out, args.json);
        if args.json {
            write_text(&companion, &write_json(&pattern)?)?;
        } else {
            write_text(&companion, &write_pattern_csv(&pattern))?;
        }
        eprintln!(
            "wrote {} result rows to {} and {} pattern rows to {}",
            rows.len(),
            args.out.display(),
            pattern.len(),
            companion.display()
        );
    } else {
        let rows = run_sweep(&cfg, sweep, workers)?;
        write_rows(&args.out, &rows, args.json)?;
        eprintln!("wrote {} result rows to {}", rows.len(), args.out.display());
    }
    Ok(())
}

fn write_rows(path: &Path, rows: &[ResultRow], json: bool) -> Result<(), Error> {
    let body = if json { write_json(rows)? } else { write_csv(rows) };
    write_text(path, &body)
}

fn write_text(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body)
        .map_err(|e| Error::InvalidParameter(format!("cannot write `{}`: {e}", path.display())))
}

/// `results.csv` -> `results_pattern.csv`; extension follows the output mode.
fn companion_path(out: &Path, json: bool) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = if json { "json" } else { "csv" };
    out.with_file_name(format!("{stem}_pattern.{ext}"))
}
