use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twistlab_cli::commands::{cmd_euler, cmd_polys, cmd_twist_grid, cmd_verify, Outcome};
use twistlab_cli::config::{Command, FileConfig, Overrides, RunConfig};

/// Twists of degree-two L-functions: exact polynomial tables and numerical verification.
///
/// Settings come from `--config` (TOML with the same keys as the flags, `sigma-grid` spelled
/// `sigma_grid`), overridden by flags. Exit status: 0 when every check passes, 1 when some
/// check fails, 2 on configuration or evaluation errors.
#[derive(Debug, Parser)]
#[command(name = "twistlab", version)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Run-configuration TOML file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Working precision in bits (at least 64). Default 128.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// `zeta2`, `zeta`, or a path to a functional-equation datum TOML. Default zeta2.
    #[arg(long, global = true)]
    instance: Option<String>,
    /// Truncation order of the transformation formula (at most 16). Default 8.
    #[arg(long = "K", global = true, value_name = "K")]
    k: Option<usize>,
    /// Largest denominator for the Laurent laws (1..=24). Default 6.
    #[arg(long, global = true)]
    qmax: Option<u64>,
    /// Comma-separated primes. Default 2,3,5.
    #[arg(long, global = true, value_name = "LIST")]
    primes: Option<String>,
    /// Comma-separated abscissae, e.g. `-10,-20` or `5/2,3`.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    sigma_grid: Option<String>,
    /// Comma-separated ordinates.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    t: Option<String>,
    /// Main numerical tolerance. Default 1e-8.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Comma-separated twist parameters a/q.
    #[arg(long, global = true, value_name = "LIST")]
    alphas: Option<String>,
    /// Comma-separated `q:h` pairs for the growth certificate. Default 1:1,3:9.
    #[arg(long, global = true, value_name = "LIST")]
    growth_pairs: Option<String>,
    /// Write the report or table here instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the CSV companion here.
    #[arg(long, global = true, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Exact coefficient table of Q_0..Q_K, R_1..R_K, V_1..V_K with divisibility and degree checks.
    ///
    /// CSV (`--csv`) columns: family (Q, R or V), index, power, re, im. Coefficients are exact
    /// rationals `p/q`; one row per stored power, lowest first.
    Polys,
    /// Run the verification chain on the zeta2 instance.
    ///
    /// Sections, in order: alpha law, beta law, holomorphy of the character twists at s = 1 for
    /// odd primes, transformation-formula consistency for each alpha at K, the alpha = 1
    /// reduction, additive twists from multiplicative ones (exact at p = 2 when 2 is listed,
    /// numerically at sigma = 5/2 and 3 for each prime and t), and growth certificates for each
    /// q:h pair and t over the sigma grid.
    ///
    /// CSV (`--csv`) columns: section, name, reference, measured, target, pass (PASS or FAIL).
    Verify,
    /// Local Euler factors from Laurent data at s = 1 for primes up to 13.
    ///
    /// CSV (`--csv`) columns: section, name, reference, measured, target, pass (PASS or FAIL).
    Euler,
    /// CSV of F(sigma + i t, alpha) for zeta^2 over sigma-grid x t x alphas.
    ///
    /// Columns: sigma, t, alpha (exact rationals as given), re, im (decimal scientific notation
    /// carrying the working precision). Rows are ordered by sigma, then t, then alpha.
    TwistGrid {
        /// `oracle` (Hurwitz zeta, any s) or `direct` (truncated series, sigma > 1).
        #[arg(long)]
        source: Option<String>,
        /// Number of terms for the direct series. Default 100000.
        #[arg(long)]
        terms: Option<usize>,
    },
}

fn run(cli: Cli) -> twistlab::Result<Outcome> {
    let file = match &cli.opts.config {
        Some(p) => FileConfig::from_path(p)?,
        None => FileConfig::default(),
    };
    let o = cli.opts;
    let mut flags = Overrides {
        precision: o.precision,
        instance: o.instance,
        k: o.k,
        qmax: o.qmax,
        primes: o.primes,
        sigma_grid: o.sigma_grid,
        t: o.t,
        tol: o.tol,
        alphas: o.alphas,
        growth_pairs: o.growth_pairs,
        out: o.out,
        csv: o.csv,
        ..Overrides::default()
    };
    let command = match &cli.cmd {
        Cmd::Polys => Command::Polys,
        Cmd::Verify => Command::Verify,
        Cmd::Euler => Command::Euler,
        Cmd::TwistGrid { source, terms } => {
            flags.source = source.clone();
            flags.terms = *terms;
            Command::TwistGrid
        }
    };
    let rc = RunConfig::resolve(command, &file, &flags)?;
    let outcome = match command {
        Command::Polys => cmd_polys(&rc)?,
        Command::Verify => cmd_verify(&rc)?,
        Command::Euler => cmd_euler(&rc)?,
        Command::TwistGrid => cmd_twist_grid(&rc)?,
    };
    let write = |path: &PathBuf, body: &str| {
        std::fs::write(path, body).map_err(|e| twistlab::Error::Config(format!("cannot write {}: {e}", path.display())))
    };
    match &rc.out {
        Some(path) => {
            write(path, &outcome.text)?;
            println!("{}: {}", path.display(), if outcome.pass { "PASS" } else { "FAIL" });
        }
        None => print!("{}", outcome.text),
    }
    if let (Some(path), Some(csv)) = (&rc.csv, &outcome.csv) {
        write(path, csv)?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) if o.pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("twistlab: {e}");
            ExitCode::from(2)
        }
    }
}
