use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zcrit::config::{ExperimentConfig, Verb};
use zcrit::experiment::run;
use zcrit::report::{golden_compare, Report};
use zcrit::Error;

/// Bergman kernels, Toeplitz operators and Z-critical densities on explicit
/// Kähler manifolds.
#[derive(Parser)]
#[command(name = "zcrit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment config; verb defaults are used when omitted.
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Compare the report against this golden file.
    #[arg(long)]
    golden: Option<PathBuf>,
    /// Write the report to the golden file instead of comparing.
    #[arg(long, requires = "golden")]
    update_golden: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature tensors, Ricci, scalar curvature and ΔS at every node.
    Curvature(RunArgs),
    /// Z̃_j densities and their integral against the Chern-number table.
    Zcritical(RunArgs),
    /// Gram matrices and Bergman densities.
    Bergman(RunArgs),
    /// Kostant–Souriau operators against Toeplitz operators.
    Tuynman(RunArgs),
    /// First variation of log det Gram.
    Variation(RunArgs),
    /// Pointwise fits of the Bergman density expansion.
    TyzFit(RunArgs),
    /// Gradient flow toward constant Z̃_j.
    Flow(RunArgs),
    /// Prints the checks of saved reports.
    Report { reports: Vec<PathBuf> },
    /// Compares a saved report against a golden file.
    Golden {
        report: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        update_golden: bool,
    },
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    eprintln!("zcrit: {e}");
    match e {
        Error::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_FAILED),
    }
}

fn configure_workers() -> Result<(), Error> {
    if let Ok(v) = std::env::var("ZCRIT_WORKERS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("ZCRIT_WORKERS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn golden_step(report: &Report, golden: &PathBuf, update: bool) -> Result<bool, Error> {
    if update {
        std::fs::write(golden, report.to_json_string())
            .map_err(|e| Error::Io(format!("{}: {e}", golden.display())))?;
        println!("golden file {} written", golden.display());
        return Ok(true);
    }
    let diff = golden_compare(report, golden)?;
    if diff.is_empty() {
        println!("golden {}: match", golden.display());
        Ok(true)
    } else {
        println!("golden {}: {} drifting field(s)", golden.display(), diff.len());
        for line in diff {
            println!("  {line}");
        }
        Ok(false)
    }
}

fn run_verb(verb: Verb, args: RunArgs) -> Result<bool, Error> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    match config.verb {
        Some(v) if v != verb => {
            return Err(Error::Config(format!(
                "config is for verb '{}' but '{}' was requested",
                v.name(),
                verb.name()
            )))
        }
        _ => config.verb = Some(verb),
    }
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    if let Some(o) = &args.out {
        config.out = Some(o.clone());
    }
    config.fill_defaults();
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("zcrit-out").join(verb.name()));
    let output = run(&config)?;
    output.write(&out_dir)?;
    print!("{}", output.report.summary());
    println!("outputs in {}", out_dir.display());
    let mut ok = output.report.passed();
    if let Some(g) = &args.golden {
        ok &= golden_step(&output.report, g, args.update_golden)?;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        return fail(&e);
    }
    let result = match cli.command {
        Command::Curvature(a) => run_verb(Verb::Curvature, a),
        Command::Zcritical(a) => run_verb(Verb::Zcritical, a),
        Command::Bergman(a) => run_verb(Verb::Bergman, a),
        Command::Tuynman(a) => run_verb(Verb::Tuynman, a),
        Command::Variation(a) => run_verb(Verb::Variation, a),
        Command::TyzFit(a) => run_verb(Verb::TyzFit, a),
        Command::Flow(a) => run_verb(Verb::Flow, a),
        Command::Report { reports } => reports.iter().try_fold(true, |ok, p| {
            let r = Report::load(p)?;
            print!("{}", r.summary());
            Ok(ok && r.passed())
        }),
        Command::Golden {
            report,
            golden,
            update_golden,
        } => Report::load(&report).and_then(|r| golden_step(&r, &golden, update_golden)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => fail(&e),
    }
}
