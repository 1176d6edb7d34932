use clap::{Parser, Subcommand};
use fraclab::harness::{run_task, write_reports, ExperimentConfig, Task, CONFIG_KEYS, EXPERIMENTS};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Fractional Laplacians, heat and wave data on discrete manifolds")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and report.csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Verdict tolerance of the primary checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a manifold as a mesh file plus vertex and edge tables.
    Mesh,
    /// Eigenvalues with multiplicities.
    Eigs,
    /// Negative fractional power of a point source, by spectrum and by quadrature.
    Frac,
    /// Heat data restricted to the observation region.
    HeatTrace,
    /// Wave snapshots driven by a smooth point source.
    Wave,
    /// Source-to-solution comparison on a manifold pair.
    S2s,
    /// Eigenvalues and projector kernels from local heat traces.
    Recover,
    /// Spectrum of a manifold with boundary inside that of its double.
    Double,
    /// Run a named experiment, or `all`.
    Exp { name: Option<String> },
    /// List config keys and experiments.
    Keys,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(t) = cli.tol {
        if t.is_nan() || t <= 0.0 {
            eprintln!("error: --tol must be positive");
            return ExitCode::from(2);
        }
        cfg.tol = Some(t);
    }
    let task = match cli.command {
        Command::Mesh => Task::Mesh,
        Command::Eigs => Task::Eigs,
        Command::Frac => Task::Frac,
        Command::HeatTrace => Task::HeatTrace,
        Command::Wave => Task::Wave,
        Command::S2s => Task::S2s,
        Command::Recover => Task::Recover,
        Command::Double => Task::Double,
        Command::Exp { name } => match name.or_else(|| cfg.experiment.clone()) {
            Some(n) => Task::Exp(n),
            None => {
                eprintln!("error: no experiment named; choose one of: all, {}", EXPERIMENTS.join(", "));
                return ExitCode::from(2);
            }
        },
        Command::Keys => {
            for (k, d) in CONFIG_KEYS {
                println!("{k:14} {d}");
            }
            println!("experiments: all, {}", EXPERIMENTS.join(", "));
            return ExitCode::SUCCESS;
        }
    };
    let out = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let reports = match run_task(&task, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_reports(&reports, &out) {
        eprintln!("error: writing {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let mut all = true;
    for r in &reports {
        for c in &r.checks {
            println!("{} {}", r.name, c.line());
        }
        all &= r.passed();
    }
    println!("wrote {}", out.join("report.csv").display());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}
