//! Runs every harness experiment with default settings and prints verdicts.

use fraclab::harness::{run_experiment, ExperimentConfig, EXPERIMENTS};

fn main() -> fraclab::Result<()> {
    let cfg = ExperimentConfig::default();
    for name in EXPERIMENTS {
        let rep = run_experiment(name, &cfg)?;
        for c in &rep.checks {
            println!("{} {}", rep.name, c.line());
        }
    }
    Ok(())
}
