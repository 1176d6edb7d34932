//! Eigenvalues and projector kernels of a cycle recovered from heat data
//! seen only on four consecutive vertices.

use fraclab::recovery::{pencil_eigenvalues, recover_projectors, sample_traces};
use fraclab::sources::SourceSpace;
use fraclab::{DiscreteManifold, Region, SpectralManifold};

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::cycle(12)?;
    let o = Region::range(&m, 0, 4)?;
    let sm = SpectralManifold::new(m.clone())?;
    let traces = sample_traces(&sm, &o, &SourceSpace::d0(&m, &o), 0.1, 0.1, 61)?;
    let pencil = pencil_eigenvalues(&traces, 7)?;
    let rec = recover_projectors(&traces, &pencil.lambdas)?;
    println!("fit residual {:.2e}, Vandermonde condition {:.2e}", rec.fit_residual, rec.condition);
    for (k, mode) in rec.modes.iter().enumerate() {
        let exact = 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / 6.0).cos();
        println!("lambda_hat {:.10} (exact {exact:.10}) multiplicity {}", mode.lambda, mode.multiplicity);
    }
    Ok(())
}
