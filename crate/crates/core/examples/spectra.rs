//! Eigenvalues of a flat torus, grouped by multiplicity.

use fraclab::spectral::{decompose, group_eigenvalues};
use fraclab::DiscreteManifold;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::flat_torus(8, 6, 1.0, 1.0)?;
    let d = decompose(&m)?;
    println!("{}: {} vertices, eigen residual {:.2e}", m.label(), m.n(), d.residual());
    for g in group_eigenvalues(&d, 1e-8)?.iter().take(8) {
        println!("lambda = {:.10}  multiplicity {}", g.value, g.multiplicity);
    }
    // Closed form: 4 sin²(πj/nx) + 4 sin²(πk/ny).
    let s = |j: usize, n: usize| 4.0 * (std::f64::consts::PI * j as f64 / n as f64).sin().powi(2);
    println!("closed form for (1,0): {:.10}", s(1, 8));
    Ok(())
}
