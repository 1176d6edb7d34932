//! `A^{-α} f` two ways: from the spectrum and from a heat-semigroup
//! quadrature that never looks at eigenvectors.

use fraclab::fractional::{frac_inverse_quadrature, frac_inverse_spectral, heat_apply, FracParams};
use fraclab::spectral::decompose;
use fraclab::DiscreteManifold;
use nalgebra::DVector;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::flat_torus(10, 10, 1.0, 1.0)?;
    let d = decompose(&m)?;
    // Point source minus its mean, so it sits outside the kernel.
    let mut f = DVector::from_element(m.n(), -1.0 / m.n() as f64);
    f[0] += 1.0;
    for alpha in [0.25, 0.5, 0.75] {
        let p = FracParams::new(alpha, d.smallest_positive(), 1e-12)?;
        let spectral = frac_inverse_spectral(&d, &p, &f)?;
        let (quad, refined) = frac_inverse_quadrature(|t| heat_apply(&d, t, &f).unwrap(), &p, &f)?;
        let rel = (&spectral - &quad).norm() / spectral.norm();
        println!("alpha {alpha}: rel diff {rel:.2e}, step {:.3e}", refined.step());
    }
    Ok(())
}
