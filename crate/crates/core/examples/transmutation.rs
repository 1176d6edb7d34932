//! The heat semigroup assembled from wave propagators by a Gaussian-weighted
//! time integral.

use fraclab::fractional::heat_apply;
use fraclab::spectral::decompose;
use fraclab::wave::{transmute_heat, transmute_scalar, TransmuteParams};
use fraclab::DiscreteManifold;
use nalgebra::DVector;

fn main() -> fraclab::Result<()> {
    let params = TransmuteParams::default();
    for (lambda, t) in [(0.0, 1.0), (0.5, 0.3), (2.0, 1.5)] {
        let v = transmute_scalar(lambda, t, &params)?;
        println!("lambda {lambda}, t {t}: {v:.12} vs {:.12}", (-lambda * t).exp());
    }
    let m = DiscreteManifold::flat_torus(6, 6, 1.0, 1.0)?;
    let d = decompose(&m)?;
    let f = DVector::from_fn(m.n(), |i, _| ((i * 7) % 5) as f64 - 2.0);
    let t = 0.7;
    let via_waves = transmute_heat(&d, t, &f, &params)?;
    let direct = heat_apply(&d, t, &f)?;
    println!("operator rel diff {:.2e}", (&via_waves - &direct).norm() / direct.norm());
    Ok(())
}
