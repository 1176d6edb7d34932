//! Wave equation driven by a smooth point source: Duhamel's formula against
//! an RK4 integration of the same system.

use fraclab::spectral::decompose;
use fraclab::wave::{duhamel_solve, ode_oracle, TimeProfile, WaveSource};
use fraclab::DiscreteManifold;
use nalgebra::DVector;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::cycle(40)?;
    let d = decompose(&m)?;
    let mut shape = DVector::zeros(m.n());
    shape[0] = 1.0;
    let source = WaveSource { profile: TimeProfile::new(0.5, 2.0, 6.0, 1.0)?, shape };
    let t = 5.0;
    let exact = duhamel_solve(&d, &source, t)?;
    for dt in [0.04, 0.02, 0.01] {
        let ode = ode_oracle(&m, &source, t, dt)?;
        let err = (&ode.u - &exact).norm() / exact.norm();
        println!("dt {dt}: rel error {err:.3e}, energy drift {:.2e}", ode.energy_drift());
    }
    Ok(())
}
