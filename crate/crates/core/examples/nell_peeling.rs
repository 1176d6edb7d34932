//! Sources orthogonal to the low modes of both manifolds, and the factor by
//! factor peeling of the operator that produces them.

use fraclab::sources::{peel_t_ell, SourceSpace};
use fraclab::{DiscreteManifold, ManifoldPair, PatchIsometry, Region, SpectralManifold};
use nalgebra::DVector;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::flat_torus(12, 12, 1.0, 1.0)?;
    let r = Region::grid_box(&m, 0, 0, 11, 11)?;
    let perm: Vec<usize> = (0..m.n()).rev().collect();
    let other = m.relabel(&perm)?;
    let patch = PatchIsometry::relabeled(&m, &r, &other, &perm)?;
    let pair = ManifoldPair::new(SpectralManifold::new(m)?, SpectralManifold::new(other)?, patch)?;

    let ell = 1;
    let space = SourceSpace::nell(&pair, ell)?;
    println!("source space dimension {}, independence {:.2e}", space.dim(), space.independence());
    let support = pair.patch.interior(2 * (ell + 1));
    let mut f = DVector::zeros(pair.patch_len());
    for (j, &i) in support.iter().enumerate() {
        f[i] = ((j * 37) % 11) as f64 / 11.0 - 0.5;
    }
    let peel = peel_t_ell(&pair, ell, &f, &[0.1, 0.5, 1.0])?;
    println!("membership {:.2e}", peel.membership);
    for s in &peel.steps {
        println!("{} factors left: heat {:.2e}, integral {:.2e}", s.remaining, s.heat_discrepancy, s.integration_residual);
    }
    Ok(())
}
