//! Local source-to-solution data of a relabeled torus agrees with the
//! original; a torus of a different size does not.

use fraclab::fractional::FracParams;
use fraclab::sources::{build_source_space, compare_s2s, SourceKind};
use fraclab::{DiscreteManifold, ManifoldPair, PatchIsometry, Region, SpectralManifold};

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::flat_torus(8, 8, 1.0, 1.0)?;
    let r = Region::grid_box(&m, 0, 0, 4, 4)?;
    let perm: Vec<usize> = (0..m.n()).map(|i| (i * 29 + 3) % m.n()).collect();
    let relabeled = m.relabel(&perm)?;
    let patch = PatchIsometry::relabeled(&m, &r, &relabeled, &perm)?;
    let same = ManifoldPair::new(SpectralManifold::new(m.clone())?, SpectralManifold::new(relabeled)?, patch)?;

    let wide = DiscreteManifold::flat_torus(8, 12, 1.0, 1.0)?;
    let rw = Region::grid_box(&wide, 0, 0, 4, 4)?;
    let patch = PatchIsometry::new(&m, &r, &wide, rw.vertices().to_vec())?;
    let different = ManifoldPair::new(SpectralManifold::new(m.clone())?, SpectralManifold::new(wide)?, patch)?;

    for (name, pair) in [("relabeled", &same), ("8x12", &different)] {
        let space = build_source_space(pair, SourceKind::Dtilde0)?;
        let p = FracParams::new(0.5, pair.spectral_gap(), 1e-12)?;
        let s2s = compare_s2s(pair, &space, &p)?;
        println!("{name}: {} sources, max rel discrepancy {:.3e}", space.dim(), s2s.max());
    }
    Ok(())
}
