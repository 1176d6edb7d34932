//! A Dirichlet path and its double: every Dirichlet eigenvalue reappears on
//! the double with an odd eigenvector.

use fraclab::manifold::double_manifold;
use fraclab::spectral::decompose;
use fraclab::DiscreteManifold;
use nalgebra::DVector;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::path_dirichlet(6)?;
    let dm = double_manifold(&m)?;
    let d = decompose(&m)?;
    let dd = decompose(&dm.doubled)?;
    println!("path: {} vertices, double: {} vertices", m.n(), dm.doubled.n());
    for k in 0..d.n_modes() {
        let l = d.eigenvalues()[k];
        let phi: Vec<f64> = d.eigenvectors().column(k).iter().cloned().collect();
        let psi = DVector::from_vec(dm.odd_extension(&phi)) / 2f64.sqrt();
        let res = dm.doubled.norm(&(dm.doubled.apply_laplacian(&psi) - &psi * l));
        let gap = dd.eigenvalues().iter().map(|x| (x - l).abs()).fold(f64::INFINITY, f64::min);
        println!("lambda {l:.10}: gap to double {gap:.1e}, odd residual {res:.1e}");
    }
    Ok(())
}
