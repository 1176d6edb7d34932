//! Dense mass-orthonormal eigendecomposition and functional calculus.

use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
pub use crate::manifold::BoundaryMode;
use crate::manifold::DiscreteManifold;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::ops::Range;

/// Relative size below which a vector entry does not fix a sign.
const SIGNIFICANT: f64 = 1e-8;
/// Coefficient tolerance for functions that blow up at an eigenvalue.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// Eigenpairs `(λ_k, φ_k)` of L with `(φ_j, φ_k)_m = δ_jk`, eigenvalues
/// ascending, eigenvectors stored at full length (zero on the boundary).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    mass: Vec<f64>,
    mode: BoundaryMode,
    residual: f64,
}

/// Decomposes with residual tolerance `1e-9·λ_max`.
pub fn decompose(m: &DiscreteManifold) -> Result<SpectralDecomposition> {
    decompose_with_tolerance(m, 1e-9)
}

pub fn decompose_with_tolerance(m: &DiscreteManifold, rel_tol: f64) -> Result<SpectralDecomposition> {
    let free = m.free_vertices();
    let nf = free.len();
    let k = m.stiffness_dense();
    let mass = m.mass();
    let scale: Vec<f64> = free.iter().map(|&v| mass[v].sqrt()).collect();
    let kf = DMatrix::from_fn(nf, nf, |a, b| k[(free[a], free[b])]);
    let s = DMatrix::from_fn(nf, nf, |a, b| kf[(a, b)] / (scale[a] * scale[b]));
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..nf).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut phi = DMatrix::zeros(m.n(), nf);
    for (col, &src) in order.iter().enumerate() {
        for a in 0..nf {
            phi[(free[a], col)] = eig.eigenvectors[(a, src)] / scale[a];
        }
    }
    let lambda_max = values[nf - 1].max(f64::MIN_POSITIVE);
    let mode = m.mode();
    if mode == BoundaryMode::Closed {
        values[0] = 0.0;
        let c = 1.0 / mass.iter().sum::<f64>().sqrt();
        phi.column_mut(0).fill(c);
    }
    canonicalize(&values, &mut phi, lambda_max);

    // Residual ‖Lφ − λφ‖_m per mode, via the free-vertex stiffness block.
    let phi_f = DMatrix::from_fn(nf, nf, |a, c| phi[(free[a], c)]);
    let kphi = &kf * &phi_f;
    let mut residual: f64 = 0.0;
    for c in 0..nf {
        let mut acc = 0.0;
        for a in 0..nf {
            let mv = mass[free[a]];
            let r = kphi[(a, c)] / mv - values[c] * phi_f[(a, c)];
            acc += mv * r * r;
        }
        residual = residual.max(acc.sqrt());
    }
    let tolerance = rel_tol * lambda_max;
    if !(residual <= tolerance) {
        return Err(Error::EigenResidual { residual, tolerance });
    }
    Ok(SpectralDecomposition { eigenvalues: values, eigenvectors: phi, mass: mass.to_vec(), mode, residual })
}

/// First significant component positive; within near-degenerate clusters,
/// order columns by the index of that component.
fn canonicalize(values: &[f64], phi: &mut DMatrix<f64>, lambda_max: f64) {
    let cols = phi.ncols();
    let mut lead = vec![0usize; cols];
    for c in 0..cols {
        let amax = phi.column(c).amax();
        let i = phi.column(c).iter().position(|x| x.abs() > SIGNIFICANT * amax).unwrap_or(0);
        if phi[(i, c)] < 0.0 {
            phi.column_mut(c).neg_mut();
        }
        lead[c] = i;
    }
    let gap = 1e-9 * lambda_max.max(1.0);
    let mut start = 0;
    while start < cols {
        let mut end = start + 1;
        while end < cols && values[end] - values[end - 1] <= gap {
            end += 1;
        }
        if end - start > 1 {
            let mut idx: Vec<usize> = (start..end).collect();
            idx.sort_by_key(|&c| lead[c]);
            let block = DMatrix::from_fn(phi.nrows(), end - start, |r, k| phi[(r, idx[k])]);
            phi.columns_mut(start, end - start).copy_from(&block);
        }
        start = end;
    }
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors, rows are manifold vertices.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Manifold dimension (vertex count).
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Smallest eigenvalue that is not the closed-mode zero.
    pub fn smallest_positive(&self) -> f64 {
        match self.mode {
            BoundaryMode::Closed => self.eigenvalues[1],
            BoundaryMode::Dirichlet => self.eigenvalues[0],
        }
    }

    pub fn norm(&self, f: &DVector<f64>) -> f64 {
        self.mass.iter().zip(f.iter()).map(|(m, x)| m * x * x).sum::<f64>().sqrt()
    }

    /// `(f, φ_k)_m` for every k.
    pub fn coefficients(&self, f: &DVector<f64>) -> DVector<f64> {
        assert_eq!(f.len(), self.n(), "vector length");
        let mf = DVector::from_iterator(f.len(), f.iter().zip(&self.mass).map(|(x, m)| x * m));
        self.eigenvectors.tr_mul(&mf)
    }

    /// `Σ_k c_k φ_k`.
    pub fn synthesize(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * c
    }

    /// `|(f, φ_0)_m| / ‖f‖_m` in closed mode, zero otherwise.
    pub fn kernel_component(&self, f: &DVector<f64>) -> f64 {
        if self.mode == BoundaryMode::Dirichlet {
            return 0.0;
        }
        let norm = self.norm(f);
        if norm == 0.0 {
            return 0.0;
        }
        let c0: f64 = self.eigenvectors.column(0).iter().zip(f.iter()).zip(&self.mass).map(|((p, x), m)| p * x * m).sum();
        c0.abs() / norm
    }

    /// `Σ_k φ(λ_k)(f, φ_k)_m φ_k`. A non-finite `φ(λ_k)` is accepted only
    /// where the coefficient is below `1e-10·‖f‖_m`, and then contributes 0.
    pub fn apply_function(&self, phi: impl Fn(f64) -> f64, f: &DVector<f64>) -> Result<DVector<f64>> {
        let mut c = self.coefficients(f);
        let norm = self.norm(f);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = phi(lambda);
            if v.is_finite() {
                c[k] *= v;
            } else if c[k].abs() <= KERNEL_TOLERANCE * norm {
                c[k] = 0.0;
            } else {
                return Err(Error::UndefinedAt { lambda, coefficient: c[k] });
            }
        }
        Ok(self.synthesize(&c))
    }
}

/// A distinct eigenvalue, its multiplicity and the indices it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub value: f64,
    pub multiplicity: usize,
    pub start: usize,
}

impl EigenGroup {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.multiplicity
    }
}

/// Chains consecutive eigenvalues whose gap is at most `tol·max(λ_max, 1)`.
pub fn group_eigenvalues(d: &SpectralDecomposition, tol: f64) -> Result<Vec<EigenGroup>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("grouping tolerance {tol}")));
    }
    let vals = d.eigenvalues();
    let thresh = tol * d.lambda_max().max(1.0);
    let mut groups = Vec::new();
    let mut ambiguous = Vec::new();
    let mut start = 0;
    while start < vals.len() {
        let mut end = start + 1;
        while end < vals.len() && vals[end] - vals[end - 1] <= thresh {
            end += 1;
        }
        let spread = vals[end - 1] - vals[start];
        if spread > thresh {
            ambiguous.push((vals[start], vals[end - 1]));
        }
        let value = vals[start..end].iter().sum::<f64>() / (end - start) as f64;
        groups.push(EigenGroup { value, multiplicity: end - start, start });
        start = end;
    }
    if !ambiguous.is_empty() {
        return Err(Error::AmbiguousClusters(ambiguous));
    }
    Ok(groups)
}

/// `K(x, y) = Σ_{ℓ ∈ grp} φ_ℓ(x) φ_ℓ(y)` on the listed vertices.
pub fn projector_kernel(d: &SpectralDecomposition, grp: &EigenGroup, vertices: &[usize]) -> DMatrix<f64> {
    let block = restricted_block(d, grp.range(), vertices);
    &block * block.transpose()
}

/// Eigenvector columns `range` restricted to `vertices` (rows in that order).
pub fn restricted_block(d: &SpectralDecomposition, range: Range<usize>, vertices: &[usize]) -> DMatrix<f64> {
    let cols: Vec<usize> = range.collect();
    DMatrix::from_fn(vertices.len(), cols.len(), |r, c| d.eigenvectors()[(vertices[r], cols[c])])
}

/// `index, eigenvalue, group_id, multiplicity`.
pub fn spectrum_table(d: &SpectralDecomposition, groups: &[EigenGroup]) -> CsvTable {
    let mut t = CsvTable::new(&["index", "eigenvalue", "group_id", "multiplicity"]);
    for (g, grp) in groups.iter().enumerate() {
        for k in grp.range() {
            t.push(vec![k.to_string(), num(d.eigenvalues()[k]), g.to_string(), grp.multiplicity.to_string()]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cycle(n: usize) -> SpectralDecomposition {
        decompose(&DiscreteManifold::cycle(n).unwrap()).unwrap()
    }

    #[test]
    fn cycle_six_spectrum() {
        let d = cycle(6);
        for (got, want) in d.eigenvalues().iter().zip([0.0, 1.0, 1.0, 3.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn cycle_three_spectrum() {
        let d = cycle(3);
        for (got, want) in d.eigenvalues().iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_ground_state_is_constant() {
        let d = cycle(7);
        let c = d.eigenvectors().column(0);
        assert!(c.iter().all(|&x| x == c[0]));
        assert_eq!(d.eigenvalues()[0], 0.0);
    }

    #[test]
    fn dirichlet_path_spectra() {
        let d = decompose(&DiscreteManifold::path_dirichlet(3).unwrap()).unwrap();
        let want = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (got, w) in d.eigenvalues().iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
        let d = decompose(&DiscreteManifold::path_dirichlet(2).unwrap()).unwrap();
        assert!((d.eigenvalues()[0] - 1.0).abs() < 1e-12 && (d.eigenvalues()[1] - 3.0).abs() < 1e-12);
        assert!(d.eigenvalues()[0] > 0.0);
        assert_eq!(d.eigenvectors()[(0, 0)], 0.0);
    }

    #[test]
    fn torus_spectrum_and_first_multiplicity() {
        let d = decompose(&DiscreteManifold::flat_torus(8, 8, 1.0, 1.0).unwrap()).unwrap();
        let s = |j: usize| 4.0 * (PI * j as f64 / 8.0).sin().powi(2);
        let mut want: Vec<f64> = (0..8).flat_map(|j| (0..8).map(move |k| s(j) + s(k))).collect();
        want.sort_by(f64::total_cmp);
        for (got, w) in d.eigenvalues().iter().zip(&want) {
            assert!((got - w).abs() < 1e-10);
        }
        let groups = group_eigenvalues(&d, 1e-6).unwrap();
        assert_eq!(groups[1].multiplicity, 4);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let m = DiscreteManifold::flat_torus(4, 5, 0.7, 1.3).unwrap();
        let d = decompose(&m).unwrap();
        let phi = d.eigenvectors();
        let mphi = DMatrix::from_fn(phi.nrows(), phi.ncols(), |i, j| phi[(i, j)] * m.mass()[i]);
        let gram = phi.tr_mul(&mphi);
        assert!((gram - DMatrix::identity(20, 20)).amax() < 1e-10);
    }

    #[test]
    fn first_significant_component_is_positive() {
        let d = cycle(10);
        for c in 0..10 {
            let col = d.eigenvectors().column(c);
            let first = col.iter().find(|x| x.abs() > 1e-8 * col.amax()).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn functional_calculus_basics() {
        let m = DiscreteManifold::cycle(8).unwrap();
        let d = decompose(&m).unwrap();
        let f = DVector::from_fn(8, |i, _| (i as f64 * 0.7).cos() + 0.1 * i as f64);
        assert!((d.apply_function(|_| 1.0, &f).unwrap() - &f).amax() < 1e-13);
        assert!((d.apply_function(|l| (-0.0 * l).exp(), &f).unwrap() - &f).amax() < 1e-13);
        let phi3 = d.eigenvectors().column(3).into_owned();
        let got = d.apply_function(|l| l, &phi3).unwrap();
        assert!((got - d.eigenvalues()[3] * &phi3).amax() < 1e-12);
    }

    #[test]
    fn negative_power_rejects_kernel_component() {
        let d = cycle(6);
        let ones = DVector::from_element(6, 1.0);
        assert!(matches!(d.apply_function(|l| l.powf(-0.5), &ones), Err(Error::UndefinedAt { .. })));
        let f = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(d.apply_function(|l| l.powf(-0.5), &f).is_ok());
    }

    #[test]
    fn grouping_of_cycle_six() {
        let d = cycle(6);
        let g = group_eigenvalues(&d, 1e-6).unwrap();
        let summary: Vec<(i64, usize)> = g.iter().map(|g| (g.value.round() as i64, g.multiplicity)).collect();
        assert_eq!(summary, vec![(0, 1), (1, 2), (3, 2), (4, 1)]);
        let all = group_eigenvalues(&d, 10.0).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].multiplicity, 6);
    }

    #[test]
    fn grouping_reports_ambiguous_chains() {
        let d = cycle(40);
        let err = group_eigenvalues(&d, 0.04).unwrap_err();
        assert!(matches!(err, Error::AmbiguousClusters(_)));
    }

    #[test]
    fn distinct_spectrum_has_unit_multiplicities() {
        let d = decompose(&DiscreteManifold::path_dirichlet(5).unwrap()).unwrap();
        assert!(group_eigenvalues(&d, 1e-6).unwrap().iter().all(|g| g.multiplicity == 1));
    }

    #[test]
    fn projector_kernel_matches_explicit_eigenvectors() {
        let d = cycle(6);
        let groups = group_eigenvalues(&d, 1e-6).unwrap();
        let k = projector_kernel(&d, &groups[1], &[0, 1, 2]);
        // Any orthonormal basis of the λ = 1 eigenspace gives the same kernel.
        let c = |x: usize| (2.0 * PI * x as f64 / 6.0).cos() / 3f64.sqrt();
        let s = |x: usize| (2.0 * PI * x as f64 / 6.0).sin() / 3f64.sqrt();
        for x in 0..3 {
            for y in 0..3 {
                assert!((k[(x, y)] - (c(x) * c(y) + s(x) * s(y))).abs() < 1e-12);
            }
        }
        assert!(k.rank(1e-10) <= 2);
    }

    #[test]
    fn kernel_traces_over_whole_manifold_sum_to_n() {
        let m = DiscreteManifold::flat_torus(4, 4, 1.0, 1.0).unwrap();
        let d = decompose(&m).unwrap();
        let all: Vec<usize> = (0..16).collect();
        let total: f64 = group_eigenvalues(&d, 1e-6)
            .unwrap()
            .iter()
            .map(|g| projector_kernel(&d, g, &all).trace())
            .sum();
        assert!((total - 16.0).abs() < 1e-10);
    }
}
