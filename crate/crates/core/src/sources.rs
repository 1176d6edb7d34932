//! Admissible source spaces, the shifted product operator `T_ℓ` with its
//! peeling verification, and the source-to-solution map.

use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use crate::fractional::{frac_inverse_spectral, FracParams};
use crate::linalg;
use crate::manifold::{DiscreteManifold, Region};
use crate::pair::{ManifoldPair, SpectralManifold};
pub use crate::pair::RestrictionOperator;
use crate::quadrature::gauss_legendre;
use nalgebra::{DMatrix, DVector};

const NULL_DIRECTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Everything supported in the region.
    D0,
    /// `L g` for `g` supported one ring inside the region.
    Dtilde0,
    /// Patch-supported vectors orthogonal to the first `ell + 1`
    /// eigenvectors of both manifolds.
    Nell { ell: usize },
}

/// Basis columns in region-local coordinates (rows follow the region's
/// sorted vertices).
#[derive(Debug, Clone)]
pub struct SourceSpace {
    pub kind: SourceKind,
    pub basis: DMatrix<f64>,
    pub mass: Vec<f64>,
}

impl SourceSpace {
    pub fn d0(m: &DiscreteManifold, o: &Region) -> Self {
        let mass = o.vertices().iter().map(|&v| m.mass()[v]).collect();
        SourceSpace { kind: SourceKind::D0, basis: DMatrix::identity(o.len(), o.len()), mass }
    }

    pub fn dtilde0(m: &DiscreteManifold, o: &Region) -> Result<Self> {
        let inner = o.interior(1);
        if inner.is_empty() {
            return Err(Error::MarginInsufficient { needed: 1, available: o.margin() });
        }
        let mut basis = DMatrix::zeros(o.len(), inner.len());
        for (c, &v) in inner.iter().enumerate() {
            let mut g = DVector::zeros(m.n());
            g[v] = 1.0;
            let lg = m.apply_laplacian(&g);
            for (r, &u) in o.vertices().iter().enumerate() {
                basis[(r, c)] = lg[u];
            }
        }
        let mass = o.vertices().iter().map(|&v| m.mass()[v]).collect();
        Ok(SourceSpace { kind: SourceKind::Dtilde0, basis, mass })
    }

    /// Projects the D0 basis off the constraint vectors and re-orthonormalizes
    /// in the mass inner product, dropping near-null directions.
    pub fn nell(pair: &ManifoldPair, ell: usize) -> Result<Self> {
        let n = pair.patch_len();
        let mass = pair.patch.mass().to_vec();
        let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
        let mut constraints = Vec::new();
        for s in 0..2 {
            let phi = pair.side(s).spectrum.eigenvectors();
            let verts = pair.patch.vertices(s);
            for k in 0..=ell.min(phi.ncols() - 1) {
                constraints.push(DVector::from_fn(n, |p, _| phi[(verts[p], k)] * sqrt_m[p]));
            }
        }
        // Work in the Euclidean picture x ↦ M^{1/2}x, where the mass inner
        // product becomes the dot product.
        let c = DMatrix::from_columns(&constraints);
        let cf = linalg::svd(&c);
        let keep = cf.rank(NULL_DIRECTION);
        let q = cf.u.columns(0, keep);
        let proj = DMatrix::identity(n, n) - q * q.transpose();
        let pf = linalg::svd(&proj);
        let mut cols = Vec::new();
        for (i, &s) in pf.s.iter().enumerate() {
            if s > NULL_DIRECTION {
                cols.push(DVector::from_fn(n, |r, _| pf.u[(r, i)] / sqrt_m[r]));
            }
        }
        if cols.is_empty() {
            return Err(Error::EmptyBasis);
        }
        Ok(SourceSpace { kind: SourceKind::Nell { ell }, basis: DMatrix::from_columns(&cols), mass })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.basis.column(j).into_owned()
    }

    /// Smallest singular value of the basis with unit-norm columns.
    pub fn independence(&self) -> f64 {
        let mut b = self.basis.clone();
        for mut c in b.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        linalg::svd(&b).s.last().copied().unwrap_or(0.0)
    }
}

/// Builds a source space on the shared patch of a pair.
pub fn build_source_space(pair: &ManifoldPair, kind: SourceKind) -> Result<SourceSpace> {
    let m = &pair.first.manifold;
    let o = pair.patch.first();
    match kind {
        SourceKind::D0 => Ok(SourceSpace::d0(m, o)),
        SourceKind::Dtilde0 => {
            // Interior vertices must keep their ring on both sides.
            let space = SourceSpace::dtilde0(m, o)?;
            let inner: Vec<usize> = pair.patch.interior(1);
            if inner.len() != o.interior(1).len() {
                return Err(Error::MarginInsufficient { needed: 1, available: 0 });
            }
            Ok(space)
        }
        SourceKind::Nell { ell } => SourceSpace::nell(pair, ell),
    }
}

/// One shifted factor `A_side − λ_k^side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub side: usize,
    pub k: usize,
    pub lambda: f64,
}

/// Factors of `T_ℓ` in application order: `k` ascending, manifold 1 then 2.
pub fn t_ell_factors(pair: &ManifoldPair, ell: usize) -> Vec<Factor> {
    let mut out = Vec::with_capacity(2 * (ell + 1));
    for k in 0..=ell {
        for side in 0..2 {
            out.push(Factor { side, k, lambda: pair.side(side).spectrum.eigenvalues()[k] });
        }
    }
    out
}

/// Applies factors in order to a patch-local vector.
pub fn apply_factors(pair: &ManifoldPair, factors: &[Factor], f: &DVector<f64>) -> Result<DVector<f64>> {
    let needed = factors.len();
    let depth = pair.support_depth(f);
    if depth != usize::MAX && depth < needed + 1 {
        return Err(Error::MarginInsufficient { needed, available: depth.saturating_sub(1) });
    }
    let mut v = f.clone();
    for fac in factors {
        if v.iter().all(|x| *x == 0.0) {
            break;
        }
        v = pair.apply_laplacian(fac.side, &v)? - &v * fac.lambda;
    }
    Ok(v)
}

/// `T_ℓ f = ∏_{k≤ℓ, j=1,2}(A_j − λ_k^j) f` on the patch.
pub fn apply_t_ell(pair: &ManifoldPair, ell: usize, f: &DVector<f64>) -> Result<DVector<f64>> {
    apply_factors(pair, &t_ell_factors(pair, ell), f)
}

/// Largest `|⟨v, φ_k^j⟩_m| / ‖v‖_m` over `k ≤ ell` and both manifolds.
pub fn constraint_membership(pair: &ManifoldPair, ell: usize, v: &DVector<f64>) -> f64 {
    let norm = pair.patch_norm(v);
    if norm == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for s in 0..2 {
        let full = pair.embed(s, v);
        let c = pair.side(s).spectrum.coefficients(&full);
        for k in 0..=ell.min(c.len() - 1) {
            worst = worst.max(c[k].abs() / norm);
        }
    }
    worst
}

/// `χ_O A^{-α} f` for a region-local source `f`.
pub fn source_to_solution(sm: &SpectralManifold, p: &FracParams, o: &Region, f: &DVector<f64>) -> Result<DVector<f64>> {
    if f.len() != o.len() {
        return Err(Error::ShapeMismatch(format!("source has {} entries for a {}-vertex region", f.len(), o.len())));
    }
    let mut full = DVector::zeros(sm.manifold.n());
    for (r, &v) in o.vertices().iter().enumerate() {
        full[v] = f[r];
    }
    let u = frac_inverse_spectral(&sm.spectrum, p, &full)?;
    Ok(DVector::from_iterator(o.len(), o.vertices().iter().map(|&v| u[v])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2sRow {
    pub basis_id: usize,
    pub norm_f: f64,
    pub norm_s1: f64,
    pub norm_s2: f64,
    pub rel_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2sReport {
    pub rows: Vec<S2sRow>,
}

impl S2sReport {
    pub fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_discrepancy).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.rel_discrepancy).sum::<f64>() / self.rows.len() as f64
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["basis_id", "norm_f", "norm_S1f", "norm_S2f", "rel_discrepancy"]);
        for r in &self.rows {
            t.push(vec![r.basis_id.to_string(), num(r.norm_f), num(r.norm_s1), num(r.norm_s2), num(r.rel_discrepancy)]);
        }
        t
    }
}

/// `‖S₁f − S₂f‖_m / ‖f‖_m` for every basis vector, transported through the
/// patch map.
pub fn compare_s2s(pair: &ManifoldPair, space: &SourceSpace, p: &FracParams) -> Result<S2sReport> {
    if space.basis.nrows() != pair.patch_len() {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows for a {}-vertex patch",
            space.basis.nrows(),
            pair.patch_len()
        )));
    }
    let mut rows = Vec::with_capacity(space.dim());
    for j in 0..space.dim() {
        let f = space.column(j);
        let s: Vec<DVector<f64>> = (0..2)
            .map(|side| {
                let u = frac_inverse_spectral(&pair.side(side).spectrum, p, &pair.embed(side, &f))?;
                Ok(pair.restrict(side, &u))
            })
            .collect::<Result<_>>()?;
        let norm_f = pair.patch_norm(&f);
        rows.push(S2sRow {
            basis_id: j,
            norm_f,
            norm_s1: pair.patch_norm(&s[0]),
            norm_s2: pair.patch_norm(&s[1]),
            rel_discrepancy: pair.patch_norm(&(&s[0] - &s[1])) / norm_f,
        });
    }
    Ok(S2sReport { rows })
}

/// One stage of the peeling induction.
#[derive(Debug, Clone, PartialEq)]
pub struct PeelStep {
    /// Factors still applied to `f` at this stage.
    pub remaining: usize,
    /// Factor removed when moving to the next stage.
    pub peeled: Option<Factor>,
    /// `max_t ‖χ e^{-tA₁}T f − χ e^{-tA₂}T f‖_m / ‖T f‖_m`.
    pub heat_discrepancy: f64,
    /// Largest relative residual of
    /// `e^{-t(A−λ)}T̃f − T̃f + ∫₀^t e^{sλ}e^{-sA}Tf ds = 0` on either manifold.
    pub integration_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeelingReport {
    pub ell: usize,
    pub membership: f64,
    pub steps: Vec<PeelStep>,
}

impl PeelingReport {
    pub fn worst(&self) -> f64 {
        self.steps.iter().map(|s| s.heat_discrepancy.max(s.integration_residual)).fold(0.0, f64::max)
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["step", "remaining", "peeled_side", "peeled_k", "peeled_lambda", "heat_discrepancy", "integration_residual"]);
        for (i, s) in self.steps.iter().enumerate() {
            let (side, k, l) = match s.peeled {
                Some(f) => ((f.side + 1).to_string(), f.k.to_string(), num(f.lambda)),
                None => ("-".into(), "-".into(), "-".into()),
            };
            t.push(vec![i.to_string(), s.remaining.to_string(), side, k, l, num(s.heat_discrepancy), num(s.integration_residual)]);
        }
        t
    }
}

/// Re-derives the peeling induction numerically: starting from `T_ℓ f`,
/// removes one factor at a time (first factor first), checking at each
/// stage that the restricted heat data agree on both manifolds and that the
/// integrated identity linking consecutive stages holds.
pub fn peel_t_ell(pair: &ManifoldPair, ell: usize, f: &DVector<f64>, times: &[f64]) -> Result<PeelingReport> {
    let factors = t_ell_factors(pair, ell);
    let tf = apply_factors(pair, &factors, f)?;
    let membership = constraint_membership(pair, ell, &tf);
    let (gx, gw) = gauss_legendre(16);
    let mut steps = Vec::with_capacity(factors.len() + 1);
    for stage in 0..=factors.len() {
        let current = apply_factors(pair, &factors[stage..], f)?;
        let norm = pair.patch_norm(&current).max(f64::MIN_POSITIVE);
        let mut heat_discrepancy: f64 = 0.0;
        for &t in times {
            let d = pair.heat(0, t, &current)? - pair.heat(1, t, &current)?;
            heat_discrepancy = heat_discrepancy.max(pair.patch_norm(&d) / norm);
        }
        let mut integration_residual: f64 = 0.0;
        let peeled = factors.get(stage).copied();
        if let Some(fac) = peeled {
            let next = apply_factors(pair, &factors[stage + 1..], f)?;
            for side in 0..2 {
                for &t in times {
                    let lhs = pair.heat(side, t, &next)? * (fac.lambda * t).exp() - &next;
                    let panels = 8;
                    let width = t / panels as f64;
                    let mut integral = DVector::zeros(pair.patch_len());
                    for p in 0..panels {
                        for (x, w) in gx.iter().zip(&gw) {
                            let s = width * (p as f64 + 0.5 * (x + 1.0));
                            integral += pair.heat(side, s, &current)? * (0.5 * width * w * (fac.lambda * s).exp());
                        }
                    }
                    let scale = norm * t * (fac.lambda * t).exp().max(1.0);
                    integration_residual = integration_residual.max(pair.patch_norm(&(lhs + integral)) / scale);
                }
            }
        }
        steps.push(PeelStep { remaining: factors.len() - stage, peeled, heat_discrepancy, integration_residual });
    }
    Ok(PeelingReport { ell, membership, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::PatchIsometry;

    fn relabeled_torus(n: usize, w: usize) -> ManifoldPair {
        let a = DiscreteManifold::flat_torus(n, n, 1.0, 1.0).unwrap();
        let perm: Vec<usize> = (0..n * n).map(|i| (i * 7 + 3) % (n * n)).collect();
        let b = a.relabel(&perm).unwrap();
        let r = Region::grid_box(&a, 0, 0, w, w).unwrap();
        let patch = PatchIsometry::relabeled(&a, &r, &b, &perm).unwrap();
        ManifoldPair::new(SpectralManifold::new(a).unwrap(), SpectralManifold::new(b).unwrap(), patch).unwrap()
    }

    #[test]
    fn space_dimensions() {
        let pair = relabeled_torus(8, 4);
        assert_eq!(build_source_space(&pair, SourceKind::D0).unwrap().dim(), 16);
        let dt = build_source_space(&pair, SourceKind::Dtilde0).unwrap();
        assert_eq!(dt.dim(), 4);
        for j in 0..dt.dim() {
            let col = dt.column(j);
            let mean: f64 = col.iter().zip(&dt.mass).map(|(x, m)| x * m).sum();
            assert!(mean.abs() < 1e-14);
        }
        let n0 = build_source_space(&pair, SourceKind::Nell { ell: 0 }).unwrap();
        assert_eq!(n0.dim(), 15);
        assert!(n0.independence() > 1e-8);
    }

    #[test]
    fn nell_columns_satisfy_constraints() {
        let pair = relabeled_torus(8, 5);
        let space = build_source_space(&pair, SourceKind::Nell { ell: 3 }).unwrap();
        for j in 0..space.dim() {
            assert!(constraint_membership(&pair, 3, &space.column(j)) < 1e-10);
        }
    }

    #[test]
    fn t_zero_is_a_squared_laplacian() {
        let pair = relabeled_torus(10, 7);
        let mut f = DVector::zeros(49);
        f[24] = 1.0;
        let t0 = apply_t_ell(&pair, 0, &f).unwrap();
        let a2 = pair.apply_laplacian(0, &pair.apply_laplacian(0, &f).unwrap()).unwrap();
        assert!((t0 - a2).amax() < 1e-14);
        f[0] = 1.0;
        assert!(matches!(apply_t_ell(&pair, 0, &f), Err(Error::MarginInsufficient { .. })));
    }

    #[test]
    fn factor_order_commutes_on_the_patch() {
        let pair = relabeled_torus(12, 11);
        let mut f = DVector::zeros(121);
        f[60] = 1.0;
        f[61] = -0.5;
        let factors = t_ell_factors(&pair, 1);
        let mut reversed = factors.clone();
        reversed.reverse();
        let a = apply_factors(&pair, &factors, &f).unwrap();
        let b = apply_factors(&pair, &reversed, &f).unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn s2s_is_linear_and_zero_for_identical_sides() {
        let a = DiscreteManifold::flat_torus(6, 6, 1.0, 1.0).unwrap();
        let r = Region::grid_box(&a, 0, 0, 4, 4).unwrap();
        let patch = PatchIsometry::identity(&a, &r).unwrap();
        let sm = SpectralManifold::new(a).unwrap();
        let pair = ManifoldPair::new(sm.clone(), sm.clone(), patch).unwrap();
        let space = build_source_space(&pair, SourceKind::Dtilde0).unwrap();
        let p = FracParams::new(0.5, pair.spectral_gap(), 1e-10).unwrap();
        let rep = compare_s2s(&pair, &space, &p).unwrap();
        assert_eq!(rep.max(), 0.0);
        let f = space.column(0);
        let s1 = source_to_solution(&sm, &p, &r, &f).unwrap();
        let s3 = source_to_solution(&sm, &p, &r, &(&f * 3.0)).unwrap();
        assert!((s3 - 3.0 * s1).amax() < 1e-14);
        let bad = SourceSpace::d0(&sm.manifold, &Region::grid_box(&sm.manifold, 0, 0, 2, 2).unwrap());
        assert!(matches!(compare_s2s(&pair, &bad, &p), Err(Error::ShapeMismatch(_))));
    }
}
