//! Two manifolds sharing an isometric patch, with transport of
//! patch-supported vectors between them.

use crate::error::{Error, Result};
use crate::manifold::{DiscreteManifold, PatchIsometry};
use crate::spectral::{decompose, BoundaryMode, SpectralDecomposition};
use nalgebra::{DMatrix, DVector};

/// A manifold together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpectralManifold {
    pub manifold: DiscreteManifold,
    pub spectrum: SpectralDecomposition,
}

impl SpectralManifold {
    pub fn new(manifold: DiscreteManifold) -> Result<Self> {
        let spectrum = decompose(&manifold)?;
        Ok(SpectralManifold { manifold, spectrum })
    }

    pub fn heat(&self, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
        crate::fractional::heat_apply(&self.spectrum, t, f)
    }
}

/// Patch-local vectors are indexed like `patch.first().vertices()`.
#[derive(Debug, Clone)]
pub struct ManifoldPair {
    pub first: SpectralManifold,
    pub second: SpectralManifold,
    pub patch: PatchIsometry,
}

impl ManifoldPair {
    /// Re-validates the patch against the two manifolds.
    pub fn new(first: SpectralManifold, second: SpectralManifold, patch: PatchIsometry) -> Result<Self> {
        let patch = PatchIsometry::new(&first.manifold, patch.first(), &second.manifold, patch.image().to_vec())?;
        Ok(ManifoldPair { first, second, patch })
    }

    pub fn side(&self, s: usize) -> &SpectralManifold {
        match s {
            0 => &self.first,
            _ => &self.second,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.patch.len()
    }

    /// Extends a patch-local vector by zero to manifold `s`.
    pub fn embed(&self, s: usize, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.patch.len(), "patch vector length");
        let mut out = DVector::zeros(self.side(s).manifold.n());
        for (p, &vert) in self.patch.vertices(s).iter().enumerate() {
            out[vert] = v[p];
        }
        out
    }

    /// Patch-local values of a vector on manifold `s`.
    pub fn restrict(&self, s: usize, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.patch.len(), self.patch.vertices(s).iter().map(|&v| full[v]))
    }

    /// Largest magnitude of `full` outside the patch.
    pub fn leak(&self, s: usize, full: &DVector<f64>) -> f64 {
        let inside = self.patch.vertices(s);
        let mut mask = vec![false; full.len()];
        for &v in inside {
            mask[v] = true;
        }
        full.iter().zip(&mask).filter(|(_, &m)| !m).map(|(x, _)| x.abs()).fold(0.0, f64::max)
    }

    /// Mass-weighted norm on the patch.
    pub fn patch_norm(&self, v: &DVector<f64>) -> f64 {
        self.patch.mass().iter().zip(v.iter()).map(|(m, x)| m * x * x).sum::<f64>().sqrt()
    }

    pub fn patch_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.patch.mass().iter().zip(a.iter().zip(b.iter())).map(|(m, (x, y))| m * x * y).sum()
    }

    /// Smallest patch depth of the support of `v` (`usize::MAX` for zero).
    pub fn support_depth(&self, v: &DVector<f64>) -> usize {
        v.iter()
            .zip(self.patch.depths())
            .filter(|(x, _)| **x != 0.0)
            .map(|(_, &d)| d)
            .min()
            .unwrap_or(usize::MAX)
    }

    /// `L_s v` for patch-local `v` whose support keeps a full ring inside
    /// the patch, so the result is the same on both manifolds.
    pub fn apply_laplacian(&self, s: usize, v: &DVector<f64>) -> Result<DVector<f64>> {
        let depth = self.support_depth(v);
        if depth < 2 {
            return Err(Error::MarginInsufficient { needed: 1, available: depth.saturating_sub(1) });
        }
        let full = self.side(s).manifold.apply_laplacian(&self.embed(s, v));
        Ok(self.restrict(s, &full))
    }

    /// Patch-local restriction of `e^{-tA_s}` applied to an embedded vector.
    pub fn heat(&self, s: usize, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        let full = self.side(s).heat(t, &self.embed(s, v))?;
        Ok(self.restrict(s, &full))
    }

    /// Largest positive-spectrum lower bound over both sides.
    pub fn spectral_gap(&self) -> f64 {
        self.first.spectrum.smallest_positive().min(self.second.spectrum.smallest_positive())
    }

    pub fn lambda_max(&self) -> f64 {
        self.first.spectrum.lambda_max().max(self.second.spectrum.lambda_max())
    }
}

/// Coordinate restriction to a subset of the patch (patch-local indices).
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionOperator {
    indices: Vec<usize>,
    mass: Vec<f64>,
    patch_len: usize,
}

impl RestrictionOperator {
    pub fn whole(patch: &PatchIsometry) -> Self {
        RestrictionOperator { indices: (0..patch.len()).collect(), mass: patch.mass().to_vec(), patch_len: patch.len() }
    }

    pub fn subset(patch: &PatchIsometry, indices: Vec<usize>) -> Result<Self> {
        let mut indices = indices;
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices.iter().any(|&i| i >= patch.len()) {
            return Err(Error::InvalidRegion("restriction indices outside the patch".into()));
        }
        let mass = indices.iter().map(|&i| patch.mass()[i]).collect();
        Ok(RestrictionOperator { indices, mass, patch_len: patch.len() })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Values at the observed indices.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| v[i]))
    }

    /// Zeroes every unobserved patch entry.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.patch_len);
        for &i in &self.indices {
            out[i] = v[i];
        }
        out
    }

    /// Mass-weighted norm of an observed vector.
    pub fn norm(&self, r: &DVector<f64>) -> f64 {
        self.mass.iter().zip(r.iter()).map(|(m, x)| m * x * x).sum::<f64>().sqrt()
    }
}

/// Relative size below which a Taylor coefficient difference counts as zero.
const TAYLOR_ZERO: f64 = 1e-12;
const TAYLOR_TERMS: usize = 64;
/// Taylor evaluation is used for `t·λ_max` up to this value.
const TAYLOR_REACH: f64 = 4.0;

/// `φ(t) = B e^{-tA₁}f − B e^{-tA₂}f` for patch-local `f`.
///
/// Small `t` uses `Σ (−t)^m/m! · B(A₁^m f − A₂^m f)` from sparse mat-vecs so
/// that the exact low-order cancellation survives; larger `t` uses the
/// eigendecompositions.
#[derive(Debug, Clone)]
pub struct HeatDifference {
    taylor: Vec<DVector<f64>>,
    order: Option<usize>,
    switch: f64,
    rows: [DMatrix<f64>; 2],
    coeffs: [DVector<f64>; 2],
    lambdas: [Vec<f64>; 2],
    gap: f64,
    source_norm: f64,
}

impl HeatDifference {
    pub fn new(pair: &ManifoldPair, observe: &RestrictionOperator, f: &DVector<f64>) -> Self {
        let mut v = [pair.embed(0, f), pair.embed(1, f)];
        let mut taylor = Vec::with_capacity(TAYLOR_TERMS);
        let mut order = None;
        for m in 0..TAYLOR_TERMS {
            let a = observe.apply(&pair.restrict(0, &v[0]));
            let b = observe.apply(&pair.restrict(1, &v[1]));
            let scale = observe.norm(&a).max(observe.norm(&b));
            let mut d = a - b;
            if observe.norm(&d) <= TAYLOR_ZERO * scale {
                d.fill(0.0);
            } else if order.is_none() {
                order = Some(m);
            }
            taylor.push(d);
            for (s, vs) in v.iter_mut().enumerate() {
                *vs = pair.side(s).manifold.apply_laplacian(vs);
            }
        }
        let switch = TAYLOR_REACH / pair.lambda_max();
        let rows = [0, 1].map(|s| {
            let phi = pair.side(s).spectrum.eigenvectors();
            let verts = pair.patch.vertices(s);
            DMatrix::from_fn(observe.len(), phi.ncols(), |r, c| phi[(verts[observe.indices()[r]], c)])
        });
        let coeffs = [0, 1].map(|s| pair.side(s).spectrum.coefficients(&pair.embed(s, f)));
        let lambdas = [0, 1].map(|s| pair.side(s).spectrum.eigenvalues().to_vec());
        HeatDifference {
            taylor,
            order,
            switch,
            rows,
            coeffs,
            lambdas,
            gap: pair.spectral_gap(),
            source_norm: pair.patch_norm(f),
        }
    }

    /// First Taylor order at which the two sides differ; `None` when they
    /// agree to every computed order.
    pub fn vanishing_order(&self) -> Option<usize> {
        self.order
    }

    /// `B(A₁^m f − A₂^m f)` with negligible differences zeroed.
    pub fn taylor_coefficient(&self, m: usize) -> &DVector<f64> {
        &self.taylor[m]
    }

    pub fn switch_time(&self) -> f64 {
        self.switch
    }

    pub fn spectral_gap(&self) -> f64 {
        self.gap
    }

    pub fn source_norm(&self) -> f64 {
        self.source_norm
    }

    fn spectral(&self, t: f64, keep: impl Fn(f64) -> bool) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows[0].nrows());
        for s in 0..2 {
            let c = DVector::from_iterator(
                self.coeffs[s].len(),
                self.coeffs[s].iter().zip(&self.lambdas[s]).map(|(c, &l)| if keep(l) { c * (-l * t).exp() } else { 0.0 }),
            );
            let part = &self.rows[s] * c;
            if s == 0 {
                out += part;
            } else {
                out -= part;
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        if t <= self.switch {
            if self.order.is_none() {
                return DVector::zeros(self.rows[0].nrows());
            }
            let mut out = DVector::zeros(self.rows[0].nrows());
            let mut w = 1.0;
            for (m, d) in self.taylor.iter().enumerate() {
                if m > 0 {
                    w *= -t / m as f64;
                }
                out.axpy(w, d, 1.0);
            }
            out
        } else {
            self.spectral(t, |_| true)
        }
    }

    /// Limit as `t → ∞` (the kernel parts), zero for mean-zero sources.
    pub fn limit(&self) -> DVector<f64> {
        self.spectral(0.0, |l| l == 0.0)
    }

    /// `∫₀^∞ t^β φ(t) dt` by trapezoid in `s = ln t`, accurate to `tol`
    /// (absolute, in the Euclidean norm of the observed vector).
    pub fn power_integral(&self, beta: f64, tol: f64) -> Result<PowerIntegral> {
        let cut = 1e-2 * tol;
        let limit = self.limit();
        if limit.norm() > 1e-9 * self.source_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::KernelComponent { component: limit.norm() / self.source_norm, tolerance: 1e-9 });
        }
        let ln_switch = self.switch.ln();
        let s_min = match self.order {
            None => ln_switch - 1.0,
            Some(p) => {
                let rate = beta + 1.0 + p as f64;
                if rate <= 0.0 {
                    return Ok(PowerIntegral::Divergent { order: p });
                }
                let lead = self.taylor[p].norm() / factorial(p);
                ((cut / lead).ln() / rate).min(ln_switch - 1.0)
            }
        };
        let bound: f64 = self.coeffs.iter().map(|c| c.norm()).sum::<f64>() * self.rows.iter().map(|r| r.norm()).sum::<f64>();
        let mut t = 1.0f64.max(2.0 * self.switch);
        for _ in 0..50 {
            t = ((bound / cut).ln().max(1.0) + (beta + 1.0) * t.ln()) / self.gap;
            t = t.max(2.0 * self.switch);
        }
        let s_max = t.ln();
        let refined = crate::quadrature::trapezoid_refine(
            |s| {
                let t = s.exp();
                self.eval(t) * (t.powf(beta + 1.0))
            },
            s_min,
            s_max,
            0.25,
            tol,
            12,
        )?;
        Ok(PowerIntegral::Finite { value: refined.value, log: refined.log, order: self.order })
    }
}

/// Outcome of a power-weighted integral of a heat difference.
#[derive(Debug, Clone)]
pub enum PowerIntegral {
    Finite {
        value: DVector<f64>,
        log: Vec<crate::quadrature::RefinementStep>,
        order: Option<usize>,
    },
    /// The integrand behaves like `t^{β+p}` near zero with `β + p ≤ −1`.
    Divergent { order: usize },
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|k| k as f64).product()
}

/// Closed mode on both sides.
pub fn both_closed(pair: &ManifoldPair) -> bool {
    pair.first.spectrum.mode() == BoundaryMode::Closed && pair.second.spectrum.mode() == BoundaryMode::Closed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Region;

    fn torus_pair(ny2: usize) -> ManifoldPair {
        let a = DiscreteManifold::flat_torus(8, 8, 1.0, 1.0).unwrap();
        let b = DiscreteManifold::flat_torus(8, ny2, 1.0, 1.0).unwrap();
        let ra = Region::grid_box(&a, 0, 0, 5, 5).unwrap();
        let rb = Region::grid_box(&b, 0, 0, 5, 5).unwrap();
        let patch = PatchIsometry::new(&a, &ra, &b, rb.vertices().to_vec()).unwrap();
        ManifoldPair::new(SpectralManifold::new(a).unwrap(), SpectralManifold::new(b).unwrap(), patch).unwrap()
    }

    #[test]
    fn embed_restrict_roundtrip() {
        let p = torus_pair(10);
        let v = DVector::from_fn(25, |i, _| i as f64);
        for s in 0..2 {
            let full = p.embed(s, &v);
            assert_eq!(p.restrict(s, &full), v);
            assert_eq!(p.leak(s, &full), 0.0);
        }
    }

    #[test]
    fn laplacian_transport_needs_a_ring() {
        let p = torus_pair(10);
        let mut v = DVector::zeros(25);
        v[12] = 1.0;
        let a = p.apply_laplacian(0, &v).unwrap();
        let b = p.apply_laplacian(1, &v).unwrap();
        assert_eq!(a, b);
        v[0] = 1.0;
        assert!(matches!(p.apply_laplacian(0, &v), Err(Error::MarginInsufficient { .. })));
    }

    #[test]
    fn restriction_is_idempotent() {
        let p = torus_pair(10);
        let b = RestrictionOperator::subset(&p.patch, vec![3, 1, 7]).unwrap();
        let v = DVector::from_fn(25, |i, _| (i as f64).sin());
        let once = b.project(&v);
        assert_eq!(b.project(&once), once);
        assert_eq!(b.apply(&v).len(), 3);
    }

    #[test]
    fn taylor_and_spectral_agree_at_the_switch() {
        let p = torus_pair(11);
        let b = RestrictionOperator::whole(&p.patch);
        let mut g = DVector::zeros(25);
        g[12] = 1.0;
        let f = p.apply_laplacian(0, &g).unwrap();
        let h = HeatDifference::new(&p, &b, &f);
        let t = h.switch_time();
        let taylor = h.eval(t);
        let spectral = b.apply(&(p.heat(0, t, &f).unwrap() - p.heat(1, t, &f).unwrap()));
        assert!((taylor - &spectral).norm() < 1e-12, "{}", spectral.norm());
        assert!(h.vanishing_order().unwrap() >= 3);
    }

    #[test]
    fn identical_sides_have_no_vanishing_order() {
        let a = DiscreteManifold::cycle(9).unwrap();
        let r = Region::range(&a, 0, 5).unwrap();
        let patch = PatchIsometry::identity(&a, &r).unwrap();
        let sm = SpectralManifold::new(a).unwrap();
        let p = ManifoldPair::new(sm.clone(), sm, patch).unwrap();
        let b = RestrictionOperator::whole(&p.patch);
        let f = DVector::from_vec(vec![0.0, 1.0, -2.0, 1.0, 0.0]);
        let h = HeatDifference::new(&p, &b, &f);
        assert_eq!(h.vanishing_order(), None);
        assert_eq!(h.eval(0.3), DVector::zeros(5));
    }
}
