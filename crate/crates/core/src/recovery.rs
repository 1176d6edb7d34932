//! Eigenvalues, multiplicities and local projector kernels recovered from
//! sampled local heat data; orthogonal alignment of eigenvector blocks.

use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::Region;
use crate::pair::SpectralManifold;
use crate::sources::SourceSpace;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `χ_O e^{-tA} f_i` on `t_j = t0 + j·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTraceSet {
    pub t0: f64,
    pub dt: f64,
    /// Per source: observation vertex × time.
    pub values: Vec<DMatrix<f64>>,
    /// Region-local source vectors, one per column.
    pub sources: DMatrix<f64>,
    pub region: Vec<usize>,
    pub mass: Vec<f64>,
}

impl HeatTraceSet {
    pub fn samples(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples()).map(|j| self.t0 + j as f64 * self.dt).collect()
    }

    /// Every (source, observation) series as a row.
    pub fn channels(&self) -> DMatrix<f64> {
        let obs = self.region.len();
        let mut out = DMatrix::zeros(self.values.len() * obs, self.samples());
        for (i, v) in self.values.iter().enumerate() {
            out.rows_mut(i * obs, obs).copy_from(v);
        }
        out
    }

    /// `t, source_id, obs_vertex, value` rows.
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["t", "source_id", "obs_vertex", "value"]);
        let times = self.times();
        for (i, v) in self.values.iter().enumerate() {
            for (j, &tj) in times.iter().enumerate() {
                for (x, &vert) in self.region.iter().enumerate() {
                    t.push(vec![num(tj), i.to_string(), vert.to_string(), num(v[(x, j)])]);
                }
            }
        }
        t
    }
}

pub fn sample_traces(sm: &SpectralManifold, o: &Region, space: &SourceSpace, t0: f64, dt: f64, samples: usize) -> Result<HeatTraceSet> {
    if !(t0 >= 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time grid t0 = {t0}, dt = {dt}")));
    }
    if samples < 3 {
        return Err(Error::TooSmall { what: "sample count", got: samples, min: 3 });
    }
    if space.basis.nrows() != o.len() {
        return Err(Error::ShapeMismatch("source basis does not match the region".into()));
    }
    let d = &sm.spectrum;
    let mut values = Vec::with_capacity(space.dim());
    for i in 0..space.dim() {
        let mut f = DVector::zeros(sm.manifold.n());
        for (r, &v) in o.vertices().iter().enumerate() {
            f[v] = space.basis[(r, i)];
        }
        let c = d.coefficients(&f);
        let rows = DMatrix::from_fn(o.len(), d.n_modes(), |x, k| d.eigenvectors()[(o.vertices()[x], k)]);
        let mut block = DMatrix::zeros(o.len(), samples);
        for j in 0..samples {
            let t = t0 + j as f64 * dt;
            let ck = DVector::from_iterator(c.len(), c.iter().zip(d.eigenvalues()).map(|(c, l)| c * (-l * t).exp()));
            block.set_column(j, &(&rows * ck));
        }
        values.push(block);
    }
    Ok(HeatTraceSet {
        t0,
        dt,
        values,
        sources: space.basis.clone(),
        region: o.vertices().to_vec(),
        mass: space.mass.clone(),
    })
}

/// How channels are combined before the pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilStrategy {
    /// Block-Hankel matrix stacking every channel.
    Stacked,
    /// A single channel: seeded Gaussian combination of all channels.
    Aggregated { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PencilResult {
    /// Ascending decay rates.
    pub lambdas: Vec<f64>,
    /// Singular values of the Hankel matrix, descending.
    pub singular_values: Vec<f64>,
    /// Pencil eigenvalues rejected as complex or outside `(0, 1]`.
    pub discarded: usize,
}

const RANK_FLOOR: f64 = 1e-13;

pub fn pencil_eigenvalues(traces: &HeatTraceSet, order: usize) -> Result<PencilResult> {
    pencil_eigenvalues_with(traces, order, PencilStrategy::Stacked)
}

pub fn pencil_eigenvalues_with(traces: &HeatTraceSet, order: usize, strategy: PencilStrategy) -> Result<PencilResult> {
    let channels = traces.channels();
    let channels = match strategy {
        PencilStrategy::Stacked => channels,
        PencilStrategy::Aggregated { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: DVector<f64> = DVector::from_fn(channels.nrows(), |_, _| StandardNormal.sample(&mut rng));
            DMatrix::from_row_slice(1, channels.ncols(), (w.transpose() * &channels).as_slice())
        }
    };
    pencil_from_channels(&channels, traces.dt, order)
}

fn hankel(channels: &DMatrix<f64>, pencil: usize) -> DMatrix<f64> {
    let n = channels.ncols();
    let rows = n - pencil;
    let mut h = DMatrix::zeros(channels.nrows() * rows, pencil + 1);
    for c in 0..channels.nrows() {
        for i in 0..rows {
            for j in 0..=pencil {
                h[(c * rows + i, j)] = channels[(c, i + j)];
            }
        }
    }
    h
}

fn sorted_svd_v(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let f = linalg::svd(&h);
    (f.s, f.v)
}

/// Matrix pencil on uniformly sampled exponential sums, one channel per row.
pub fn pencil_from_channels(channels: &DMatrix<f64>, dt: f64, order: usize) -> Result<PencilResult> {
    let n = channels.ncols();
    if order == 0 {
        return Err(Error::InvalidParameter("model order must be positive".into()));
    }
    if 2 * order > n.saturating_sub(1) {
        return Err(Error::InvalidParameter(format!("model order {order} exceeds half of {} intervals", n.saturating_sub(1))));
    }
    let pencil = n / 2;
    let (sv, v) = sorted_svd_v(hankel(channels, pencil));
    if sv.len() < order || sv[order - 1] <= RANK_FLOOR * sv[0] {
        return Err(Error::RankDeficient { order, profile: sv });
    }
    let vr = v.columns(0, order);
    let v1 = vr.rows(0, pencil).into_owned();
    let v2 = vr.rows(1, pencil).into_owned();
    let f = linalg::svd(&v1).solve(&v2, 1e-14);
    let mut lambdas = Vec::new();
    let mut discarded = 0;
    for z in linalg::eigenvalues(&f) {
        if z.im.abs() <= 1e-8 * z.norm() && z.re > 0.0 && z.re <= 1.0 + 1e-8 {
            lambdas.push((-z.re.ln() / dt).max(0.0));
        } else {
            discarded += 1;
        }
    }
    lambdas.sort_by(f64::total_cmp);
    Ok(PencilResult { lambdas, singular_values: sv, discarded })
}

/// Number of Hankel singular values above `1e-11·σ_max`, capped at half
/// the sample count.
pub fn estimate_model_order(traces: &HeatTraceSet) -> usize {
    let channels = traces.channels();
    let pencil = channels.ncols() / 2;
    let (sv, _) = sorted_svd_v(hankel(&channels, pencil));
    sv.iter().filter(|&&s| s > 1e-11 * sv[0]).count().min((channels.ncols() - 1) / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredMode {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Symmetric PSD kernel on the region, truncated to `multiplicity`.
    pub kernel: DMatrix<f64>,
    /// `kernel = factor · factorᵀ`, one column per multiplicity.
    pub factor: DMatrix<f64>,
    /// Relative Frobenius distance between the raw kernel and `kernel`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredSpectrum {
    pub modes: Vec<RecoveredMode>,
    pub singular_values: Vec<f64>,
    /// `‖E C − Y‖ / ‖Y‖` of the exponential fit.
    pub fit_residual: f64,
    pub condition: f64,
}

impl RecoveredSpectrum {
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["lambda_hat", "multiplicity", "kernel_frobenius_norm", "residual"]);
        for m in &self.modes {
            t.push(vec![num(m.lambda), m.multiplicity.to_string(), num(m.kernel.norm()), num(m.residual)]);
        }
        t
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }
}

const VANDERMONDE_LIMIT: f64 = 1e10;
const RANK_TOLERANCE: f64 = 1e-6;

/// Fits every channel to `Σ_k c_k e^{-λ̂_k t}` and turns the amplitudes
/// into kernels `K_k` using the known sources.
pub fn recover_projectors(traces: &HeatTraceSet, lambdas: &[f64]) -> Result<RecoveredSpectrum> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("no eigenvalue estimates".into()));
    }
    let times = traces.times();
    let e = DMatrix::from_fn(times.len(), lambdas.len(), |j, k| (-lambdas[k] * times[j]).exp());
    let ef = linalg::svd(&e);
    let sv = ef.s.clone();
    let condition = sv[0] / sv[sv.len() - 1];
    if !(condition <= VANDERMONDE_LIMIT) {
        return Err(Error::IllConditioned(condition));
    }
    let y = traces.channels().transpose();
    let c = ef.solve(&y, 0.0);
    let fit_residual = (&e * &c - &y).norm() / y.norm();
    let obs = traces.region.len();
    let weighted = DMatrix::from_fn(obs, traces.sources.ncols(), |r, i| traces.mass[r] * traces.sources[(r, i)]);
    let wf = linalg::svd(&weighted);
    if wf.rank(1e-10) < obs {
        return Err(Error::InvalidParameter("sources do not span the observation region".into()));
    }
    let pinv = wf.pseudo_inverse(1e-12);
    let mut modes = Vec::with_capacity(lambdas.len());
    for (k, &lambda) in lambdas.iter().enumerate() {
        // Channel i·obs + x holds source i observed at x.
        let amp = DMatrix::from_fn(obs, traces.sources.ncols(), |x, i| c[(k, i * obs + x)]);
        let raw = amp * &pinv;
        let sym = (&raw + raw.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut idx: Vec<usize> = (0..obs).filter(|&i| eig.eigenvalues[i] > RANK_TOLERANCE * top).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let factor = DMatrix::from_fn(obs, idx.len(), |r, j| eig.eigenvectors[(r, idx[j])] * eig.eigenvalues[idx[j]].sqrt());
        let kernel = &factor * factor.transpose();
        let residual = (&raw - &kernel).norm() / raw.norm().max(f64::MIN_POSITIVE);
        modes.push(RecoveredMode { lambda, multiplicity: idx.len(), kernel, factor, residual });
    }
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(RecoveredSpectrum { modes, singular_values: sv, fit_residual, condition })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub rotation: DMatrix<f64>,
    pub residual: f64,
}

/// Orthogonal `P` minimizing `‖Φ₁ − Φ₂Pᵀ‖_F`.
pub fn align_procrustes(phi1: &DMatrix<f64>, phi2: &DMatrix<f64>) -> Result<Procrustes> {
    if phi1.shape() != phi2.shape() {
        return Err(Error::ShapeMismatch(format!("blocks {:?} and {:?}", phi1.shape(), phi2.shape())));
    }
    let f = linalg::svd(&(phi2.transpose() * phi1));
    let q = f.u * f.v.transpose();
    let residual = (phi1 - phi2 * &q).norm();
    Ok(Procrustes { rotation: q.transpose(), residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub lambda_1: Option<f64>,
    pub lambda_2: Option<f64>,
    pub matched: bool,
    pub mult_ok: bool,
    pub kernel_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub rows: Vec<ComparisonRow>,
}

impl SpectrumComparison {
    pub fn unmatched(&self) -> usize {
        self.rows.iter().filter(|r| !r.matched).count()
    }

    pub fn all_agree(&self) -> bool {
        self.rows.iter().all(|r| r.matched && r.mult_ok)
    }

    pub fn max_kernel_dist(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.kernel_dist).fold(0.0, f64::max)
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["lambda_1", "lambda_2", "matched", "mult_ok", "kernel_dist"]);
        let opt = |x: Option<f64>| x.map_or(String::new(), num);
        for r in &self.rows {
            t.push(vec![opt(r.lambda_1), opt(r.lambda_2), r.matched.to_string(), r.mult_ok.to_string(), opt(r.kernel_dist)]);
        }
        t
    }
}

/// Merges two recovered spectra, pairing values within `tol·max(1, |λ|)`.
pub fn compare_spectra(r1: &RecoveredSpectrum, r2: &RecoveredSpectrum, tol: f64) -> SpectrumComparison {
    let (a, b) = (&r1.modes, &r2.modes);
    let (mut i, mut j) = (0, 0);
    let mut rows = Vec::new();
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if (x.lambda - y.lambda).abs() <= tol * x.lambda.abs().max(1.0) => {
                let kernel_dist = (x.kernel.shape() == y.kernel.shape()).then(|| (&x.kernel - &y.kernel).norm());
                rows.push(ComparisonRow {
                    lambda_1: Some(x.lambda),
                    lambda_2: Some(y.lambda),
                    matched: true,
                    mult_ok: x.multiplicity == y.multiplicity,
                    kernel_dist,
                });
                i += 1;
                j += 1;
            }
            (Some(x), y) if y.is_none_or(|y| x.lambda < y.lambda) => {
                rows.push(ComparisonRow { lambda_1: Some(x.lambda), lambda_2: None, matched: false, mult_ok: false, kernel_dist: None });
                i += 1;
            }
            (_, Some(y)) => {
                rows.push(ComparisonRow { lambda_1: None, lambda_2: Some(y.lambda), matched: false, mult_ok: false, kernel_dist: None });
                j += 1;
            }
            (None, None) => unreachable!(),
            (Some(_), None) => unreachable!(),
        }
    }
    SpectrumComparison { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::heat_apply;
    use crate::manifold::DiscreteManifold;
    use crate::spectral::{group_eigenvalues, projector_kernel};

    #[test]
    fn synthetic_two_exponentials() {
        let dt = 0.05;
        let data = DMatrix::from_fn(1, 61, |_, j| {
            let t = j as f64 * dt;
            (-t).exp() + (-3.0 * t).exp()
        });
        let r = pencil_from_channels(&data, dt, 2).unwrap();
        assert!((r.lambdas[0] - 1.0).abs() < 1e-6 && (r.lambdas[1] - 3.0).abs() < 1e-6);
        assert!(pencil_from_channels(&data, dt, 0).is_err());
        assert!(pencil_from_channels(&data, dt, 31).is_err());
        assert!(matches!(pencil_from_channels(&data, dt, 4), Err(Error::RankDeficient { .. })));
    }

    fn cycle_traces() -> (SpectralManifold, Region, HeatTraceSet) {
        let sm = SpectralManifold::new(DiscreteManifold::cycle(12).unwrap()).unwrap();
        let o = Region::range(&sm.manifold, 0, 4).unwrap();
        let space = SourceSpace::d0(&sm.manifold, &o);
        let traces = sample_traces(&sm, &o, &space, 0.1, 0.1, 61).unwrap();
        (sm, o, traces)
    }

    #[test]
    fn traces_match_heat_apply() {
        let (sm, o, traces) = cycle_traces();
        let mut f = DVector::zeros(12);
        f[o.vertices()[2]] = 1.0;
        let u = heat_apply(&sm.spectrum, traces.t0 + 5.0 * traces.dt, &f).unwrap();
        for (x, &v) in o.vertices().iter().enumerate() {
            assert!((traces.values[2][(x, 5)] - u[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_spectrum_and_kernels_from_local_traces() {
        let (sm, o, traces) = cycle_traces();
        let pencil = pencil_eigenvalues(&traces, 7).unwrap();
        let want = [0.0, 2.0 - 3f64.sqrt(), 1.0, 2.0, 3.0, 2.0 + 3f64.sqrt(), 4.0];
        for (got, w) in pencil.lambdas.iter().zip(want) {
            assert!((got - w).abs() < 1e-6, "{got} vs {w}");
        }
        let rec = recover_projectors(&traces, &pencil.lambdas).unwrap();
        let groups = group_eigenvalues(&sm.spectrum, 1e-6).unwrap();
        let mults: Vec<usize> = rec.modes.iter().map(|m| m.multiplicity).collect();
        assert_eq!(mults, vec![1, 2, 2, 2, 2, 2, 1]);
        for (m, g) in rec.modes.iter().zip(&groups) {
            let k = projector_kernel(&sm.spectrum, g, o.vertices());
            assert!((&m.kernel - &k).norm() / k.norm() < 1e-3);
        }
        let total: f64 = rec.modes.iter().map(|m| m.kernel.trace()).sum();
        assert!((total - 4.0).abs() < 1e-4);
    }

    #[test]
    fn mean_zero_sources_reveal_nonzero_eigenvalues() {
        let sm = SpectralManifold::new(DiscreteManifold::cycle(12).unwrap()).unwrap();
        let o = Region::range(&sm.manifold, 0, 4).unwrap();
        let mut basis = DMatrix::zeros(4, 3);
        for i in 0..3 {
            basis[(i, i)] = 1.0;
            basis[(i + 1, i)] = -1.0;
        }
        let space = SourceSpace { kind: crate::sources::SourceKind::D0, basis, mass: vec![1.0; 4] };
        let traces = sample_traces(&sm, &o, &space, 0.1, 0.1, 61).unwrap();
        let pencil = pencil_eigenvalues(&traces, 6).unwrap();
        let want = [2.0 - 3f64.sqrt(), 1.0, 2.0, 3.0];
        for (got, w) in pencil.lambdas.iter().zip(want) {
            assert!((got - w).abs() / w < 1e-3);
        }
        assert!(recover_projectors(&traces, &pencil.lambdas).is_err());
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let phi1 = DMatrix::from_fn(5, 2, |i, j| ((i * 3 + j * 5) as f64).sin());
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let phi2 = &phi1 * &r;
        let p = align_procrustes(&phi1, &phi2).unwrap();
        assert!((&p.rotation - &r).amax() < 1e-10);
        assert!(p.residual < 1e-10);
        let same = align_procrustes(&phi1, &phi1).unwrap();
        assert!((same.rotation - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(align_procrustes(&phi1, &DMatrix::zeros(5, 3)).is_err());
    }

    #[test]
    fn comparison_of_a_spectrum_with_itself() {
        let (_, _, traces) = cycle_traces();
        let pencil = pencil_eigenvalues(&traces, 7).unwrap();
        let rec = recover_projectors(&traces, &pencil.lambdas).unwrap();
        let cmp = compare_spectra(&rec, &rec, 1e-6);
        assert!(cmp.all_agree());
        assert_eq!(cmp.max_kernel_dist(), 0.0);
        let mut shifted = rec.clone();
        shifted.modes[3].lambda += 0.5;
        shifted.modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        assert_eq!(compare_spectra(&rec, &shifted, 1e-6).unmatched(), 2);
    }
}
