use super::{Check, ExperimentConfig, ExperimentReport};
use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use crate::fractional::{
    frac_inverse_quadrature, frac_inverse_spectral, heat_apply, moment_identity, heat_difference_moments, decay_fit, FracParams,
};
use crate::manifold::{double_manifold, DiscreteManifold, PatchIsometry, Region};
use crate::pair::{ManifoldPair, RestrictionOperator, SpectralManifold};
use crate::quadrature::refinement_table;
use crate::recovery::{
    align_procrustes, compare_spectra, estimate_model_order, pencil_eigenvalues_with, recover_projectors, sample_traces,
    HeatTraceSet, PencilResult, PencilStrategy, RecoveredSpectrum,
};
use crate::sources::{build_source_space, compare_s2s, peel_t_ell, SourceKind, SourceSpace};
use crate::spectral::{decompose, group_eigenvalues, projector_kernel, restricted_block, SpectralDecomposition};
use crate::wave::{duhamel_state, energy, ode_oracle, transmute_heat, transmute_scalar, TimeProfile, TransmuteParams, WaveSource};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Names accepted by [`run_experiment`].
pub const EXPERIMENTS: &[&str] = &[
    "isometric_consistency",
    "torus_distinguish",
    "nell_pipeline",
    "doubling",
    "analytic_identities",
    "fractional_equivalence",
    "wave_oracle",
    "recovery",
];

pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match name {
        "isometric_consistency" => exp_isometric_consistency(cfg),
        "torus_distinguish" => exp_torus_distinguish(cfg),
        "nell_pipeline" => exp_nell_pipeline(cfg),
        "doubling" => exp_doubling(cfg),
        "analytic_identities" => exp_analytic_identities(cfg),
        "fractional_equivalence" => exp_fractional_equivalence(cfg),
        "wave_oracle" => exp_wave_oracle(cfg),
        "recovery" => exp_recovery(cfg),
        _ => Err(Error::Config(format!("unknown experiment {name:?}; known: {}", EXPERIMENTS.join(", ")))),
    }
}

pub(super) const DEFAULT_TIMES: &[f64] = &[0.1, 0.5, 1.0, 2.0];

fn permutation(n: usize, seed: u64, identity: bool) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if !identity {
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    perm
}

pub(super) fn relabeled_pair(m: &DiscreteManifold, r: &Region, cfg: &ExperimentConfig) -> Result<(ManifoldPair, Vec<usize>)> {
    let perm = permutation(m.n(), cfg.seed(), cfg.relabel.as_deref() == Some("identity"));
    let other = m.relabel(&perm)?;
    let patch = PatchIsometry::relabeled(m, r, &other, &perm)?;
    let pair = ManifoldPair::new(SpectralManifold::new(m.clone())?, SpectralManifold::new(other)?, patch)?;
    Ok((pair, perm))
}

/// Pair sharing the same region spec on both grids.
pub(super) fn grid_pair(a: DiscreteManifold, b: DiscreteManifold, spec: &str) -> Result<ManifoldPair> {
    let ra = super::parse_region(&a, spec)?;
    let rb = super::parse_region(&b, spec)?;
    let patch = PatchIsometry::new(&a, &ra, &b, rb.vertices().to_vec())?;
    ManifoldPair::new(SpectralManifold::new(a)?, SpectralManifold::new(b)?, patch)
}

pub(super) fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Relative discrepancies of the restricted data of a pair.
struct PairData {
    s2s: f64,
    heat: f64,
    wave: f64,
    kernel: f64,
    s2s_table: CsvTable,
}

fn heat_kernel_block(d: &SpectralDecomposition, verts: &[usize], t: f64) -> DMatrix<f64> {
    let phi = d.eigenvectors();
    let l = d.eigenvalues();
    DMatrix::from_fn(verts.len(), verts.len(), |a, b| {
        (0..d.n_modes()).map(|k| (-l[k] * t).exp() * phi[(verts[a], k)] * phi[(verts[b], k)]).sum()
    })
}

fn pair_data(pair: &ManifoldPair, cfg: &ExperimentConfig, times: &[f64]) -> Result<PairData> {
    let space = build_source_space(pair, SourceKind::Dtilde0)?;
    let p = FracParams::new(cfg.alpha(), pair.spectral_gap(), cfg.quad_tol())?;
    let s2s = compare_s2s(pair, &space, &p)?;
    let mut heat: f64 = 0.0;
    for j in 0..space.dim() {
        let f = space.column(j);
        for &t in times {
            let a = pair.heat(0, t, &f)?;
            let b = pair.heat(1, t, &f)?;
            heat = heat.max(pair.patch_norm(&(&a - &b)) / pair.patch_norm(&a).max(f64::MIN_POSITIVE));
        }
    }
    let wave_t = cfg.wave_t.unwrap_or(3.0);
    let profile = TimeProfile::new(0.1 * wave_t, 0.4 * wave_t, wave_t + 1.0, 1.0)?;
    let shape = space.column(0);
    let u: Vec<DVector<f64>> = (0..2)
        .map(|s| {
            let src = WaveSource { profile, shape: pair.embed(s, &shape) };
            Ok(pair.restrict(s, &duhamel_state(&pair.side(s).spectrum, &src, wave_t)?.0))
        })
        .collect::<Result<_>>()?;
    let wave = pair.patch_norm(&(&u[0] - &u[1])) / pair.patch_norm(&u[0]).max(f64::MIN_POSITIVE);
    let mut kernel: f64 = 0.0;
    for &t in times {
        let k1 = heat_kernel_block(&pair.first.spectrum, pair.patch.vertices(0), t);
        let k2 = heat_kernel_block(&pair.second.spectrum, pair.patch.vertices(1), t);
        kernel = kernel.max((&k1 - &k2).amax() / k1.amax());
    }
    Ok(PairData { s2s: s2s.max(), heat, wave, kernel, s2s_table: s2s.table() })
}

fn family_table(rows: &[(&str, &PairData)]) -> CsvTable {
    let mut t = CsvTable::new(&["case", "s2s", "heat", "wave", "heat_kernel"]);
    for (name, d) in rows {
        t.push(vec![name.to_string(), num(d.s2s), num(d.heat), num(d.wave), num(d.kernel)]);
    }
    t
}

/// Same manifold under a vertex relabeling: all restricted data agree. A
/// copy with weights changed away from the patch is the negative control.
pub fn exp_isometric_consistency(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:10x10")?;
    let r = cfg.region_or(&m, "box:0,0,4,4")?;
    let tol = cfg.tol_or(1e-10);
    let times = cfg.times_or(DEFAULT_TIMES);
    let (pair, perm) = relabeled_pair(&m, &r, cfg)?;
    let data = pair_data(&pair, cfg, &times)?;

    let mut near = vec![false; m.n()];
    for &v in r.vertices() {
        near[perm[v]] = true;
        for e in m.neighbors(v) {
            near[perm[e.to]] = true;
        }
    }
    let corrupted = pair.second.manifold.map_weights(|i, j, w| if near[i] || near[j] { w } else { 1.5 * w })?;
    let patch = PatchIsometry::relabeled(&m, &r, &corrupted, &perm)?;
    let bad = ManifoldPair::new(pair.first.clone(), SpectralManifold::new(corrupted)?, patch)?;
    let control = pair_data(&bad, cfg, &times)?;

    let mut rep = ExperimentReport::new("isometric_consistency");
    for (name, v, c) in [
        ("s2s", data.s2s, control.s2s),
        ("heat", data.heat, control.heat),
        ("wave", data.wave, control.wave),
        ("heat_kernel", data.kernel, control.kernel),
    ] {
        rep.check(Check::at_most(format!("{name}_discrepancy"), v, tol));
        rep.check(Check::at_least(format!("control_{name}_detected"), c, 10.0 * tol));
    }
    rep.table("families", family_table(&[("relabeled", &data), ("corrupted", &control)]));
    rep.table("s2s", data.s2s_table);
    Ok(rep)
}

pub(super) fn local_traces(sm: &SpectralManifold, o: &Region, space: &SourceSpace, cfg: &ExperimentConfig) -> Result<HeatTraceSet> {
    let dt = cfg.dt.unwrap_or(0.1);
    sample_traces(sm, o, space, cfg.t0.unwrap_or(dt), dt, cfg.samples.unwrap_or(61))
}

pub(super) fn recover_from(traces: &HeatTraceSet, cfg: &ExperimentConfig, order: Option<usize>) -> Result<(PencilResult, RecoveredSpectrum)> {
    let order = match cfg.order.or(order) {
        Some(r) => r,
        None => estimate_model_order(traces),
    };
    let strategy = match cfg.pencil.as_deref() {
        Some("aggregated") => PencilStrategy::Aggregated { seed: cfg.seed() },
        _ => PencilStrategy::Stacked,
    };
    let pencil = pencil_eigenvalues_with(traces, order, strategy)?;
    let rec = recover_projectors(traces, &pencil.lambdas)?;
    Ok((pencil, rec))
}

fn local_recovery(sm: &SpectralManifold, o: &Region, cfg: &ExperimentConfig, order: Option<usize>) -> Result<RecoveredSpectrum> {
    let traces = local_traces(sm, o, &SourceSpace::d0(&sm.manifold, o), cfg)?;
    Ok(recover_from(&traces, cfg, order)?.1)
}

fn leading_mismatch(a: &RecoveredSpectrum, b: &RecoveredSpectrum, count: usize) -> f64 {
    a.lambdas().iter().zip(b.lambdas()).take(count).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Two flat tori sharing a patch: every data family separates them, while
/// the same torus twice agrees.
pub fn exp_torus_distinguish(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let spec = cfg.region.clone().unwrap_or_else(|| "box:0,0,4,4".into());
    let tol = cfg.tol_or(1e-10);
    let times = cfg.times_or(DEFAULT_TIMES);
    let a = cfg.manifold_or("torus:8x8")?;
    let b = cfg.manifold2_or("torus:8x12")?;
    let pair = grid_pair(a.clone(), b, &spec)?;
    let twin = grid_pair(a.clone(), a, &spec)?;

    let moments = |pair: &ManifoldPair| -> Result<(f64, CsvTable)> {
        let g_support = pair.patch.interior(1);
        let mut g = DVector::zeros(pair.patch_len());
        for (i, &p) in g_support.iter().enumerate() {
            g[p] = [1.0, -0.5, 0.3, 0.8][i % 4];
        }
        let f = pair.apply_laplacian(0, &g)?;
        let f = &f / pair.patch_norm(&f);
        let p = FracParams::new(cfg.alpha(), pair.spectral_gap(), cfg.quad_tol())?;
        let b = RestrictionOperator::whole(&pair.patch);
        let ms = heat_difference_moments(pair, &b, &f, cfg.k_max.unwrap_or(10), &p)?;
        let mut t = CsvTable::new(&["k", "moment_norm", "finite"]);
        let mut worst: f64 = 0.0;
        for m in &ms {
            t.push(vec![m.k.to_string(), num(m.norm()), m.value.is_some().to_string()]);
            if m.value.is_some() {
                worst = worst.max(m.norm());
            }
        }
        Ok((worst, t))
    };
    let recovered = |pair: &ManifoldPair| -> Result<(RecoveredSpectrum, RecoveredSpectrum)> {
        Ok((
            local_recovery(&pair.first, pair.patch.first(), cfg, None)?,
            local_recovery(&pair.second, pair.patch.second(), cfg, None)?,
        ))
    };

    let data = pair_data(&pair, cfg, &times)?;
    let (moment, moment_table) = moments(&pair)?;
    let (r1, r2) = recovered(&pair)?;
    let mismatch = leading_mismatch(&r1, &r2, 5);
    let same = pair_data(&twin, cfg, &times)?;
    let (same_moment, _) = moments(&twin)?;
    let (s1, s2) = recovered(&twin)?;

    let mut rep = ExperimentReport::new("torus_distinguish");
    rep.check(Check::at_least("s2s_discrepancy", data.s2s, 10.0 * tol));
    rep.check(Check::at_least("heat_discrepancy", data.heat, 10.0 * tol));
    rep.check(Check::at_least("moment_norm", moment, 10.0 * cfg.quad_tol()));
    rep.check(Check::at_least("recovered_mismatch", mismatch, 1e-2));
    rep.check(Check::at_most("control_s2s", same.s2s, tol));
    rep.check(Check::at_most("control_heat", same.heat, tol));
    rep.check(Check::at_most("control_moment_norm", same_moment, tol));
    rep.check(Check::at_most("control_recovered_mismatch", leading_mismatch(&s1, &s2, 5), tol));
    rep.table("families", family_table(&[("distinct", &data), ("same", &same)]));
    rep.table("moments", moment_table);
    rep.table("spectrum_comparison", compare_spectra(&r1, &r2, 1e-3).table());
    rep.table("recovered_first", r1.table());
    rep.table("recovered_second", r2.table());
    Ok(rep)
}

/// `N_ℓ` sources and the peeling of `T_ℓ` on an isometric pair; a
/// non-isometric pair already differs on the first comparison.
pub fn exp_nell_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ell = cfg.ell.unwrap_or(1);
    let tol = cfg.tol_or(1e-9);
    let spec = cfg.region.clone().unwrap_or_else(|| "box:0,0,15,15".into());
    let m = cfg.manifold_or("torus:16x16")?;
    let r = super::parse_region(&m, &spec)?;
    let (pair, _) = relabeled_pair(&m, &r, cfg)?;
    let p = FracParams::new(cfg.alpha(), pair.spectral_gap(), cfg.quad_tol())?;

    let space = SourceSpace::nell(&pair, ell)?;
    let s2s = compare_s2s(&pair, &space, &p)?;
    let support = pair.patch.interior(2 * (ell + 1));
    if support.is_empty() {
        return Err(Error::MarginInsufficient { needed: 2 * (ell + 1), available: r.margin() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut f = DVector::zeros(pair.patch_len());
    for (&i, x) in support.iter().zip(uniform_vector(&mut rng, support.len())) {
        f[i] = x;
    }
    let peel = peel_t_ell(&pair, ell, &f, &cfg.times_or(DEFAULT_TIMES))?;

    let other = grid_pair(m.clone(), cfg.manifold2_or("torus:16x20")?, &spec)?;
    let other_space = SourceSpace::nell(&other, ell)?;
    let other_s2s = compare_s2s(&other, &other_space, &p)?;

    let mut rep = ExperimentReport::new(format!("nell_pipeline_l{ell}"));
    rep.check(Check::at_least("source_dimension", space.dim() as f64, 1.0));
    rep.check(Check::at_most("s2s_discrepancy", s2s.max(), tol));
    rep.check(Check::at_most("membership", peel.membership, tol));
    for (i, s) in peel.steps.iter().enumerate() {
        rep.check(Check::at_most(format!("peel_step_{i}"), s.heat_discrepancy.max(s.integration_residual), tol));
    }
    rep.check(Check::at_least("control_s2s_detected", other_s2s.max(), 10.0 * tol));
    rep.table("s2s", s2s.table());
    rep.table("peeling", peel.table());
    rep.table("control_s2s", other_s2s.table());
    Ok(rep)
}

/// Dirichlet problem against its double: spectrum containment through odd
/// eigenvectors and the fractional identity for odd extensions.
pub fn exp_doubling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("path:6")?;
    let tol = cfg.tol_or(1e-9);
    let dm = double_manifold(&m)?;
    let d = decompose(&m)?;
    let dd = decompose(&dm.doubled)?;

    let mut spectrum = CsvTable::new(&["k", "lambda", "nearest_double", "distance", "odd_residual", "odd_norm"]);
    let (mut worst_gap, mut worst_res, mut worst_norm): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..d.n_modes() {
        let l = d.eigenvalues()[k];
        let nearest = dd.eigenvalues().iter().cloned().min_by(|a, b| (a - l).abs().total_cmp(&(b - l).abs())).unwrap();
        let phi: Vec<f64> = d.eigenvectors().column(k).iter().cloned().collect();
        let psi = DVector::from_vec(dm.odd_extension(&phi)) / 2f64.sqrt();
        let res = dm.doubled.norm(&(dm.doubled.apply_laplacian(&psi) - &psi * l));
        let norm_err = (dm.doubled.norm(&psi) - 1.0).abs();
        worst_gap = worst_gap.max((nearest - l).abs());
        worst_res = worst_res.max(res);
        worst_norm = worst_norm.max(norm_err);
        spectrum.push(vec![k.to_string(), num(l), num(nearest), num((nearest - l).abs()), num(res), num(norm_err)]);
    }

    let r = cfg.region_or(&m, "list:2,3,4")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut f = DVector::zeros(m.n());
    for (&v, x) in r.vertices().iter().zip(uniform_vector(&mut rng, r.len())) {
        if m.is_boundary(v) {
            return Err(Error::InvalidRegion(format!("source vertex {v} lies on the boundary")));
        }
        f[v] = x;
    }
    let p = FracParams::new(cfg.alpha(), d.smallest_positive().min(dd.smallest_positive()), cfg.quad_tol())?;
    let u = frac_inverse_spectral(&d, &p, &f)?;
    let odd = DVector::from_vec(dm.odd_extension(f.as_slice()));
    let mean: f64 = odd.iter().zip(dm.doubled.mass()).map(|(x, w)| x * w).sum();
    let ud = frac_inverse_spectral(&dd, &p, &odd)?;
    let scale = u.amax();
    let mut identity = CsvTable::new(&["vertex", "on_double", "direct", "difference"]);
    let mut err: f64 = 0.0;
    for v in m.free_vertices() {
        let a = ud[dm.embed_plus[v]];
        err = err.max((a - u[v]).abs() / scale);
        identity.push(vec![v.to_string(), num(a), num(u[v]), num(a - u[v])]);
    }

    // One-copy extension, made mean zero so the inverse exists.
    let mut one = DVector::zeros(dm.doubled.n());
    for v in 0..m.n() {
        one[dm.embed_plus[v]] = f[v];
    }
    let total: f64 = dm.doubled.mass().iter().sum();
    let shift: f64 = one.iter().zip(dm.doubled.mass()).map(|(x, w)| x * w).sum::<f64>() / total;
    one.add_scalar_mut(-shift);
    let uo = frac_inverse_spectral(&dd, &p, &one)?;
    let control = m.free_vertices().iter().map(|&v| (uo[dm.embed_plus[v]] - u[v]).abs() / scale).fold(0.0, f64::max);

    let mut rep = ExperimentReport::new("doubling");
    rep.check(Check::at_most("spectrum_containment", worst_gap, tol.min(1e-10)));
    rep.check(Check::at_most("odd_eigenvector_residual", worst_res, tol.min(1e-10)));
    rep.check(Check::at_most("odd_eigenvector_norm", worst_norm, tol.min(1e-10)));
    rep.check(Check::at_most("odd_extension_mean", mean.abs(), 1e-14));
    rep.check(Check::at_most("identity_error", err, tol));
    rep.check(Check::at_least("control_one_copy_error", control, 10.0 * tol));
    rep.table("spectrum", spectrum);
    rep.table("identity", identity);
    Ok(rep)
}

fn smooth_patch_source(pair: &ManifoldPair, depth: usize) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(pair.patch_len());
    for (i, &p) in pair.patch.interior(depth).iter().enumerate() {
        g[p] = [1.0, -0.5, 0.3, 0.8][i % 4];
    }
    let f = pair.apply_laplacian(0, &g)?;
    Ok(&f / pair.patch_norm(&f))
}

/// Moment identity, moments, transmutation and fitted off-diagonal decay.
pub fn exp_analytic_identities(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let spec = cfg.region.clone().unwrap_or_else(|| "box:0,0,10,10".into());
    let a = cfg.manifold_or("torus:14x14")?;
    let b = cfg.manifold2_or("torus:14x18")?;
    let pair = grid_pair(a.clone(), b, &spec)?;
    let r = super::parse_region(&a, &spec)?;
    let (iso, _) = relabeled_pair(&a, &r, cfg)?;
    let f = smooth_patch_source(&pair, 4)?;
    let whole = RestrictionOperator::whole(&pair.patch);
    let mut rep = ExperimentReport::new("analytic_identities");

    let mut identity = CsvTable::new(&["alpha", "k", "lhs_norm", "rhs_norm", "rel_error", "iso_rel_error", "vanishing_order"]);
    let alphas: Vec<f64> = cfg.alpha.map_or(vec![0.25, 0.5, 0.75], |a| vec![a]);
    for &alpha in &alphas {
        let p = FracParams::new(alpha, pair.spectral_gap(), cfg.quad_tol())?;
        let pi = FracParams::new(alpha, iso.spectral_gap(), cfg.quad_tol())?;
        let mut akf = f.clone();
        for k in 1..=3 {
            akf = pair.apply_laplacian(0, &akf)?;
            let m = moment_identity(&pair, &whole, &f, k, &p)?;
            let mi = moment_identity(&iso, &whole, &f, k, &pi)?;
            let iso_err = mi.abs_error() / pair.patch_norm(&akf);
            rep.check(Check::at_most(format!("identity_alpha{alpha}_k{k}"), m.rel_error(), 1e-5));
            rep.check(Check::at_most(format!("identity_iso_alpha{alpha}_k{k}"), iso_err, 1e-12));
            identity.push(vec![
                num(alpha),
                k.to_string(),
                num(m.lhs.norm()),
                num(m.rhs.norm()),
                num(m.rel_error()),
                num(iso_err),
                m.vanishing_order.map_or("-".into(), |o| o.to_string()),
            ]);
        }
    }

    let p = FracParams::new(cfg.alpha(), pair.spectral_gap(), cfg.quad_tol())?;
    let k_max = cfg.k_max.unwrap_or(10);
    let ms = heat_difference_moments(&pair, &whole, &f, k_max, &p)?;
    let mi = heat_difference_moments(&iso, &whole, &f, k_max, &p)?;
    let mut moments = CsvTable::new(&["k", "moment_norm", "iso_moment_norm"]);
    for (x, y) in ms.iter().zip(&mi) {
        moments.push(vec![x.k.to_string(), num(x.norm()), num(y.norm())]);
    }
    let iso_worst = mi.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let distinct = ms.iter().filter(|m| m.value.is_some()).map(|m| m.norm()).fold(0.0, f64::max);
    rep.check(Check::at_most("moments_iso_max", iso_worst, 1e-9));
    rep.check(Check::at_least("moments_distinct_max", distinct, 10.0 * cfg.quad_tol()));

    let cycle = decompose(&DiscreteManifold::cycle(12)?)?;
    let tp = TransmuteParams::default();
    let mut scalar: f64 = 0.0;
    let mut transmute = CsvTable::new(&["t", "lambda", "transmuted", "exact"]);
    for &t in &[0.1, 0.5, 1.0, 2.0] {
        for &l in cycle.eigenvalues() {
            let v = transmute_scalar(l, t, &tp)?;
            scalar = scalar.max((v - (-l * t).exp()).abs());
            transmute.push(vec![num(t), num(l), num(v), num((-l * t).exp())]);
        }
    }
    let g = DVector::from_fn(12, |i, _| ((i * i) as f64 * 0.37).sin());
    let mut operator: f64 = 0.0;
    for &t in &[0.1, 0.5, 1.0, 2.0] {
        let h = heat_apply(&cycle, t, &g)?;
        operator = operator.max((transmute_heat(&cycle, t, &g, &tp)? - &h).norm() / h.norm());
    }
    rep.check(Check::at_most("transmute_scalar", scalar, 1e-7));
    rep.check(Check::at_most("transmute_operator", operator, 1e-6));

    let torus = DiscreteManifold::flat_torus(12, 12, 1.0, 1.0)?;
    let td = decompose(&torus)?;
    let src = Region::new(&torus, vec![0])?;
    let mut delta = DVector::zeros(torus.n());
    delta[0] = 1.0;
    let grid: Vec<f64> = (0..16).map(|i| 0.2 * 5f64.powf(i as f64 / 15.0)).collect();
    let mut decay = CsvTable::new(&["distance", "mu", "log_c", "relative_residual", "samples"]);
    let mut mus = Vec::new();
    for sep in [2usize, 3] {
        let obs = Region::new(&torus, vec![sep])?;
        let fit = decay_fit(&torus, &td, &src, &obs, &delta, &grid)?;
        rep.check(Check::at_least(format!("decay_mu_d{sep}"), fit.mu, f64::MIN_POSITIVE));
        rep.check(Check::at_most(format!("decay_residual_d{sep}"), fit.relative_residual(), 0.05));
        decay.push(vec![num(fit.distance), num(fit.mu), num(fit.c.ln()), num(fit.relative_residual()), fit.samples.to_string()]);
        mus.push(fit.mu);
    }
    rep.check(Check::at_least("decay_mu_increase", mus[1] - mus[0], f64::MIN_POSITIVE));

    rep.table("moment_identity", identity);
    rep.table("moments", moments);
    rep.table("transmutation", transmute);
    rep.table("decay", decay);
    Ok(rep)
}

/// Log-variable quadrature of the negative power against spectral calculus
/// on random mean-zero vectors.
pub fn exp_fractional_equivalence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:8x8")?;
    let d = decompose(&m)?;
    let count = cfg.vectors.unwrap_or(100);
    let tol = cfg.tol_or(1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let total: f64 = m.mass().iter().sum();
    let vectors: Vec<DVector<f64>> = (0..count)
        .map(|_| {
            let mut v = DVector::from_fn(m.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let mean = v.iter().zip(m.mass()).map(|(x, w)| x * w).sum::<f64>() / total;
            v.add_scalar_mut(-mean);
            v
        })
        .collect();
    let alphas: Vec<f64> = cfg.alpha.map_or(vec![0.25, 0.5, 0.75], |a| vec![a]);
    let mut table = CsvTable::new(&["alpha", "vector", "rel_error", "levels"]);
    let mut rep = ExperimentReport::new("fractional_equivalence");
    let mut first_log = None;
    for &alpha in &alphas {
        let p = FracParams::new(alpha, d.smallest_positive(), cfg.quad_tol())?;
        let mut worst: f64 = 0.0;
        for (i, f) in vectors.iter().enumerate() {
            let exact = frac_inverse_spectral(&d, &p, f)?;
            let (q, refined) = frac_inverse_quadrature(|t| heat_apply(&d, t, f).expect("t > 0"), &p, f)?;
            let err = (&q - &exact).norm() / exact.norm();
            worst = worst.max(err);
            table.push(vec![num(alpha), i.to_string(), num(err), refined.log.len().to_string()]);
            if first_log.is_none() {
                first_log = Some(refinement_table(&refined.log));
            }
        }
        rep.check(Check::at_most(format!("quadrature_alpha{alpha}"), worst, tol));
    }
    rep.table("errors", table);
    if let Some(t) = first_log {
        rep.table("refinement", t);
    }
    Ok(rep)
}

/// Duhamel solution against RK4 at three step sizes, with energy
/// conservation after the source switches off.
pub fn exp_wave_oracle(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:6x6")?;
    let d = decompose(&m)?;
    let t_eval = cfg.wave_t.unwrap_or(3.0);
    let mut shape = DVector::zeros(m.n());
    shape[cfg.source_vertex.unwrap_or(0)] = 1.0;
    let profile = TimeProfile::new(0.1 * t_eval, 0.4 * t_eval, t_eval + 1.0, 1.0)?;
    let source = WaveSource { profile, shape };
    let (u, _) = duhamel_state(&d, &source, t_eval)?;
    let scale = m.norm(&u);
    let dt0 = 0.1 / m.eigenvalue_bound().sqrt();
    let runs: Vec<_> = (0..3).map(|i| ode_oracle(&m, &source, t_eval, dt0 / f64::from(1 << i))).collect::<Result<_>>()?;
    let errors: Vec<f64> = runs.iter().map(|r| m.norm(&(&r.u - &u)) / scale).collect();
    let observed = (errors[0] / errors[1]).log2().min((errors[1] / errors[2]).log2());
    let self_order = (m.norm(&(&runs[0].u - &runs[1].u)) / m.norm(&(&runs[1].u - &runs[2].u))).log2();

    let mut energies = CsvTable::new(&["t", "duhamel_energy"]);
    let mut e_min = f64::INFINITY;
    let mut e_max: f64 = 0.0;
    for i in 0..=8 {
        let t = profile.end + (t_eval - profile.end) * i as f64 / 8.0;
        let (ut, vt) = duhamel_state(&d, &source, t)?;
        let e = energy(&m, &ut, &vt);
        e_min = e_min.min(e);
        e_max = e_max.max(e);
        energies.push(vec![num(t), num(e)]);
    }
    let mut conv = CsvTable::new(&["dt", "rel_error", "energy_drift"]);
    for (r, e) in runs.iter().zip(&errors) {
        conv.push(vec![num(r.dt), num(*e), num(r.energy_drift())]);
    }

    let mut rep = ExperimentReport::new("wave_oracle");
    rep.check(Check::at_least("observed_order", observed, 3.5));
    rep.check(Check::at_least("self_convergence_order", self_order, 3.5));
    rep.check(Check::at_most("finest_rel_error", errors[2], cfg.tol_or(1e-6)));
    rep.check(Check::at_most("ode_energy_drift", runs[2].energy_drift(), 1e-6));
    rep.check(Check::at_most("duhamel_energy_drift", (e_max - e_min) / e_max, 1e-6));
    rep.table("convergence", conv);
    rep.table("energy", energies);
    Ok(rep)
}

/// Eigenvalues, multiplicities and projector kernels recovered from local
/// heat traces, checked against the decomposition; eigenvector blocks of an
/// isometric pair aligned orthogonally.
pub fn exp_recovery(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("cycle:12")?;
    let o = cfg.region_or(&m, "range:0,4")?;
    let sm = SpectralManifold::new(m.clone())?;
    let rec = local_recovery(&sm, &o, cfg, Some(7))?;
    let groups = group_eigenvalues(&sm.spectrum, 1e-8)?;
    let tol = cfg.tol_or(1e-3);

    let mut table = CsvTable::new(&["lambda", "lambda_hat", "rel_error", "multiplicity", "multiplicity_hat", "kernel_error"]);
    let (mut lam_err, mut ker_err): (f64, f64) = (0.0, 0.0);
    let mut mult_ok = true;
    let nonzero: Vec<_> = groups.iter().filter(|g| g.value > 1e-12).take(4).collect();
    for g in &nonzero {
        let Some(mode) = rec.modes.iter().min_by(|a, b| (a.lambda - g.value).abs().total_cmp(&(b.lambda - g.value).abs())) else {
            return Err(Error::EmptyBasis);
        };
        let rel = (mode.lambda - g.value).abs() / g.value;
        let kernel = projector_kernel(&sm.spectrum, g, o.vertices());
        let kerr = (&mode.kernel - &kernel).norm();
        lam_err = lam_err.max(rel);
        ker_err = ker_err.max(kerr);
        mult_ok &= mode.multiplicity == g.multiplicity;
        table.push(vec![
            num(g.value),
            num(mode.lambda),
            num(rel),
            g.multiplicity.to_string(),
            mode.multiplicity.to_string(),
            num(kerr),
        ]);
    }

    let (pair, _) = relabeled_pair(&m, &o, cfg)?;
    let mut procrustes: f64 = 0.0;
    let mut align = CsvTable::new(&["lambda", "multiplicity", "eigenvector_residual", "recovered_residual"]);
    let other = local_recovery(&pair.second, pair.patch.second(), cfg, Some(7))?;
    let other_groups = group_eigenvalues(&pair.second.spectrum, 1e-8)?;
    // Rows of `other` follow the sorted region on the second manifold;
    // put them in patch correspondence order.
    let region2 = pair.patch.second().vertices();
    let rows: Vec<usize> = pair
        .patch
        .vertices(1)
        .iter()
        .map(|v| region2.iter().position(|w| w == v).expect("patch vertex in region"))
        .collect();
    for (g, h) in groups.iter().zip(&other_groups) {
        let b1 = restricted_block(&pair.first.spectrum, g.range(), pair.patch.vertices(0));
        let b2 = restricted_block(&pair.second.spectrum, h.range(), pair.patch.vertices(1));
        let res = align_procrustes(&b1, &b2)?.residual;
        let near = |r: &RecoveredSpectrum| {
            r.modes.iter().min_by(|a, b| (a.lambda - g.value).abs().total_cmp(&(b.lambda - g.value).abs())).cloned()
        };
        let rres = match (near(&rec), near(&other)) {
            (Some(x), Some(y)) if x.factor.shape() == y.factor.shape() => {
                align_procrustes(&x.factor, &y.factor.select_rows(&rows))?.residual
            }
            _ => f64::INFINITY,
        };
        procrustes = procrustes.max(res).max(rres);
        align.push(vec![num(g.value), g.multiplicity.to_string(), num(res), num(rres)]);
    }

    let control = local_recovery(&SpectralManifold::new(DiscreteManifold::cycle(m.n() + 2)?)?, &o, cfg, Some(7))?;
    let cmp = compare_spectra(&rec, &control, tol);

    let mut rep = ExperimentReport::new("recovery");
    rep.check(Check::at_least("nonzero_groups_checked", nonzero.len() as f64, 4.0));
    rep.check(Check::at_most("eigenvalue_rel_error", lam_err, tol));
    rep.check(Check::holds("multiplicities", mult_ok));
    rep.check(Check::at_most("kernel_frobenius_error", ker_err, tol));
    rep.check(Check::at_most("procrustes_residual", procrustes, 1e-6));
    rep.check(Check::at_least("control_unmatched", cmp.unmatched() as f64, 1.0));
    rep.table("eigenvalues", table);
    rep.table("spectrum", rec.table());
    rep.table("procrustes", align);
    rep.table("control_comparison", cmp.table());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(matches!(run_experiment("nope", &ExperimentConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn permutations_are_seeded() {
        assert_eq!(permutation(20, 3, false), permutation(20, 3, false));
        assert_ne!(permutation(20, 3, false), permutation(20, 4, false));
        assert_eq!(permutation(5, 3, true), vec![0, 1, 2, 3, 4]);
    }
}
