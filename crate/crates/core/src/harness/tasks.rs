use super::experiments::{grid_pair, local_traces, recover_from, relabeled_pair};
use super::{run_experiment, Check, ExperimentConfig, ExperimentReport, EXPERIMENTS};
use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use crate::fractional::{frac_inverse_quadrature, frac_inverse_spectral, heat_apply, FracParams};
use crate::manifold::{double_manifold, read_mesh, write_mesh, BoundaryMode, DiscreteManifold};
use crate::pair::{ManifoldPair, SpectralManifold};
use crate::quadrature::refinement_table;
use crate::sources::{build_source_space, compare_s2s, SourceKind, SourceSpace};
use crate::spectral::{decompose, group_eigenvalues, spectrum_table};
use crate::wave::{duhamel_state, energy, snapshot_table, TimeProfile, WaveSource};
use nalgebra::DVector;

/// One CLI subcommand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    Mesh,
    Eigs,
    Frac,
    HeatTrace,
    Wave,
    S2s,
    Recover,
    Double,
    /// A named experiment, or `all`.
    Exp(String),
}

pub fn run_task(task: &Task, cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let one = |r: Result<ExperimentReport>| r.map(|r| vec![r]);
    match task {
        Task::Mesh => one(mesh(cfg)),
        Task::Eigs => one(eigs(cfg)),
        Task::Frac => one(frac(cfg)),
        Task::HeatTrace => one(heat_trace(cfg)),
        Task::Wave => one(wave(cfg)),
        Task::S2s => one(s2s(cfg)),
        Task::Recover => one(recover(cfg)),
        Task::Double => one(double(cfg)),
        Task::Exp(name) if name == "all" => EXPERIMENTS.iter().map(|n| run_experiment(n, cfg)).collect(),
        Task::Exp(name) => one(run_experiment(name, cfg)),
    }
}

fn mesh(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:8x8")?;
    let mut text = Vec::new();
    write_mesh(&m, &mut text)?;
    let back = read_mesh(text.as_slice(), m.label())?;
    let same = back.n() == m.n() && back.mass() == m.mass() && back.edges() == m.edges() && back.boundary() == m.boundary();

    let mut vertices = CsvTable::new(&["vertex", "mass", "boundary", "degree"]);
    for v in 0..m.n() {
        vertices.push(vec![v.to_string(), num(m.mass()[v]), m.is_boundary(v).to_string(), m.neighbors(v).len().to_string()]);
    }
    let mut edges = CsvTable::new(&["i", "j", "weight", "length"]);
    for (i, j, e) in m.edges() {
        edges.push(vec![i.to_string(), j.to_string(), num(e.weight), num(e.length)]);
    }
    let mut rep = ExperimentReport::new("mesh");
    rep.check(Check::holds("roundtrip", same));
    rep.table("vertices", vertices);
    rep.table("edges", edges);
    rep.files.push(("mesh.dm".into(), String::from_utf8(text).expect("mesh text is ASCII")));
    Ok(rep)
}

fn eigs(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:8x8")?;
    let d = decompose(&m)?;
    let groups = group_eigenvalues(&d, cfg.tol_or(1e-8))?;
    let mut rep = ExperimentReport::new("eigs");
    rep.check(Check::at_most("eigen_residual", d.residual(), 1e-9));
    rep.table("spectrum", spectrum_table(&d, &groups));
    Ok(rep)
}

/// Point source, made mean zero on closed manifolds.
fn point_source(m: &DiscreteManifold, cfg: &ExperimentConfig) -> Result<DVector<f64>> {
    let v = cfg.source_vertex.unwrap_or(0);
    if v >= m.n() || m.is_boundary(v) {
        return Err(Error::Config(format!("source vertex {v} is not a free vertex")));
    }
    let mut f = DVector::zeros(m.n());
    f[v] = 1.0;
    if m.mode() == BoundaryMode::Closed {
        let total: f64 = m.mass().iter().sum();
        f.add_scalar_mut(-m.mass()[v] / total);
    }
    Ok(f)
}

fn frac(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:8x8")?;
    let d = decompose(&m)?;
    let p = FracParams::new(cfg.alpha(), d.smallest_positive(), cfg.quad_tol())?;
    let f = point_source(&m, cfg)?;
    let exact = frac_inverse_spectral(&d, &p, &f)?;
    let (quad, refined) = frac_inverse_quadrature(|t| heat_apply(&d, t, &f).expect("t > 0"), &p, &f)?;
    let mut table = CsvTable::new(&["vertex", "f", "spectral", "quadrature", "difference"]);
    for v in 0..m.n() {
        table.push(vec![v.to_string(), num(f[v]), num(exact[v]), num(quad[v]), num(quad[v] - exact[v])]);
    }
    let mut rep = ExperimentReport::new("frac");
    rep.check(Check::at_most("quadrature_vs_spectral", (&quad - &exact).norm() / exact.norm(), cfg.tol_or(1e-8)));
    rep.table("values", table);
    rep.table("refinement", refinement_table(&refined.log));
    Ok(rep)
}

fn heat_trace(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("cycle:12")?;
    let o = cfg.region_or(&m, "range:0,4")?;
    let space = match cfg.source_kind.as_deref() {
        None | Some("d0") => SourceSpace::d0(&m, &o),
        Some("dtilde0") => SourceSpace::dtilde0(&m, &o)?,
        Some(k) => return Err(Error::Config(format!("source kind {k} needs a manifold pair; use s2s"))),
    };
    let sm = SpectralManifold::new(m)?;
    let traces = local_traces(&sm, &o, &space, cfg)?;
    let finite = traces.values.iter().all(|v| v.iter().all(|x| x.is_finite()));
    let mut rep = ExperimentReport::new("heat_trace");
    rep.check(Check::holds("finite_values", finite));
    rep.table("traces", traces.table());
    Ok(rep)
}

fn wave(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("torus:6x6")?;
    let d = decompose(&m)?;
    let t_end = cfg.wave_t.unwrap_or(3.0);
    let mut shape = DVector::zeros(m.n());
    shape[cfg.source_vertex.unwrap_or(0).min(m.n() - 1)] = 1.0;
    let profile = TimeProfile::new(0.1 * t_end, 0.4 * t_end, t_end + 1.0, 1.0)?;
    let source = WaveSource { profile, shape };
    let times = cfg.times.clone().unwrap_or_else(|| (1..=6).map(|i| t_end * i as f64 / 6.0).collect());
    let mut frames = Vec::new();
    let mut energies = CsvTable::new(&["t", "energy"]);
    let mut post = Vec::new();
    for &t in &times {
        let (u, v) = duhamel_state(&d, &source, t)?;
        let e = energy(&m, &u, &v);
        energies.push(vec![num(t), num(e)]);
        if t >= profile.end {
            post.push(e);
        }
        frames.push((t, u));
    }
    let drift = match post.iter().cloned().fold(None, |acc: Option<(f64, f64)>, e| Some(acc.map_or((e, e), |(lo, hi)| (lo.min(e), hi.max(e))))) {
        Some((lo, hi)) if hi > 0.0 => (hi - lo) / hi,
        _ => 0.0,
    };
    let mut profile_table = CsvTable::new(&["t", "a"]);
    for (t, a) in profile.samples(64) {
        profile_table.push(vec![num(t), num(a)]);
    }
    let mut rep = ExperimentReport::new("wave");
    rep.check(Check::at_most("post_source_energy_drift", drift, 1e-6));
    rep.table("snapshots", snapshot_table(&frames));
    rep.table("energy", energies);
    rep.table("profile", profile_table);
    Ok(rep)
}

/// The configured pair: `manifold2` if given, otherwise a relabeled copy.
fn configured_pair(cfg: &ExperimentConfig, default: &str, region: &str) -> Result<ManifoldPair> {
    let m = cfg.manifold_or(default)?;
    let spec = cfg.region.clone().unwrap_or_else(|| region.into());
    match &cfg.manifold2 {
        Some(_) => grid_pair(m, cfg.manifold2_or(default)?, &spec),
        None => Ok(relabeled_pair(&m, &super::parse_region(&m, &spec)?, cfg)?.0),
    }
}

fn s2s(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pair = configured_pair(cfg, "torus:8x8", "box:0,0,4,4")?;
    let kind = match cfg.source_kind.as_deref() {
        Some("d0") => SourceKind::D0,
        Some("nell") => SourceKind::Nell { ell: cfg.ell.unwrap_or(0) },
        _ => SourceKind::Dtilde0,
    };
    let space = build_source_space(&pair, kind)?;
    let p = FracParams::new(cfg.alpha(), pair.spectral_gap(), cfg.quad_tol())?;
    let report = compare_s2s(&pair, &space, &p)?;
    let mut rep = ExperimentReport::new("s2s");
    rep.check(Check::at_most("max_rel_discrepancy", report.max(), cfg.tol_or(1e-10)));
    rep.table("discrepancy", report.table());
    Ok(rep)
}

fn recover(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("cycle:12")?;
    let o = cfg.region_or(&m, "range:0,4")?;
    let sm = SpectralManifold::new(m)?;
    let traces = local_traces(&sm, &o, &SourceSpace::d0(&sm.manifold, &o), cfg)?;
    let (pencil, rec) = recover_from(&traces, cfg, None)?;
    let mut sv = CsvTable::new(&["index", "singular_value"]);
    for (i, s) in pencil.singular_values.iter().enumerate() {
        sv.push(vec![i.to_string(), num(*s)]);
    }
    let mut rep = ExperimentReport::new("recover");
    rep.check(Check::at_most("fit_residual", rec.fit_residual, cfg.tol_or(1e-6)));
    rep.check(Check::at_most("vandermonde_condition", rec.condition, 1e10));
    rep.table("spectrum", rec.table());
    rep.table("pencil_singular_values", sv);
    Ok(rep)
}

fn double(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = cfg.manifold_or("path:6")?;
    let dm = double_manifold(&m)?;
    let d = decompose(&m)?;
    let dd = decompose(&dm.doubled)?;
    let mut table = CsvTable::new(&["k", "lambda", "nearest_double"]);
    let mut worst: f64 = 0.0;
    for (k, &l) in d.eigenvalues().iter().enumerate() {
        let near = dd.eigenvalues().iter().cloned().min_by(|a, b| (a - l).abs().total_cmp(&(b - l).abs())).unwrap_or(f64::NAN);
        worst = worst.max((near - l).abs());
        table.push(vec![k.to_string(), num(l), num(near)]);
    }
    let mut vertices = CsvTable::new(&["vertex", "plus", "minus", "mass"]);
    for v in 0..m.n() {
        vertices.push(vec![v.to_string(), dm.embed_plus[v].to_string(), dm.embed_minus[v].to_string(), num(dm.doubled.mass()[dm.embed_plus[v]])]);
    }
    let mut rep = ExperimentReport::new("double");
    rep.check(Check::at_most("spectrum_containment", worst, cfg.tol_or(1e-10)));
    rep.table("spectrum", table);
    rep.table("embedding", vertices);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_task_runs_on_defaults() {
        let cfg = ExperimentConfig::default();
        for task in [Task::Mesh, Task::Eigs, Task::Frac, Task::HeatTrace, Task::Wave, Task::S2s, Task::Recover, Task::Double] {
            let reps = run_task(&task, &cfg).unwrap();
            assert!(reps.iter().all(|r| r.passed()), "{task:?}: {:?}", reps[0].checks);
            assert!(!reps[0].tables.is_empty());
        }
    }
}
