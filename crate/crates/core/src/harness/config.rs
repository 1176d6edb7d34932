use crate::error::{Error, Result};
use crate::manifold::{read_mesh, DiscreteManifold, Region};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Recognised `key = value` entries with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("experiment", "experiment name used by `exp` when none is given"),
    ("manifold", "first manifold: torus:NXxNY[:HX:HY], cycle:N, path:N or file:PATH"),
    ("manifold2", "second manifold of a pair, same syntax"),
    ("region", "observation region: box:X0,Y0,W,H, range:START,LEN or list:V1,V2,..."),
    ("relabel", "second manifold of an isometric pair: random or identity"),
    ("alpha", "fractional exponent in (0, 1)"),
    ("ell", "constraint level of the N_ell source space"),
    ("k_max", "largest moment order"),
    ("times", "comma-separated sample times for heat comparisons"),
    ("t0", "first heat-trace sample time"),
    ("dt", "heat-trace sampling step"),
    ("samples", "number of heat-trace samples"),
    ("order", "matrix pencil model order"),
    ("pencil", "pencil channel handling: stacked or aggregated"),
    ("source_kind", "d0, dtilde0 or nell"),
    ("source_vertex", "vertex carrying a point source"),
    ("wave_t", "wave evaluation time"),
    ("vectors", "number of random test vectors"),
    ("quad_tol", "relative quadrature tolerance"),
    ("tol", "verdict tolerance of the primary checks"),
    ("seed", "seed for relabelings and random vectors"),
    ("out", "output directory"),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub manifold: Option<String>,
    pub manifold2: Option<String>,
    pub region: Option<String>,
    pub relabel: Option<String>,
    pub alpha: Option<f64>,
    pub ell: Option<usize>,
    pub k_max: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub dt: Option<f64>,
    pub samples: Option<usize>,
    pub order: Option<usize>,
    pub pencil: Option<String>,
    pub source_kind: Option<String>,
    pub source_vertex: Option<usize>,
    pub wave_t: Option<f64>,
    pub vectors: Option<usize>,
    pub quad_tol: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, msg: format!("bad value {v:?} for {key}") })
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = value(line, key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Parse { line, msg: format!("{key} must be positive, got {v}") });
    }
    Ok(x)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Parse { line, msg: format!("expected key = value, got {body:?}") });
            };
            let (k, v) = (k.trim(), v.trim());
            if seen.iter().any(|s| s == k) {
                return Err(Error::Parse { line, msg: format!("duplicate key {k}") });
            }
            cfg.set(line, k, v)?;
            seen.push(k.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; `line` is used for error messages.
    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let s = || Some(v.to_string());
        match key {
            "experiment" => self.experiment = s(),
            "manifold" => self.manifold = s(),
            "manifold2" => self.manifold2 = s(),
            "region" => self.region = s(),
            "relabel" => {
                if v != "random" && v != "identity" {
                    return Err(Error::Parse { line, msg: format!("relabel must be random or identity, got {v}") });
                }
                self.relabel = s()
            }
            "alpha" => {
                let a: f64 = value(line, key, v)?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::Parse { line, msg: format!("alpha must lie in (0, 1), got {v}") });
                }
                self.alpha = Some(a)
            }
            "ell" => self.ell = Some(value(line, key, v)?),
            "k_max" => self.k_max = Some(value(line, key, v)?),
            "times" => {
                let ts = v.split(',').map(|t| positive(line, key, t.trim())).collect::<Result<Vec<_>>>()?;
                self.times = Some(ts)
            }
            "t0" => self.t0 = Some(positive(line, key, v)?),
            "dt" => self.dt = Some(positive(line, key, v)?),
            "samples" => self.samples = Some(value(line, key, v)?),
            "order" => self.order = Some(value(line, key, v)?),
            "pencil" => {
                if v != "stacked" && v != "aggregated" {
                    return Err(Error::Parse { line, msg: format!("pencil must be stacked or aggregated, got {v}") });
                }
                self.pencil = s()
            }
            "source_kind" => {
                if !matches!(v, "d0" | "dtilde0" | "nell") {
                    return Err(Error::Parse { line, msg: format!("unknown source kind {v}") });
                }
                self.source_kind = s()
            }
            "source_vertex" => self.source_vertex = Some(value(line, key, v)?),
            "wave_t" => self.wave_t = Some(positive(line, key, v)?),
            "vectors" => self.vectors = Some(value(line, key, v)?),
            "quad_tol" => self.quad_tol = Some(positive(line, key, v)?),
            "tol" => self.tol = Some(positive(line, key, v)?),
            "seed" => self.seed = Some(value(line, key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Parse { line, msg: format!("unknown key {key}") }),
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.5)
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol.unwrap_or(1e-12)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn manifold_or(&self, default: &str) -> Result<DiscreteManifold> {
        parse_manifold(self.manifold.as_deref().unwrap_or(default))
    }

    pub fn manifold2_or(&self, default: &str) -> Result<DiscreteManifold> {
        parse_manifold(self.manifold2.as_deref().unwrap_or(default))
    }

    pub fn region_or(&self, m: &DiscreteManifold, default: &str) -> Result<Region> {
        parse_region(m, self.region.as_deref().unwrap_or(default))
    }

    pub fn times_or(&self, default: &[f64]) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| default.to_vec())
    }
}

fn numbers<T: FromStr>(spec: &str, list: &str) -> Result<Vec<T>> {
    list.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad number {x:?} in {spec:?}"))))
        .collect()
}

/// Builds a manifold from `torus:NXxNY[:HX:HY]`, `cycle:N`, `path:N` or
/// `file:PATH`.
pub fn parse_manifold(spec: &str) -> Result<DiscreteManifold> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Config(format!("manifold spec {spec:?} lacks a type")))?;
    match kind {
        "torus" => {
            let parts: Vec<&str> = rest.split(':').collect();
            let (nx, ny) = parts[0]
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("torus size in {spec:?} must look like 8x8")))?;
            let nx = numbers::<usize>(spec, nx)?[0];
            let ny = numbers::<usize>(spec, ny)?[0];
            let (hx, hy) = match parts.len() {
                1 => (1.0, 1.0),
                3 => (numbers::<f64>(spec, parts[1])?[0], numbers::<f64>(spec, parts[2])?[0]),
                _ => return Err(Error::Config(format!("torus spec {spec:?} takes zero or two spacings"))),
            };
            DiscreteManifold::flat_torus(nx, ny, hx, hy)
        }
        "cycle" => DiscreteManifold::cycle(numbers::<usize>(spec, rest)?[0]),
        "path" => DiscreteManifold::path_dirichlet(numbers::<usize>(spec, rest)?[0]),
        "file" => {
            let f = std::fs::File::open(rest)?;
            read_mesh(std::io::BufReader::new(f), rest)
        }
        _ => Err(Error::Config(format!("unknown manifold type {kind:?}"))),
    }
}

/// Builds a region from `box:X0,Y0,W,H`, `range:START,LEN` or `list:V1,...`.
pub fn parse_region(m: &DiscreteManifold, spec: &str) -> Result<Region> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Config(format!("region spec {spec:?} lacks a type")))?;
    let v: Vec<usize> = numbers(spec, rest)?;
    match (kind, v.len()) {
        ("box", 4) => Region::grid_box(m, v[0], v[1], v[2], v[3]),
        ("range", 2) => Region::range(m, v[0], v[1]),
        ("list", _) => Region::new(m, v),
        _ => Err(Error::Config(format!("bad region spec {spec:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_comments() {
        let cfg = ExperimentConfig::parse("# demo\nmanifold = torus:8x8\nalpha = 0.25  # exponent\n\ntimes = 0.1, 1\nseed=3\n").unwrap();
        assert_eq!(cfg.manifold.as_deref(), Some("torus:8x8"));
        assert_eq!(cfg.alpha(), 0.25);
        assert_eq!(cfg.times, Some(vec![0.1, 1.0]));
        assert_eq!(cfg.seed(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in ["colour = red", "alpha = 1.5", "tol = -1", "seed = x", "alpha", "alpha = 0.5\nalpha = 0.5", "pencil = prony"] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
        let e = ExperimentConfig::parse("\n\nfoo = 1").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let sample = |k: &str| match k {
            "relabel" => "identity",
            "pencil" => "stacked",
            "source_kind" => "d0",
            "alpha" => "0.5",
            "times" => "0.5",
            "manifold" | "manifold2" => "cycle:6",
            "region" => "range:0,2",
            _ => "1",
        };
        for (k, _) in CONFIG_KEYS {
            let mut cfg = ExperimentConfig::default();
            cfg.set(1, k, sample(k)).unwrap();
        }
    }

    #[test]
    fn manifold_and_region_specs() {
        let t = parse_manifold("torus:8x6").unwrap();
        assert_eq!((t.n(), t.grid()), (48, Some((8, 6))));
        assert_eq!(parse_manifold("torus:4x4:1:2").unwrap().n(), 16);
        assert_eq!(parse_manifold("cycle:12").unwrap().n(), 12);
        assert_eq!(parse_manifold("path:6").unwrap().n(), 8);
        assert!(parse_manifold("sphere:3").is_err());
        assert!(parse_manifold("torus:8").is_err());
        assert_eq!(parse_region(&t, "box:0,0,3,2").unwrap().len(), 6);
        let c = parse_manifold("cycle:12").unwrap();
        assert_eq!(parse_region(&c, "range:10,4").unwrap().vertices(), &[0, 1, 10, 11]);
        assert_eq!(parse_region(&c, "list:5,4").unwrap().vertices(), &[4, 5]);
        assert!(parse_region(&c, "list:5,2").is_err());
        assert!(parse_region(&c, "box:0,0").is_err());
    }
}
