//! Weighted graphs with lumped mass standing in for Riemannian manifolds.

mod double;
mod mesh;
mod patch;
mod region;

pub use double::{double_manifold, DoubleManifold};
pub use mesh::{read_mesh, write_mesh};
pub use patch::PatchIsometry;
pub use region::{graph_distance, Region};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// A weighted, undirected coupling to a neighbouring vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub weight: f64,
    pub length: f64,
}

/// Closed manifolds have an empty boundary; otherwise boundary values are
/// eliminated (homogeneous Dirichlet condition).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Closed,
    Dirichlet,
}

/// `(Lf)_i = (1/m_i) Σ_j w_ij (f_i − f_j)` on a connected weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteManifold {
    adjacency: Vec<Vec<Edge>>,
    mass: Vec<f64>,
    boundary: Vec<usize>,
    on_boundary: Vec<bool>,
    coords: Option<Vec<[f64; 3]>>,
    grid: Option<(usize, usize)>,
    label: String,
}

/// Undirected edge `(i, j, weight, length)`.
pub type EdgeSpec = (usize, usize, f64, f64);

impl DiscreteManifold {
    /// Validates and assembles a manifold from an undirected edge list.
    pub fn from_parts(
        mass: Vec<f64>,
        edges: &[EdgeSpec],
        boundary: Vec<usize>,
        coords: Option<Vec<[f64; 3]>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = mass.len();
        if n < 2 {
            return Err(Error::TooSmall { what: "vertex count", got: n, min: 2 });
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidManifold(format!("mass of vertex {i} is {m}")));
        }
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); n];
        for &(i, j, w, len) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidManifold(format!("edge ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidManifold(format!("self loop at {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidManifold(format!("edge ({i},{j}) has weight {w}")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidManifold(format!("edge ({i},{j}) has length {len}")));
            }
            adjacency[i].push(Edge { to: j, weight: w, length: len });
            adjacency[j].push(Edge { to: i, weight: w, length: len });
        }
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|e| e.to);
            if list.windows(2).any(|p| p[0].to == p[1].to) {
                return Err(Error::InvalidManifold(format!("duplicate edge at vertex {i}")));
            }
        }
        let mut boundary = boundary;
        boundary.sort_unstable();
        let before = boundary.len();
        boundary.dedup();
        if boundary.len() != before {
            return Err(Error::InvalidManifold("repeated boundary vertex".into()));
        }
        let mut on_boundary = vec![false; n];
        for &b in &boundary {
            if b >= n {
                return Err(Error::InvalidManifold(format!("boundary vertex {b} out of range")));
            }
            on_boundary[b] = true;
        }
        if boundary.len() == n {
            return Err(Error::InvalidManifold("no interior vertices".into()));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidManifold("coordinate count differs from vertex count".into()));
            }
        }
        let m = DiscreteManifold { adjacency, mass, boundary, on_boundary, coords, grid: None, label: label.into() };
        if !m.is_connected() {
            return Err(Error::InvalidManifold("graph is not connected".into()));
        }
        Ok(m)
    }

    fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for e in &self.adjacency[v] {
                if e.weight > 0.0 && !seen[e.to] {
                    seen[e.to] = true;
                    count += 1;
                    queue.push_back(e.to);
                }
            }
        }
        count == n
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn neighbors(&self, i: usize) -> &[Edge] {
        &self.adjacency[i]
    }

    /// Coupling weight, zero when there is no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let list = &self.adjacency[i];
        match list.binary_search_by_key(&j, |e| e.to) {
            Ok(k) => list[k].weight,
            Err(_) => 0.0,
        }
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn mode(&self) -> BoundaryMode {
        if self.boundary.is_empty() {
            BoundaryMode::Closed
        } else {
            BoundaryMode::Dirichlet
        }
    }

    /// Vertices carrying degrees of freedom (everything off the boundary).
    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.on_boundary[i]).collect()
    }

    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }

    /// `(nx, ny)` for structured grids, vertex `x + nx·y`.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Undirected edges with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, Edge)> {
        let mut out = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            for e in list.iter().filter(|e| e.to > i) {
                out.push((i, e.to, *e));
            }
        }
        out
    }

    /// Sparse application of L; boundary values are treated as zero and the
    /// output vanishes on the boundary.
    pub fn apply_laplacian(&self, f: &DVector<f64>) -> DVector<f64> {
        assert_eq!(f.len(), self.n(), "vector length");
        let mut out = DVector::zeros(self.n());
        for i in 0..self.n() {
            if self.on_boundary[i] {
                continue;
            }
            let mut acc = 0.0;
            for e in &self.adjacency[i] {
                let fj = if self.on_boundary[e.to] { 0.0 } else { f[e.to] };
                acc += e.weight * (f[i] - fj);
            }
            out[i] = acc / self.mass[i];
        }
        out
    }

    /// Stiffness matrix `K` with `L = M⁻¹K` (all vertices, no elimination).
    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut k = DMatrix::zeros(n, n);
        for (i, list) in self.adjacency.iter().enumerate() {
            for e in list {
                k[(i, e.to)] -= e.weight;
                k[(i, i)] += e.weight;
            }
        }
        k
    }

    /// Upper bound on the largest eigenvalue of L (Gershgorin).
    pub fn eigenvalue_bound(&self) -> f64 {
        (0..self.n())
            .filter(|&i| !self.on_boundary[i])
            .map(|i| 2.0 * self.adjacency[i].iter().map(|e| e.weight).sum::<f64>() / self.mass[i])
            .fold(0.0, f64::max)
    }

    /// Mass-weighted inner product.
    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        self.mass.iter().zip(f.iter().zip(g.iter())).map(|(m, (a, b))| m * a * b).sum()
    }

    pub fn norm(&self, f: &DVector<f64>) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// The same manifold with vertex `i` renamed `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::InvalidParameter("permutation length differs from vertex count".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut mass = vec![0.0; n];
        for i in 0..n {
            mass[perm[i]] = self.mass[i];
        }
        let edges: Vec<EdgeSpec> = self
            .edges()
            .into_iter()
            .map(|(i, j, e)| (perm[i], perm[j], e.weight, e.length))
            .collect();
        let boundary = self.boundary.iter().map(|&b| perm[b]).collect();
        let coords = self.coords.as_ref().map(|c| {
            let mut out = vec![[0.0; 3]; n];
            for i in 0..n {
                out[perm[i]] = c[i];
            }
            out
        });
        DiscreteManifold::from_parts(mass, &edges, boundary, coords, format!("{}-relabeled", self.label))
    }

    /// Copy with every edge weight replaced by `f(i, j, w)`.
    pub fn map_weights(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let edges: Vec<EdgeSpec> = self
            .edges()
            .into_iter()
            .map(|(i, j, e)| (i, j, f(i, j, e.weight), e.length))
            .collect();
        let mut m = DiscreteManifold::from_parts(
            self.mass.clone(),
            &edges,
            self.boundary.clone(),
            self.coords.clone(),
            format!("{}-modified", self.label),
        )?;
        m.grid = self.grid;
        Ok(m)
    }

    /// Periodic 5-point grid, vertex `x + nx·y`.
    pub fn flat_torus(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::TooSmall { what: "Nx", got: nx, min: 3 });
        }
        if ny < 3 {
            return Err(Error::TooSmall { what: "Ny", got: ny, min: 3 });
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacings must be positive, got {hx}, {hy}")));
        }
        let idx = |x: usize, y: usize| x + nx * y;
        let (wh, wv) = (hy / hx, hx / hy);
        let mut edges = Vec::with_capacity(2 * nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                edges.push((idx(x, y), idx((x + 1) % nx, y), wh, hx));
                edges.push((idx(x, y), idx(x, (y + 1) % ny), wv, hy));
            }
        }
        // Extent 3 wraps onto the same neighbour pair twice; merge those.
        let edges = merge_parallel(edges);
        let coords = (0..nx * ny)
            .map(|v| [(v % nx) as f64 * hx, (v / nx) as f64 * hy, 0.0])
            .collect();
        let mut m = DiscreteManifold::from_parts(
            vec![hx * hy; nx * ny],
            &edges,
            Vec::new(),
            Some(coords),
            format!("torus-{nx}x{ny}"),
        )?;
        m.grid = Some((nx, ny));
        Ok(m)
    }

    /// Unit cycle.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooSmall { what: "cycle length", got: n, min: 3 });
        }
        let edges: Vec<EdgeSpec> = (0..n).map(|i| (i, (i + 1) % n, 1.0, 1.0)).collect();
        let coords = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut m = DiscreteManifold::from_parts(vec![1.0; n], &edges, Vec::new(), Some(coords), format!("cycle-{n}"))?;
        m.grid = Some((n, 1));
        Ok(m)
    }

    /// Unit path with `n_interior` free vertices and one boundary vertex of
    /// half mass at each end.
    pub fn path_dirichlet(n_interior: usize) -> Result<Self> {
        if n_interior < 2 {
            return Err(Error::TooSmall { what: "interior vertex count", got: n_interior, min: 2 });
        }
        let n = n_interior + 2;
        let edges: Vec<EdgeSpec> = (0..n - 1).map(|i| (i, i + 1, 1.0, 1.0)).collect();
        let mut mass = vec![1.0; n];
        mass[0] = 0.5;
        mass[n - 1] = 0.5;
        let coords = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut m = DiscreteManifold::from_parts(mass, &edges, vec![0, n - 1], Some(coords), format!("path-{n_interior}"))?;
        m.grid = Some((n, 1));
        Ok(m)
    }
}

fn merge_parallel(edges: Vec<EdgeSpec>) -> Vec<EdgeSpec> {
    let mut keyed: Vec<EdgeSpec> = edges
        .into_iter()
        .map(|(i, j, w, l)| if i < j { (i, j, w, l) } else { (j, i, w, l) })
        .collect();
    keyed.sort_by_key(|e| (e.0, e.1));
    let mut out: Vec<EdgeSpec> = Vec::with_capacity(keyed.len());
    for e in keyed {
        match out.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => out.push(e),
        }
    }
    out
}
