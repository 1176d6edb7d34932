use super::DiscreteManifold;
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// Connected set of interior vertices, with the hop depth of each vertex
/// measured from the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    vertices: Vec<usize>,
    depth: Vec<usize>,
}

impl Region {
    pub fn new(m: &DiscreteManifold, vertices: Vec<usize>) -> Result<Self> {
        let mut vertices = vertices;
        vertices.sort_unstable();
        let before = vertices.len();
        vertices.dedup();
        if vertices.len() != before {
            return Err(Error::InvalidRegion("repeated vertex".into()));
        }
        if vertices.is_empty() {
            return Err(Error::InvalidRegion("empty".into()));
        }
        if vertices.len() >= m.n() {
            return Err(Error::InvalidRegion("must be a strict subset".into()));
        }
        if let Some(&v) = vertices.iter().find(|&&v| v >= m.n()) {
            return Err(Error::InvalidRegion(format!("vertex {v} out of range")));
        }
        if let Some(&v) = vertices.iter().find(|&&v| m.is_boundary(v)) {
            return Err(Error::InvalidRegion(format!("vertex {v} lies on the boundary")));
        }
        let mut inside = vec![false; m.n()];
        for &v in &vertices {
            inside[v] = true;
        }
        // Connectivity of the induced subgraph.
        let mut seen = vec![false; m.n()];
        let mut queue = VecDeque::from([vertices[0]]);
        seen[vertices[0]] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for e in m.neighbors(v) {
                if inside[e.to] && !seen[e.to] {
                    seen[e.to] = true;
                    count += 1;
                    queue.push_back(e.to);
                }
            }
        }
        if count != vertices.len() {
            return Err(Error::InvalidRegion("not connected".into()));
        }
        // Multi-source BFS from the complement.
        let mut dist = vec![usize::MAX; m.n()];
        let mut queue = VecDeque::new();
        for v in 0..m.n() {
            if !inside[v] {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for e in m.neighbors(v) {
                if dist[e.to] == usize::MAX {
                    dist[e.to] = dist[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        let depth = vertices.iter().map(|&v| dist[v]).collect();
        Ok(Region { vertices, depth })
    }

    /// Axis-aligned `w × h` box on a structured grid, wrapping periodically.
    pub fn grid_box(m: &DiscreteManifold, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        let (nx, ny) = m
            .grid()
            .ok_or_else(|| Error::InvalidRegion("box regions need a structured grid".into()))?;
        if w == 0 || h == 0 || w > nx || h > ny {
            return Err(Error::InvalidRegion(format!("box {w}x{h} does not fit grid {nx}x{ny}")));
        }
        let mut v = Vec::with_capacity(w * h);
        for dy in 0..h {
            for dx in 0..w {
                v.push((x0 + dx) % nx + nx * ((y0 + dy) % ny));
            }
        }
        Region::new(m, v)
    }

    /// `len` consecutive vertex indices starting at `start`, modulo n.
    pub fn range(m: &DiscreteManifold, start: usize, len: usize) -> Result<Self> {
        Region::new(m, (0..len).map(|k| (start + k) % m.n()).collect())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Hop distance of each vertex to the complement (at least 1).
    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    /// Number of full stencil rings inside the region.
    pub fn margin(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(1).saturating_sub(1)
    }

    /// Vertices whose `r`-ring neighbourhood stays inside the region.
    pub fn interior(&self, r: usize) -> Vec<usize> {
        self.vertices
            .iter()
            .zip(&self.depth)
            .filter(|(_, &d)| d > r)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.local_index(v).is_some()
    }
}

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path length between two disjoint vertex sets, using edge lengths.
pub fn graph_distance(m: &DiscreteManifold, a: &Region, b: &Region) -> Result<f64> {
    if a.vertices().iter().any(|&v| b.contains(v)) {
        return Err(Error::OverlappingRegions);
    }
    let mut dist = vec![f64::INFINITY; m.n()];
    let mut heap = BinaryHeap::new();
    for &v in a.vertices() {
        dist[v] = 0.0;
        heap.push(Node(0.0, v));
    }
    while let Some(Node(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if b.contains(v) {
            return Ok(d);
        }
        for e in m.neighbors(v) {
            let nd = d + e.length;
            if nd < dist[e.to] {
                dist[e.to] = nd;
                heap.push(Node(nd, e.to));
            }
        }
    }
    Ok(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_interior_of_a_box() {
        let m = DiscreteManifold::flat_torus(10, 10, 1.0, 1.0).unwrap();
        let r = Region::grid_box(&m, 2, 2, 5, 5).unwrap();
        assert_eq!(r.len(), 25);
        assert_eq!(r.margin(), 2);
        assert_eq!(r.interior(1).len(), 9);
        assert_eq!(r.interior(2), vec![4 + 10 * 4]);
    }

    #[test]
    fn invalid_regions_are_rejected() {
        let m = DiscreteManifold::cycle(8).unwrap();
        assert!(Region::new(&m, vec![]).is_err());
        assert!(Region::new(&m, vec![0, 2]).is_err());
        assert!(Region::new(&m, (0..8).collect()).is_err());
        let p = DiscreteManifold::path_dirichlet(4).unwrap();
        assert!(Region::new(&p, vec![0, 1]).is_err());
        assert!(Region::new(&p, vec![1, 2]).is_ok());
    }

    #[test]
    fn distances_on_grid_and_cycle() {
        let t = DiscreteManifold::flat_torus(5, 5, 1.0, 1.0).unwrap();
        let a = Region::new(&t, vec![0]).unwrap();
        let b = Region::new(&t, vec![1]).unwrap();
        assert_eq!(graph_distance(&t, &a, &b).unwrap(), 1.0);
        let c = DiscreteManifold::cycle(8).unwrap();
        let a = Region::new(&c, vec![0]).unwrap();
        let b = Region::new(&c, vec![4]).unwrap();
        assert_eq!(graph_distance(&c, &a, &b).unwrap(), 4.0);
        assert_eq!(graph_distance(&c, &b, &a).unwrap(), 4.0);
        assert!(matches!(graph_distance(&c, &a, &a), Err(Error::OverlappingRegions)));
    }

    #[test]
    fn distance_uses_physical_spacing() {
        let t = DiscreteManifold::flat_torus(6, 6, 0.5, 2.0).unwrap();
        let a = Region::new(&t, vec![0]).unwrap();
        let b = Region::new(&t, vec![2 + 6]).unwrap();
        assert_eq!(graph_distance(&t, &a, &b).unwrap(), 3.0);
    }
}
