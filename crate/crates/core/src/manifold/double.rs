use super::{DiscreteManifold, EdgeSpec};
use crate::error::{Error, Result};

/// Two copies of a manifold with boundary glued along the boundary.
#[derive(Debug, Clone)]
pub struct DoubleManifold {
    pub doubled: DiscreteManifold,
    pub embed_plus: Vec<usize>,
    pub embed_minus: Vec<usize>,
    pub seam: Vec<usize>,
}

impl DoubleManifold {
    /// Odd extension: `f` on the plus copy, `−f` on the minus copy.
    pub fn odd_extension(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.doubled.n()];
        for (i, &v) in f.iter().enumerate() {
            out[self.embed_plus[i]] += v;
            out[self.embed_minus[i]] -= v;
        }
        out
    }
}

/// Plus copy keeps the original numbering; minus-copy interior vertices
/// follow in ascending order; seam vertices appear once with summed mass.
pub fn double_manifold(m: &DiscreteManifold) -> Result<DoubleManifold> {
    if m.boundary().is_empty() {
        return Err(Error::EmptyBoundary);
    }
    for &b in m.boundary() {
        if !m.neighbors(b).iter().any(|e| !m.is_boundary(e.to)) {
            return Err(Error::InvalidManifold(format!("boundary vertex {b} has no interior neighbour")));
        }
    }
    let n = m.n();
    let embed_plus: Vec<usize> = (0..n).collect();
    let mut embed_minus = vec![0; n];
    let mut next = n;
    for (i, slot) in embed_minus.iter_mut().enumerate() {
        if m.is_boundary(i) {
            *slot = i;
        } else {
            *slot = next;
            next += 1;
        }
    }
    let mut mass = vec![0.0; next];
    for i in 0..n {
        mass[embed_plus[i]] += m.mass()[i];
        mass[embed_minus[i]] += m.mass()[i];
    }
    let mut edges: Vec<EdgeSpec> = Vec::new();
    for (i, j, e) in m.edges() {
        if m.is_boundary(i) && m.is_boundary(j) {
            edges.push((i, j, 2.0 * e.weight, e.length));
        } else {
            edges.push((embed_plus[i], embed_plus[j], e.weight, e.length));
            edges.push((embed_minus[i], embed_minus[j], e.weight, e.length));
        }
    }
    let doubled = DiscreteManifold::from_parts(mass, &edges, Vec::new(), None, format!("{}-double", m.label()))?;
    Ok(DoubleManifold { doubled, embed_plus, embed_minus, seam: m.boundary().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubled_path_is_a_unit_cycle() {
        let p = DiscreteManifold::path_dirichlet(6).unwrap();
        let d = double_manifold(&p).unwrap();
        let c = &d.doubled;
        assert_eq!(c.n(), 14);
        assert!(c.boundary().is_empty());
        assert!(c.mass().iter().all(|&m| m == 1.0));
        for v in 0..14 {
            assert_eq!(c.neighbors(v).len(), 2);
            assert!(c.neighbors(v).iter().all(|e| e.weight == 1.0));
        }
        for &b in &d.seam {
            assert_eq!(d.embed_plus[b], d.embed_minus[b]);
        }
    }

    #[test]
    fn vertex_count_is_two_interiors_plus_boundary() {
        let p = DiscreteManifold::path_dirichlet(3).unwrap();
        let d = double_manifold(&p).unwrap();
        assert_eq!(d.doubled.n(), 2 * 3 + 2);
    }

    #[test]
    fn closed_manifold_cannot_be_doubled() {
        let c = DiscreteManifold::cycle(5).unwrap();
        assert!(matches!(double_manifold(&c), Err(Error::EmptyBoundary)));
    }

    #[test]
    fn odd_extension_has_zero_mass_weighted_mean() {
        let p = DiscreteManifold::path_dirichlet(5).unwrap();
        let d = double_manifold(&p).unwrap();
        let f: Vec<f64> = (0..p.n()).map(|i| if p.is_boundary(i) { 0.0 } else { (i as f64).sin() }).collect();
        let g = d.odd_extension(&f);
        let mean: f64 = g.iter().zip(d.doubled.mass()).map(|(a, m)| a * m).sum();
        assert!(mean.abs() < 1e-15);
    }
}
