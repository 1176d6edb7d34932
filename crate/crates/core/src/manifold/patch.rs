use super::{DiscreteManifold, Region};
use crate::error::{Error, Result};

/// Exact weight- and mass-preserving bijection between a region of one
/// manifold and a region of another.
///
/// Patch-local index `p` refers to `first().vertices()[p]` on the first
/// manifold and `image()[p]` on the second.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchIsometry {
    first: Region,
    second: Region,
    image: Vec<usize>,
    mass: Vec<f64>,
    depth: Vec<usize>,
}

impl PatchIsometry {
    pub fn new(m1: &DiscreteManifold, r1: &Region, m2: &DiscreteManifold, image: Vec<usize>) -> Result<Self> {
        if image.len() != r1.len() {
            return Err(Error::NotIsometric(format!(
                "map has {} entries for {} patch vertices",
                image.len(),
                r1.len()
            )));
        }
        let second = Region::new(m2, image.clone())?;
        if second.len() != r1.len() {
            return Err(Error::NotIsometric("map is not injective".into()));
        }
        for (p, (&a, &fa)) in r1.vertices().iter().zip(&image).enumerate() {
            if m1.mass()[a] != m2.mass()[fa] {
                return Err(Error::NotIsometric(format!(
                    "mass differs at patch vertex {p}: {} vs {}",
                    m1.mass()[a],
                    m2.mass()[fa]
                )));
            }
        }
        let mut edges1 = 0;
        for (&a, &fa) in r1.vertices().iter().zip(&image) {
            for e in m1.neighbors(a) {
                if let Some(q) = r1.local_index(e.to) {
                    edges1 += 1;
                    let w2 = m2.weight(fa, image[q]);
                    if w2 != e.weight {
                        return Err(Error::NotIsometric(format!(
                            "weight ({a},{}) is {} but its image carries {w2}",
                            e.to, e.weight
                        )));
                    }
                }
            }
        }
        let edges2: usize = second
            .vertices()
            .iter()
            .map(|&v| m2.neighbors(v).iter().filter(|e| second.contains(e.to)).count())
            .sum();
        if edges1 != edges2 {
            return Err(Error::NotIsometric("image carries extra couplings".into()));
        }
        let mass = r1.vertices().iter().map(|&v| m1.mass()[v]).collect();
        let depth = image
            .iter()
            .zip(r1.depths())
            .map(|(&fa, &d1)| d1.min(second.depths()[second.local_index(fa).unwrap()]))
            .collect();
        Ok(PatchIsometry { first: r1.clone(), second, image, mass, depth })
    }

    /// A region mapped to itself.
    pub fn identity(m: &DiscreteManifold, r: &Region) -> Result<Self> {
        PatchIsometry::new(m, r, m, r.vertices().to_vec())
    }

    /// A region mapped through a relabeling permutation.
    pub fn relabeled(m: &DiscreteManifold, r: &Region, relabeled: &DiscreteManifold, perm: &[usize]) -> Result<Self> {
        PatchIsometry::new(m, r, relabeled, r.vertices().iter().map(|&v| perm[v]).collect())
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn first(&self) -> &Region {
        &self.first
    }

    pub fn second(&self) -> &Region {
        &self.second
    }

    /// Second-manifold vertex for each patch-local index.
    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// Manifold vertices of the patch on side 0 or 1, in patch-local order.
    pub fn vertices(&self, side: usize) -> &[usize] {
        match side {
            0 => self.first.vertices(),
            _ => &self.image,
        }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Depth from the complement, the smaller of the two sides.
    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    /// Patch-local indices at depth at least `r + 1` on both sides.
    pub fn interior(&self, r: usize) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.depth[p] > r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_patch_between_tori_of_different_extent() {
        let a = DiscreteManifold::flat_torus(4, 6, 1.0, 1.0).unwrap();
        let b = DiscreteManifold::flat_torus(4, 9, 1.0, 1.0).unwrap();
        let ra = Region::grid_box(&a, 0, 1, 4, 4).unwrap();
        let rb = Region::grid_box(&b, 0, 1, 4, 4).unwrap();
        let p = PatchIsometry::new(&a, &ra, &b, rb.vertices().to_vec());
        assert!(p.is_ok());
    }

    #[test]
    fn spacing_mismatch_is_not_isometric() {
        let a = DiscreteManifold::flat_torus(6, 6, 1.0, 1.0).unwrap();
        let b = DiscreteManifold::flat_torus(6, 6, 1.0, 2.0).unwrap();
        let r = Region::grid_box(&a, 0, 0, 3, 3).unwrap();
        let err = PatchIsometry::new(&a, &r, &b, r.vertices().to_vec()).unwrap_err();
        assert!(matches!(err, Error::NotIsometric(_)));
    }

    #[test]
    fn relabeled_patch_validates() {
        let a = DiscreteManifold::cycle(9).unwrap();
        let perm: Vec<usize> = (0..9).map(|i| (4 * i + 3) % 9).collect();
        let b = a.relabel(&perm).unwrap();
        let r = Region::range(&a, 2, 4).unwrap();
        let p = PatchIsometry::relabeled(&a, &r, &b, &perm).unwrap();
        assert_eq!(p.image()[0], perm[2]);
        assert_eq!(p.depths(), &[1, 2, 2, 1]);
    }

    #[test]
    fn scrambled_map_is_rejected() {
        let a = DiscreteManifold::cycle(9).unwrap();
        let r = Region::range(&a, 0, 3).unwrap();
        assert!(PatchIsometry::new(&a, &r, &a, vec![0, 2, 1]).is_err());
    }
}
