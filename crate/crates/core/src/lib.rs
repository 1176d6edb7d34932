//! Discrete laboratory for fractional Laplacian source-to-solution data.
//!
//! Manifolds are weighted graphs with lumped mass. Heat, fractional powers,
//! waves and spectral recovery run on a dense mass-orthonormal
//! eigendecomposition of the graph Laplacian. Small-time differences between
//! two manifolds use sparse mat-vecs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv;
pub mod error;
pub mod fractional;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod pair;
pub mod quadrature;
pub mod recovery;
pub mod sources;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
pub use manifold::{DiscreteManifold, DoubleManifold, PatchIsometry, Region};
pub use pair::{ManifoldPair, RestrictionOperator, SpectralManifold};
pub use spectral::{BoundaryMode, EigenGroup, SpectralDecomposition};
