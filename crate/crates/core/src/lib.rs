//! potlab-core: a desk-scale numerical laboratory for discrete potential
//! theory on weighted graphs.
//!
//! The crate computes local Green functions, L^p-capacities, heat kernels,
//! and smoothing transforms on finite truncations of infinite graphs, and
//! turns the classical equivalences and volume-growth criteria of the
//! subject into testable numerical properties:
//!
//! * [`graph`] — weighted graphs, the graph metric, balls and volume
//!   profiles;
//! * [`builders`] — lattice, Heisenberg, and Cayley-ball truncations with
//!   trusted radii, plus closed-form lattice profiles;
//! * [`walk`] — Markov operator, Laplacian, heat kernels, killed walks;
//! * [`green`] — local Green columns by conjugate gradients with a
//!   truncated-series oracle, exhaustion trends, L^q-Green values, Li-Yau
//!   comparison series;
//! * [`capacity`] — the three equivalent capacity programs with
//!   weak-duality certificates, harmonic and p-energy capacities;
//! * [`smoothing`] — the hat-weight transform and its exact combinatorics;
//! * [`criteria`] — series classifiers for parabolicity, the
//!   superharmonic-pair checker, Poincare and Gaussian-band diagnostics.
//!
//! Graph values are immutable after construction and all queries are pure,
//! so everything here is safe to evaluate concurrently.

pub mod builders;
pub mod capacity;
pub mod criteria;
pub mod error;
pub mod graph;
pub mod green;
pub mod smoothing;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{VertexId, VertexSet, WeightedGraph};
