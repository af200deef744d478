//! Gradient-based topology optimization over a differentiable, anisotropic,
//! optionally free-boundary Voronoi design space.
//!
//! The design is a set of Voronoi sites, each with a position and a
//! symmetric metric factor. [`voronoi`] rasterizes them into a smooth
//! density field on a regular grid together with analytical gradients,
//! [`projection`] sharpens that field with a tanh projection under a
//! steepness continuation schedule, [`elasticity`] solves 2D plane-stress
//! compliance on the same grid, [`mma`] takes bounded optimization steps,
//! and [`pipeline`] wires the chain rule through all of it into a full
//! compliance-minimization loop under a volume constraint. [`oracle`] holds
//! independent reference implementations (finite differences, brute-force
//! field evaluation, discrete labels, dense elasticity) used to validate
//! the fast paths.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`];
//! the aliases at the crate root pin `f64`, which is what the binaries and
//! the documented tolerances use.

pub mod elasticity;
pub mod error;
pub mod grid;
pub mod mma;
pub mod neighbor;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod scalar;
pub mod voronoi;

pub use error::{Error, Result};
pub use scalar::{real, Real};

/// Shipping scalar type.
pub type Scalar = f64;

pub type MetricFactor2 = voronoi::MetricFactor<Scalar, 2>;
pub type SiteSet2 = voronoi::SiteSet<Scalar, 2>;
pub type FieldConfig2 = voronoi::FieldConfig<Scalar>;
pub type DensityGrid2 = grid::DensityGrid<Scalar>;
pub type DensityGradients2 = voronoi::DensityGradients<Scalar, 2>;
pub type NeighborIndex2 = neighbor::NeighborIndex<Scalar, 2>;
pub type ProjectionConfig2 = projection::ProjectionConfig<Scalar>;
pub type ProjectedDensityGrid2 = projection::ProjectedDensityGrid<Scalar>;
pub type MaterialModel2 = elasticity::MaterialModel<Scalar>;
pub type BoundaryConditions2 = elasticity::BoundaryConditions<Scalar>;
pub type Problem2 = pipeline::Problem<Scalar>;
