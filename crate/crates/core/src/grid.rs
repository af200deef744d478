//! Regular-grid storage shared by the field, projection, and elasticity
//! stages.
//!
//! All grids are row-major with index `e = y * nx + x`; element `(x, y)`
//! covers the unit square `[x, x+1] x [y, y+1]`, so the domain is
//! `[0, nx] x [0, ny]` and one element has unit side. `y` grows upward;
//! file writers are responsible for flipping rows if their format expects
//! the top row first.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-element role in the optimization domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    /// Density is controlled by the design variables.
    Design,
    /// Forced empty: density 0, excluded from the volume budget.
    PassiveVoid,
    /// Forced full: density 1. Included in the volume budget only when the
    /// caller asks for that accounting.
    PassiveSolid,
}

/// Classification of every element of the grid into design and passive zones.
#[derive(Debug, Clone)]
pub struct DomainMask {
    nx: usize,
    ny: usize,
    states: Vec<CellState>,
}

impl DomainMask {
    /// Every element is a design element.
    pub fn all_design(nx: usize, ny: usize) -> Result<Self> {
        Self::from_states(nx, ny, vec![CellState::Design; nx.checked_mul(ny).unwrap_or(0)])
    }

    /// Explicit per-element states, row-major. At least one element must be
    /// a design element, otherwise there is nothing to optimize.
    pub fn from_states(nx: usize, ny: usize, states: Vec<CellState>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyGrid(nx, ny));
        }
        if states.len() != nx * ny {
            return Err(Error::MaskResolutionMismatch {
                mask: (states.len(), 1),
                grid: (nx, ny),
            });
        }
        if !states.contains(&CellState::Design) {
            return Err(Error::NoDesignElements);
        }
        Ok(Self { nx, ny, states })
    }

    /// Design interior surrounded by a passive solid frame of the given
    /// thickness in elements.
    pub fn with_frame(nx: usize, ny: usize, thickness: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyGrid(nx, ny));
        }
        let mut states = vec![CellState::Design; nx * ny];
        for y in 0..ny {
            for x in 0..nx {
                let on_frame =
                    x < thickness || y < thickness || x >= nx - thickness || y >= ny - thickness;
                if on_frame {
                    states[y * nx + x] = CellState::PassiveSolid;
                }
            }
        }
        Self::from_states(nx, ny, states)
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    #[inline]
    pub fn state(&self, element: usize) -> CellState {
        self.states[element]
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    pub fn design_count(&self) -> usize {
        self.states.iter().filter(|s| **s == CellState::Design).count()
    }

    pub fn passive_solid_count(&self) -> usize {
        self.states.iter().filter(|s| **s == CellState::PassiveSolid).count()
    }
}

/// Scalar field sampled at element centroids, one value per element.
#[derive(Debug, Clone)]
pub struct DensityGrid<R: Real> {
    nx: usize,
    ny: usize,
    values: Vec<R>,
}

impl<R: Real> DensityGrid<R> {
    pub fn from_values(nx: usize, ny: usize, values: Vec<R>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyGrid(nx, ny));
        }
        assert_eq!(values.len(), nx * ny, "value buffer must match resolution");
        Ok(Self { nx, ny, values })
    }

    pub fn constant(nx: usize, ny: usize, value: R) -> Result<Self> {
        Self::from_values(nx, ny, vec![value; nx * ny])
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, element: usize) -> R {
        self.values[element]
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    /// Centroid of an element in grid coordinates (element side = 1).
    #[inline]
    pub fn centroid(&self, element: usize) -> [R; 2] {
        let x = element % self.nx;
        let y = element / self.nx;
        [
            R::of(x as f64) + R::of(0.5),
            R::of(y as f64) + R::of(0.5),
        ]
    }
}
