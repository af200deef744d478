//! Smoothed Heaviside projection with steepness continuation.
//!
//! The raw Voronoi density is pushed toward 0/1 by
//!
//! ```text
//! proj(rho) = (tanh(g t) + tanh(g (rho - t))) / (tanh(g t) + tanh(g (1 - t)))
//! ```
//!
//! with threshold `t` and steepness `g`. The steepness follows a doubling
//! schedule over optimization iterations, `g(i) = min(cap, 2^(i / period))`,
//! so early iterations see a nearly linear map (gentle gradients everywhere)
//! and late iterations a near-step function.

use crate::error::{Error, Result};
use crate::grid::{CellState, DensityGrid, DomainMask};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy)]
pub struct ProjectionConfig<R: Real> {
    /// Threshold `t` in (0, 1); densities above it project toward 1.
    pub threshold: R,
    /// Current steepness `g` (>= 1).
    pub steepness: R,
    /// Iterations between steepness doublings.
    pub doubling_period: usize,
    /// Upper clamp of the schedule.
    pub steepness_cap: R,
}

impl<R: Real> Default for ProjectionConfig<R> {
    fn default() -> Self {
        Self {
            threshold: real(0.5),
            steepness: R::one(),
            doubling_period: 50,
            steepness_cap: real(64.0),
        }
    }
}

impl<R: Real> ProjectionConfig<R> {
    // Negated comparisons so NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > R::zero() && self.threshold < R::one()) {
            return Err(Error::InvalidProjectionConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if !(self.steepness >= R::one() && self.steepness.finite()) {
            return Err(Error::InvalidProjectionConfig(format!(
                "steepness must be >= 1, got {}",
                self.steepness
            )));
        }
        if self.doubling_period == 0 {
            return Err(Error::InvalidProjectionConfig(
                "doubling_period must be >= 1".to_string(),
            ));
        }
        if !(self.steepness_cap >= R::one()) {
            return Err(Error::InvalidProjectionConfig(format!(
                "steepness_cap must be >= 1, got {}",
                self.steepness_cap
            )));
        }
        Ok(())
    }

    pub fn with_steepness(mut self, steepness: R) -> Self {
        self.steepness = steepness;
        self
    }
}

/// Steepness the schedule assigns to an iteration: doubling from 1 every
/// `doubling_period` iterations, clamped at the cap.
pub fn steepness_at<R: Real>(cfg: &ProjectionConfig<R>, iteration: usize) -> R {
    let doublings = (iteration / cfg.doubling_period) as f64;
    let g = real::<R>(doublings.exp2());
    g.min(cfg.steepness_cap)
}

/// Config with the scheduled steepness of `iteration` installed.
pub fn advance_steepness<R: Real>(cfg: &ProjectionConfig<R>, iteration: usize) -> ProjectionConfig<R> {
    cfg.with_steepness(steepness_at(cfg, iteration))
}

/// Projected value of one density.
///
/// Fixed points by construction: `heaviside(0) = 0` and `heaviside(1) = 1`
/// exactly, so passive elements keep their forced values.
#[inline]
pub fn heaviside<R: Real>(cfg: &ProjectionConfig<R>, rho: R) -> R {
    let g = cfg.steepness;
    let t = cfg.threshold;
    let anchor = (g * t).tanh();
    (anchor + (g * (rho - t)).tanh()) / (anchor + (g * (R::one() - t)).tanh())
}

/// Derivative of [`heaviside`] with respect to the density. Positive away
/// from the tanh tails; at high steepness it underflows to zero far from
/// the threshold, exactly where the projection is flat anyway.
#[inline]
pub fn heaviside_derivative<R: Real>(cfg: &ProjectionConfig<R>, rho: R) -> R {
    let g = cfg.steepness;
    let t = cfg.threshold;
    let anchor = (g * t).tanh();
    let th = (g * (rho - t)).tanh();
    g * (R::one() - th * th) / (anchor + (g * (R::one() - t)).tanh())
}

/// Density grid after projection; remembers the steepness that produced it.
#[derive(Debug, Clone)]
pub struct ProjectedDensityGrid<R: Real> {
    grid: DensityGrid<R>,
    steepness: R,
}

impl<R: Real> ProjectedDensityGrid<R> {
    pub fn resolution(&self) -> (usize, usize) {
        self.grid.resolution()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn value(&self, element: usize) -> R {
        self.grid.value(element)
    }

    pub fn values(&self) -> &[R] {
        self.grid.values()
    }

    pub fn steepness(&self) -> R {
        self.steepness
    }

    /// Escape hatch for tests and baselines that need a hand-built grid.
    pub fn from_grid(grid: DensityGrid<R>, steepness: R) -> Self {
        Self { grid, steepness }
    }
}

/// Project every element of a grid.
pub fn project<R: Real>(grid: &DensityGrid<R>, cfg: &ProjectionConfig<R>) -> ProjectedDensityGrid<R> {
    let (nx, ny) = grid.resolution();
    let values = grid.values().iter().map(|&v| heaviside(cfg, v)).collect();
    ProjectedDensityGrid {
        grid: DensityGrid::from_values(nx, ny, values).expect("same resolution"),
        steepness: cfg.steepness,
    }
}

/// Which elements the volume budget counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeAccounting {
    /// Only design elements enter numerator and denominator; passive solid
    /// material is free.
    #[default]
    DesignOnly,
    /// Passive solid elements are counted as full material in both sums.
    WithPassiveSolid,
}

/// Material volume as a fraction of the counted domain.
///
/// Passive void never counts; passive solid counts as density 1 only under
/// [`VolumeAccounting::WithPassiveSolid`].
pub fn volume_fraction<R: Real>(
    grid: &ProjectedDensityGrid<R>,
    mask: &DomainMask,
    accounting: VolumeAccounting,
) -> R {
    debug_assert_eq!(grid.resolution(), mask.resolution());
    let mut sum = R::zero();
    let mut count = 0usize;
    for e in 0..grid.len() {
        match mask.state(e) {
            CellState::Design => {
                sum += grid.value(e);
                count += 1;
            }
            CellState::PassiveSolid => {
                if accounting == VolumeAccounting::WithPassiveSolid {
                    sum += R::one();
                    count += 1;
                }
            }
            CellState::PassiveVoid => {}
        }
    }
    sum / real(count as f64)
}
