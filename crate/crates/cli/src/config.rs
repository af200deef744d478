//! Run configuration: a TOML document in unit-height coordinates.
//!
//! The config speaks the resolution-independent convention: the domain is
//! `aspect` wide and `1.0` tall regardless of the element grid, positions
//! and box regions live in those units, and metric factors are sized for
//! them. The core crate works in element units (element side = 1), so
//! conversion multiplies lengths by the element row count `ny` and divides
//! metric factors by it; the metric distance `|D (x - y)|` is invariant
//! under that pair.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use vorotop::elasticity::{FixSpec, LoadSpec, NodeRegion, SolveOptions};
use vorotop::grid::DomainMask;
use vorotop::pipeline::{scatter_sites, DesignBounds, DesignVariables, Problem};
use vorotop::projection::VolumeAccounting;
use vorotop::voronoi::{MetricFactor, SiteSet};
use vorotop::Scalar;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub material: MaterialSection,
    pub sites: SitesSection,
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, rename = "fix")]
    pub fixes: Vec<FixSection>,
    #[serde(default, rename = "load")]
    pub loads: Vec<LoadSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Element grid `[nx, ny]`.
    pub resolution: [usize; 2],
    /// Passive solid border of this many elements.
    #[serde(default)]
    pub frame: usize,
    /// Refuse to run without a `--mask` image.
    #[serde(default)]
    pub needs_mask: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    /// Weight exponent `beta`.
    pub sharpness: f64,
    /// Virtual-competitor constant `eps`; zero disables free boundaries.
    pub boundary_weight: f64,
    /// Nearest sites per evaluation point.
    pub neighbor_count: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { sharpness: 50.0, boundary_weight: 0.0, neighbor_count: 16 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSection {
    pub threshold: f64,
    /// Steepness of iteration zero.
    pub steepness: f64,
    pub doubling_period: usize,
    pub steepness_cap: f64,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        Self { threshold: 0.5, steepness: 1.0, doubling_period: 50, steepness_cap: 64.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub young_modulus: f64,
    pub young_modulus_min: f64,
    pub poisson: f64,
    pub penalization: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            young_modulus: 1.0,
            young_modulus_min: 1e-9,
            poisson: 0.3,
            penalization: 1.0,
        }
    }
}

/// Initial sites: either an explicit list or a jittered scatter grid.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SitesSection {
    /// Explicit positions, unit-height coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Per-site metric lower triangles `[d00, d10, d11]`, with `positions`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<[f64; 3]>>,
    /// Scatter grid `[cells_x, cells_y]`, one jittered site per cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    /// Isotropic metric scale shared by all sites (scatter, or explicit
    /// positions without per-site metrics).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
    /// Scatter RNG seed; `--seed` overrides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Keep scattered sites at least this far from the domain border,
    /// `[inset_x, inset_y]` in unit-height units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inset: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub volume_target: f64,
    pub max_iterations: usize,
    pub move_tolerance: f64,
    pub compliance_tolerance: f64,
    /// "positions-and-metrics", "positions", or "metrics".
    pub variables: String,
    pub include_passive_solid_in_volume: bool,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            volume_target: 0.35,
            max_iterations: 250,
            move_tolerance: 1e-4,
            compliance_tolerance: 1e-3,
            variables: "positions-and-metrics".to_string(),
            include_passive_solid_in_volume: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Positions may leave the domain by this fraction of its extent.
    pub position_margin: f64,
    pub metric_diag_min: f64,
    pub metric_diag_max: f64,
    pub metric_offdiag_limit: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            position_margin: 0.2,
            metric_diag_min: 0.0,
            metric_diag_max: 2000.0,
            metric_offdiag_limit: 100.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 8000 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FixSection {
    /// `[[x_min, y_min], [x_max, y_max]]`, unit-height coordinates.
    pub region: [[f64; 2]; 2],
    /// "x", "y", or "xy".
    pub axes: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub region: [[f64; 2]; 2],
    /// Total force, split equally over the region's nodes.
    pub force: [f64; 2],
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub mask: Option<DomainMask>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let [nx, ny] = self.domain.resolution;
        if nx == 0 || ny == 0 {
            bail!("domain.resolution must be positive in both axes");
        }
        let s = &self.sites;
        match (&s.positions, &s.grid) {
            (Some(_), Some(_)) => bail!("sites: give either positions or grid, not both"),
            (None, None) => bail!("sites: give either positions or grid"),
            (Some(p), None) => {
                if p.is_empty() {
                    bail!("sites.positions must not be empty");
                }
                match (&s.metrics, s.metric) {
                    (Some(m), None) => {
                        if m.len() != p.len() {
                            bail!(
                                "sites.metrics has {} entries for {} positions",
                                m.len(),
                                p.len()
                            );
                        }
                    }
                    (None, Some(_)) => {}
                    (Some(_), Some(_)) => {
                        bail!("sites: give either metrics or metric, not both")
                    }
                    (None, None) => bail!("sites.positions needs metrics or metric"),
                }
                if s.inset.is_some() {
                    bail!("sites.inset only applies to a scatter grid");
                }
            }
            (None, Some(g)) => {
                if g[0] == 0 || g[1] == 0 {
                    bail!("sites.grid must be positive in both axes");
                }
                if s.metric.is_none() {
                    bail!("sites.grid needs sites.metric");
                }
                if s.metrics.is_some() {
                    bail!("sites.metrics requires explicit positions");
                }
            }
        }
        self.design_variables()?;
        for f in &self.fixes {
            axes_flags(&f.axes)?;
        }
        Ok(())
    }

    pub fn design_variables(&self) -> Result<DesignVariables> {
        match self.optimize.variables.as_str() {
            "positions-and-metrics" => Ok(DesignVariables::PositionsAndMetrics),
            "positions" => Ok(DesignVariables::PositionsOnly),
            "metrics" => Ok(DesignVariables::MetricsOnly),
            other => bail!(
                "optimize.variables must be positions-and-metrics, positions, \
                 or metrics; got {other:?}"
            ),
        }
    }

    /// Element row count, the unit-height scale factor.
    pub fn height(&self) -> f64 {
        self.domain.resolution[1] as f64
    }

    /// Initial sites in core (element) units.
    pub fn build_sites(&self, seed_override: Option<u64>) -> Result<SiteSet<Scalar, 2>> {
        let [nx, ny] = self.domain.resolution;
        let h = self.height();
        let s = &self.sites;
        if let Some(positions) = &s.positions {
            let core_positions: Vec<Vector2<f64>> = positions
                .iter()
                .map(|p| Vector2::new(p[0] * h, p[1] * h))
                .collect();
            let metrics: Vec<MetricFactor<f64, 2>> = match (&s.metrics, s.metric) {
                (Some(list), None) => list
                    .iter()
                    .map(|t| {
                        MetricFactor::from_lower_triangle(&[t[0] / h, t[1] / h, t[2] / h])
                    })
                    .collect(),
                (None, Some(scale)) => {
                    vec![MetricFactor::isotropic(scale / h); core_positions.len()]
                }
                _ => unreachable!("validated"),
            };
            return Ok(SiteSet::new(core_positions, metrics)?);
        }

        let grid = s.grid.expect("validated");
        let metric = MetricFactor::isotropic(s.metric.expect("validated") / h);
        let seed = seed_override.or(s.seed).unwrap_or(0);
        let mut sites = scatter_sites(nx, ny, grid[0], grid[1], metric, seed)?;
        if let Some([ix, iy]) = s.inset {
            // Remap the scatter into the inset box, preserving the jitter.
            let (ix, iy) = (ix * h, iy * h);
            let (w, hh) = (nx as f64, ny as f64);
            for i in 0..sites.len() {
                let p = *sites.position(i);
                sites.set_position(
                    i,
                    Vector2::new(
                        ix + p[0] * (w - 2.0 * ix) / w,
                        iy + p[1] * (hh - 2.0 * iy) / hh,
                    ),
                );
            }
        }
        Ok(sites)
    }

    /// Assemble the core problem, applying command-line overrides.
    pub fn to_problem(&self, overrides: &Overrides) -> Result<Problem<Scalar>> {
        let [nx, ny] = self.domain.resolution;
        let h = self.height();

        let mask = match &overrides.mask {
            Some(m) => {
                if self.domain.frame > 0 {
                    bail!("domain.frame and --mask are mutually exclusive");
                }
                if m.resolution() != (nx, ny) {
                    bail!(
                        "mask resolution {:?} does not match domain {:?}",
                        m.resolution(),
                        (nx, ny)
                    );
                }
                m.clone()
            }
            None if self.domain.needs_mask => {
                bail!("this config needs a mask image; pass --mask PATH")
            }
            None if self.domain.frame > 0 => {
                DomainMask::with_frame(nx, ny, self.domain.frame)?
            }
            None => DomainMask::all_design(nx, ny)?,
        };

        let sites = self.build_sites(overrides.seed)?;

        let mut problem = Problem::new(mask, sites);
        problem.field.sharpness = self.field.sharpness;
        problem.field.boundary_weight = self.field.boundary_weight;
        problem.field.neighbor_count = self.field.neighbor_count.min(problem.sites.len());

        problem.projection.threshold = self.projection.threshold;
        problem.projection.steepness = self.projection.steepness;
        problem.projection.doubling_period = self.projection.doubling_period;
        problem.projection.steepness_cap = self.projection.steepness_cap;

        problem.material.young_modulus = self.material.young_modulus;
        problem.material.young_modulus_min = self.material.young_modulus_min;
        problem.material.poisson = self.material.poisson;
        problem.material.penalization = self.material.penalization;

        problem.solve = SolveOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
        };

        for f in &self.fixes {
            let (fix_x, fix_y) = axes_flags(&f.axes)?;
            problem.fixes.push(FixSpec {
                region: scale_region(&f.region, h),
                fix_x,
                fix_y,
            });
        }
        for l in &self.loads {
            problem.loads.push(LoadSpec {
                region: scale_region(&l.region, h),
                force: l.force,
            });
        }

        problem.volume_target = self.optimize.volume_target;
        problem.volume_accounting = if self.optimize.include_passive_solid_in_volume {
            VolumeAccounting::WithPassiveSolid
        } else {
            VolumeAccounting::DesignOnly
        };
        problem.design_variables = self.design_variables()?;
        problem.bounds = DesignBounds {
            position_margin: self.bounds.position_margin,
            metric_diag_min: self.bounds.metric_diag_min / h,
            metric_diag_max: self.bounds.metric_diag_max / h,
            metric_offdiag_limit: self.bounds.metric_offdiag_limit / h,
        };
        problem.max_iterations = overrides
            .max_iterations
            .unwrap_or(self.optimize.max_iterations);
        problem.move_tolerance = self.optimize.move_tolerance;
        problem.compliance_tolerance = self.optimize.compliance_tolerance;

        problem.validate()?;
        Ok(problem)
    }

    /// Steepness the schedule reaches on the last scheduled iteration.
    pub fn final_steepness(&self) -> f64 {
        let iters = self.optimize.max_iterations.max(1);
        let doublings = ((iters - 1) / self.projection.doubling_period) as f64;
        doublings.exp2().min(self.projection.steepness_cap)
    }
}

fn axes_flags(axes: &str) -> Result<(bool, bool)> {
    match axes {
        "x" => Ok((true, false)),
        "y" => Ok((false, true)),
        "xy" | "yx" => Ok((true, true)),
        other => bail!("fix.axes must be x, y, or xy; got {other:?}"),
    }
}

fn scale_region(r: &[[f64; 2]; 2], h: f64) -> NodeRegion<f64> {
    NodeRegion::new([r[0][0] * h, r[0][1] * h], [r[1][0] * h, r[1][1] * h])
}
