//! The optimization loop: site layout -> density -> projection -> elasticity
//! -> sensitivities -> design update.
//!
//! One iteration evaluates the current sites and then moves them:
//!
//! 1. rebuild the neighbor index and rasterize the density with gradients,
//! 2. project with the scheduled steepness,
//! 3. solve elasticity (warm started from the previous iterate),
//! 4. chain compliance and volume sensitivities back to the packed design
//!    vector,
//! 5. take one update step, measure the move, and check the stopping rules.
//!
//! The design vector packs, per site and in site order, position `[x, y]`
//! and/or the lower triangle `[d00, d10, d11]` of the metric factor,
//! depending on which quantities are being optimized. Because the factor is
//! symmetric and the stored metric gradient is symmetrized, the packed
//! derivative of the off-diagonal entry is twice the stored one (it sits in
//! two matrix slots).
//!
//! The objective handed to the optimizer is compliance divided by its value
//! at the first iterate, which makes the optimizer tuning independent of
//! problem scale. The volume constraint is `vol - target <= 0`.

use std::time::Instant;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elasticity::{
    assemble_and_solve, BoundaryConditions, ElasticState, FixSpec, LoadSpec, MaterialModel,
    SolveOptions,
};
use crate::error::{Error, Result};
use crate::grid::{CellState, DensityGrid, DomainMask};
use crate::mma::{MmaOptions, MmaState};
use crate::neighbor::NeighborIndex;
use crate::projection::{
    advance_steepness, heaviside_derivative, project, steepness_at, volume_fraction,
    ProjectedDensityGrid, ProjectionConfig, VolumeAccounting,
};
use crate::scalar::{real, Real};
use crate::voronoi::{rasterize_density, DensityGradients, FieldConfig, MetricFactor, SiteSet};

/// Which per-site quantities the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignVariables {
    PositionsAndMetrics,
    PositionsOnly,
    MetricsOnly,
}

/// Box bounds of the design vector.
#[derive(Debug, Clone, Copy)]
pub struct DesignBounds<R: Real> {
    /// Positions may leave the domain by this fraction of its extent per
    /// side, letting cells be pushed across the boundary.
    pub position_margin: R,
    pub metric_diag_min: R,
    pub metric_diag_max: R,
    /// Off-diagonal entries live in `[-limit, limit]`.
    pub metric_offdiag_limit: R,
}

impl<R: Real> Default for DesignBounds<R> {
    fn default() -> Self {
        Self {
            position_margin: real(0.2),
            metric_diag_min: R::zero(),
            metric_diag_max: real(2000.0),
            metric_offdiag_limit: real(100.0),
        }
    }
}

/// Mapping between a [`SiteSet`] and the flat design vector.
#[derive(Debug, Clone, Copy)]
pub struct DesignLayout {
    n_sites: usize,
    positions: bool,
    metrics: bool,
}

impl DesignLayout {
    pub fn new(n_sites: usize, variables: DesignVariables) -> Self {
        let (positions, metrics) = match variables {
            DesignVariables::PositionsAndMetrics => (true, true),
            DesignVariables::PositionsOnly => (true, false),
            DesignVariables::MetricsOnly => (false, true),
        };
        Self { n_sites, positions, metrics }
    }

    /// Design scalars per site.
    pub fn per_site(&self) -> usize {
        (self.positions as usize) * 2 + (self.metrics as usize) * 3
    }

    pub fn len(&self) -> usize {
        self.n_sites * self.per_site()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn site_count(&self) -> usize {
        self.n_sites
    }

    pub fn pack<R: Real>(&self, sites: &SiteSet<R, 2>) -> Vec<R> {
        assert_eq!(sites.len(), self.n_sites);
        let mut out = Vec::with_capacity(self.len());
        for s in 0..self.n_sites {
            if self.positions {
                let p = sites.position(s);
                out.push(p[0]);
                out.push(p[1]);
            }
            if self.metrics {
                out.extend(sites.metric_factor(s).lower_triangle());
            }
        }
        out
    }

    pub fn unpack<R: Real>(&self, x: &[R], sites: &mut SiteSet<R, 2>) -> Result<()> {
        if x.len() != self.len() || sites.len() != self.n_sites {
            return Err(Error::InvalidDesignVector(format!(
                "expected {} scalars for {} sites, got {}",
                self.len(),
                self.n_sites,
                x.len()
            )));
        }
        let mut k = 0;
        for s in 0..self.n_sites {
            if self.positions {
                sites.set_position(s, SVector::<R, 2>::new(x[k], x[k + 1]));
                k += 2;
            }
            if self.metrics {
                let m = MetricFactor::from_lower_triangle(&[x[k], x[k + 1], x[k + 2]]);
                sites.set_metric_factor(s, m);
                k += 3;
            }
        }
        Ok(())
    }

    /// Lower and upper bound vectors for a `nx` x `ny` element domain.
    pub fn bounds<R: Real>(
        &self,
        nx: usize,
        ny: usize,
        b: &DesignBounds<R>,
    ) -> (Vec<R>, Vec<R>) {
        let (w, h) = (real::<R>(nx as f64), real::<R>(ny as f64));
        let (mx, my) = (b.position_margin * w, b.position_margin * h);
        let mut lo = Vec::with_capacity(self.len());
        let mut hi = Vec::with_capacity(self.len());
        for _ in 0..self.n_sites {
            if self.positions {
                lo.push(-mx);
                hi.push(w + mx);
                lo.push(-my);
                hi.push(h + my);
            }
            if self.metrics {
                lo.push(b.metric_diag_min);
                hi.push(b.metric_diag_max);
                lo.push(-b.metric_offdiag_limit);
                hi.push(b.metric_offdiag_limit);
                lo.push(b.metric_diag_min);
                hi.push(b.metric_diag_max);
            }
        }
        (lo, hi)
    }

    /// Flatten per-site gradients into design-vector order. The off-diagonal
    /// derivative doubles because that scalar occupies two entries of the
    /// symmetric factor.
    pub fn pack_gradients<R: Real>(
        &self,
        wrt_position: &[SVector<R, 2>],
        wrt_metric: &[SMatrix<R, 2, 2>],
    ) -> Vec<R> {
        assert_eq!(wrt_position.len(), self.n_sites);
        assert_eq!(wrt_metric.len(), self.n_sites);
        let two = real::<R>(2.0);
        let mut out = Vec::with_capacity(self.len());
        for s in 0..self.n_sites {
            if self.positions {
                out.push(wrt_position[s][0]);
                out.push(wrt_position[s][1]);
            }
            if self.metrics {
                let m = &wrt_metric[s];
                out.push(m[(0, 0)]);
                out.push(two * m[(1, 0)]);
                out.push(m[(1, 1)]);
            }
        }
        out
    }
}

/// One site per cell of a coarse grid over the domain, uniformly jittered
/// inside its cell. Deterministic in the seed.
pub fn scatter_sites<R: Real>(
    nx: usize,
    ny: usize,
    cells_x: usize,
    cells_y: usize,
    metric: MetricFactor<R, 2>,
    seed: u64,
) -> Result<SiteSet<R, 2>> {
    if nx == 0 || ny == 0 {
        return Err(Error::EmptyGrid(nx, ny));
    }
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::InvalidProblem("site grid must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx = nx as f64 / cells_x as f64;
    let sy = ny as f64 / cells_y as f64;
    let mut positions = Vec::with_capacity(cells_x * cells_y);
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            positions.push(SVector::<R, 2>::new(
                real((cx as f64 + u) * sx),
                real((cy as f64 + v) * sy),
            ));
        }
    }
    SiteSet::with_uniform_metric(positions, metric)
}

/// Scatter per-site gradients from the per-element sparse rows:
/// `out[site] += chain[e] * d rho_e / d site` over all contributing pairs.
pub fn assemble_design_gradients<R: Real>(
    gradients: &DensityGradients<R, 2>,
    element_chain: &[R],
    n_sites: usize,
) -> (Vec<SVector<R, 2>>, Vec<SMatrix<R, 2, 2>>) {
    assert_eq!(gradients.element_count(), element_chain.len());
    let mut pos = vec![SVector::<R, 2>::zeros(); n_sites];
    let mut met = vec![SMatrix::<R, 2, 2>::zeros(); n_sites];
    for (e, &t) in element_chain.iter().enumerate() {
        if t == R::zero() {
            continue;
        }
        let row = gradients.row(e);
        for (slot, &id) in row.neighbor_ids.iter().enumerate() {
            pos[id as usize] += row.wrt_position[slot] * t;
            met[id as usize] += row.wrt_metric[slot] * t;
        }
    }
    (pos, met)
}

/// Plateau test on the compliance history: with at least four entries,
/// stop when
///
/// ```text
/// |c_i + c_(i-1) - c_(i-2) - c_(i-3)|  <  tol * (c_(i-2) + c_(i-3))
/// ```
///
/// A `tol` of zero disables the test (the strict inequality can then never
/// hold).
pub fn compliance_plateau<R: Real>(history: &[R], rel_tol: R) -> bool {
    if history.len() < 4 {
        return false;
    }
    let n = history.len();
    let num = (history[n - 1] + history[n - 2] - history[n - 3] - history[n - 4]).abs();
    let den = history[n - 3] + history[n - 4];
    num < rel_tol * den
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    /// Largest design move fell to the move tolerance.
    MoveTolerance,
    /// Compliance plateaued at the final projection steepness.
    CompliancePlateau,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::MaxIterations => "iteration budget exhausted",
            StopReason::MoveTolerance => "design stopped moving",
            StopReason::CompliancePlateau => "compliance plateaued",
        };
        f.write_str(s)
    }
}

/// Scalars of one finished iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord<R: Real> {
    pub iteration: usize,
    pub compliance: R,
    pub volume_fraction: R,
    /// Largest absolute design-vector change of this step, in raw design
    /// units.
    pub delta: R,
    /// Projection steepness used this iteration.
    pub steepness: R,
    pub fem_residual: R,
    pub fem_converged: bool,
    pub fem_iterations: usize,
    pub t_field_s: f64,
    pub t_fem_s: f64,
    pub t_update_s: f64,
}

/// Everything observable about one iteration, handed to the per-iteration
/// callback before the design moves: `sites` are the evaluated (pre-update)
/// sites behind `record`.
pub struct IterationView<'a, R: Real> {
    pub record: &'a IterationRecord<R>,
    pub sites: &'a SiteSet<R, 2>,
    pub density: &'a DensityGrid<R>,
    pub projected: &'a ProjectedDensityGrid<R>,
    pub state: &'a ElasticState<R>,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct OptOutcome<R: Real> {
    pub sites: SiteSet<R, 2>,
    pub history: Vec<IterationRecord<R>>,
    pub stop_reason: StopReason,
    /// Number of iterations whose elasticity solve missed its tolerance.
    pub fem_warnings: usize,
}

/// Full specification of one compliance-minimization run.
#[derive(Debug, Clone)]
pub struct Problem<R: Real> {
    pub mask: DomainMask,
    pub sites: SiteSet<R, 2>,
    pub field: FieldConfig<R>,
    pub projection: ProjectionConfig<R>,
    pub material: MaterialModel<R>,
    pub solve: SolveOptions<R>,
    pub fixes: Vec<FixSpec<R>>,
    pub loads: Vec<LoadSpec<R>>,
    /// Target volume fraction in (0, 1).
    pub volume_target: R,
    pub volume_accounting: VolumeAccounting,
    pub design_variables: DesignVariables,
    pub bounds: DesignBounds<R>,
    pub mma: MmaOptions<R>,
    pub max_iterations: usize,
    /// Stop when the largest design move is at or below this.
    pub move_tolerance: R,
    /// Relative plateau tolerance; zero disables the plateau stop.
    pub compliance_tolerance: R,
}

impl<R: Real> Problem<R> {
    /// A problem with every tunable at its default, ready for overrides.
    pub fn new(mask: DomainMask, sites: SiteSet<R, 2>) -> Self {
        Self {
            mask,
            sites,
            field: FieldConfig::default(),
            projection: ProjectionConfig::default(),
            material: MaterialModel::default(),
            solve: SolveOptions::default(),
            fixes: Vec::new(),
            loads: Vec::new(),
            volume_target: real(0.35),
            volume_accounting: VolumeAccounting::default(),
            design_variables: DesignVariables::PositionsAndMetrics,
            bounds: DesignBounds::default(),
            mma: MmaOptions::default(),
            max_iterations: 250,
            move_tolerance: real(1e-4),
            compliance_tolerance: real(1e-3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.projection.validate()?;
        self.material.validate()?;
        if !(self.volume_target > R::zero() && self.volume_target < R::one()) {
            return Err(Error::InvalidProblem(format!(
                "volume target must lie in (0, 1), got {}",
                self.volume_target
            )));
        }
        if self.field.neighbor_count > self.sites.len() {
            return Err(Error::NeighborCountExceedsSites {
                k: self.field.neighbor_count,
                sites: self.sites.len(),
            });
        }
        if !(self.move_tolerance >= R::zero() && self.move_tolerance.finite()) {
            return Err(Error::InvalidProblem("move tolerance must be >= 0".into()));
        }
        if !(self.compliance_tolerance >= R::zero() && self.compliance_tolerance.finite()) {
            return Err(Error::InvalidProblem(
                "compliance tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Run the loop with a per-iteration callback; see the module docs for the
/// iteration structure. Initial sites are clamped into the design bounds.
///
/// A non-converged elasticity solve is counted and reported, not fatal: the
/// iteration proceeds with the best iterate the solver reached.
pub fn optimize_with<R, F>(problem: Problem<R>, mut callback: F) -> Result<OptOutcome<R>>
where
    R: Real,
    F: FnMut(IterationView<'_, R>),
{
    problem.validate()?;
    let Problem {
        mask,
        mut sites,
        field,
        projection,
        material,
        solve,
        fixes,
        loads,
        volume_target,
        volume_accounting,
        design_variables,
        bounds,
        mma,
        max_iterations,
        move_tolerance,
        compliance_tolerance,
    } = problem;

    let (nx, ny) = mask.resolution();
    let bcs = BoundaryConditions::resolve(nx, ny, &fixes, &loads)?;
    let layout = DesignLayout::new(sites.len(), design_variables);
    let (xmin, xmax) = layout.bounds(nx, ny, &bounds);

    let mut x = layout.pack(&sites);
    for j in 0..x.len() {
        x[j] = x[j].clamp(xmin[j], xmax[j]);
    }
    layout.unpack(&x, &mut sites)?;

    if max_iterations == 0 {
        // Evaluate nothing, but still validate that the field rasterizes.
        let index = NeighborIndex::build(&sites);
        rasterize_density(&sites, &mask, &field, &index, false)?;
        return Ok(OptOutcome {
            sites,
            history: Vec::new(),
            stop_reason: StopReason::MaxIterations,
            fem_warnings: 0,
        });
    }

    let mut optimizer = MmaState::new(layout.len(), mma);
    let mut history: Vec<IterationRecord<R>> = Vec::with_capacity(max_iterations);
    let mut compliances: Vec<R> = Vec::with_capacity(max_iterations);
    let mut warm: Option<Vec<R>> = None;
    let mut objective_scale: Option<R> = None;
    let mut fem_warnings = 0usize;
    let mut stop_reason = StopReason::MaxIterations;
    let final_steepness = steepness_at(&projection, max_iterations - 1);

    let volume_denominator = match volume_accounting {
        VolumeAccounting::DesignOnly => mask.design_count(),
        VolumeAccounting::WithPassiveSolid => {
            mask.design_count() + mask.passive_solid_count()
        }
    };
    let inv_denominator = real::<R>(volume_denominator as f64).recip();

    for iteration in 0..max_iterations {
        let proj_cfg = advance_steepness(&projection, iteration);
        let steepness = proj_cfg.steepness;

        let t0 = Instant::now();
        let index = NeighborIndex::build_with_generation(&sites, iteration as u64);
        let (density, gradients) = rasterize_density(&sites, &mask, &field, &index, true)?;
        let gradients = gradients.expect("rasterize was asked for gradients");
        let projected = project(&density, &proj_cfg);
        let mut t_field = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let state =
            assemble_and_solve(&projected, &mask, &bcs, &material, &solve, warm.as_deref())?;
        let t_fem = t1.elapsed().as_secs_f64();
        if !state.converged {
            fem_warnings += 1;
        }

        let compliance = state.compliance;
        let scale = *objective_scale
            .get_or_insert_with(|| compliance.abs().max(real(1e-30)));
        let volume = volume_fraction(&projected, &mask, volume_accounting);
        let constraint = volume - volume_target;

        let t2 = Instant::now();
        let n_elements = mask.len();
        let mut chain_obj = vec![R::zero(); n_elements];
        let mut chain_vol = vec![R::zero(); n_elements];
        for e in 0..n_elements {
            if mask.state(e) != CellState::Design {
                continue;
            }
            let dh = heaviside_derivative(&proj_cfg, density.value(e));
            chain_obj[e] = state.element_sensitivities[e] * dh / scale;
            chain_vol[e] = dh * inv_denominator;
        }
        let (obj_pos, obj_met) = assemble_design_gradients(&gradients, &chain_obj, sites.len());
        let (vol_pos, vol_met) = assemble_design_gradients(&gradients, &chain_vol, sites.len());
        let df = layout.pack_gradients(&obj_pos, &obj_met);
        let dg = layout.pack_gradients(&vol_pos, &vol_met);
        t_field += t2.elapsed().as_secs_f64();

        let t3 = Instant::now();
        let x_next = optimizer.update(&x, &df, constraint, &dg, &xmin, &xmax);
        let t_update = t3.elapsed().as_secs_f64();

        let mut delta = R::zero();
        for j in 0..x.len() {
            delta = delta.max((x_next[j] - x[j]).abs());
        }

        let record = IterationRecord {
            iteration,
            compliance,
            volume_fraction: volume,
            delta,
            steepness,
            fem_residual: state.residual,
            fem_converged: state.converged,
            fem_iterations: state.iterations,
            t_field_s: t_field,
            t_fem_s: t_fem,
            t_update_s: t_update,
        };
        callback(IterationView {
            record: &record,
            sites: &sites,
            density: &density,
            projected: &projected,
            state: &state,
        });
        history.push(record);
        compliances.push(compliance);

        warm = Some(state.displacements);
        layout.unpack(&x_next, &mut sites)?;
        x = x_next;

        if delta <= move_tolerance {
            stop_reason = StopReason::MoveTolerance;
            break;
        }
        if steepness == final_steepness
            && compliance_plateau(&compliances, compliance_tolerance)
        {
            stop_reason = StopReason::CompliancePlateau;
            break;
        }
    }

    Ok(OptOutcome { sites, history, stop_reason, fem_warnings })
}

/// [`optimize_with`] without a callback.
pub fn optimize<R: Real>(problem: Problem<R>) -> Result<OptOutcome<R>> {
    optimize_with(problem, |_| {})
}
