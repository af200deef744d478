//! Differentiable anisotropic Voronoi density field.
//!
//! A set of sites `x_m`, each carrying a symmetric metric factor `D_m`,
//! induces a smooth density
//!
//! ```text
//! rho(x) = 1 - sum_m S_m(x)^beta
//! S_m(x) = exp(-d_m(x)) / (sum_n exp(-d_n(x)) + eps)
//! d_m(x) = sqrt((x - x_m)^T A_m (x - x_m)),   A_m = D_m D_m^T
//! ```
//!
//! The weights `S_m` are a softmax over negative anisotropic distances; the
//! optional constant `eps` acts as one extra "virtual" competitor whose
//! weight `S_0 = eps / (sum_n exp(-d_n) + eps)` wins far away from every
//! site, which gives the density compact support (free boundaries). When
//! `eps > 0` the virtual weight participates in the density sum exactly like
//! a site weight.
//!
//! Away from cell walls one weight dominates and `rho -> 0`; on walls the
//! weights split and `rho -> 1`, so the field traces the (smoothed) Voronoi
//! edges. `beta` controls how sharp that transition is.
//!
//! Everything here is differentiable in closed form with respect to both the
//! site positions and the metric factors; see [`density_gradients_at`].
//!
//! Numerical contract: evaluation uses a shifted softmax so distances of
//! order 10^3 neither overflow nor produce NaN, and per-point accumulation
//! runs over the neighbor list in ascending site order, so evaluating with
//! the full site set as the neighbor list is bit-for-bit reproducible.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::grid::{CellState, DensityGrid, DomainMask};
use crate::neighbor::NeighborIndex;
use crate::scalar::{real, Real};

/// Symmetric factor `D_m` of one site's metric tensor `A_m = D_m D_m^T`.
///
/// Symmetry is maintained by construction: the only mutating entry point is
/// the lower triangle, which is mirrored into the full matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricFactor<R: Real, const D: usize> {
    m: SMatrix<R, D, D>,
}

impl<R: Real, const D: usize> MetricFactor<R, D> {
    /// Number of independent (lower-triangle) entries.
    pub const LOWER_LEN: usize = D * (D + 1) / 2;

    /// Build from row-major lower-triangle entries:
    /// `(0,0), (1,0), (1,1), (2,0), ...`.
    pub fn from_lower_triangle(entries: &[R]) -> Self {
        assert_eq!(entries.len(), Self::LOWER_LEN, "lower triangle length");
        let mut m = SMatrix::<R, D, D>::zeros();
        let mut k = 0;
        for i in 0..D {
            for j in 0..=i {
                m[(i, j)] = entries[k];
                m[(j, i)] = entries[k];
                k += 1;
            }
        }
        Self { m }
    }

    pub fn isotropic(scale: R) -> Self {
        let mut m = SMatrix::<R, D, D>::zeros();
        for i in 0..D {
            m[(i, i)] = scale;
        }
        Self { m }
    }

    /// Row-major lower-triangle entries, the inverse of
    /// [`MetricFactor::from_lower_triangle`].
    pub fn lower_triangle(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(Self::LOWER_LEN);
        for i in 0..D {
            for j in 0..=i {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    /// The symmetric factor itself.
    pub fn matrix(&self) -> &SMatrix<R, D, D> {
        &self.m
    }

    /// Metric tensor `A = D D^T` (positive semi-definite by construction).
    pub fn tensor(&self) -> SMatrix<R, D, D> {
        self.m * self.m.transpose()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.finite())
    }
}

/// Sites of the diagram: positions plus one metric factor per site.
///
/// Positions are in grid coordinates (one element side = 1).
#[derive(Debug, Clone)]
pub struct SiteSet<R: Real, const D: usize> {
    positions: Vec<SVector<R, D>>,
    metric_factors: Vec<MetricFactor<R, D>>,
}

impl<R: Real, const D: usize> SiteSet<R, D> {
    pub fn new(
        positions: Vec<SVector<R, D>>,
        metric_factors: Vec<MetricFactor<R, D>>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptySiteSet);
        }
        assert_eq!(
            positions.len(),
            metric_factors.len(),
            "one metric factor per site"
        );
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|v| v.finite()) || !metric_factors[i].is_finite() {
                return Err(Error::NonFiniteSite { index: i });
            }
        }
        Ok(Self { positions, metric_factors })
    }

    /// All sites share one metric factor.
    pub fn with_uniform_metric(
        positions: Vec<SVector<R, D>>,
        metric: MetricFactor<R, D>,
    ) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![metric; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn position(&self, site: usize) -> &SVector<R, D> {
        &self.positions[site]
    }

    #[inline]
    pub fn metric_factor(&self, site: usize) -> &MetricFactor<R, D> {
        &self.metric_factors[site]
    }

    pub fn positions(&self) -> &[SVector<R, D>] {
        &self.positions
    }

    pub fn set_position(&mut self, site: usize, position: SVector<R, D>) {
        self.positions[site] = position;
    }

    pub fn set_metric_factor(&mut self, site: usize, metric: MetricFactor<R, D>) {
        self.metric_factors[site] = metric;
    }

    /// Metric tensors `A_m` for every site, in site order.
    pub fn tensors(&self) -> Vec<SMatrix<R, D, D>> {
        self.metric_factors.iter().map(|f| f.tensor()).collect()
    }
}

/// Parameters of the density field.
#[derive(Debug, Clone, Copy)]
pub struct FieldConfig<R: Real> {
    /// Exponent `beta` applied to every weight in the density sum. Must be
    /// at least 1; large values sharpen cell walls.
    pub sharpness: R,
    /// Softmax constant `eps` of the virtual competitor. Zero disables it
    /// (the density then has full support); positive values carve free
    /// boundaries around the site cluster.
    pub boundary_weight: R,
    /// Number of nearest sites contributing to each evaluation point.
    pub neighbor_count: usize,
    /// Lower clamp applied to every distance before the softmax, guarding
    /// the `1/d` factors of the gradients at evaluation points that
    /// coincide with a site.
    pub distance_floor: R,
}

impl<R: Real> Default for FieldConfig<R> {
    fn default() -> Self {
        Self {
            sharpness: real(50.0),
            boundary_weight: R::zero(),
            neighbor_count: 16,
            distance_floor: real(1e-12),
        }
    }
}

impl<R: Real> FieldConfig<R> {
    // Negated comparisons so NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.sharpness >= R::one() && self.sharpness.finite()) {
            return Err(Error::InvalidFieldConfig(format!(
                "sharpness must be >= 1, got {}",
                self.sharpness
            )));
        }
        if !(self.boundary_weight >= R::zero() && self.boundary_weight.finite()) {
            return Err(Error::InvalidFieldConfig(format!(
                "boundary_weight must be >= 0, got {}",
                self.boundary_weight
            )));
        }
        if self.neighbor_count == 0 {
            return Err(Error::InvalidFieldConfig(
                "neighbor_count must be >= 1".to_string(),
            ));
        }
        if !(self.distance_floor > R::zero()) {
            return Err(Error::InvalidFieldConfig(format!(
                "distance_floor must be > 0, got {}",
                self.distance_floor
            )));
        }
        Ok(())
    }

    /// Whether the virtual competitor participates.
    #[inline]
    pub fn has_virtual_site(&self) -> bool {
        self.boundary_weight > R::zero()
    }
}

/// Softmax weights at one evaluation point.
#[derive(Debug, Clone)]
pub struct SoftWeights<R: Real> {
    /// `S_m` for each entry of the neighbor list, in list order.
    pub site_weights: Vec<R>,
    /// `S_0` of the virtual competitor; zero when it is disabled.
    pub virtual_weight: R,
}

impl<R: Real> SoftWeights<R> {
    /// Sum of all weights including the virtual one. Equals 1 up to
    /// roundoff when the neighbor list covers every site.
    pub fn total(&self) -> R {
        let mut t = self.virtual_weight;
        for w in &self.site_weights {
            t += *w;
        }
        t
    }
}

/// Gradients of the density at one point with respect to the contributing
/// sites, aligned with the neighbor list used for evaluation.
#[derive(Debug, Clone)]
pub struct PointGradients<R: Real, const D: usize> {
    pub density: R,
    /// `d rho / d x_n` per neighbor.
    pub wrt_position: Vec<SVector<R, D>>,
    /// `d rho / d D_n` per neighbor, symmetrized.
    pub wrt_metric: Vec<SMatrix<R, D, D>>,
}

/// Density gradients for every element of a rasterized grid, stored sparsely
/// per (element, contributing neighbor) pair in compressed rows.
#[derive(Debug, Clone)]
pub struct DensityGradients<R: Real, const D: usize> {
    offsets: Vec<usize>,
    neighbor_ids: Vec<u32>,
    wrt_position: Vec<SVector<R, D>>,
    wrt_metric: Vec<SMatrix<R, D, D>>,
}

impl<R: Real, const D: usize> DensityGradients<R, D> {
    /// Neighbor ids and gradient slices of one element. Passive elements
    /// have empty rows.
    pub fn row(&self, element: usize) -> GradientRow<'_, R, D> {
        let lo = self.offsets[element];
        let hi = self.offsets[element + 1];
        GradientRow {
            neighbor_ids: &self.neighbor_ids[lo..hi],
            wrt_position: &self.wrt_position[lo..hi],
            wrt_metric: &self.wrt_metric[lo..hi],
        }
    }

    pub fn element_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

pub struct GradientRow<'a, R: Real, const D: usize> {
    pub neighbor_ids: &'a [u32],
    pub wrt_position: &'a [SVector<R, D>],
    pub wrt_metric: &'a [SMatrix<R, D, D>],
}

/// Anisotropic distance `d_m(x) = sqrt((x - x_m)^T A (x - x_m))`, clamped
/// from below by `floor`.
#[inline]
pub fn anisotropic_distance<R: Real, const D: usize>(
    point: &SVector<R, D>,
    site: &SVector<R, D>,
    tensor: &SMatrix<R, D, D>,
    floor: R,
) -> R {
    let r = point - site;
    let q = (tensor * r).dot(&r);
    // A is PSD, so q can only go negative through roundoff.
    let d = q.max(R::zero()).sqrt();
    d.max(floor)
}

/// Scratch buffers for repeated point evaluations. Reusing one of these
/// across a grid avoids an allocation per element.
#[derive(Debug, Default)]
pub struct EvalScratch<R: Real> {
    dists: Vec<R>,
    weights: Vec<R>,
}

/// Core single-point evaluation shared by the public entry points.
///
/// `ids` selects the contributing sites; `tensors[i]` must be the metric
/// tensor of site `ids[i]`. Returns the virtual weight and the sum
/// `W = sum S^beta` (including the virtual term when enabled); weights are
/// left in `scratch.weights`.
fn soft_weights_into<R: Real, const D: usize>(
    point: &SVector<R, D>,
    ids: &[u32],
    positions: &[SVector<R, D>],
    tensors: &[SMatrix<R, D, D>],
    cfg: &FieldConfig<R>,
    scratch: &mut EvalScratch<R>,
) -> (R, R) {
    let eps = cfg.boundary_weight;
    scratch.dists.clear();
    for (slot, &id) in ids.iter().enumerate() {
        let d = anisotropic_distance(
            point,
            &positions[id as usize],
            &tensors[slot],
            cfg.distance_floor,
        );
        scratch.dists.push(d);
    }

    // Shifted softmax: with shift d* the weights are
    //   S_m = exp(-(d_m - d*)) / (sum_n exp(-(d_n - d*)) + eps * exp(d*))
    // For eps > 0 the shift is additionally capped at -ln(eps) so the
    // virtual term exp(d*) * eps never overflows; far from all sites it is
    // then exactly 1 and the virtual competitor wins cleanly.
    let mut shift = scratch.dists[0];
    for &d in &scratch.dists[1..] {
        shift = shift.min(d);
    }
    if cfg.has_virtual_site() {
        shift = shift.min(-eps.ln());
    }

    let mut total = R::zero();
    scratch.weights.clear();
    for &d in &scratch.dists {
        let e = (-(d - shift)).exp();
        scratch.weights.push(e);
        total += e;
    }
    let virtual_mass = if cfg.has_virtual_site() {
        eps * shift.exp()
    } else {
        R::zero()
    };
    total += virtual_mass;

    for w in scratch.weights.iter_mut() {
        *w /= total;
    }
    let virtual_weight = virtual_mass / total;

    let beta = cfg.sharpness;
    let mut pow_sum = R::zero();
    for &w in scratch.weights.iter() {
        pow_sum += w.powf(beta);
    }
    if cfg.has_virtual_site() {
        pow_sum += virtual_weight.powf(beta);
    }

    (virtual_weight, pow_sum)
}

fn tensors_for<R: Real, const D: usize>(
    sites: &SiteSet<R, D>,
    ids: &[u32],
) -> Vec<SMatrix<R, D, D>> {
    ids.iter()
        .map(|&id| sites.metric_factor(id as usize).tensor())
        .collect()
}

/// Softmax weights of the listed sites at one point.
pub fn soft_weights<R: Real, const D: usize>(
    point: &SVector<R, D>,
    sites: &SiteSet<R, D>,
    neighbor_ids: &[u32],
    cfg: &FieldConfig<R>,
) -> SoftWeights<R> {
    assert!(!neighbor_ids.is_empty(), "neighbor list must not be empty");
    let tensors = tensors_for(sites, neighbor_ids);
    let mut scratch = EvalScratch::default();
    let (virtual_weight, _) = soft_weights_into(
        point,
        neighbor_ids,
        sites.positions(),
        &tensors,
        cfg,
        &mut scratch,
    );
    SoftWeights {
        site_weights: scratch.weights,
        virtual_weight,
    }
}

/// Density at one point, using the listed sites as competitors.
pub fn density_at<R: Real, const D: usize>(
    point: &SVector<R, D>,
    sites: &SiteSet<R, D>,
    neighbor_ids: &[u32],
    cfg: &FieldConfig<R>,
) -> R {
    assert!(!neighbor_ids.is_empty(), "neighbor list must not be empty");
    let tensors = tensors_for(sites, neighbor_ids);
    let mut scratch = EvalScratch::default();
    let (_, pow_sum) = soft_weights_into(
        point,
        neighbor_ids,
        sites.positions(),
        &tensors,
        cfg,
        &mut scratch,
    );
    clamp_unit(R::one() - pow_sum)
}

#[inline]
fn clamp_unit<R: Real>(v: R) -> R {
    v.max(R::zero()).min(R::one())
}

/// Density and its gradients with respect to the listed sites at one point.
///
/// Writing `W = sum_m S_m^beta` (virtual term included when enabled), the
/// closed forms per contributing site `n` are
///
/// ```text
/// d rho / d x_n = beta (S_n^beta - S_n W) A_n X_n
/// d rho / d D_n = beta (S_n^beta - S_n W) d_n (X_n X_n^T) D_n
/// X_n = (x_n - x) / d_n
/// ```
///
/// which is the chain rule through the softmax collapsed to one term per
/// site. The metric gradient is symmetrized, matching a parameterization of
/// `D_n` by its lower triangle.
pub fn density_gradients_at<R: Real, const D: usize>(
    point: &SVector<R, D>,
    sites: &SiteSet<R, D>,
    neighbor_ids: &[u32],
    cfg: &FieldConfig<R>,
) -> PointGradients<R, D> {
    assert!(!neighbor_ids.is_empty(), "neighbor list must not be empty");
    let tensors = tensors_for(sites, neighbor_ids);
    let mut scratch = EvalScratch::default();
    let mut out = PointGradients {
        density: R::zero(),
        wrt_position: vec![SVector::zeros(); neighbor_ids.len()],
        wrt_metric: vec![SMatrix::zeros(); neighbor_ids.len()],
    };
    gradients_into(
        point,
        neighbor_ids,
        sites,
        &tensors,
        cfg,
        &mut scratch,
        &mut out.density,
        &mut out.wrt_position,
        &mut out.wrt_metric,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn gradients_into<R: Real, const D: usize>(
    point: &SVector<R, D>,
    ids: &[u32],
    sites: &SiteSet<R, D>,
    tensors: &[SMatrix<R, D, D>],
    cfg: &FieldConfig<R>,
    scratch: &mut EvalScratch<R>,
    density: &mut R,
    wrt_position: &mut [SVector<R, D>],
    wrt_metric: &mut [SMatrix<R, D, D>],
) {
    let (_, pow_sum) =
        soft_weights_into(point, ids, sites.positions(), tensors, cfg, scratch);
    *density = clamp_unit(R::one() - pow_sum);

    let beta = cfg.sharpness;
    let half = real::<R>(0.5);
    for (slot, &id) in ids.iter().enumerate() {
        let s = scratch.weights[slot];
        let d = scratch.dists[slot];
        // beta * (S_n^beta - S_n * W); zero for underflowed far sites.
        let coef = beta * (s.powf(beta) - s * pow_sum);
        let x_n = (sites.position(id as usize) - point) / d;
        wrt_position[slot] = (tensors[slot] * x_n) * coef;
        let outer = x_n * x_n.transpose();
        let g = (outer * sites.metric_factor(id as usize).matrix()) * (coef * d);
        wrt_metric[slot] = (g + g.transpose()) * half;
    }
}

/// Densities at every element centroid of a grid, with optional gradients.
///
/// Each design element queries its `cfg.neighbor_count` nearest sites from
/// `index` (ascending site order) and evaluates the softmax over that list.
/// Passive elements are forced to 0 (void) or 1 (solid) and get empty
/// gradient rows.
pub fn rasterize_density<R: Real>(
    sites: &SiteSet<R, 2>,
    mask: &DomainMask,
    cfg: &FieldConfig<R>,
    index: &NeighborIndex<R, 2>,
    with_gradients: bool,
) -> Result<(DensityGrid<R>, Option<DensityGradients<R, 2>>)> {
    cfg.validate()?;
    if cfg.neighbor_count > sites.len() {
        return Err(Error::NeighborCountExceedsSites {
            k: cfg.neighbor_count,
            sites: sites.len(),
        });
    }
    assert_eq!(
        index.site_count(),
        sites.len(),
        "index was built from a different site set"
    );

    let (nx, ny) = mask.resolution();
    let n_elements = nx * ny;
    let tensors = sites.tensors();

    let mut values = vec![R::zero(); n_elements];
    let k = cfg.neighbor_count.min(sites.len());

    let mut offsets = Vec::new();
    let mut flat_ids = Vec::new();
    let mut flat_dx = Vec::new();
    let mut flat_dm = Vec::new();
    if with_gradients {
        offsets = Vec::with_capacity(n_elements + 1);
        offsets.push(0usize);
        let design = mask.design_count();
        flat_ids = Vec::with_capacity(design * k);
        flat_dx = vec![SVector::zeros(); design * k];
        flat_dm = vec![SMatrix::zeros(); design * k];
    }

    let mut scratch = EvalScratch::default();
    let mut ids: Vec<u32> = Vec::with_capacity(k);
    let mut local_tensors: Vec<SMatrix<R, 2, 2>> = Vec::with_capacity(k);
    let mut cursor = 0usize;

    for (e, value) in values.iter_mut().enumerate() {
        match mask.state(e) {
            CellState::PassiveVoid => *value = R::zero(),
            CellState::PassiveSolid => *value = R::one(),
            CellState::Design => {
                let cx = (e % nx) as f64 + 0.5;
                let cy = (e / nx) as f64 + 0.5;
                let point = SVector::<R, 2>::new(real(cx), real(cy));
                index.k_nearest_into(&point, k, &mut ids);
                local_tensors.clear();
                local_tensors.extend(ids.iter().map(|&id| tensors[id as usize]));
                if with_gradients {
                    let lo = cursor;
                    cursor += ids.len();
                    flat_ids.extend_from_slice(&ids);
                    gradients_into(
                        &point,
                        &ids,
                        sites,
                        &local_tensors,
                        cfg,
                        &mut scratch,
                        value,
                        &mut flat_dx[lo..cursor],
                        &mut flat_dm[lo..cursor],
                    );
                } else {
                    let (_, pow_sum) = soft_weights_into(
                        &point,
                        &ids,
                        sites.positions(),
                        &local_tensors,
                        cfg,
                        &mut scratch,
                    );
                    *value = clamp_unit(R::one() - pow_sum);
                }
            }
        }
        if with_gradients {
            offsets.push(cursor);
        }
    }

    let grid = DensityGrid::from_values(nx, ny, values)?;
    let gradients = if with_gradients {
        flat_dx.truncate(cursor);
        flat_dm.truncate(cursor);
        Some(DensityGradients {
            offsets,
            neighbor_ids: flat_ids,
            wrt_position: flat_dx,
            wrt_metric: flat_dm,
        })
    } else {
        None
    };
    Ok((grid, gradients))
}
