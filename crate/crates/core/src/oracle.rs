//! Slow, independent reference implementations used to validate the fast
//! paths. Nothing here is called by the optimization loop.
//!
//! The density reference deliberately repeats the evaluation kernel line by
//! line instead of calling into [`crate::voronoi`]: evaluating the fast path
//! with the full site set as its neighbor list must reproduce this function
//! bit for bit, which pins both the neighbor machinery and the accumulation
//! order.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::elasticity::{element_dofs, element_stiffness_unit, BoundaryConditions, MaterialModel};
use crate::error::{Error, Result};
use crate::projection::ProjectedDensityGrid;
use crate::scalar::{real, Real};
use crate::voronoi::{FieldConfig, SiteSet};

/// Density at one point from every site, no spatial index, no shared
/// kernel code.
pub fn brute_force_density<R: Real, const D: usize>(
    point: &SVector<R, D>,
    sites: &SiteSet<R, D>,
    cfg: &FieldConfig<R>,
) -> R {
    let eps = cfg.boundary_weight;
    let n = sites.len();

    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let tensor = sites.metric_factor(i).tensor();
        let r = point - sites.position(i);
        let q = (tensor * r).dot(&r);
        let d = q.max(R::zero()).sqrt();
        dists.push(d.max(cfg.distance_floor));
    }

    let mut shift = dists[0];
    for &d in &dists[1..] {
        shift = shift.min(d);
    }
    if cfg.has_virtual_site() {
        shift = shift.min(-eps.ln());
    }

    let mut total = R::zero();
    let mut weights = Vec::with_capacity(n);
    for &d in &dists {
        let e = (-(d - shift)).exp();
        weights.push(e);
        total += e;
    }
    let virtual_mass = if cfg.has_virtual_site() {
        eps * shift.exp()
    } else {
        R::zero()
    };
    total += virtual_mass;

    for w in weights.iter_mut() {
        *w /= total;
    }
    let virtual_weight = virtual_mass / total;

    let beta = cfg.sharpness;
    let mut pow_sum = R::zero();
    for &w in weights.iter() {
        pow_sum += w.powf(beta);
    }
    if cfg.has_virtual_site() {
        pow_sum += virtual_weight.powf(beta);
    }

    (R::one() - pow_sum).max(R::zero()).min(R::one())
}

/// Hard Voronoi label of a point: index of the metrically nearest site
/// (lowest index wins ties) plus the gap to the runner-up.
pub fn discrete_voronoi_label<R: Real, const D: usize>(
    point: &SVector<R, D>,
    sites: &SiteSet<R, D>,
) -> (usize, R) {
    let mut best = 0usize;
    let mut best_d = R::max_value().unwrap();
    let mut second_d = best_d;
    for i in 0..sites.len() {
        let tensor = sites.metric_factor(i).tensor();
        let r = point - sites.position(i);
        let d = (tensor * r).dot(&r).max(R::zero()).sqrt();
        if d < best_d {
            second_d = best_d;
            best_d = d;
            best = i;
        } else if d < second_d {
            second_d = d;
        }
    }
    (best, second_d - best_d)
}

/// Unit-modulus element stiffness by 2x2 Gauss quadrature of `B^T C B` over
/// the unit square, an independent route to the closed-form table.
pub fn quadrature_element_stiffness<R: Real>(poisson: R) -> SMatrix<R, 8, 8> {
    // Plane-stress constitutive matrix, E = 1.
    let f = (R::one() - poisson * poisson).recip();
    let mut c = SMatrix::<R, 3, 3>::zeros();
    c[(0, 0)] = f;
    c[(1, 1)] = f;
    c[(0, 1)] = poisson * f;
    c[(1, 0)] = poisson * f;
    c[(2, 2)] = (R::one() - poisson) * real::<R>(0.5) * f;

    let g = real::<R>(1.0 / (2.0 * 3.0f64.sqrt()));
    let half = real::<R>(0.5);
    let pts = [half - g, half + g];
    let weight = real::<R>(0.25);

    let mut k = SMatrix::<R, 8, 8>::zeros();
    for &xi in &pts {
        for &eta in &pts {
            // Bilinear shape gradients on the unit square (Jacobian = I),
            // nodes counterclockwise from the lower-left corner.
            let dndx = [-(R::one() - eta), R::one() - eta, eta, -eta];
            let dndy = [-(R::one() - xi), -xi, xi, R::one() - xi];
            let mut b = SMatrix::<R, 3, 8>::zeros();
            for a in 0..4 {
                b[(0, 2 * a)] = dndx[a];
                b[(1, 2 * a + 1)] = dndy[a];
                b[(2, 2 * a)] = dndy[a];
                b[(2, 2 * a + 1)] = dndx[a];
            }
            k += b.transpose() * c * b * weight;
        }
    }
    k
}

/// Dense direct elasticity solve: assemble the full stiffness, eliminate
/// fixed DOFs symmetrically, factor with LU.
pub fn dense_fem_solve<R: Real>(
    projected: &ProjectedDensityGrid<R>,
    bcs: &BoundaryConditions<R>,
    mat: &MaterialModel<R>,
) -> Result<(Vec<R>, R)> {
    let (nx, ny) = projected.resolution();
    if bcs.resolution() != (nx, ny) {
        return Err(Error::InvalidBoundaryConditions(
            "resolution mismatch in dense solve".into(),
        ));
    }
    let ndof = bcs.ndof();
    let k0 = element_stiffness_unit(mat.poisson);
    let mut k = DMatrix::<R>::zeros(ndof, ndof);
    for ey in 0..ny {
        for ex in 0..nx {
            let rho = projected.value(ey * nx + ex);
            let me = crate::elasticity::interpolate_modulus(rho, mat);
            let dofs = element_dofs(nx, ex, ey);
            for (a, &da) in dofs.iter().enumerate() {
                for (b, &db) in dofs.iter().enumerate() {
                    k[(da, db)] += me * k0[(a, b)];
                }
            }
        }
    }
    let fixed = bcs.fixed_mask();
    for d in 0..ndof {
        if fixed[d] {
            for j in 0..ndof {
                k[(d, j)] = R::zero();
                k[(j, d)] = R::zero();
            }
            k[(d, d)] = R::one();
        }
    }
    let mut rhs = DVector::<R>::from_column_slice(bcs.force());
    for d in 0..ndof {
        if fixed[d] {
            rhs[d] = R::zero();
        }
    }
    let u = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidBoundaryConditions("singular dense system".into()))?;
    let mut compliance = R::zero();
    for (f, ui) in bcs.force().iter().zip(u.iter()) {
        compliance += *f * *ui;
    }
    Ok((u.as_slice().to_vec(), compliance))
}

/// Result of a finite-difference sweep over a gradient.
#[derive(Debug, Clone, Copy)]
pub struct FdReport<R: Real> {
    /// Components compared against the analytic gradient.
    pub checked: usize,
    /// Components skipped because both values sat below the magnitude floor.
    pub skipped: usize,
    pub max_rel_error: R,
    pub worst_index: usize,
    pub worst_analytic: R,
    pub worst_numeric: R,
}

/// Compare an analytic gradient against central finite differences of `f`.
///
/// Relative error per component is `|a - fd| / max(|a|, |fd|, 1e-12)`;
/// components where both magnitudes sit at or below `magnitude_floor` are
/// skipped (the quotient is pure noise there).
pub fn fd_gradient_check<R: Real, F>(
    x: &[R],
    analytic: &[R],
    step: R,
    magnitude_floor: R,
    mut f: F,
) -> FdReport<R>
where
    F: FnMut(&[R]) -> R,
{
    assert_eq!(x.len(), analytic.len());
    let mut buf = x.to_vec();
    let mut report = FdReport {
        checked: 0,
        skipped: 0,
        max_rel_error: R::zero(),
        worst_index: 0,
        worst_analytic: R::zero(),
        worst_numeric: R::zero(),
    };
    for i in 0..x.len() {
        buf[i] = x[i] + step;
        let fp = f(&buf);
        buf[i] = x[i] - step;
        let fm = f(&buf);
        buf[i] = x[i];
        let fd = (fp - fm) / (step + step);
        let a = analytic[i];
        if a.abs().max(fd.abs()) <= magnitude_floor {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(real(1e-12));
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.worst_analytic = a;
            report.worst_numeric = fd;
        }
    }
    report
}
