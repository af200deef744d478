//! 2D linear elasticity on the density grid.
//!
//! Discretization: bilinear 4-node square elements of unit side and unit
//! thickness, plane stress. Element `(ex, ey)` touches the nodes
//! `(ex, ey), (ex+1, ey), (ex+1, ey+1), (ex, ey+1)` in counterclockwise
//! order; node `(ix, iy)` owns DOFs `2 n` (x) and `2 n + 1` (y) with
//! `n = iy (nx + 1) + ix`.
//!
//! Per-element stiffness is the shared unit matrix scaled by the element's
//! interpolated Young's modulus
//!
//! ```text
//! E_e = E_min + rho_e^p (E_0 - E_min)
//! ```
//!
//! so void elements keep a tiny stiffness and the global matrix stays
//! positive definite. The system is solved matrix-free with conjugate
//! gradients under a diagonal (Jacobi) preconditioner; Dirichlet DOFs are
//! eliminated by projection, which preserves symmetry. A solve that stops
//! short of its tolerance is not an error: the best iterate seen is
//! returned with `converged = false` and the caller decides how to react
//! (the optimization loop logs it and keeps going).

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::grid::{CellState, DomainMask};
use crate::projection::ProjectedDensityGrid;
use crate::scalar::{real, Real};

/// Isotropic material with the power-law stiffness interpolation.
#[derive(Debug, Clone, Copy)]
pub struct MaterialModel<R: Real> {
    /// Modulus of solid material.
    pub young_modulus: R,
    /// Residual modulus of void, keeping the system definite.
    pub young_modulus_min: R,
    pub poisson: R,
    /// Interpolation exponent `p` (>= 1).
    pub penalization: R,
}

impl<R: Real> Default for MaterialModel<R> {
    fn default() -> Self {
        Self {
            young_modulus: R::one(),
            young_modulus_min: real(1e-9),
            poisson: real(0.3),
            penalization: R::one(),
        }
    }
}

impl<R: Real> MaterialModel<R> {
    // Negated comparisons so NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus > R::zero() && self.young_modulus.finite()) {
            return Err(Error::InvalidMaterial("young_modulus must be > 0".into()));
        }
        if !(self.young_modulus_min > R::zero() && self.young_modulus_min < self.young_modulus) {
            return Err(Error::InvalidMaterial(
                "young_modulus_min must lie in (0, young_modulus)".into(),
            ));
        }
        if !(self.poisson > R::zero() && self.poisson < real(0.5)) {
            return Err(Error::InvalidMaterial("poisson must lie in (0, 0.5)".into()));
        }
        if !(self.penalization >= R::one()) {
            return Err(Error::InvalidMaterial("penalization must be >= 1".into()));
        }
        Ok(())
    }
}

/// `E_e` of one projected density.
#[inline]
pub fn interpolate_modulus<R: Real>(projected_density: R, mat: &MaterialModel<R>) -> R {
    let p = mat.penalization;
    let powered = if p == R::one() {
        projected_density
    } else {
        projected_density.powf(p)
    };
    mat.young_modulus_min + powered * (mat.young_modulus - mat.young_modulus_min)
}

/// Derivative of [`interpolate_modulus`] in the density.
#[inline]
pub fn interpolate_modulus_derivative<R: Real>(projected_density: R, mat: &MaterialModel<R>) -> R {
    let p = mat.penalization;
    let powered = if p == R::one() {
        R::one()
    } else {
        projected_density.powf(p - R::one())
    };
    p * powered * (mat.young_modulus - mat.young_modulus_min)
}

// Unit-modulus plane-stress stiffness of the unit square, exact integration:
// k0 = (A + nu * B) / (24 (1 - nu^2)). Integer tables for the CCW node
// order documented above.
#[rustfmt::skip]
const K0_CONST: [[i32; 8]; 8] = [
    [ 12,  3, -6, -3, -6, -3,  0,  3],
    [  3, 12,  3,  0, -3, -6, -3, -6],
    [ -6,  3, 12, -3,  0, -3, -6,  3],
    [ -3,  0, -3, 12,  3, -6,  3, -6],
    [ -6, -3,  0,  3, 12,  3, -6, -3],
    [ -3, -6, -3, -6,  3, 12,  3,  0],
    [  0, -3, -6,  3, -6,  3, 12, -3],
    [  3, -6,  3, -6, -3,  0, -3, 12],
];
#[rustfmt::skip]
const K0_POISSON: [[i32; 8]; 8] = [
    [ -4,  3, -2,  9,  2, -3,  4, -9],
    [  3, -4, -9,  4, -3,  2,  9, -2],
    [ -2, -9, -4, -3,  4,  9,  2,  3],
    [  9,  4, -3, -4, -9, -2,  3,  2],
    [  2, -3,  4, -9, -4,  3, -2,  9],
    [ -3,  2,  9, -2,  3, -4, -9,  4],
    [  4,  9,  2,  3, -2, -9, -4, -3],
    [ -9, -2,  3,  2,  9,  4, -3, -4],
];

/// Stiffness of one unit-modulus element.
pub fn element_stiffness_unit<R: Real>(poisson: R) -> SMatrix<R, 8, 8> {
    let scale = (real::<R>(24.0) * (R::one() - poisson * poisson)).recip();
    SMatrix::<R, 8, 8>::from_fn(|i, j| {
        (real::<R>(K0_CONST[i][j] as f64) + poisson * real(K0_POISSON[i][j] as f64)) * scale
    })
}

/// Global DOF indices of one element, in local stiffness order.
#[inline]
pub fn element_dofs(nx: usize, ex: usize, ey: usize) -> [usize; 8] {
    let n00 = ey * (nx + 1) + ex;
    let n10 = n00 + 1;
    let n01 = n00 + (nx + 1);
    let n11 = n01 + 1;
    [
        2 * n00, 2 * n00 + 1,
        2 * n10, 2 * n10 + 1,
        2 * n11, 2 * n11 + 1,
        2 * n01, 2 * n01 + 1,
    ]
}

/// Axis-aligned node selection box in grid coordinates (a node sits at
/// integer coordinates; selection is inclusive with a small tolerance).
#[derive(Debug, Clone, Copy)]
pub struct NodeRegion<R: Real> {
    pub min: [R; 2],
    pub max: [R; 2],
}

impl<R: Real> NodeRegion<R> {
    pub fn new(min: [R; 2], max: [R; 2]) -> Self {
        Self { min, max }
    }

    fn contains(&self, x: R, y: R) -> bool {
        let tol = real::<R>(1e-6);
        x >= self.min[0] - tol
            && x <= self.max[0] + tol
            && y >= self.min[1] - tol
            && y <= self.max[1] + tol
    }
}

/// Nodes of a region get the chosen axes pinned to zero displacement.
#[derive(Debug, Clone, Copy)]
pub struct FixSpec<R: Real> {
    pub region: NodeRegion<R>,
    pub fix_x: bool,
    pub fix_y: bool,
}

/// Total force spread equally over every node of a region.
#[derive(Debug, Clone, Copy)]
pub struct LoadSpec<R: Real> {
    pub region: NodeRegion<R>,
    pub force: [R; 2],
}

/// Resolved Dirichlet set and nodal force vector for one grid resolution.
#[derive(Debug, Clone)]
pub struct BoundaryConditions<R: Real> {
    resolution: (usize, usize),
    fixed_mask: Vec<bool>,
    fixed_dofs: Vec<u32>,
    force: Vec<R>,
    /// Node indices that received load, for connectivity checks and
    /// diagnostics.
    loaded_nodes: Vec<u32>,
}

impl<R: Real> BoundaryConditions<R> {
    /// Resolve region specs against an `nx` x `ny` element grid.
    pub fn resolve(
        nx: usize,
        ny: usize,
        fixes: &[FixSpec<R>],
        loads: &[LoadSpec<R>],
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyGrid(nx, ny));
        }
        if fixes.is_empty() {
            return Err(Error::InvalidBoundaryConditions(
                "at least one fixed region is required".into(),
            ));
        }
        if loads.is_empty() {
            return Err(Error::InvalidBoundaryConditions(
                "at least one load region is required".into(),
            ));
        }
        let ndof = 2 * (nx + 1) * (ny + 1);
        let mut fixed_mask = vec![false; ndof];
        for (si, spec) in fixes.iter().enumerate() {
            if !spec.fix_x && !spec.fix_y {
                return Err(Error::InvalidBoundaryConditions(format!(
                    "fixed region {si} pins no axis"
                )));
            }
            let mut hit = false;
            for iy in 0..=ny {
                for ix in 0..=nx {
                    if spec.region.contains(real(ix as f64), real(iy as f64)) {
                        hit = true;
                        let n = iy * (nx + 1) + ix;
                        if spec.fix_x {
                            fixed_mask[2 * n] = true;
                        }
                        if spec.fix_y {
                            fixed_mask[2 * n + 1] = true;
                        }
                    }
                }
            }
            if !hit {
                return Err(Error::InvalidBoundaryConditions(format!(
                    "fixed region {si} selects no node"
                )));
            }
        }

        let mut force = vec![R::zero(); ndof];
        let mut loaded_nodes = Vec::new();
        for (si, spec) in loads.iter().enumerate() {
            let mut nodes = Vec::new();
            for iy in 0..=ny {
                for ix in 0..=nx {
                    if spec.region.contains(real(ix as f64), real(iy as f64)) {
                        nodes.push((iy * (nx + 1) + ix) as u32);
                    }
                }
            }
            if nodes.is_empty() {
                return Err(Error::InvalidBoundaryConditions(format!(
                    "load region {si} selects no node"
                )));
            }
            let share = real::<R>(nodes.len() as f64).recip();
            for &n in &nodes {
                force[2 * n as usize] += spec.force[0] * share;
                force[2 * n as usize + 1] += spec.force[1] * share;
            }
            loaded_nodes.extend_from_slice(&nodes);
        }
        loaded_nodes.sort_unstable();
        loaded_nodes.dedup();

        for (d, &f) in force.iter().enumerate() {
            if f != R::zero() && fixed_mask[d] {
                return Err(Error::InvalidBoundaryConditions(format!(
                    "load applied to fixed DOF {d}"
                )));
            }
        }
        if force.iter().all(|&f| f == R::zero()) {
            return Err(Error::InvalidBoundaryConditions("net zero load".into()));
        }

        let fixed_dofs: Vec<u32> = fixed_mask
            .iter()
            .enumerate()
            .filter_map(|(d, &f)| f.then_some(d as u32))
            .collect();
        Ok(Self {
            resolution: (nx, ny),
            fixed_mask,
            fixed_dofs,
            force,
            loaded_nodes,
        })
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.resolution
    }

    pub fn ndof(&self) -> usize {
        self.force.len()
    }

    pub fn fixed_dofs(&self) -> &[u32] {
        &self.fixed_dofs
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed_mask
    }

    pub fn force(&self) -> &[R] {
        &self.force
    }

    pub fn loaded_nodes(&self) -> &[u32] {
        &self.loaded_nodes
    }
}

/// Stopping parameters of the conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<R: Real> {
    /// Relative residual target, measured against the load norm.
    pub tolerance: R,
    pub max_iterations: usize,
}

impl<R: Real> Default for SolveOptions<R> {
    fn default() -> Self {
        Self { tolerance: real(1e-8), max_iterations: 8000 }
    }
}

/// Solution of one elasticity problem.
#[derive(Debug, Clone)]
pub struct ElasticState<R: Real> {
    pub displacements: Vec<R>,
    pub force: Vec<R>,
    /// `F . U`, nonnegative at convergence.
    pub compliance: R,
    /// `d compliance / d projected density` per element; zero on passive
    /// elements, never positive on design elements.
    pub element_sensitivities: Vec<R>,
    /// Relative residual of the returned iterate.
    pub residual: R,
    pub converged: bool,
    pub iterations: usize,
}

/// Matrix-free application of the unconstrained stiffness: `out = K v`.
pub fn stiffness_apply_raw<R: Real>(
    moduli: &[R],
    nx: usize,
    ny: usize,
    k0: &SMatrix<R, 8, 8>,
    v: &[R],
    out: &mut [R],
) {
    debug_assert_eq!(moduli.len(), nx * ny);
    debug_assert_eq!(v.len(), 2 * (nx + 1) * (ny + 1));
    debug_assert_eq!(out.len(), v.len());
    for o in out.iter_mut() {
        *o = R::zero();
    }
    for ey in 0..ny {
        for ex in 0..nx {
            let me = moduli[ey * nx + ex];
            let dofs = element_dofs(nx, ex, ey);
            let mut ue = SVector::<R, 8>::zeros();
            for (l, &d) in dofs.iter().enumerate() {
                ue[l] = v[d];
            }
            let fe = k0 * ue;
            for (l, &d) in dofs.iter().enumerate() {
                out[d] += me * fe[l];
            }
        }
    }
}

/// Constrained operator `P K P + (I - P)` where `P` zeroes fixed DOFs.
struct ConstrainedOperator<'a, R: Real> {
    moduli: &'a [R],
    nx: usize,
    ny: usize,
    k0: &'a SMatrix<R, 8, 8>,
    fixed: &'a [bool],
    scratch: Vec<R>,
}

impl<R: Real> ConstrainedOperator<'_, R> {
    fn apply(&mut self, v: &[R], out: &mut [R]) {
        self.scratch.copy_from_slice(v);
        for (s, &f) in self.scratch.iter_mut().zip(self.fixed) {
            if f {
                *s = R::zero();
            }
        }
        stiffness_apply_raw(self.moduli, self.nx, self.ny, self.k0, &self.scratch, out);
        for d in 0..out.len() {
            if self.fixed[d] {
                out[d] = v[d];
            }
        }
    }
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut s = R::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

/// Assemble the interpolated stiffness and solve `K U = F`.
///
/// `warm_start` seeds the iteration (the optimization loop passes the
/// previous displacement field, which typically cuts the iteration count by
/// an order of magnitude). Non-convergence within the budget returns the
/// best iterate seen with `converged = false`.
pub fn assemble_and_solve<R: Real>(
    projected: &ProjectedDensityGrid<R>,
    mask: &DomainMask,
    bcs: &BoundaryConditions<R>,
    mat: &MaterialModel<R>,
    opts: &SolveOptions<R>,
    warm_start: Option<&[R]>,
) -> Result<ElasticState<R>> {
    mat.validate()?;
    let (nx, ny) = projected.resolution();
    if bcs.resolution() != (nx, ny) {
        return Err(Error::InvalidBoundaryConditions(format!(
            "boundary conditions resolved for {:?}, grid is {:?}",
            bcs.resolution(),
            (nx, ny)
        )));
    }
    let ndof = bcs.ndof();
    let k0 = element_stiffness_unit(mat.poisson);
    let moduli: Vec<R> = projected
        .values()
        .iter()
        .map(|&rho| interpolate_modulus(rho, mat))
        .collect();

    // Jacobi preconditioner of the constrained operator.
    let mut diag = vec![R::zero(); ndof];
    for ey in 0..ny {
        for ex in 0..nx {
            let me = moduli[ey * nx + ex];
            for (l, &d) in element_dofs(nx, ex, ey).iter().enumerate() {
                diag[d] += me * k0[(l, l)];
            }
        }
    }
    let fixed = bcs.fixed_mask();
    for d in 0..ndof {
        if fixed[d] {
            diag[d] = R::one();
        }
    }

    let mut op = ConstrainedOperator {
        moduli: &moduli,
        nx,
        ny,
        k0: &k0,
        fixed,
        scratch: vec![R::zero(); ndof],
    };

    let b: Vec<R> = bcs
        .force()
        .iter()
        .enumerate()
        .map(|(d, &f)| if fixed[d] { R::zero() } else { f })
        .collect();
    let b_norm = dot(&b, &b).sqrt();

    let mut x = vec![R::zero(); ndof];
    if let Some(w) = warm_start {
        if w.len() == ndof {
            x.copy_from_slice(w);
            for d in 0..ndof {
                if fixed[d] {
                    x[d] = R::zero();
                }
            }
        }
    }

    let mut r = vec![R::zero(); ndof];
    op.apply(&x, &mut r);
    for d in 0..ndof {
        r[d] = b[d] - r[d];
    }
    let mut z: Vec<R> = r.iter().zip(&diag).map(|(&ri, &di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![R::zero(); ndof];

    let mut best_x = x.clone();
    let mut best_res = dot(&r, &r).sqrt() / b_norm;
    let mut converged = best_res <= opts.tolerance;
    let mut iterations = 0usize;

    while !converged && iterations < opts.max_iterations {
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq.partial_cmp(&R::zero()) != Some(std::cmp::Ordering::Greater) {
            // Loss of definiteness through roundoff (or NaN); keep the best
            // iterate.
            break;
        }
        let alpha = rz / pq;
        for d in 0..ndof {
            x[d] += alpha * p[d];
            r[d] -= alpha * q[d];
        }
        iterations += 1;

        let res = dot(&r, &r).sqrt() / b_norm;
        if res < best_res {
            best_res = res;
            best_x.copy_from_slice(&x);
        }
        if res <= opts.tolerance {
            converged = true;
            break;
        }
        for d in 0..ndof {
            z[d] = r[d] / diag[d];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for d in 0..ndof {
            p[d] = z[d] + beta * p[d];
        }
    }

    let displacements = if converged { x } else { best_x };
    let force = bcs.force().to_vec();
    let (compliance, element_sensitivities) =
        compliance_and_sensitivity(&displacements, &force, projected, mask, mat);

    Ok(ElasticState {
        displacements,
        force,
        compliance,
        element_sensitivities,
        residual: best_res,
        converged,
        iterations,
    })
}

/// Compliance `F . U` and its derivative with respect to each element's
/// projected density:
///
/// ```text
/// d c / d rho_e = -p rho_e^(p-1) (E_0 - E_min) u_e^T k0 u_e
/// ```
///
/// Passive elements report zero (their density is not a design quantity).
pub fn compliance_and_sensitivity<R: Real>(
    displacements: &[R],
    force: &[R],
    projected: &ProjectedDensityGrid<R>,
    mask: &DomainMask,
    mat: &MaterialModel<R>,
) -> (R, Vec<R>) {
    let (nx, ny) = projected.resolution();
    let compliance = dot(force, displacements);
    let k0 = element_stiffness_unit(mat.poisson);
    let mut sens = vec![R::zero(); nx * ny];
    for ey in 0..ny {
        for ex in 0..nx {
            let e = ey * nx + ex;
            if mask.state(e) != CellState::Design {
                continue;
            }
            let dofs = element_dofs(nx, ex, ey);
            let mut ue = SVector::<R, 8>::zeros();
            for (l, &d) in dofs.iter().enumerate() {
                ue[l] = displacements[d];
            }
            let strain_energy = (k0 * ue).dot(&ue);
            sens[e] = -interpolate_modulus_derivative(projected.value(e), mat) * strain_energy;
        }
    }
    (compliance, sens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DensityGrid;
    use approx::assert_relative_eq;

    #[test]
    fn unit_stiffness_matches_exact_integration_at_reference_poisson() {
        let k = element_stiffness_unit::<f64>(0.3);
        // Independently derived closed-form entries at nu = 0.3.
        assert_relative_eq!(k[(0, 0)], 45.0 / 91.0, max_relative = 1e-15);
        assert_relative_eq!(k[(0, 1)], 5.0 / 28.0, max_relative = 1e-15);
        assert_relative_eq!(k[(0, 2)], -55.0 / 182.0, max_relative = 1e-15);
        assert_relative_eq!(k[(0, 7)], 5.0 / 364.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_stiffness_is_symmetric_with_three_rigid_modes() {
        let k = element_stiffness_unit::<f64>(0.3);
        assert_relative_eq!((k - k.transpose()).norm(), 0.0, epsilon = 1e-15);
        let tx = SVector::<f64, 8>::from_column_slice(&[1., 0., 1., 0., 1., 0., 1., 0.]);
        let ty = SVector::<f64, 8>::from_column_slice(&[0., 1., 0., 1., 0., 1., 0., 1.]);
        let rot = SVector::<f64, 8>::from_column_slice(&[0.5, -0.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5]);
        for mode in [tx, ty, rot] {
            assert!((k * mode).norm() < 1e-14);
        }
        let eig = k.symmetric_eigenvalues();
        let zero_modes = eig.iter().filter(|&&l| l.abs() < 1e-12).count();
        assert_eq!(zero_modes, 3, "eigenvalues {eig:?}");
        assert!(eig.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn modulus_interpolation_hits_endpoints() {
        let mat = MaterialModel::<f64>::default();
        assert_relative_eq!(interpolate_modulus(0.0, &mat), 1e-9, max_relative = 1e-12);
        assert_relative_eq!(interpolate_modulus(1.0, &mat), 1.0, max_relative = 1e-12);
        // p = 1 keeps the map affine.
        assert_relative_eq!(
            interpolate_modulus(0.5, &mat),
            1e-9 + 0.5 * (1.0 - 1e-9),
            max_relative = 1e-12
        );
    }

    fn cantilever_bcs(nx: usize, ny: usize) -> BoundaryConditions<f64> {
        let h = ny as f64;
        BoundaryConditions::resolve(
            nx,
            ny,
            &[FixSpec {
                region: NodeRegion::new([0.0, 0.0], [0.0, h]),
                fix_x: true,
                fix_y: true,
            }],
            &[LoadSpec {
                region: NodeRegion::new([nx as f64, h / 2.0], [nx as f64, h / 2.0]),
                force: [0.0, -1.0],
            }],
        )
        .unwrap()
    }

    #[test]
    fn load_is_split_equally_over_selected_nodes() {
        let bcs = BoundaryConditions::resolve(
            4,
            2,
            &[FixSpec {
                region: NodeRegion::new([0.0, 0.0], [0.0, 2.0]),
                fix_x: true,
                fix_y: true,
            }],
            &[LoadSpec {
                region: NodeRegion::new([4.0, 0.0], [4.0, 2.0]),
                force: [0.0, -3.0],
            }],
        )
        .unwrap();
        let loaded: Vec<f64> = bcs.force().iter().copied().filter(|f| *f != 0.0).collect();
        assert_eq!(loaded.len(), 3);
        for f in loaded {
            assert_relative_eq!(f, -1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn rejects_load_on_fixed_dof_and_empty_regions() {
        let fix_all_left = FixSpec {
            region: NodeRegion::new([0.0, 0.0], [0.0, 2.0]),
            fix_x: true,
            fix_y: true,
        };
        let err = BoundaryConditions::<f64>::resolve(
            4,
            2,
            &[fix_all_left],
            &[LoadSpec {
                region: NodeRegion::new([0.0, 0.0], [0.0, 0.0]),
                force: [0.0, -1.0],
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidBoundaryConditions(_)));

        let err = BoundaryConditions::<f64>::resolve(
            4,
            2,
            &[fix_all_left],
            &[LoadSpec {
                region: NodeRegion::new([9.0, 9.0], [9.5, 9.5]),
                force: [0.0, -1.0],
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidBoundaryConditions(_)));
    }

    #[test]
    fn solid_cantilever_bends_downward() {
        let (nx, ny) = (8, 4);
        let grid = DensityGrid::constant(nx, ny, 1.0).unwrap();
        let projected = ProjectedDensityGrid::from_grid(grid, 1.0);
        let mask = DomainMask::all_design(nx, ny).unwrap();
        let bcs = cantilever_bcs(nx, ny);
        let state = assemble_and_solve(
            &projected,
            &mask,
            &bcs,
            &MaterialModel::default(),
            &SolveOptions::default(),
            None,
        )
        .unwrap();
        assert!(state.converged, "residual {}", state.residual);
        assert!(state.compliance > 0.0);
        // Tip node under the load moves down.
        let tip = 2 * ((ny / 2) * (nx + 1) + nx) + 1;
        assert!(state.displacements[tip] < 0.0);
        // Fixed DOFs stay put.
        for &d in bcs.fixed_dofs() {
            assert_eq!(state.displacements[d as usize], 0.0);
        }
        // Design sensitivities are nonpositive.
        assert!(state.element_sensitivities.iter().all(|&s| s <= 0.0));
    }

    #[test]
    fn warm_start_reaches_the_same_solution_faster() {
        let (nx, ny) = (16, 8);
        let grid = DensityGrid::constant(nx, ny, 0.8).unwrap();
        let projected = ProjectedDensityGrid::from_grid(grid, 1.0);
        let mask = DomainMask::all_design(nx, ny).unwrap();
        let bcs = cantilever_bcs(nx, ny);
        let mat = MaterialModel::default();
        let opts = SolveOptions::default();
        let cold = assemble_and_solve(&projected, &mask, &bcs, &mat, &opts, None).unwrap();
        let warm =
            assemble_and_solve(&projected, &mask, &bcs, &mat, &opts, Some(&cold.displacements))
                .unwrap();
        assert!(warm.iterations <= 2, "warm start took {}", warm.iterations);
        assert_relative_eq!(warm.compliance, cold.compliance, max_relative = 1e-8);
    }

    #[test]
    fn iteration_budget_of_zero_reports_non_convergence() {
        let (nx, ny) = (8, 4);
        let grid = DensityGrid::constant(nx, ny, 1.0).unwrap();
        let projected = ProjectedDensityGrid::from_grid(grid, 1.0);
        let mask = DomainMask::all_design(nx, ny).unwrap();
        let bcs = cantilever_bcs(nx, ny);
        let opts = SolveOptions { tolerance: 1e-8, max_iterations: 0 };
        let state =
            assemble_and_solve(&projected, &mask, &bcs, &MaterialModel::default(), &opts, None)
                .unwrap();
        assert!(!state.converged);
        assert!(state.residual > 0.0);
    }
}
