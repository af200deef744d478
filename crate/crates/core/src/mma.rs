//! Method of moving asymptotes, specialized to one inequality constraint.
//!
//! Each call builds the usual separable convex approximation of the
//! objective and constraint around the current point,
//!
//! ```text
//! f(x) ~ sum_j  p_j / (U_j - x_j) + q_j / (x_j - L_j)
//! ```
//!
//! with asymptotes `L`, `U` that widen while the iterates move steadily and
//! contract when they oscillate. The subproblem is solved exactly through
//! its dual: for a single constraint the dual is one-dimensional in the
//! multiplier, the primal minimizer per coordinate has a closed form, and
//! the multiplier is found by bisection on the (monotone) constraint
//! residual.
//!
//! Feasibility convention: `g(x) <= 0`. When the current point is feasible
//! and the objective gradient vanishes, the update returns the point
//! unchanged (up to roundoff): the subproblem's minimizer coincides with
//! the expansion point.

use crate::scalar::{real, Real};

/// Tuning constants; the defaults are the widely used ones.
#[derive(Debug, Clone, Copy)]
pub struct MmaOptions<R: Real> {
    /// Hard per-iteration move limit as a fraction of each variable's range.
    pub move_fraction: R,
    /// Initial asymptote distance as a fraction of the range.
    pub asymptote_init: R,
    /// Growth factor after two steps in the same direction.
    pub asymptote_expand: R,
    /// Shrink factor after a sign flip.
    pub asymptote_shrink: R,
    /// Fraction of the asymptote gap kept between bounds and asymptotes.
    pub bound_gap_fraction: R,
    /// Closest an asymptote may approach the iterate, as a fraction of the
    /// range. Kept tiny so oscillation damping can contract all the way into
    /// a tight optimum; raise it to forbid very small steps.
    pub asymptote_gap_min: R,
    /// Curvature floor keeping every approximation strictly convex.
    pub curvature_floor: R,
}

impl<R: Real> Default for MmaOptions<R> {
    fn default() -> Self {
        Self {
            move_fraction: real(0.2),
            asymptote_init: real(0.5),
            asymptote_expand: real(1.2),
            asymptote_shrink: real(0.7),
            bound_gap_fraction: real(0.1),
            asymptote_gap_min: real(1e-8),
            curvature_floor: real(1e-5),
        }
    }
}

/// Per-variable history the method carries between updates.
#[derive(Debug, Clone)]
pub struct MmaState<R: Real> {
    n: usize,
    opts: MmaOptions<R>,
    iteration: usize,
    lower: Vec<R>,
    upper: Vec<R>,
    x_prev: Vec<R>,
    x_prev2: Vec<R>,
}

impl<R: Real> MmaState<R> {
    pub fn new(n: usize, opts: MmaOptions<R>) -> Self {
        Self {
            n,
            opts,
            iteration: 0,
            lower: vec![R::zero(); n],
            upper: vec![R::zero(); n],
            x_prev: vec![R::zero(); n],
            x_prev2: vec![R::zero(); n],
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One design update.
    ///
    /// * `x` current point, `df` objective gradient at `x`
    /// * `g` constraint value (feasible iff `g <= 0`), `dg` its gradient
    /// * `xmin`, `xmax` box bounds
    pub fn update(
        &mut self,
        x: &[R],
        df: &[R],
        g: R,
        dg: &[R],
        xmin: &[R],
        xmax: &[R],
    ) -> Vec<R> {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(df.len(), n);
        assert_eq!(dg.len(), n);
        assert_eq!(xmin.len(), n);
        assert_eq!(xmax.len(), n);
        let o = self.opts;
        let tiny = real::<R>(1e-12);

        // Asymptote update.
        for j in 0..n {
            let range = (xmax[j] - xmin[j]).max(tiny);
            if self.iteration < 2 {
                self.lower[j] = x[j] - o.asymptote_init * range;
                self.upper[j] = x[j] + o.asymptote_init * range;
            } else {
                let trend = (x[j] - self.x_prev[j]) * (self.x_prev[j] - self.x_prev2[j]);
                let factor = if trend > R::zero() {
                    o.asymptote_expand
                } else if trend < R::zero() {
                    o.asymptote_shrink
                } else {
                    R::one()
                };
                let mut low = x[j] - factor * (self.x_prev[j] - self.lower[j]);
                let mut upp = x[j] + factor * (self.upper[j] - self.x_prev[j]);
                let widest = real::<R>(10.0) * range;
                let narrowest = o.asymptote_gap_min * range;
                low = low.clamp(x[j] - widest, x[j] - narrowest);
                upp = upp.clamp(x[j] + narrowest, x[j] + widest);
                self.lower[j] = low;
                self.upper[j] = upp;
            }
        }

        // Subproblem bounds: inside the box, away from the asymptotes, and
        // within the move limit.
        let mut alpha = vec![R::zero(); n];
        let mut beta = vec![R::zero(); n];
        for j in 0..n {
            let range = (xmax[j] - xmin[j]).max(tiny);
            let a = xmin[j]
                .max(self.lower[j] + o.bound_gap_fraction * (x[j] - self.lower[j]))
                .max(x[j] - o.move_fraction * range);
            let b = xmax[j]
                .min(self.upper[j] - o.bound_gap_fraction * (self.upper[j] - x[j]))
                .min(x[j] + o.move_fraction * range);
            alpha[j] = a;
            beta[j] = b.max(a);
        }

        // Separable approximation coefficients.
        let mut p0 = vec![R::zero(); n];
        let mut q0 = vec![R::zero(); n];
        let mut p1 = vec![R::zero(); n];
        let mut q1 = vec![R::zero(); n];
        let small = real::<R>(0.001);
        for j in 0..n {
            let range = (xmax[j] - xmin[j]).max(tiny);
            let ux = self.upper[j] - x[j];
            let xl = x[j] - self.lower[j];
            let ux2 = ux * ux;
            let xl2 = xl * xl;

            let dfp = df[j].max(R::zero());
            let dfm = (-df[j]).max(R::zero());
            let reg0 = small * (dfp + dfm) + o.curvature_floor / range;
            p0[j] = ux2 * (dfp + reg0);
            q0[j] = xl2 * (dfm + reg0);

            let dgp = dg[j].max(R::zero());
            let dgm = (-dg[j]).max(R::zero());
            let reg1 = small * (dgp + dgm) + o.curvature_floor / range;
            p1[j] = ux2 * (dgp + reg1);
            q1[j] = xl2 * (dgm + reg1);
        }

        // Right-hand side of the approximated constraint.
        let mut b_rhs = -g;
        for j in 0..n {
            b_rhs += p1[j] / (self.upper[j] - x[j]) + q1[j] / (x[j] - self.lower[j]);
        }

        // Closed-form coordinate minimizer at multiplier `lambda`.
        let primal = |lambda: R, out: &mut [R]| {
            for j in 0..n {
                let sp = (p0[j] + lambda * p1[j]).sqrt();
                let sq = (q0[j] + lambda * q1[j]).sqrt();
                let xj = (self.lower[j] * sp + self.upper[j] * sq) / (sp + sq);
                out[j] = xj.clamp(alpha[j], beta[j]);
            }
        };
        let constraint_residual = |xs: &[R]| {
            let mut h = -b_rhs;
            for j in 0..n {
                h += p1[j] / (self.upper[j] - xs[j]) + q1[j] / (xs[j] - self.lower[j]);
            }
            h
        };

        let mut x_new = vec![R::zero(); n];
        primal(R::zero(), &mut x_new);
        if constraint_residual(&x_new) > R::zero() {
            // Bracket the multiplier, then bisect; the residual is monotone
            // nonincreasing in lambda.
            let mut lo = R::zero();
            let mut hi = R::one();
            let cap = real::<R>(1e12);
            loop {
                primal(hi, &mut x_new);
                if constraint_residual(&x_new) <= R::zero() || hi >= cap {
                    break;
                }
                lo = hi;
                hi *= real(2.0);
            }
            for _ in 0..100 {
                let mid = (lo + hi) * real(0.5);
                primal(mid, &mut x_new);
                if constraint_residual(&x_new) > R::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            primal(hi, &mut x_new);
        }

        self.x_prev2.copy_from_slice(&self.x_prev);
        self.x_prev.copy_from_slice(x);
        self.iteration += 1;
        x_new
    }
}
