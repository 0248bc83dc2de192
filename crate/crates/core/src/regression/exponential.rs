//! Two-term exponential fit `β0 + β1·exp(β2·x) + β3·exp(β4·x)`.
//!
//! Rate pairs from a grid seed a variable-projection search over the two
//! rates (amplitudes solved linearly at every step), and the result is
//! polished by damped Gauss-Newton (Marquardt damping) on all five parameters.
//!
//! The solver works on `t = (x − min x) / range(x) ∈ [0, 1]` with parameters
//! `(a0, a1, c1, a2, c2)` and model `a0 + a1·exp(c1·t) + a2·exp(c2·t)`;
//! the result is mapped back exactly via `β2 = c1 / range`,
//! `β1 = a1·exp(−c1·min x / range)` (likewise for the second term).

use nalgebra::{DMatrix, DVector, Matrix2, Matrix5, Vector2, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use super::{check_inputs, FitError, ModelKind, RegressionModel};
use crate::linalg::weighted_least_squares;

/// Minimum number of points accepted by [`fit_exponential2`].
pub const MIN_POINTS: usize = 8;

/// Largest damping before a start is declared stuck.
const MAX_DAMPING: f64 = 1e16;

/// Rates closer than this (relative) are treated as merged: the two terms
/// collapse into one and the stationary point is a saddle, not a fit.
const MERGED_RATES: f64 = 1e-6;

/// Relative pivot size below which a projection design is rank deficient.
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFitOptions {
    /// Damped Gauss-Newton iterations per start, accepted or rejected.
    pub max_iterations: usize,
    /// A start converges once the ∞-norm of the SSE gradient (in the
    /// normalized parameters) is below `grad_tol · (1 + SSE)`.
    pub grad_tol: f64,
    pub initial_damping: f64,
    /// Damping is multiplied by this on a rejected step and divided on success.
    pub damping_factor: f64,
    /// Candidate rates in units of `1 / range(x)`. Every pair `c1 < c2` is
    /// scored with its best linear amplitudes.
    pub rate_grid: Vec<f64>,
    /// Number of best-scoring grid pairs refined by damped Gauss-Newton.
    pub starts: usize,
    /// Largest accepted |rate| in units of `1 / range(x)`. Steps beyond it
    /// are rejected, which keeps the fit from collapsing into a step
    /// function with an unbounded slope.
    pub max_rate: f64,
}

impl Default for ExpFitOptions {
    fn default() -> Self {
        ExpFitOptions {
            max_iterations: 200,
            grad_tol: 1e-8,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            rate_grid: vec![-8.0, -4.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
            starts: 8,
            max_rate: 20.0,
        }
    }
}

/// Fit the two-term exponential by weighted least squares.
///
/// The best-scoring rate pairs of `opts.rate_grid` (amplitudes solved
/// linearly) are refined independently; among the starts that meet the
/// gradient tolerance the one with the lowest SSE is returned. If none does,
/// the fit fails with [`FitError::NonConvergence`] rather than returning an
/// unconverged model.
pub fn fit_exponential2(x: &[f64], y: &[f64], weights: &[f64], opts: &ExpFitOptions) -> Result<RegressionModel, FitError> {
    check_inputs(x, y, weights)?;
    if x.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints { needed: MIN_POINTS, got: x.len() });
    }
    let x_min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = x_max - x_min;
    if !(range > 0.0) {
        return Err(FitError::ConstantInput);
    }
    let problem = Problem {
        t: x.iter().map(|v| (v - x_min) / range).collect(),
        y,
        sqrt_w: weights.iter().map(|w| w.sqrt()).collect(),
    };

    let mut seeds: Vec<(f64, Vector5<f64>)> = Vec::new();
    for (i, &c1) in opts.rate_grid.iter().enumerate() {
        for &c2 in &opts.rate_grid[i + 1..] {
            if let Some(start) = problem.linear_start(c1, c2, weights) {
                let sse = problem.sse(&start);
                if sse.is_finite() {
                    seeds.push((sse, start));
                }
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(opts.starts);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, seed) in seeds {
        let rates = problem.varpro(Vector2::new(seed[2], seed[4]), opts);
        let Some(start) = problem.linear_start(rates[0], rates[1], weights) else { continue };
        let Some((p, _)) = problem.refine(start, opts) else { continue };
        if (p[2] - p[4]).abs() <= MERGED_RATES * p[2].abs().max(p[4].abs()).max(1.0) {
            continue;
        }
        let Some(beta) = to_raw(&p, x_min, range) else { continue };
        let model = RegressionModel { kind: ModelKind::TwoTermExponential, beta, input_name: String::new() };
        // score in the raw parameterization that callers will evaluate
        let sse: f64 = x
            .iter()
            .zip(y)
            .zip(weights)
            .map(|((x, y), w)| w * (y - model.eval(*x)).powi(2))
            .sum();
        if sse.is_finite() && best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, model.beta));
        }
    }
    match best {
        Some((_, beta)) => RegressionModel::new(ModelKind::TwoTermExponential, beta, ""),
        None => Err(FitError::NonConvergence { starts: opts.starts, max_iterations: opts.max_iterations }),
    }
}

/// Map normalized parameters back to raw `β`. `None` if anything overflows.
fn to_raw(p: &Vector5<f64>, x_min: f64, range: f64) -> Option<Vec<f64>> {
    let [a0, a1, c1, a2, c2] = [p[0], p[1], p[2], p[3], p[4]];
    let b2 = c1 / range;
    let b4 = c2 / range;
    let beta = vec![a0, a1 * (-b2 * x_min).exp(), b2, a2 * (-b4 * x_min).exp(), b4];
    beta.iter().all(|b| b.is_finite()).then_some(beta)
}

struct Problem<'a> {
    t: Vec<f64>,
    y: &'a [f64],
    sqrt_w: Vec<f64>,
}

impl Problem<'_> {
    fn eval(p: &Vector5<f64>, t: f64) -> f64 {
        p[0] + p[1] * (p[2] * t).exp() + p[3] * (p[4] * t).exp()
    }

    /// Weighted sum of squared residuals.
    fn sse(&self, p: &Vector5<f64>) -> f64 {
        self.t
            .iter()
            .zip(self.y)
            .zip(&self.sqrt_w)
            .map(|((t, y), sw)| (sw * (y - Self::eval(p, *t))).powi(2))
            .sum()
    }

    /// `JᵀJ`, `Jᵀr` and the SSE at `p`, with `J` the weighted model Jacobian
    /// and `r` the weighted residual. One pass over the points.
    fn linearize(&self, p: &Vector5<f64>) -> (Matrix5<f64>, Vector5<f64>, f64) {
        let mut jtj = Matrix5::zeros();
        let mut jtr = Vector5::zeros();
        let mut sse = 0.0;
        for ((t, y), sw) in self.t.iter().zip(self.y).zip(&self.sqrt_w) {
            let e1 = (p[2] * t).exp();
            let e2 = (p[4] * t).exp();
            let r = sw * (y - (p[0] + p[1] * e1 + p[3] * e2));
            let row = Vector5::new(1.0, e1, p[1] * t * e1, e2, p[3] * t * e2) * *sw;
            jtj.syger(1.0, &row, &row, 1.0);
            jtr.axpy(r, &row, 1.0);
            sse += r * r;
        }
        jtj.fill_upper_triangle_with_lower_triangle();
        (jtj, jtr, sse)
    }

    /// Amplitudes and offset by linear least squares with the rates fixed.
    fn linear_start(&self, c1: f64, c2: f64, weights: &[f64]) -> Option<Vector5<f64>> {
        let design = DMatrix::from_fn(self.t.len(), 3, |k, j| match j {
            0 => 1.0,
            1 => (c1 * self.t[k]).exp(),
            _ => (c2 * self.t[k]).exp(),
        });
        let a = weighted_least_squares(&design, self.y, weights)?;
        Some(Vector5::new(a[0], a[1], c1, a[2], c2))
    }

    /// Best amplitudes for rates `c`, the weighted residual and the thin `Q`
    /// of the weighted design. `None` if the design is rank deficient.
    fn project(&self, c: &Vector2<f64>) -> Option<(Vector3<f64>, DVector<f64>, DMatrix<f64>)> {
        let n = self.t.len();
        let design = DMatrix::from_fn(n, 3, |k, j| {
            self.sqrt_w[k]
                * match j {
                    0 => 1.0,
                    1 => (c[0] * self.t[k]).exp(),
                    _ => (c[1] * self.t[k]).exp(),
                }
        });
        if design.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let rhs = DVector::from_fn(n, |k, _| self.sqrt_w[k] * self.y[k]);
        let qr = design.clone().qr();
        let r = qr.r();
        let pivots = r.diagonal().abs();
        if pivots.min() <= RANK_TOL * pivots.max() {
            return None;
        }
        let q = qr.q();
        let a = r.solve_upper_triangular(&(q.transpose() * &rhs))?;
        let a = Vector3::new(a[0], a[1], a[2]);
        let resid = rhs - design * a;
        Some((a, resid, q))
    }

    /// Levenberg-Marquardt over the rates alone with the amplitudes
    /// projected out (Kaufman's Jacobian). Returns the best rates reached.
    fn varpro(&self, mut c: Vector2<f64>, opts: &ExpFitOptions) -> Vector2<f64> {
        let Some(mut state) = self.project(&c) else { return c };
        let mut damping = opts.initial_damping;
        let mut fresh = true;
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for _ in 0..opts.max_iterations {
            let (a, resid, q) = &state;
            let sse = resid.norm_squared();
            if fresh {
                let n = self.t.len();
                let mut cols = Vec::with_capacity(2);
                for k in 0..2 {
                    let v = DVector::from_fn(n, |i, _| {
                        self.sqrt_w[i] * a[k + 1] * self.t[i] * (c[k] * self.t[i]).exp()
                    });
                    let proj = &v - q * (q.transpose() * &v);
                    cols.push(-proj);
                }
                jtj = Matrix2::from_fn(|i, j| cols[i].dot(&cols[j]));
                jtr = Vector2::from_fn(|i, _| cols[i].dot(resid));
                fresh = false;
            }
            let floor = 1e-12 * jtj.diagonal().max() + f64::MIN_POSITIVE;
            let mut normal = jtj;
            for i in 0..2 {
                normal[(i, i)] += damping * jtj[(i, i)].max(floor);
            }
            let step = normal.cholesky().map(|ch| -ch.solve(&jtr));
            let accepted = step.and_then(|step| {
                let next = c + step;
                if next.amax() > opts.max_rate {
                    return None;
                }
                let s = self.project(&next)?;
                let next_sse = s.1.norm_squared();
                (next_sse.is_finite() && next_sse < sse).then_some((next, s, step, next_sse))
            });
            match accepted {
                Some((next, s, step, next_sse)) => {
                    let small_step = step.amax() <= 1e-12 * (1.0 + c.amax());
                    let small_gain = sse - next_sse <= 1e-15 * sse;
                    c = next;
                    state = s;
                    fresh = true;
                    damping = (damping / opts.damping_factor).max(f64::MIN_POSITIVE);
                    if small_step || small_gain {
                        break;
                    }
                }
                None => {
                    damping *= opts.damping_factor;
                    if damping > MAX_DAMPING {
                        break;
                    }
                }
            }
        }
        c
    }

    /// Damped Gauss-Newton from `p`. Returns the converged parameters and
    /// SSE, or `None` if the gradient tolerance is not met.
    fn refine(&self, mut p: Vector5<f64>, opts: &ExpFitOptions) -> Option<(Vector5<f64>, f64)> {
        let (mut jtj, mut jtr, mut sse) = self.linearize(&p);
        if !sse.is_finite() {
            return None;
        }
        let mut damping = opts.initial_damping;
        // the SSE gradient is −2·Jᵀr
        let converged = |jtr: &Vector5<f64>, sse: f64| 2.0 * jtr.amax() < opts.grad_tol * (1.0 + sse);
        for _ in 0..opts.max_iterations {
            if converged(&jtr, sse) {
                return Some((p, sse));
            }
            // Marquardt scaling keeps the damping meaningful across parameter magnitudes
            let floor = 1e-12 * jtj.diagonal().max() + f64::MIN_POSITIVE;
            let mut normal = jtj;
            for i in 0..5 {
                normal[(i, i)] += damping * jtj[(i, i)].max(floor);
            }
            let candidate = normal
                .cholesky()
                .map(|c| p + c.solve(&jtr))
                .filter(|c| c[2].abs() <= opts.max_rate && c[4].abs() <= opts.max_rate)
                .filter(|c| {
                    let s = self.sse(c);
                    s.is_finite() && s < sse
                });
            match candidate {
                Some(c) => {
                    p = c;
                    (jtj, jtr, sse) = self.linearize(&p);
                    damping = (damping / opts.damping_factor).max(f64::MIN_POSITIVE);
                }
                None => {
                    damping *= opts.damping_factor;
                    if damping > MAX_DAMPING {
                        break;
                    }
                }
            }
        }
        converged(&jtr, sse).then_some((p, sse))
    }
}
