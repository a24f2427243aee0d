//! Posynomial arithmetic, monomial condensation and a small geometric-program
//! solver.
//!
//! Problems are solved in the log domain, where a posynomial becomes a
//! log-sum-exp (convex) and a monomial a linear function. The solver is a
//! box-projected gradient method with Barzilai-Borwein steps and Armijo
//! backtracking; posynomial constraints `g(x) <= 1` are handled with a ramped
//! quadratic penalty and a feasibility post-check.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid problem: {0}")]
    BadProblem(String),
    #[error("constraint set is infeasible (max relative violation {violation:.3e})")]
    Infeasible { violation: f64 },
    #[error("posynomial evaluates to zero at the condensation point")]
    ZeroAtPoint,
}

/// Single power-law term `coeff * prod_k x_k^exps_k` with `coeff > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<f64>,
}

impl Monomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for (e, xi) in self.exps.iter().zip(x) {
            v *= xi.powf(*e);
        }
        v
    }

    /// Linear form in log variables: ln coeff + exps . y.
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        self.coeff.ln() + self.exps.iter().zip(y).map(|(e, yi)| e * yi).sum::<f64>()
    }
}

/// Sum of monomials with strictly positive coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn constant(num_vars: usize, c: f64) -> Self {
        Posynomial {
            terms: vec![Monomial {
                coeff: c,
                exps: vec![0.0; num_vars],
            }],
        }
    }

    /// Adds `coeff * x_var` (a single linear term) to the posynomial.
    pub fn push_linear(&mut self, num_vars: usize, var: usize, coeff: f64) {
        let mut exps = vec![0.0; num_vars];
        exps[var] = 1.0;
        self.terms.push(Monomial { coeff, exps });
    }

    pub fn push_constant(&mut self, num_vars: usize, c: f64) {
        self.terms.push(Monomial {
            coeff: c,
            exps: vec![0.0; num_vars],
        });
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Log-domain value `ln g(e^y)` with gradient accumulated into `grad`
    /// scaled by `weight`. Returns the value (unweighted).
    pub fn log_value_acc_grad(&self, y: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        debug_assert!(!self.terms.is_empty());
        let mut vals = [0.0f64; 8];
        let mut heap_vals;
        let vals: &mut [f64] = if self.terms.len() <= 8 {
            &mut vals[..self.terms.len()]
        } else {
            heap_vals = vec![0.0; self.terms.len()];
            &mut heap_vals
        };
        let mut max = f64::NEG_INFINITY;
        for (i, t) in self.terms.iter().enumerate() {
            let v = t.log_eval(y);
            vals[i] = v;
            if v > max {
                max = v;
            }
        }
        let mut sum = 0.0;
        for v in vals.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        // softmax-weighted exponent vectors form the gradient
        for (i, t) in self.terms.iter().enumerate() {
            let a = weight * vals[i] / sum;
            if a != 0.0 {
                for (gk, ek) in grad.iter_mut().zip(&t.exps) {
                    *gk += a * ek;
                }
            }
        }
        max + sum.ln()
    }

    pub fn log_value(&self, y: &[f64]) -> f64 {
        let mut scratch = vec![0.0; y.len()];
        self.log_value_acc_grad(y, 0.0, &mut scratch)
    }
}

/// Arithmetic-geometric-mean condensation: the monomial `m` with
/// `m(point) = g(point)` and `m(x) <= g(x)` for all `x > 0`, using weights
/// `alpha_i = u_i(point) / g(point)`.
pub fn condense(g: &Posynomial, point: &[f64]) -> Result<Monomial, GpError> {
    if point.iter().any(|p| *p <= 0.0) {
        return Err(GpError::BadProblem(
            "condensation point must be strictly positive".into(),
        ));
    }
    let y: Vec<f64> = point.iter().map(|p| p.ln()).collect();
    let logs: Vec<f64> = g.terms.iter().map(|t| t.log_eval(&y)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(GpError::ZeroAtPoint);
    }
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let log_g = max + sum.ln();

    let n = point.len();
    let mut exps = vec![0.0; n];
    let mut log_coeff = 0.0;
    for (t, lv) in g.terms.iter().zip(&logs) {
        let alpha = (lv - log_g).exp();
        if alpha <= 0.0 {
            continue;
        }
        // ln(c_i / alpha_i) weighted by alpha_i
        log_coeff += alpha * (t.coeff.ln() - alpha.ln());
        for (e, a) in exps.iter_mut().zip(&t.exps) {
            *e += alpha * a;
        }
    }
    Ok(Monomial {
        coeff: log_coeff.exp(),
        exps,
    })
}

/// Options for the log-domain inner solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSolveOptions {
    pub step_tol: f64,
    pub max_iters: usize,
}

impl Default for InnerSolveOptions {
    fn default() -> Self {
        InnerSolveOptions {
            step_tol: 1e-9,
            max_iters: 400,
        }
    }
}

/// Minimizes a smooth convex objective over a box in log space.
/// `f(y, grad)` returns the value and writes the gradient.
pub(crate) fn minimize_box<F>(
    f: &mut F,
    y0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &InnerSolveOptions,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = y0.len();
    let clamp = |y: &mut [f64]| {
        for ((yi, l), h) in y.iter_mut().zip(lo).zip(hi) {
            *yi = yi.max(*l).min(*h);
        }
    };
    let mut y = y0.to_vec();
    clamp(&mut y);
    let mut g = vec![0.0; n];
    let mut fy = f(&y, &mut g);
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut step = if gmax > 0.0 { 1.0 / gmax } else { 1.0 };

    let mut y_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for _ in 0..opts.max_iters {
        let mut t = step;
        let mut accepted = false;
        let mut f_new = fy;
        for _ in 0..60 {
            let mut moved = false;
            let mut decr = 0.0;
            for i in 0..n {
                let v = (y[i] - t * g[i]).max(lo[i]).min(hi[i]);
                if v != y[i] {
                    moved = true;
                }
                decr += g[i] * (v - y[i]);
                y_new[i] = v;
            }
            if !moved {
                // projected point equals current point: stationary
                return (y, fy);
            }
            f_new = f(&y_new, &mut g_new);
            if f_new <= fy + 1e-4 * decr {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        // Barzilai-Borwein step length for the next iteration
        let mut ss = 0.0;
        let mut sy = 0.0;
        let mut dy_max = 0.0f64;
        for i in 0..n {
            let dy = y_new[i] - y[i];
            let dg = g_new[i] - g[i];
            ss += dy * dy;
            sy += dy * dg;
            dy_max = dy_max.max(dy.abs());
        }
        step = if sy > 1e-300 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            t * 2.0
        };
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut g, &mut g_new);
        fy = f_new;
        if dy_max < opts.step_tol {
            break;
        }
    }
    (y, fy)
}

/// A geometric program in generalized form: minimize
/// `sum_i w_i * ln g_i(x)` subject to posynomial constraints `g_j(x) <= 1`
/// and variable bounds. A plain posynomial objective is the single-entry
/// case with weight 1. Negative weights are permitted only on monomial
/// entries (their log is linear, so convexity is preserved).
#[derive(Debug, Clone)]
pub struct GpProblem {
    pub objective: Vec<(f64, Posynomial)>,
    pub constraints: Vec<Posynomial>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GpProblem {
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    /// Product-form objective value `prod_i g_i(x)^{w_i}`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        self.objective
            .iter()
            .map(|(w, g)| w * g.log_value(&y))
            .sum::<f64>()
            .exp()
    }

    fn validate(&self) -> Result<(), GpError> {
        let n = self.num_vars();
        if self.upper.len() != n {
            return Err(GpError::BadProblem("bound length mismatch".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(*l > 0.0 && l <= u) {
                return Err(GpError::Infeasible {
                    violation: f64::INFINITY,
                });
            }
        }
        for (w, g) in &self.objective {
            if g.terms.is_empty() {
                return Err(GpError::BadProblem("empty posynomial in objective".into()));
            }
            if *w < 0.0 && g.terms.len() > 1 {
                return Err(GpError::BadProblem(
                    "negative weight on a non-monomial objective entry".into(),
                ));
            }
            for t in &g.terms {
                if !(t.coeff > 0.0) || t.exps.len() != n {
                    return Err(GpError::BadProblem("bad monomial term".into()));
                }
            }
        }
        for g in &self.constraints {
            for t in &g.terms {
                if !(t.coeff > 0.0) || t.exps.len() != n {
                    return Err(GpError::BadProblem("bad constraint term".into()));
                }
            }
        }
        Ok(())
    }
}

const FEASIBILITY_TOL: f64 = 1e-8;

/// Solves the GP; returns the optimizer in linear (power) units.
pub fn solve_gp(
    problem: &GpProblem,
    start: Option<&[f64]>,
    opts: &InnerSolveOptions,
) -> Result<Vec<f64>, GpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let lo: Vec<f64> = problem.lower.iter().map(|v| v.ln()).collect();
    let hi: Vec<f64> = problem.upper.iter().map(|v| v.ln()).collect();
    let y0: Vec<f64> = match start {
        Some(x) => x.iter().map(|v| v.ln()).collect(),
        None => lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect(),
    };

    let penalties: &[f64] = if problem.constraints.is_empty() {
        &[0.0]
    } else {
        &[1e1, 1e3, 1e5, 1e7, 1e9, 1e11]
    };
    let mut y = y0;
    for &mu in penalties {
        let mut f = |yy: &[f64], grad: &mut [f64]| -> f64 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut val = 0.0;
            for (w, g) in &problem.objective {
                val += w * g.log_value_acc_grad(yy, *w, grad);
            }
            for c in &problem.constraints {
                let mut cg = vec![0.0; n];
                let cv = c.log_value_acc_grad(yy, 1.0, &mut cg);
                if cv > 0.0 {
                    val += mu * cv * cv;
                    for (gk, cgk) in grad.iter_mut().zip(&cg) {
                        *gk += 2.0 * mu * cv * cgk;
                    }
                }
            }
            val
        };
        let (y_opt, _) = minimize_box(&mut f, &y, &lo, &hi, opts);
        y = y_opt;
    }

    let mut violation = 0.0f64;
    for c in &problem.constraints {
        violation = violation.max(c.log_value(&y));
    }
    if violation > FEASIBILITY_TOL {
        return Err(GpError::Infeasible { violation });
    }
    Ok(y.iter().map(|v| v.exp()).collect())
}
