use nalgebra::{DMatrix, DVector};

use super::BarrierSettings;
use crate::error::{Error, Result};

/// A concave objective over a real vector, with first and second derivatives.
///
/// Concavity on the feasible set is the caller's responsibility; the solver
/// only relies on it for its convergence guarantee.
pub trait ConcaveObjective {
    fn dim(&self) -> usize;
    /// Objective value, or `None` outside the objective's domain.
    fn value(&self, x: &DVector<f64>) -> Option<f64>;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// One `weight * ln(coeffs·x + offset)` summand.
#[derive(Debug, Clone, PartialEq)]
pub struct LogAffineTerm {
    pub weight: f64,
    pub coeffs: DVector<f64>,
    pub offset: f64,
}

/// `Σ wᵢ ln(aᵢ·x + cᵢ) + g·x + constant` with nonnegative weights.
///
/// Both the SCA rate surrogate and the Dinkelbach parametric objective have
/// this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LogAffineObjective {
    dim: usize,
    terms: Vec<LogAffineTerm>,
    linear: DVector<f64>,
    constant: f64,
}

impl LogAffineObjective {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            linear: DVector::zeros(dim),
            constant: 0.0,
        }
    }

    pub fn add_log_term(&mut self, weight: f64, coeffs: DVector<f64>, offset: f64) {
        assert_eq!(coeffs.len(), self.dim, "log term dimension mismatch");
        assert!(weight >= 0.0, "negative log weight breaks concavity");
        self.terms.push(LogAffineTerm {
            weight,
            coeffs,
            offset,
        });
    }

    pub fn add_linear(&mut self, g: &DVector<f64>) {
        assert_eq!(g.len(), self.dim, "linear term dimension mismatch");
        self.linear += g;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn terms(&self) -> &[LogAffineTerm] {
        &self.terms
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

impl ConcaveObjective for LogAffineObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = self.linear.dot(x) + self.constant;
        for t in &self.terms {
            let arg = t.coeffs.dot(x) + t.offset;
            if arg <= 0.0 {
                return None;
            }
            v += t.weight * arg.ln();
        }
        Some(v)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.linear.clone();
        for t in &self.terms {
            let arg = t.coeffs.dot(x) + t.offset;
            g.axpy(t.weight / arg, &t.coeffs, 1.0);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let arg = t.coeffs.dot(x) + t.offset;
            h.ger(-t.weight / (arg * arg), &t.coeffs, &t.coeffs, 1.0);
        }
        h
    }
}

/// Maximize a concave objective subject to `A·x ≤ b` and `lower ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct ConcaveProgram<O> {
    pub objective: O,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl<O: ConcaveObjective> ConcaveProgram<O> {
    /// Box-constrained program without linear constraints.
    pub fn new(objective: O, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        let n = objective.dim();
        Self {
            objective,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            lower,
            upper,
        }
    }

    pub fn with_constraints(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.dim();
        if self.lower.len() != n || self.upper.len() != n || self.a.ncols() != n {
            return Err(Error::Dimension(format!(
                "objective has {n} variables, bounds {}/{}, constraint matrix {} columns",
                self.lower.len(),
                self.upper.len(),
                self.a.ncols()
            )));
        }
        if self.a.nrows() != self.b.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} right-hand sides",
                self.a.nrows(),
                self.b.len()
            )));
        }
        for j in 0..n {
            if !(self.lower[j] < self.upper[j]) {
                return Err(Error::Domain(format!(
                    "empty box for variable {j}: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }

    /// True when `x` lies in the box and satisfies every row within `slack`.
    pub fn is_feasible(&self, x: &DVector<f64>, slack: f64) -> bool {
        if x.len() != self.objective.dim() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(&v, (&lo, &hi))| v >= lo - slack && v <= hi + slack);
        in_box && (&self.a * x - &self.b).iter().all(|&r| r <= slack)
    }
}

/// Row-normalized polytope with the box kept separate.
struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Polytope {
    fn from_program<O: ConcaveObjective>(prog: &ConcaveProgram<O>) -> Result<Self> {
        prog.validate()?;
        let n = prog.objective.dim();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..prog.a.nrows() {
            let row = prog.a.row(i);
            let norm = row.norm();
            if norm == 0.0 {
                if prog.b[i] < 0.0 {
                    return Err(Error::Infeasible(format!(
                        "constraint row {i} reads 0 <= {}",
                        prog.b[i]
                    )));
                }
                continue;
            }
            rows.push(row.transpose() / norm);
            rhs.push(prog.b[i] / norm);
        }
        let a = if rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_columns(&rows).transpose()
        };
        Ok(Self {
            a,
            b: DVector::from_vec(rhs),
            lower: prog.lower.clone(),
            upper: prog.upper.clone(),
        })
    }

    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn shrink_into_box(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |j, _| {
            let margin = 1e-6 * (self.upper[j] - self.lower[j]);
            let v = if x[j].is_finite() { x[j] } else { self.lower[j] };
            v.clamp(self.lower[j] + margin, self.upper[j] - margin)
        })
    }

    fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }

    fn box_barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = 0.0;
        for j in 0..self.dim() {
            let lo = x[j] - self.lower[j];
            let hi = self.upper[j] - x[j];
            if lo <= 0.0 || hi <= 0.0 {
                return None;
            }
            v -= lo.ln() + hi.ln();
        }
        Some(v)
    }

    fn add_box_derivs(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        for j in 0..self.dim() {
            let lo = x[j] - self.lower[j];
            let hi = self.upper[j] - x[j];
            g[j] += -1.0 / lo + 1.0 / hi;
            h[(j, j)] += 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
    }
}

enum Centering {
    Centered,
    StoppedEarly,
}

/// Damped Newton centering on a self-concordant barrier function.
fn center<V, D, S>(
    x: &mut DVector<f64>,
    value: V,
    derivs: D,
    stop_early: S,
    newton_tol: f64,
    budget: &mut usize,
    max_budget: usize,
) -> Result<Centering>
where
    V: Fn(&DVector<f64>) -> Option<f64>,
    D: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
    S: Fn(&DVector<f64>) -> bool,
{
    let mut phi = value(x).ok_or_else(|| {
        Error::Domain("barrier centering started outside the domain".to_string())
    })?;
    loop {
        if stop_early(x) {
            return Ok(Centering::StoppedEarly);
        }
        if *budget == 0 {
            return Err(Error::MaxIterations(max_budget));
        }
        *budget -= 1;

        let (g, h) = derivs(x);
        let step = newton_direction(&h, &g);
        let decrement = -g.dot(&step);
        if !decrement.is_finite() || decrement / 2.0 <= newton_tol {
            return Ok(Centering::Centered);
        }

        let slope = g.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-16 {
            let trial = &*x + &step * alpha;
            if let Some(v) = value(&trial) {
                if v < phi && v <= phi + 0.01 * alpha * slope {
                    *x = trial;
                    phi = v;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No representable descent left along the Newton direction.
            return Ok(Centering::Centered);
        }
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        return -chol.solve(g);
    }
    let scale = h.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut tau = 1e-12 * scale;
    loop {
        let shifted = h + DMatrix::identity(h.nrows(), h.ncols()) * tau;
        if let Some(chol) = shifted.cholesky() {
            return -chol.solve(g);
        }
        tau *= 10.0;
    }
}

/// Phase I: find a point strictly inside the polytope, or prove there is none.
///
/// Minimizes the largest (row-normalized) violation `s` over the box. Returns
/// the interior point together with the number of Newton steps used.
fn phase_one(
    poly: &Polytope,
    start: &DVector<f64>,
    tol: f64,
    settings: &BarrierSettings,
    budget: &mut usize,
) -> Result<DVector<f64>> {
    let n = poly.dim();
    let x0 = poly.shrink_into_box(start);
    if poly.rows() == 0 || poly.slacks(&x0).iter().all(|&s| s > 0.0) {
        return Ok(x0);
    }
    let worst = poly.slacks(&x0).iter().fold(f64::NEG_INFINITY, |m, &s| m.max(-s));
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&x0);
    z[n] = worst + 1.0;

    let m = (poly.rows() + 2 * n) as f64;
    let mut t = settings.t0;
    loop {
        let value = |z: &DVector<f64>| -> Option<f64> {
            let x = z.rows(0, n).into_owned();
            let s = z[n];
            let mut v = t * s + poly.box_barrier(&x)?;
            for q in poly.slacks(&x).iter() {
                let q = q + s;
                if q <= 0.0 {
                    return None;
                }
                v -= q.ln();
            }
            Some(v)
        };
        let derivs = |z: &DVector<f64>| {
            let x = z.rows(0, n).into_owned();
            let s = z[n];
            let slack = poly.slacks(&x);
            let mut g = DVector::zeros(n + 1);
            let mut h = DMatrix::zeros(n + 1, n + 1);
            g[n] = t;
            for i in 0..poly.rows() {
                let q = slack[i] + s;
                let a = poly.a.row(i);
                for j in 0..n {
                    g[j] += a[j] / q;
                    h[(j, n)] -= a[j] / (q * q);
                    h[(n, j)] -= a[j] / (q * q);
                    for k in 0..n {
                        h[(j, k)] += a[j] * a[k] / (q * q);
                    }
                }
                g[n] -= 1.0 / q;
                h[(n, n)] += 1.0 / (q * q);
            }
            let mut gx = DVector::zeros(n);
            let mut hx = DMatrix::zeros(n, n);
            poly.add_box_derivs(&x, &mut gx, &mut hx);
            for j in 0..n {
                g[j] += gx[j];
                h[(j, j)] += hx[(j, j)];
            }
            (g, h)
        };
        let strictly_inside = |z: &DVector<f64>| {
            let x = z.rows(0, n).into_owned();
            poly.slacks(&x).iter().all(|&s| s > 0.0)
        };
        let outcome = center(
            &mut z,
            value,
            derivs,
            strictly_inside,
            settings.newton_tol,
            budget,
            settings.max_newton_steps,
        )?;
        if let Centering::StoppedEarly = outcome {
            return Ok(z.rows(0, n).into_owned());
        }
        if m / t < tol.min(1e-10) {
            return Err(Error::Infeasible(format!(
                "linear constraints have no strictly feasible point (max violation {:.3e})",
                z[n]
            )));
        }
        t *= settings.mu;
    }
}

/// Find a point strictly inside `{A·x ≤ b, lower ≤ x ≤ upper}`, starting the
/// search from `start`. Equivalent to maximizing the minimum constraint slack
/// until it turns positive.
pub fn find_interior_point<O: ConcaveObjective>(
    prog: &ConcaveProgram<O>,
    start: &DVector<f64>,
    settings: &BarrierSettings,
) -> Result<DVector<f64>> {
    let poly = Polytope::from_program(prog)?;
    if start.len() != poly.dim() {
        return Err(Error::Dimension(format!(
            "start has length {}, program has {} variables",
            start.len(),
            poly.dim()
        )));
    }
    let mut budget = settings.max_newton_steps;
    phase_one(&poly, start, 1e-10, settings, &mut budget)
}

/// Maximize a concave program with the default barrier settings.
pub fn solve_concave_linconstr<O: ConcaveObjective>(
    prog: &ConcaveProgram<O>,
    start: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    solve_concave_linconstr_with(prog, start, tol, &BarrierSettings::default())
}

/// Log-barrier interior-point method. Stops once the duality-gap bound
/// `m / t` falls below `tol`, where `m` counts linear rows plus box sides.
/// If `start` is feasible and scores at least as well as the barrier
/// solution, `start` is returned.
pub fn solve_concave_linconstr_with<O: ConcaveObjective>(
    prog: &ConcaveProgram<O>,
    start: &DVector<f64>,
    tol: f64,
    settings: &BarrierSettings,
) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let poly = Polytope::from_program(prog)?;
    let n = poly.dim();
    if start.len() != n {
        return Err(Error::Dimension(format!(
            "start has length {}, program has {n} variables",
            start.len()
        )));
    }
    let mut budget = settings.max_newton_steps;
    let mut x = phase_one(&poly, start, tol, settings, &mut budget)?;
    if prog.objective.value(&x).is_none() {
        return Err(Error::Domain(
            "objective undefined at the interior starting point".to_string(),
        ));
    }

    let obj = &prog.objective;
    let m = (poly.rows() + 2 * n) as f64;
    let mut t = settings.t0;
    loop {
        let value = |x: &DVector<f64>| -> Option<f64> {
            let mut v = -t * obj.value(x)? + poly.box_barrier(x)?;
            for s in poly.slacks(x).iter() {
                if *s <= 0.0 {
                    return None;
                }
                v -= s.ln();
            }
            Some(v)
        };
        let derivs = |x: &DVector<f64>| {
            let mut g = -obj.gradient(x) * t;
            let mut h = -obj.hessian(x) * t;
            let slack = poly.slacks(x);
            for i in 0..poly.rows() {
                let a = poly.a.row(i).transpose();
                g.axpy(1.0 / slack[i], &a, 1.0);
                h.ger(1.0 / (slack[i] * slack[i]), &a, &a, 1.0);
            }
            poly.add_box_derivs(x, &mut g, &mut h);
            (g, h)
        };
        center(
            &mut x,
            value,
            derivs,
            |_| false,
            settings.newton_tol,
            &mut budget,
            settings.max_newton_steps,
        )?;
        if m / t < tol {
            break;
        }
        t *= settings.mu;
    }

    if prog.is_feasible(start, 1e-12) {
        if let (Some(f_start), Some(f_x)) = (obj.value(start), obj.value(&x)) {
            if f_start > f_x {
                return Ok(start.clone());
            }
        }
    }
    Ok(x)
}
