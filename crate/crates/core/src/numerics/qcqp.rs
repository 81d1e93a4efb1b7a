use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{BarrierSettings, CMat, CVec};
use crate::error::{Error, Result};

/// Concave quadratic over a complex vector `v`, written against a shared
/// dictionary of vectors `ω_l`:
///
/// ```text
/// f(v) = −Σ w_l |ω_lᴴ v|² + 2 Re(vᴴ e) + c,    e = Σ κ_l ω_l,   w_l ≥ 0
/// ```
///
/// so the quadratic matrix is `B = Σ w_l ω_l ω_lᴴ`. Indices may repeat; their
/// contributions add up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConcaveQuadratic {
    pub quad: Vec<(usize, f64)>,
    pub linear: Vec<(usize, Complex64)>,
    pub constant: f64,
}

impl ConcaveQuadratic {
    /// Dense `B` for a given dictionary.
    pub fn b_matrix(&self, dictionary: &[CVec], dim: usize) -> CMat {
        let mut b = CMat::zeros(dim, dim);
        for &(l, w) in &self.quad {
            let om = &dictionary[l];
            b += om * om.adjoint() * Complex64::new(w, 0.0);
        }
        b
    }

    /// Dense `e` for a given dictionary.
    pub fn e_vector(&self, dictionary: &[CVec], dim: usize) -> CVec {
        let mut e = CVec::zeros(dim);
        for &(l, k) in &self.linear {
            e += &dictionary[l] * k;
        }
        e
    }

    /// Direct evaluation `−vᴴBv + 2Re(vᴴe) + c`.
    pub fn evaluate(&self, dictionary: &[CVec], v: &CVec) -> f64 {
        let mut f = self.constant;
        for &(l, w) in &self.quad {
            f -= w * dictionary[l].dotc(v).norm_sqr();
        }
        for &(l, k) in &self.linear {
            // vᴴ(κω) = κ·conj(ωᴴv)
            f += 2.0 * (k * dictionary[l].dotc(v).conj()).re;
        }
        f
    }
}

/// `function(v) ≥ floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct QcqpConstraint {
    pub function: ConcaveQuadratic,
    pub floor: f64,
}

/// Maximize a concave quadratic over the unit polydisc `|v_m|² ≤ 1`,
/// subject to concave quadratic lower-bound constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProgram {
    pub dim: usize,
    pub dictionary: Vec<CVec>,
    pub objective: ConcaveQuadratic,
    pub constraints: Vec<QcqpConstraint>,
}

impl QcqpProgram {
    /// Build a program from dense Hermitian PSD matrices by eigendecomposition.
    ///
    /// `constraints` holds `(B, e, c, floor)` tuples. Eigenvalues below
    /// `-PSD_FLOOR` are rejected; tiny negative ones are dropped.
    pub fn from_dense(
        b: &CMat,
        e: &CVec,
        c: f64,
        constraints: &[(CMat, CVec, f64, f64)],
    ) -> Result<Self> {
        let dim = e.len();
        let mut dictionary = Vec::new();
        let mut encode = |b: &CMat, e: &CVec, c: f64| -> Result<ConcaveQuadratic> {
            if b.nrows() != dim || b.ncols() != dim || e.len() != dim {
                return Err(Error::Dimension(format!(
                    "expected {dim}x{dim} matrix and length-{dim} vector"
                )));
            }
            if !super::eig_floor_check(b) {
                return Err(Error::Domain("quadratic matrix is not PSD".to_string()));
            }
            let herm = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = herm.symmetric_eigen();
            let mut f = ConcaveQuadratic {
                constant: c,
                ..Default::default()
            };
            for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda > super::PSD_FLOOR {
                    f.quad.push((dictionary.len(), lambda));
                    dictionary.push(eig.eigenvectors.column(i).into_owned());
                }
            }
            if e.iter().any(|z| z.norm_sqr() > 0.0) {
                f.linear.push((dictionary.len(), Complex64::new(1.0, 0.0)));
                dictionary.push(e.clone());
            }
            Ok(f)
        };
        let objective = encode(b, e, c)?;
        let mut cons = Vec::with_capacity(constraints.len());
        for (bj, ej, cj, floor) in constraints {
            cons.push(QcqpConstraint {
                function: encode(bj, ej, *cj)?,
                floor: *floor,
            });
        }
        Ok(Self {
            dim,
            dictionary,
            objective,
            constraints: cons,
        })
    }

    pub fn objective_value(&self, v: &CVec) -> f64 {
        self.objective.evaluate(&self.dictionary, v)
    }

    /// Smallest `function − floor` over the SINR-type constraints
    /// (`+∞` when there are none).
    pub fn min_constraint_slack(&self, v: &CVec) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.function.evaluate(&self.dictionary, v) - c.floor)
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Dimension("QCQP with zero variables".to_string()));
        }
        for (l, om) in self.dictionary.iter().enumerate() {
            if om.len() != self.dim {
                return Err(Error::Dimension(format!(
                    "dictionary vector {l} has length {}, expected {}",
                    om.len(),
                    self.dim
                )));
            }
        }
        let check = |f: &ConcaveQuadratic| -> Result<()> {
            for &(l, w) in &f.quad {
                if l >= self.dictionary.len() {
                    return Err(Error::Dimension(format!("dictionary index {l} out of range")));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Domain(format!("quadratic weight {w} is not PSD")));
                }
            }
            for &(l, k) in &f.linear {
                if l >= self.dictionary.len() {
                    return Err(Error::Dimension(format!("dictionary index {l} out of range")));
                }
                if !k.re.is_finite() || !k.im.is_finite() {
                    return Err(Error::Domain("non-finite linear coefficient".to_string()));
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for c in &self.constraints {
            check(&c.function)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub theta: CVec,
    pub objective: f64,
    pub newton_steps: usize,
}

/// Solve with default barrier settings, returning only the optimizer.
pub fn solve_qcqp(prog: &QcqpProgram, start: &CVec, tol: f64) -> Result<CVec> {
    solve_qcqp_with(prog, start, tol, &BarrierSettings::default()).map(|s| s.theta)
}

/// Log-barrier interior-point solve on the real `2M`-dimensional embedding.
///
/// Runs a phase-I slack minimization when `start` is not strictly feasible
/// for the quadratic constraints, then centers with `t ← μ·t` until
/// `(M + #constraints) / t < tol`. If `start` is feasible and scores at least
/// as well as the barrier solution, `start` is returned unchanged.
pub fn solve_qcqp_with(
    prog: &QcqpProgram,
    start: &CVec,
    tol: f64,
    settings: &BarrierSettings,
) -> Result<QcqpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    prog.validate()?;
    if start.len() != prog.dim {
        return Err(Error::Dimension(format!(
            "start has length {}, program has {} elements",
            start.len(),
            prog.dim
        )));
    }
    let sys = RealForm::new(prog);
    let mut budget = Budget::new(settings.max_newton_steps);
    let mut x = sys.interior_start(start);

    if sys.min_slack(&sys.project(&x)) <= 0.0 {
        let (px, viol) = sys.phase_one(x, true, settings, &mut budget)?;
        if viol >= 0.0 {
            return Err(Error::Infeasible(format!(
                "quadratic constraints unsatisfiable on the unit polydisc (max violation {viol:.3e})"
            )));
        }
        x = px;
    }
    x = sys.barrier(x, tol, settings, &mut budget)?;

    let mut theta = sys.to_complex(&x);
    let mut objective = prog.objective_value(&theta);
    let start_ok = start.iter().all(|z| z.norm_sqr() <= 1.0 + 1e-12)
        && prog.min_constraint_slack(start) >= 0.0;
    if start_ok {
        let f_start = prog.objective_value(start);
        if f_start > objective {
            theta = start.clone();
            objective = f_start;
        }
    }
    Ok(QcqpSolution {
        theta,
        objective,
        newton_steps: budget.used(),
    })
}

/// Minimize the largest constraint violation `max_j (floor_j − f_j(v))` over
/// the unit polydisc. Returns the minimizer and the attained value; a
/// negative value means the point is strictly feasible.
pub fn minimize_max_violation(
    prog: &QcqpProgram,
    start: &CVec,
    settings: &BarrierSettings,
) -> Result<(CVec, f64)> {
    prog.validate()?;
    if start.len() != prog.dim {
        return Err(Error::Dimension(format!(
            "start has length {}, program has {} elements",
            start.len(),
            prog.dim
        )));
    }
    let sys = RealForm::new(prog);
    let mut budget = Budget::new(settings.max_newton_steps);
    let x = sys.interior_start(start);
    if prog.constraints.is_empty() {
        return Ok((sys.to_complex(&x), f64::NEG_INFINITY));
    }
    let (x, viol) = sys.phase_one(x, false, settings, &mut budget)?;
    Ok((sys.to_complex(&x), viol))
}

struct Budget {
    left: usize,
    max: usize,
}

impl Budget {
    fn new(max: usize) -> Self {
        Self { left: max, max }
    }

    fn take(&mut self) -> Result<()> {
        if self.left == 0 {
            return Err(Error::MaxIterations(self.max));
        }
        self.left -= 1;
        Ok(())
    }

    fn used(&self) -> usize {
        self.max - self.left
    }
}

/// A quadratic `−πᵀWπ + 2kᵀπ + c` in projected coordinates `π = Vᵀx`.
struct ProjQuad {
    w: Vec<f64>,
    k: DVector<f64>,
    c: f64,
}

impl ProjQuad {
    fn new(f: &ConcaveQuadratic, dict_len: usize) -> Self {
        let mut w = vec![0.0; 2 * dict_len];
        let mut k = DVector::zeros(2 * dict_len);
        for &(l, wl) in &f.quad {
            w[2 * l] += wl;
            w[2 * l + 1] += wl;
        }
        for &(l, kl) in &f.linear {
            k[2 * l] += kl.re;
            k[2 * l + 1] += kl.im;
        }
        Self { w, k, c: f.constant }
    }

    fn value(&self, pi: &DVector<f64>) -> f64 {
        let mut f = self.c;
        for i in 0..pi.len() {
            f += -self.w[i] * pi[i] * pi[i] + 2.0 * self.k[i] * pi[i];
        }
        f
    }

    fn grad(&self, pi: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(pi.len(), |i, _| 2.0 * (self.k[i] - self.w[i] * pi[i]))
    }
}

/// Real embedding: `x = (Re v₁, Im v₁, Re v₂, Im v₂, …)`, dictionary columns
/// `(ω_l, jω_l)` interleaved the same way, so `Vᵀx = (Re ω_lᴴv, Im ω_lᴴv)_l`.
struct RealForm {
    m: usize,
    v: DMatrix<f64>,
    objective: ProjQuad,
    constraints: Vec<(ProjQuad, f64)>,
}

const BALL_MARGIN: f64 = 1e-7;

impl RealForm {
    fn new(prog: &QcqpProgram) -> Self {
        let m = prog.dim;
        let l = prog.dictionary.len();
        let mut v = DMatrix::zeros(2 * m, 2 * l);
        for (j, om) in prog.dictionary.iter().enumerate() {
            for (i, z) in om.iter().enumerate() {
                v[(2 * i, 2 * j)] = z.re;
                v[(2 * i + 1, 2 * j)] = z.im;
                // jω = −Im ω + j Re ω
                v[(2 * i, 2 * j + 1)] = -z.im;
                v[(2 * i + 1, 2 * j + 1)] = z.re;
            }
        }
        Self {
            m,
            v,
            objective: ProjQuad::new(&prog.objective, l),
            constraints: prog
                .constraints
                .iter()
                .map(|c| (ProjQuad::new(&c.function, l), c.floor))
                .collect(),
        }
    }

    fn interior_start(&self, start: &CVec) -> DVector<f64> {
        let mut x = DVector::zeros(2 * self.m);
        for (i, z) in start.iter().enumerate() {
            let mut z = if z.re.is_finite() && z.im.is_finite() {
                *z
            } else {
                Complex64::new(0.0, 0.0)
            };
            let r = z.norm();
            if r > 1.0 - BALL_MARGIN {
                z *= (1.0 - BALL_MARGIN) / r;
            }
            x[2 * i] = z.re;
            x[2 * i + 1] = z.im;
        }
        x
    }

    fn to_complex(&self, x: &DVector<f64>) -> CVec {
        CVec::from_fn(self.m, |i, _| Complex64::new(x[2 * i], x[2 * i + 1]))
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.v.tr_mul(x)
    }

    fn min_slack(&self, pi: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|(q, floor)| q.value(pi) - floor)
            .fold(f64::INFINITY, f64::min)
    }

    fn ball_barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let mut s = 0.0;
        for i in 0..self.m {
            let q = 1.0 - x[2 * i] * x[2 * i] - x[2 * i + 1] * x[2 * i + 1];
            if q <= 0.0 {
                return None;
            }
            s -= q.ln();
        }
        Some(s)
    }

    /// Gradient and 2×2 Hessian blocks of `−Σ ln(1 − |v_m|²)`.
    fn ball_derivs(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<[f64; 3]>) {
        let mut g = DVector::zeros(2 * self.m);
        let mut blocks = Vec::with_capacity(self.m);
        for i in 0..self.m {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            let q = 1.0 - a * a - b * b;
            g[2 * i] = 2.0 * a / q;
            g[2 * i + 1] = 2.0 * b / q;
            let alpha = 2.0 / q;
            let beta = 4.0 / (q * q);
            blocks.push([alpha + beta * a * a, beta * a * b, alpha + beta * b * b]);
        }
        (g, blocks)
    }

    /// Main barrier `−t f₀ − Σ ln(f_j − floor_j) − Σ ln(1 − |v_m|²)`.
    fn barrier(
        &self,
        mut x: DVector<f64>,
        tol: f64,
        settings: &BarrierSettings,
        budget: &mut Budget,
    ) -> Result<DVector<f64>> {
        let count = (self.m + self.constraints.len()) as f64;
        let mut t = settings.t0;
        loop {
            let value = |x: &DVector<f64>, pi: &DVector<f64>| -> Option<f64> {
                let mut phi = -t * self.objective.value(pi) + self.ball_barrier(x)?;
                for (q, floor) in &self.constraints {
                    let s = q.value(pi) - floor;
                    if s <= 0.0 {
                        return None;
                    }
                    phi -= s.ln();
                }
                Some(phi)
            };
            loop {
                budget.take()?;
                let pi = self.project(&x);
                let (ball_g, blocks) = self.ball_derivs(&x);
                let dim = pi.len();
                let mut g_pi = -self.objective.grad(&pi) * t;
                let mut c = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    c[(i, i)] += 2.0 * t * self.objective.w[i];
                }
                for (q, floor) in &self.constraints {
                    let s = q.value(&pi) - floor;
                    let gq = q.grad(&pi);
                    g_pi.axpy(-1.0 / s, &gq, 1.0);
                    c.ger(1.0 / (s * s), &gq, &gq, 1.0);
                    for i in 0..dim {
                        c[(i, i)] += 2.0 * q.w[i] / s;
                    }
                }
                let grad = &self.v * &g_pi + ball_g;
                let solver = WoodburySystem::new(&self.v, blocks, &c);
                let step = -solver.solve(&grad);
                let decrement = -grad.dot(&step);
                if !decrement.is_finite() || decrement / 2.0 <= settings.newton_tol {
                    break;
                }
                let phi0 = match value(&x, &pi) {
                    Some(v) => v,
                    None => return Err(Error::Domain("barrier left its domain".to_string())),
                };
                let dpi = self.project(&step);
                if !line_search(&mut x, &step, &pi, &dpi, phi0, -decrement, &value) {
                    break;
                }
            }
            if count / t < tol {
                return Ok(x);
            }
            t *= settings.mu;
        }
    }

    /// Phase I over `(x, s)`: minimize `s` s.t. `floor_j − f_j(v) ≤ s`, with
    /// the ball constraints kept as hard barriers. Returns the point and the
    /// largest violation there.
    fn phase_one(
        &self,
        x0: DVector<f64>,
        stop_when_feasible: bool,
        settings: &BarrierSettings,
        budget: &mut Budget,
    ) -> Result<(DVector<f64>, f64)> {
        let mut x = x0;
        let viol = |pi: &DVector<f64>| -self.min_slack(pi);
        let mut s = viol(&self.project(&x)) + 1.0;
        let count = (self.m + self.constraints.len()) as f64;
        let mut t = settings.t0;
        loop {
            let value = |x: &DVector<f64>, pi: &DVector<f64>, s: f64| -> Option<f64> {
                let mut phi = t * s + self.ball_barrier(x)?;
                for (q, floor) in &self.constraints {
                    let r = s + q.value(pi) - floor;
                    if r <= 0.0 {
                        return None;
                    }
                    phi -= r.ln();
                }
                Some(phi)
            };
            loop {
                let pi = self.project(&x);
                if stop_when_feasible && viol(&pi) < 0.0 {
                    return Ok((x, viol(&pi)));
                }
                budget.take()?;
                let (ball_g, blocks) = self.ball_derivs(&x);
                let dim = pi.len();
                let mut g_pi = DVector::zeros(dim);
                let mut h_pi = DVector::zeros(dim);
                let mut g_s = t;
                let mut h_ss = 0.0;
                let mut c = DMatrix::zeros(dim, dim);
                for (q, floor) in &self.constraints {
                    let r = s + q.value(&pi) - floor;
                    let gq = q.grad(&pi);
                    g_pi.axpy(-1.0 / r, &gq, 1.0);
                    h_pi.axpy(1.0 / (r * r), &gq, 1.0);
                    g_s -= 1.0 / r;
                    h_ss += 1.0 / (r * r);
                    c.ger(1.0 / (r * r), &gq, &gq, 1.0);
                    for i in 0..dim {
                        c[(i, i)] += 2.0 * q.w[i] / r;
                    }
                }
                let g_x = &self.v * &g_pi + ball_g;
                let h_x = &self.v * &h_pi;
                let solver = WoodburySystem::new(&self.v, blocks, &c);
                // Bordered system [[Hxx, h], [hᵀ, hss]] [dx; ds] = −[gx; gs].
                let y1 = solver.solve(&g_x);
                let y2 = solver.solve(&h_x);
                let schur = h_ss - h_x.dot(&y2);
                let ds = if schur > 0.0 {
                    -(g_s - h_x.dot(&y1)) / schur
                } else {
                    0.0
                };
                let dx = -(y1 + &y2 * ds);
                let decrement = -(g_x.dot(&dx) + g_s * ds);
                if !decrement.is_finite() || decrement / 2.0 <= settings.newton_tol {
                    break;
                }
                let phi0 = match value(&x, &pi, s) {
                    Some(v) => v,
                    None => return Err(Error::Domain("phase I left its domain".to_string())),
                };
                let dpi = self.project(&dx);
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-16 {
                    let xt = &x + &dx * alpha;
                    let pit = &pi + &dpi * alpha;
                    let st = s + ds * alpha;
                    if let Some(v) = value(&xt, &pit, st) {
                        if v < phi0 && v <= phi0 - 0.01 * alpha * decrement {
                            x = xt;
                            s = st;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if count / t < 1e-10 {
                let v = viol(&self.project(&x));
                return Ok((x, v));
            }
            t *= settings.mu;
        }
    }
}

/// Backtracking Armijo search; `pi`/`dpi` carry the projected point and step
/// so each trial costs `O(M + L)`.
fn line_search<F>(
    x: &mut DVector<f64>,
    step: &DVector<f64>,
    pi: &DVector<f64>,
    dpi: &DVector<f64>,
    phi0: f64,
    slope: f64,
    value: &F,
) -> bool
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> Option<f64>,
{
    let mut alpha = 1.0;
    while alpha > 1e-16 {
        let xt = &*x + step * alpha;
        let pit = pi + dpi * alpha;
        if let Some(v) = value(&xt, &pit) {
            if v < phi0 && v <= phi0 + 0.01 * alpha * slope {
                *x = xt;
                return true;
            }
        }
        alpha *= 0.5;
    }
    false
}

/// Solves `(D + V C Vᵀ) x = r` where `D` is block diagonal with 2×2 blocks
/// and `C` is a small PSD matrix, via the Woodbury identity on `C = F Fᵀ`
/// followed by one step of iterative refinement.
struct WoodburySystem<'a> {
    v: &'a DMatrix<f64>,
    blocks: Vec<[f64; 3]>,
    inv_blocks: Vec<[f64; 3]>,
    c: &'a DMatrix<f64>,
    dinv_v: DMatrix<f64>,
    f: DMatrix<f64>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> WoodburySystem<'a> {
    fn new(v: &'a DMatrix<f64>, blocks: Vec<[f64; 3]>, c: &'a DMatrix<f64>) -> Self {
        let inv_blocks: Vec<[f64; 3]> = blocks
            .iter()
            .map(|&[a, b, d]| {
                let det = a * d - b * b;
                [d / det, -b / det, a / det]
            })
            .collect();
        let mut dinv_v = v.clone();
        apply_blocks(&inv_blocks, &mut dinv_v);

        let eig = c.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l));
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > top * 1e-15 && eig.eigenvalues[i] > 0.0)
            .collect();
        let mut f = DMatrix::zeros(c.nrows(), keep.len());
        for (col, &i) in keep.iter().enumerate() {
            let scale = eig.eigenvalues[i].sqrt();
            f.set_column(col, &(eig.eigenvectors.column(i) * scale));
        }
        let chol = if keep.is_empty() {
            None
        } else {
            let k = v.tr_mul(&dinv_v);
            let s = DMatrix::identity(keep.len(), keep.len()) + f.tr_mul(&(&k * &f));
            s.cholesky()
        };
        Self {
            v,
            blocks,
            inv_blocks,
            c,
            dinv_v,
            f,
            chol,
        }
    }

    fn solve_once(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut y = r.clone();
        apply_blocks_vec(&self.inv_blocks, &mut y);
        if let Some(chol) = &self.chol {
            let w = self.f.tr_mul(&self.v.tr_mul(&y));
            let z = chol.solve(&w);
            y -= &self.dinv_v * (&self.f * z);
        }
        y
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        apply_blocks_vec(&self.blocks, &mut out);
        out += self.v * (self.c * self.v.tr_mul(x));
        out
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_once(r);
        let residual = r - self.apply(&x);
        x += self.solve_once(&residual);
        x
    }
}

fn apply_blocks(blocks: &[[f64; 3]], m: &mut DMatrix<f64>) {
    for (i, &[a, b, d]) in blocks.iter().enumerate() {
        for col in 0..m.ncols() {
            let (x0, x1) = (m[(2 * i, col)], m[(2 * i + 1, col)]);
            m[(2 * i, col)] = a * x0 + b * x1;
            m[(2 * i + 1, col)] = b * x0 + d * x1;
        }
    }
}

fn apply_blocks_vec(blocks: &[[f64; 3]], x: &mut DVector<f64>) {
    for (i, &[a, b, d]) in blocks.iter().enumerate() {
        let (x0, x1) = (x[2 * i], x[2 * i + 1]);
        x[2 * i] = a * x0 + b * x1;
        x[2 * i + 1] = b * x0 + d * x1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_objective_saturates_polydisc() {
        let e = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let prog = QcqpProgram::from_dense(&CMat::zeros(2, 2), &e, 0.0, &[]).unwrap();
        let v = solve_qcqp(&prog, &CVec::zeros(2), 1e-9).unwrap();
        for z in v.iter() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-6, "{v}");
        }
    }

    #[test]
    fn pure_concave_quadratic_goes_to_zero() {
        let prog =
            QcqpProgram::from_dense(&CMat::identity(1, 1), &CVec::zeros(1), 0.0, &[]).unwrap();
        let v = solve_qcqp(&prog, &CVec::from_element(1, c(0.5, 0.5)), 1e-9).unwrap();
        assert!(v[0].norm() < 1e-6, "{v}");
    }

    #[test]
    fn interior_quadratic_optimum() {
        // max −|v|² + 2Re(v* 0.4j)  ->  v = 0.4j
        let e = CVec::from_element(1, c(0.0, 0.4));
        let prog = QcqpProgram::from_dense(&CMat::identity(1, 1), &e, 0.0, &[]).unwrap();
        let v = solve_qcqp(&prog, &CVec::zeros(1), 1e-10).unwrap();
        assert!((v[0] - c(0.0, 0.4)).norm() < 1e-6, "{v}");
    }

    #[test]
    fn constraint_restricts_phase() {
        // maximize Re(v₁ + v₂) subject to Re(v₁) − Re(v₂) ≥ 0.5  (linear
        // constraint: 2Re(vᴴe) with e = (0.5, −0.5)).
        let e0 = CVec::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)]);
        let e1 = CVec::from_vec(vec![c(0.5, 0.0), c(-0.5, 0.0)]);
        let prog = QcqpProgram::from_dense(
            &CMat::zeros(2, 2),
            &e0,
            0.0,
            &[(CMat::zeros(2, 2), e1, 0.0, 0.5)],
        )
        .unwrap();
        let v = solve_qcqp(&prog, &CVec::zeros(2), 1e-10).unwrap();
        // Optimum: v₁ = 1, Re v₂ = 0.5, |v₂| = 1 → objective 1.5
        assert!((prog.objective_value(&v) - 1.5).abs() < 1e-6, "{v}");
        assert!(prog.min_constraint_slack(&v) >= -1e-9);
    }

    #[test]
    fn infeasible_constraint_detected() {
        // Re(v₁) ≥ 2 cannot hold on the unit disc.
        let e1 = CVec::from_element(1, c(1.0, 0.0));
        let prog = QcqpProgram::from_dense(
            &CMat::zeros(1, 1),
            &CVec::zeros(1),
            0.0,
            &[(CMat::zeros(1, 1), e1, 0.0, 4.0)],
        )
        .unwrap();
        let r = solve_qcqp(&prog, &CVec::zeros(1), 1e-8);
        assert!(matches!(r, Err(Error::Infeasible(_))), "{r:?}");
        let (_, viol) =
            minimize_max_violation(&prog, &CVec::zeros(1), &BarrierSettings::default()).unwrap();
        assert!((viol - 2.0).abs() < 1e-4, "{viol}");
    }

    #[test]
    fn dense_roundtrip_matches_evaluation() {
        let w = CVec::from_vec(vec![c(0.3, -1.0), c(1.5, 0.2), c(-0.4, 0.9)]);
        let b = &w * w.adjoint();
        let e = CVec::from_vec(vec![c(0.1, 0.2), c(-0.3, 0.0), c(0.0, 1.0)]);
        let prog = QcqpProgram::from_dense(&b, &e, 0.7, &[]).unwrap();
        let v = CVec::from_vec(vec![c(0.2, 0.1), c(-0.5, 0.3), c(0.9, -0.1)]);
        let direct = -(v.adjoint() * &b * &v)[(0, 0)].re + 2.0 * v.dotc(&e).re + 0.7;
        assert!((prog.objective_value(&v) - direct).abs() < 1e-12);
    }

    #[test]
    fn non_psd_input_rejected() {
        let b = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(QcqpProgram::from_dense(&b, &CVec::zeros(2), 0.0, &[]).is_err());
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        let m = 5;
        let dict: Vec<CVec> = (0..3)
            .map(|l| CVec::from_fn(m, |i, _| c((i + l) as f64 * 0.3 - 0.5, (i * l) as f64 * 0.1)))
            .collect();
        let prog = QcqpProgram {
            dim: m,
            dictionary: dict,
            objective: ConcaveQuadratic::default(),
            constraints: vec![],
        };
        let sys = RealForm::new(&prog);
        let x = DVector::from_fn(2 * m, |i, _| 0.1 * (i as f64) - 0.4);
        let (_, blocks) = sys.ball_derivs(&x);
        let mut cm = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.2);
        cm = &cm * cm.transpose() * 1e4;
        let ws = WoodburySystem::new(&sys.v, blocks, &cm);
        let r = DVector::from_fn(2 * m, |i, _| (i as f64).sin());
        let x = ws.solve(&r);
        let res = (&r - ws.apply(&x)).norm() / r.norm();
        assert!(res < 1e-10, "{res}");
    }
}
