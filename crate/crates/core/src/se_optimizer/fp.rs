//! Reflection update at fixed powers.
//!
//! The sum of logs is decoupled with auxiliary SINR variables `η`
//! (`ln(1+γ) = max_η ln(1+η) − η + (1+η)γ/(1+γ)`), the remaining ratios are
//! linearized with quadratic-transform variables `y`, and each SINR floor is
//! replaced by its own quadratic-transform minorant with variables `x`.
//! What is left is a concave QCQP over `v = conj(θ)`.
//!
//! All quantities use the noise-normalized channels of [`LinkModel`], so the
//! auxiliary variables are those of the normalized problem.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::Result;
use crate::numerics::{
    minimize_max_violation, solve_qcqp_with, BarrierSettings, CVec, ConcaveQuadratic,
    QcqpConstraint, QcqpProgram,
};
use crate::pairing::Pairing;

use super::model::LinkModel;
use super::Allocation;

/// Auxiliary variables of the transformed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub eta_d: Vec<f64>,
    pub eta_c: Vec<f64>,
    pub y_d: Vec<Complex64>,
    pub y_c: Vec<Complex64>,
    pub x_d: Vec<Complex64>,
    pub x_c: Vec<Complex64>,
}

/// `η = γ` at the current point.
pub fn eta_update(model: &LinkModel, alloc: &Allocation) -> (Vec<f64>, Vec<f64>) {
    model.sinrs(&alloc.p, &model.gains(&alloc.theta))
}

/// `y = sqrt((1+η)P)·a / (P|a|² + I)` for every link.
pub fn y_update(
    model: &LinkModel,
    alloc: &Allocation,
    eta_d: &[f64],
    eta_c: &[f64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let g = model.gains(&alloc.theta);
    let p = &alloc.p;
    let y_d = (0..model.d2d_count())
        .map(|n| {
            let total = p[n] * g.dd[n].norm_sqr() + model.interference_d2d(n, p, &g);
            g.dd[n] * ((1.0 + eta_d[n]) * p[n]).sqrt() / total
        })
        .collect();
    let y_c = (0..model.cu_count())
        .map(|k| {
            let pk = p[model.cu_index(k)];
            let total = pk * g.cc[k].norm_sqr() + model.interference_cu(k, p, &g);
            g.cc[k] * ((1.0 + eta_c[k]) * pk).sqrt() / total
        })
        .collect();
    (y_d, y_c)
}

/// `x = sqrt(P)·a / I` for every link.
pub fn x_update(model: &LinkModel, alloc: &Allocation) -> (Vec<Complex64>, Vec<Complex64>) {
    let g = model.gains(&alloc.theta);
    let p = &alloc.p;
    let x_d = (0..model.d2d_count())
        .map(|n| g.dd[n] * p[n].sqrt() / model.interference_d2d(n, p, &g))
        .collect();
    let x_c = (0..model.cu_count())
        .map(|k| g.cc[k] * p[model.cu_index(k)].sqrt() / model.interference_cu(k, p, &g))
        .collect();
    (x_d, x_c)
}

pub fn fp_state(model: &LinkModel, alloc: &Allocation) -> FpState {
    let (eta_d, eta_c) = eta_update(model, alloc);
    let (y_d, y_c) = y_update(model, alloc, &eta_d, &eta_c);
    let (x_d, x_c) = x_update(model, alloc);
    FpState {
        eta_d,
        eta_c,
        y_d,
        y_c,
        x_d,
        x_c,
    }
}

/// Decoupled objective `Σ ln(1+η) − η + (1+η)γ/(1+γ)`, nats.
pub fn ra_value(model: &LinkModel, alloc: &Allocation, eta_d: &[f64], eta_c: &[f64]) -> f64 {
    let (gd, gc) = eta_update(model, alloc);
    let term = |e: f64, s: f64| e.ln_1p() - e + (1.0 + e) * s / (1.0 + s);
    gd.iter().zip(eta_d).map(|(s, e)| term(*e, *s)).sum::<f64>()
        + gc.iter().zip(eta_c).map(|(s, e)| term(*e, *s)).sum::<f64>()
}

/// Ratio part `Σ (1+η)γ/(1+γ)`.
pub fn rb_ratio(model: &LinkModel, alloc: &Allocation, eta_d: &[f64], eta_c: &[f64]) -> f64 {
    let (gd, gc) = eta_update(model, alloc);
    let term = |e: f64, s: f64| (1.0 + e) * s / (1.0 + s);
    gd.iter().zip(eta_d).map(|(s, e)| term(*e, *s)).sum::<f64>()
        + gc.iter().zip(eta_c).map(|(s, e)| term(*e, *s)).sum::<f64>()
}

/// Quadratic-transform form `Σ 2·sqrt((1+η)P)·Re(y*·a) − |y|²·(P|a|² + I)`.
pub fn rb_quadratic(
    model: &LinkModel,
    alloc: &Allocation,
    eta_d: &[f64],
    eta_c: &[f64],
    y_d: &[Complex64],
    y_c: &[Complex64],
) -> f64 {
    let g = model.gains(&alloc.theta);
    let p = &alloc.p;
    let mut r = 0.0;
    for n in 0..model.d2d_count() {
        let total = p[n] * g.dd[n].norm_sqr() + model.interference_d2d(n, p, &g);
        r += 2.0 * ((1.0 + eta_d[n]) * p[n]).sqrt() * (y_d[n].conj() * g.dd[n]).re
            - y_d[n].norm_sqr() * total;
    }
    for k in 0..model.cu_count() {
        let pk = p[model.cu_index(k)];
        let total = pk * g.cc[k].norm_sqr() + model.interference_cu(k, p, &g);
        r += 2.0 * ((1.0 + eta_c[k]) * pk).sqrt() * (y_c[k].conj() * g.cc[k]).re
            - y_c[k].norm_sqr() * total;
    }
    r
}

/// SINR minorant `2·sqrt(P)·Re(x*·a) − |x|²·I` of D2D link `n`.
pub fn sinr_surrogate_d2d(model: &LinkModel, alloc: &Allocation, n: usize, x: Complex64) -> f64 {
    let g = model.gains(&alloc.theta);
    2.0 * alloc.p[n].sqrt() * (x.conj() * g.dd[n]).re
        - x.norm_sqr() * model.interference_d2d(n, &alloc.p, &g)
}

pub fn sinr_surrogate_cu(model: &LinkModel, alloc: &Allocation, k: usize, x: Complex64) -> f64 {
    let g = model.gains(&alloc.theta);
    2.0 * alloc.p[model.cu_index(k)].sqrt() * (x.conj() * g.cc[k]).re
        - x.norm_sqr() * model.interference_cu(k, &alloc.p, &g)
}

/// Dictionary slots of each link's cascade.
struct Slots {
    dd: Vec<usize>,
    cd: Vec<usize>,
    cc: Vec<usize>,
    dc: Vec<Option<usize>>,
}

fn dictionary(model: &LinkModel) -> (Vec<CVec>, Slots) {
    let mut dict = Vec::new();
    let mut push = |c: &CVec| {
        dict.push(c.clone());
        dict.len() - 1
    };
    let mut slots = Slots {
        dd: Vec::new(),
        cd: Vec::new(),
        cc: Vec::new(),
        dc: Vec::new(),
    };
    for n in 0..model.d2d_count() {
        slots.dd.push(push(&model.dd[n].cascade));
        slots.cd.push(push(&model.cd[n].cascade));
    }
    for k in 0..model.cu_count() {
        slots.cc.push(push(&model.cc[k].cascade));
        slots.dc.push(model.dc[k].as_ref().map(|l| push(&l.cascade)));
    }
    (dict, slots)
}

/// Adds `2·s·Re(x*·a) − |x|²·(P|a|² + P'|a'|² + 1)` to `f`, where
/// `a = direct + vᴴω` and `a' = direct' + vᴴω'`. Passing `P = 0` gives the
/// SINR minorant, whose denominator excludes the wanted signal.
fn add_transform(
    f: &mut ConcaveQuadratic,
    s: f64,
    x: Complex64,
    own: (usize, Complex64, f64),
    cross: Option<(usize, Complex64, f64)>,
) {
    let (slot, direct, p_own) = own;
    let w = x.norm_sqr();
    if p_own > 0.0 {
        f.quad.push((slot, w * p_own));
    }
    f.linear.push((slot, x.conj() * s - direct.conj() * (w * p_own)));
    f.constant += 2.0 * s * (x.conj() * direct).re - w * (p_own * direct.norm_sqr() + 1.0);
    if let Some((slot, direct, p)) = cross {
        f.quad.push((slot, w * p));
        f.linear.push((slot, -direct.conj() * (w * p)));
        f.constant -= w * p * direct.norm_sqr();
    }
}

/// Build the QCQP over `v = conj(θ)` from the auxiliary variables.
pub fn assemble(model: &LinkModel, alloc: &Allocation, st: &FpState) -> QcqpProgram {
    let (dict, slots) = dictionary(model);
    let p = &alloc.p;
    let mut objective = ConcaveQuadratic::default();
    let mut constraints = Vec::new();
    for n in 0..model.d2d_count() {
        let k = model.cu_index(model.pairing.cu_of(n));
        let own = (slots.dd[n], model.dd[n].direct, p[n]);
        let cross = Some((slots.cd[n], model.cd[n].direct, p[k]));
        let s = ((1.0 + st.eta_d[n]) * p[n]).sqrt();
        add_transform(&mut objective, s, st.y_d[n], own, cross);

        // A zero floor holds for every θ (an SINR is never negative).
        if model.gamma_min_d > 0.0 {
            let mut f = ConcaveQuadratic::default();
            add_transform(&mut f, p[n].sqrt(), st.x_d[n], (own.0, own.1, 0.0), cross);
            constraints.push(QcqpConstraint {
                function: f,
                floor: model.gamma_min_d,
            });
        }
    }
    for k in 0..model.cu_count() {
        let pk = p[model.cu_index(k)];
        let own = (slots.cc[k], model.cc[k].direct, pk);
        let cross = model.pairing.d2d_of(k).map(|n| {
            let link = model.dc[k].as_ref().expect("paired CU has an interference link");
            (slots.dc[k].expect("slot for paired CU"), link.direct, p[n])
        });
        let s = ((1.0 + st.eta_c[k]) * pk).sqrt();
        add_transform(&mut objective, s, st.y_c[k], own, cross);

        if model.gamma_min_c > 0.0 {
            let mut f = ConcaveQuadratic::default();
            add_transform(&mut f, pk.sqrt(), st.x_c[k], (own.0, own.1, 0.0), cross);
            constraints.push(QcqpConstraint {
                function: f,
                floor: model.gamma_min_c,
            });
        }
    }
    QcqpProgram {
        dim: model.elements(),
        dictionary: dict,
        objective,
        constraints,
    }
}

/// One reflection update. Accepted only if the sum rate does not drop and
/// every rate floor still holds; otherwise `alloc.theta` is returned.
///
/// With `extrapolate`, the step from `θ` to the QCQP solution is stretched
/// by doubling factors (clipped to the unit polydisc) while the true sum
/// rate keeps improving.
pub fn fp_step(model: &LinkModel, alloc: &Allocation, tol: f64, extrapolate: bool) -> Result<CVec> {
    let st = fp_state(model, alloc);
    let prog = assemble(model, alloc, &st);
    let start = alloc.theta.map(|z| z.conj());
    let sol = solve_qcqp_with(&prog, &start, tol, &BarrierSettings::default())?;
    let score = |theta: &CVec| {
        let g = model.gains(theta);
        if model.violation_at(&alloc.p, &g) <= 0.0 {
            model.sum_rate_at(&alloc.p, &g)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut best = sol.theta.map(|z| z.conj());
    let mut best_score = score(&best);
    if extrapolate && best_score.is_finite() {
        let dir = &best - &alloc.theta;
        let mut tau = 2.0;
        while tau <= MAX_STRETCH {
            let cand = clip_to_disc(&(&alloc.theta + &dir * Complex64::new(tau, 0.0)));
            let s = score(&cand);
            if s <= best_score {
                break;
            }
            best = cand;
            best_score = s;
            tau *= 2.0;
        }
    }
    let current = model.sum_rate(alloc);
    if best_score >= current {
        Ok(best)
    } else {
        Ok(alloc.theta.clone())
    }
}

const MAX_STRETCH: f64 = 1024.0 * 1024.0;

fn clip_to_disc(theta: &CVec) -> CVec {
    theta.map(|z| {
        let r = z.norm();
        if r > 1.0 {
            z / r
        } else {
            z
        }
    })
}

/// Move `θ` toward the rate floors at fixed powers by minimizing the largest
/// violation of the SINR minorants built at the current point.
pub fn restore_reflection(model: &LinkModel, alloc: &Allocation) -> Result<CVec> {
    let st = fp_state(model, alloc);
    let prog = assemble(model, alloc, &st);
    let start = alloc.theta.map(|z| z.conj());
    let (v, _) = minimize_max_violation(&prog, &start, &BarrierSettings::default())?;
    Ok(v.map(|z| z.conj()))
}

pub fn lagrangian_eta_update(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(eta_update(&LinkModel::new(ch, pairing, cfg)?, alloc))
}

pub fn quadratic_y_update(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    eta_d: &[f64],
    eta_c: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    Ok(y_update(&LinkModel::new(ch, pairing, cfg)?, alloc, eta_d, eta_c))
}

pub fn x_updates(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    Ok(x_update(&LinkModel::new(ch, pairing, cfg)?, alloc))
}

pub fn assemble_qcqp(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    state: &FpState,
) -> Result<QcqpProgram> {
    Ok(assemble(&LinkModel::new(ch, pairing, cfg)?, alloc, state))
}

/// Reflection update for a fixed pairing and power vector.
pub fn beamforming_step(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<CVec> {
    let model = LinkModel::new(ch, pairing, cfg)?;
    fp_step(&model, alloc, cfg.solver.barrier_tol, cfg.solver.extrapolate)
}
