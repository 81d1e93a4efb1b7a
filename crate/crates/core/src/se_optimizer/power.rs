//! Power allocation at a fixed reflection vector.
//!
//! Variables are scaled to `x = p / p_max ∈ [0, 1]`. The sum rate is a
//! difference of logs; each subtracted interference term is replaced by its
//! tangent at the expansion point, giving a concave lower bound that is tight
//! there.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::Result;
use crate::numerics::{
    find_interior_point, solve_concave_linconstr_with, BarrierSettings, ConcaveObjective,
    ConcaveProgram, LogAffineObjective,
};
use crate::pairing::Pairing;

use super::model::{Gains, LinkModel};
use super::Allocation;

/// Rate lower bound around `p0`, in bps/Hz, over scaled powers.
pub fn rate_lower_bound(model: &LinkModel, g: &Gains, p0: &DVector<f64>) -> LogAffineObjective {
    let (n_d, n_c) = (model.d2d_count(), model.cu_count());
    let dim = n_d + n_c;
    let pm = &model.p_max;
    let mut obj = LogAffineObjective::new(dim);
    let mut linear = DVector::zeros(dim);
    let mut add_pair = |obj: &mut LogAffineObjective, own: usize, own_gain: f64, other: usize, cross: f64| {
        let mut a = DVector::zeros(dim);
        a[own] = own_gain * pm[own];
        a[other] = cross * pm[other];
        obj.add_log_term(1.0 / LN_2, a, 1.0);
        // −log2(1 + P'·cross) ≥ −log2(1 + P'₀·cross) − cross·(P' − P'₀)/((1 + P'₀·cross)·ln 2)
        let base = 1.0 + p0[other] * cross;
        let slope = cross / (base * LN_2);
        linear[other] -= slope * pm[other];
        obj.add_constant(-base.log2() + slope * p0[other]);
    };
    for n in 0..n_d {
        let k = model.cu_index(model.pairing.cu_of(n));
        add_pair(&mut obj, n, g.dd[n].norm_sqr(), k, g.cd[n].norm_sqr());
    }
    for k in 0..n_c {
        let idx = model.cu_index(k);
        match model.pairing.d2d_of(k) {
            Some(n) => add_pair(&mut obj, idx, g.cc[k].norm_sqr(), n, g.dc[k].norm_sqr()),
            None => {
                let mut a = DVector::zeros(dim);
                a[idx] = g.cc[k].norm_sqr() * pm[idx];
                obj.add_log_term(1.0 / LN_2, a, 1.0);
            }
        }
    }
    obj.add_linear(&linear);
    obj
}

/// Evaluate the lower bound built around `p0` at physical powers `p`.
pub fn rate_lower_bound_value(model: &LinkModel, g: &Gains, p0: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let x = p.component_div(&model.p_max);
    rate_lower_bound(model, g, p0)
        .value(&x)
        .unwrap_or(f64::NEG_INFINITY)
}

/// SINR floors as linear rows `A·x ≤ b` over scaled powers:
/// `γ_min·I·P' − |a|²·P ≤ −γ_min`.
pub fn sinr_rows(model: &LinkModel, g: &Gains) -> (DMatrix<f64>, DVector<f64>) {
    let (n_d, n_c) = (model.d2d_count(), model.cu_count());
    let pm = &model.p_max;
    let mut a = DMatrix::zeros(n_d + n_c, n_d + n_c);
    let mut b = DVector::zeros(n_d + n_c);
    for n in 0..n_d {
        let k = model.cu_index(model.pairing.cu_of(n));
        a[(n, n)] = -g.dd[n].norm_sqr() * pm[n];
        a[(n, k)] = model.gamma_min_d * g.cd[n].norm_sqr() * pm[k];
        b[n] = -model.gamma_min_d;
    }
    for k in 0..n_c {
        let row = n_d + k;
        let idx = model.cu_index(k);
        a[(row, idx)] = -g.cc[k].norm_sqr() * pm[idx];
        if let Some(n) = model.pairing.d2d_of(k) {
            a[(row, n)] = model.gamma_min_c * g.dc[k].norm_sqr() * pm[n];
        }
        b[row] = -model.gamma_min_c;
    }
    (a, b)
}

fn unit_box(dim: usize) -> (DVector<f64>, DVector<f64>) {
    (DVector::zeros(dim), DVector::from_element(dim, 1.0))
}

/// The power subproblem with objective `obj` under the SINR floors.
pub fn power_program<O: ConcaveObjective>(model: &LinkModel, g: &Gains, obj: O) -> ConcaveProgram<O> {
    let (lo, hi) = unit_box(obj.dim());
    let (a, b) = sinr_rows(model, g);
    ConcaveProgram::new(obj, lo, hi).with_constraints(a, b)
}

/// A strictly feasible power vector at the given gains, searched from `start`.
pub fn power_phase_one(model: &LinkModel, g: &Gains, start: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = model.p_max.len();
    let prog = power_program(model, g, LogAffineObjective::new(dim));
    let x = find_interior_point(&prog, &start.component_div(&model.p_max), &BarrierSettings::default())?;
    Ok(x.component_mul(&model.p_max))
}

/// One SCA step from `alloc`. If `alloc.p` violates a floor, a feasibility
/// phase runs first. The step is accepted only if the true sum rate does not
/// drop; otherwise the incoming powers are returned.
pub fn sca_step(model: &LinkModel, alloc: &Allocation, tol: f64) -> Result<DVector<f64>> {
    let g = model.gains(&alloc.theta);
    let start_ok = model.violation_at(&alloc.p, &g) <= 0.0;
    let start = if start_ok {
        alloc.p.clone()
    } else {
        power_phase_one(model, &g, &alloc.p)?
    };
    let prog = power_program(model, &g, rate_lower_bound(model, &g, &start));
    let x = solve_concave_linconstr_with(
        &prog,
        &start.component_div(&model.p_max),
        tol,
        &BarrierSettings::default(),
    )?;
    let p = x.component_mul(&model.p_max);
    let improved = model.sum_rate_at(&p, &g) >= model.sum_rate_at(&start, &g);
    if model.violation_at(&p, &g) <= 0.0 && improved {
        Ok(p)
    } else {
        Ok(start)
    }
}

/// Power update for a fixed reflection vector.
pub fn sca_power_step(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<DVector<f64>> {
    let model = LinkModel::new(ch, pairing, cfg)?;
    sca_step(&model, alloc, cfg.solver.barrier_tol)
}
