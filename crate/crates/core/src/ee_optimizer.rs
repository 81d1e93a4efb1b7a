//! Energy-efficiency maximization: Dinkelbach power updates alternating with
//! the sum-rate reflection update (the power budget does not depend on `θ`).

use nalgebra::DVector;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{solve_concave_linconstr_with, BarrierSettings, ConcaveObjective};
use crate::pairing::Pairing;
use crate::se_optimizer::{
    optimize, power_phase_one, power_program, rate_lower_bound, Allocation, AoObjective,
    FeasibleSet, LinkModel, Metric, RunOptions, SolveReport,
};

/// Hardware power model of an `M`-element RIS with `B`-bit phase control.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPowerModel {
    pub p_fpga: f64,
    pub sampling_hz: f64,
    /// Per-element varactor power for `B = 1..=10`, watts.
    pub p_v: Vec<f64>,
    pub bits: u32,
    pub elements: usize,
}

impl RisPowerModel {
    pub fn from_config(cfg: &SystemConfig, bits: u32) -> Self {
        Self {
            p_fpga: cfg.ris_power.p_fpga,
            sampling_hz: cfg.ris_power.sampling_hz,
            p_v: cfg.ris_power.p_v.clone(),
            bits,
            elements: cfg.elements,
        }
    }
}

/// DAC power per element: `1.5e-5·2^B + 9e-12·B·f_s` watts.
pub fn dac_power(bits: u32, sampling_hz: f64) -> f64 {
    1.5e-5 * f64::from(bits).exp2() + 9e-12 * f64::from(bits) * sampling_hz
}

/// `P_FPGA + M·P_DAC(B) + M·P_v(B)`, watts.
pub fn ris_power(model: &RisPowerModel) -> Result<f64> {
    if !(1..=10).contains(&model.bits) || model.p_v.len() < model.bits as usize {
        return Err(Error::Range(format!(
            "bit depth {} outside the power table (1..=10)",
            model.bits
        )));
    }
    let m = model.elements as f64;
    Ok(model.p_fpga
        + m * dac_power(model.bits, model.sampling_hz)
        + m * model.p_v[(model.bits - 1) as usize])
}

/// RIS power divided evenly over its elements, watts.
pub fn per_element_power(model: &RisPowerModel) -> Result<f64> {
    Ok(ris_power(model)? / model.elements as f64)
}

/// Power drawn regardless of the transmit powers: `(K + 2N + 1)` transceiver
/// circuits plus the RIS.
pub fn static_power(cfg: &SystemConfig, bits: u32) -> Result<f64> {
    let transceivers = (cfg.cu_count + 2 * cfg.d2d_count + 1) as f64;
    Ok(transceivers * cfg.circuit_power + ris_power(&RisPowerModel::from_config(cfg, bits))?)
}

/// Sum rate per consumed watt for a fixed static power budget.
#[derive(Debug, Clone)]
pub struct EnergyObjective {
    pub static_power: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

impl EnergyObjective {
    /// Falls back to the configured bit depth if `bits` is outside the table.
    pub fn new(cfg: &SystemConfig, bits: u32) -> Self {
        let static_power = static_power(cfg, bits)
            .or_else(|_| static_power(cfg, cfg.bits))
            .expect("validated config has a valid bit depth");
        Self {
            static_power,
            delta: cfg.solver.delta,
            max_iterations: cfg.solver.max_dinkelbach_iterations,
        }
    }

    /// Transceiver circuits only: the budget of a network without a surface.
    pub fn without_ris(cfg: &SystemConfig) -> Self {
        Self {
            static_power: (cfg.cu_count + 2 * cfg.d2d_count + 1) as f64 * cfg.circuit_power,
            delta: cfg.solver.delta,
            max_iterations: cfg.solver.max_dinkelbach_iterations,
        }
    }

    pub fn total_power(&self, p: &DVector<f64>) -> f64 {
        p.sum() + self.static_power
    }
}

impl AoObjective for EnergyObjective {
    fn value(&self, model: &LinkModel, alloc: &Allocation) -> f64 {
        model.sum_rate(alloc) / self.total_power(&alloc.p)
    }

    fn power_step(&self, model: &LinkModel, alloc: &Allocation, tol: f64) -> Result<DVector<f64>> {
        Ok(dinkelbach(model, alloc, self.static_power, tol, self.delta, self.max_iterations)?.p)
    }
}

/// Energy efficiency of an allocation, bps/Joule/Hz.
pub fn ee_value(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<f64> {
    let model = LinkModel::new(ch, pairing, cfg)?;
    Ok(EnergyObjective::new(cfg, cfg.bits).value(&model, alloc))
}

/// Trace of one Dinkelbach power update.
#[derive(Debug, Clone)]
pub struct DinkelbachRun {
    pub p: DVector<f64>,
    /// `λ` used by each parametric solve (starting at 0).
    pub lambdas: Vec<f64>,
    /// Optimal parametric value `f(λ) = max R^lb − λ·power` per solve.
    pub f_values: Vec<f64>,
}

/// Maximize `R^lb(p) / power(p)` with the rate lower bound fixed around the
/// incoming powers. The result is kept only if the true energy efficiency
/// does not drop.
pub fn dinkelbach(
    model: &LinkModel,
    alloc: &Allocation,
    static_power: f64,
    tol: f64,
    delta: f64,
    max_iterations: usize,
) -> Result<DinkelbachRun> {
    let g = model.gains(&alloc.theta);
    let start = if model.violation_at(&alloc.p, &g) <= 0.0 {
        alloc.p.clone()
    } else {
        power_phase_one(model, &g, &alloc.p)?
    };
    let pm = &model.p_max;
    let bound = rate_lower_bound(model, &g, &start);
    let power_of = |x: &DVector<f64>| x.dot(pm) + static_power;

    let mut x = start.component_div(pm);
    let mut lambda = 0.0;
    let mut lambdas = Vec::new();
    let mut f_values = Vec::new();
    for _ in 0..max_iterations {
        let mut obj = bound.clone();
        obj.add_linear(&(-pm * lambda));
        obj.add_constant(-lambda * static_power);
        let prog = power_program(model, &g, obj);
        x = solve_concave_linconstr_with(&prog, &x, tol, &BarrierSettings::default())?;
        let rate = bound.value(&x).unwrap_or(f64::NEG_INFINITY);
        let f = rate - lambda * power_of(&x);
        lambdas.push(lambda);
        f_values.push(f);
        if f < delta {
            break;
        }
        lambda = rate / power_of(&x);
    }
    let p = x.component_mul(pm);
    let ee = |p: &DVector<f64>| model.sum_rate_at(p, &g) / (p.sum() + static_power);
    let p = if model.violation_at(&p, &g) <= 0.0 && ee(&p) >= ee(&start) {
        p
    } else {
        start
    };
    Ok(DinkelbachRun {
        p,
        lambdas,
        f_values,
    })
}

/// Dinkelbach power update for a fixed pairing and reflection vector.
pub fn dinkelbach_power_step(
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<DVector<f64>> {
    let model = LinkModel::new(ch, pairing, cfg)?;
    let s = &cfg.solver;
    Ok(dinkelbach(
        &model,
        alloc,
        static_power(cfg, cfg.bits)?,
        s.barrier_tol,
        s.delta,
        s.max_dinkelbach_iterations,
    )?
    .p)
}

/// Maximize energy efficiency on one realization with RCS pairing.
pub fn maximize_ee(ch: &ChannelRealization, cfg: &SystemConfig, fs: FeasibleSet) -> Result<SolveReport> {
    optimize(ch, cfg, &RunOptions::new(Metric::Ee, fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::default_ee_topology;

    #[test]
    fn dac_power_closed_form() {
        assert!((dac_power(3, 10e3) - (1.2e-4 + 2.7e-7)).abs() < 1e-18);
    }

    #[test]
    fn ris_power_range_checked() {
        let mut m = RisPowerModel::from_config(&default_ee_topology(), 0);
        assert!(matches!(ris_power(&m), Err(Error::Range(_))));
        m.bits = 11;
        assert!(ris_power(&m).is_err());
        m.bits = 10;
        assert!(ris_power(&m).is_ok());
    }

    #[test]
    fn ris_power_increasing_in_bits() {
        let cfg = default_ee_topology();
        let powers: Vec<f64> = (1..=10)
            .map(|b| ris_power(&RisPowerModel::from_config(&cfg, b)).unwrap())
            .collect();
        assert!(powers.windows(2).all(|w| w[1] > w[0]));
    }
}
