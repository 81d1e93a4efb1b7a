//! Sum-rate maximization: alternating power allocation and reflection design,
//! plus projections onto unit-modulus and quantized-phase reflection sets.

mod fp;
mod model;
mod power;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::ee_optimizer::EnergyObjective;
use crate::error::{Error, Result};
use crate::numerics::CVec;
use crate::pairing::{enumerate_pairings, rcs_pairing, Pairing};

pub use fp::{
    assemble, assemble_qcqp, beamforming_step, eta_update, fp_state, fp_step,
    lagrangian_eta_update, quadratic_y_update, ra_value, rb_quadratic, rb_ratio,
    restore_reflection, sinr_surrogate_cu, sinr_surrogate_d2d, x_update, x_updates, y_update,
    FpState,
};
pub use model::{sinr_cu, sinr_d2d, sum_rate, Gains, Link, LinkModel};
pub use power::{
    power_phase_one, power_program, rate_lower_bound, rate_lower_bound_value, sca_power_step,
    sca_step, sinr_rows,
};

/// Transmit powers `(P^d_1..P^d_N, P^c_1..P^c_K)` in watts and the RIS
/// reflection vector `θ` (the diagonal of the reflection matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: DVector<f64>,
    pub theta: CVec,
}

/// Admissible reflection coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibleSet {
    /// `|θ_m| ≤ 1`.
    F1,
    /// `|θ_m| = 1`.
    F2,
    /// `|θ_m| = 1` with phases on a `2^B`-point grid.
    F3(u32),
}

/// Accepts `f1`, `f2` and `f3/B` (`f3` alone is rejected: it needs a bit depth).
impl std::str::FromStr for FeasibleSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" => Ok(FeasibleSet::F1),
            "f2" => Ok(FeasibleSet::F2),
            other => {
                let bits = other
                    .strip_prefix("f3/")
                    .ok_or_else(|| Error::Parse(format!("unknown feasible set `{s}`")))?;
                let b: u32 = bits
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad bit depth in `{s}`")))?;
                if !(1..=10).contains(&b) {
                    return Err(Error::Range(format!("bits must be in 1..=10, got {b}")));
                }
                Ok(FeasibleSet::F3(b))
            }
        }
    }
}

impl std::fmt::Display for FeasibleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeasibleSet::F1 => f.write_str("f1"),
            FeasibleSet::F2 => f.write_str("f2"),
            FeasibleSet::F3(b) => write!(f, "f3/{b}"),
        }
    }
}

/// Which quantity the alternating optimizer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Sum rate, bps/Hz.
    Se,
    /// Sum rate per consumed watt, bps/Joule/Hz.
    Ee,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "se" => Ok(Metric::Se),
            "ee" => Ok(Metric::Ee),
            _ => Err(Error::Parse(format!("unknown metric `{s}` (expected se or ee)"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Se => "se",
            Metric::Ee => "ee",
        })
    }
}

/// Outcome of one optimizer run on one realization.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub metric: Metric,
    pub feasible_set: FeasibleSet,
    /// Objective at the initial point, then after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub feasible: bool,
    /// Metric at the returned allocation (after projection for F2/F3).
    pub objective: f64,
    pub sum_rate: f64,
    pub energy_efficiency: f64,
    pub allocation: Option<Allocation>,
    pub pairing: Option<Pairing>,
    /// The RCS pairing admitted no feasible point and another was used.
    pub pairing_fallback: bool,
    /// A projected point needed a power repair.
    pub repaired: bool,
    /// The energy budget includes the RIS hardware.
    pub ris_power: bool,
    pub elapsed: Duration,
    pub seed: u64,
}

impl SolveReport {
    pub(crate) fn infeasible(metric: Metric, fs: FeasibleSet, seed: u64, elapsed: Duration) -> Self {
        Self {
            metric,
            feasible_set: fs,
            trace: Vec::new(),
            iterations: 0,
            feasible: false,
            objective: f64::NAN,
            sum_rate: f64::NAN,
            energy_efficiency: f64::NAN,
            allocation: None,
            pairing: None,
            pairing_fallback: false,
            repaired: false,
            ris_power: true,
            elapsed,
            seed,
        }
    }
}

/// Unit-modulus reflection vector with i.i.d. uniform phases.
pub fn random_phases(m: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))
}

/// Keep each phase, set each amplitude to one. Zero entries map to phase 0.
pub fn project_f2(theta: &CVec) -> CVec {
    theta.map(|z| {
        let r = z.norm();
        if r == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            z / r
        }
    })
}

/// Snap each phase to the nearest point of `{2πt/2^B}` on the circle; exact
/// midpoints go to the smaller angle.
pub fn project_f3(theta: &CVec, bits: u32) -> CVec {
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    theta.map(|z| {
        let mut phase = if z.norm() == 0.0 { 0.0 } else { z.arg() };
        if phase < 0.0 {
            phase += TAU;
        }
        let t = phase / step;
        let frac = t - t.floor();
        let idx = if frac > 0.5 { t.ceil() } else { t.floor() } as u64 % levels;
        Complex64::from_polar(1.0, idx as f64 * step)
    })
}

pub fn project(theta: &CVec, fs: FeasibleSet) -> CVec {
    match fs {
        FeasibleSet::F1 => theta.clone(),
        FeasibleSet::F2 => project_f2(theta),
        FeasibleSet::F3(b) => project_f3(theta, b),
    }
}

/// The quantity being maximized and the matching power update.
pub(crate) trait AoObjective {
    fn value(&self, model: &LinkModel, alloc: &Allocation) -> f64;
    fn power_step(&self, model: &LinkModel, alloc: &Allocation, tol: f64) -> Result<DVector<f64>>;
}

pub(crate) struct SumRate;

impl AoObjective for SumRate {
    fn value(&self, model: &LinkModel, alloc: &Allocation) -> f64 {
        model.sum_rate(alloc)
    }

    fn power_step(&self, model: &LinkModel, alloc: &Allocation, tol: f64) -> Result<DVector<f64>> {
        sca_step(model, alloc, tol)
    }
}

/// Rounds of reflection-side restoration before giving up on a pairing.
const RESTORE_ROUNDS: usize = 10;

/// A point meeting every rate floor, starting from full power and `theta0`.
///
/// Tries, in order: full power as is; a power-only feasibility search; and,
/// when the reflection may move, alternating reflection restoration (at full
/// power) with power feasibility searches.
pub fn initial_point(model: &LinkModel, theta0: &CVec, move_theta: bool) -> Option<Allocation> {
    let mut alloc = Allocation {
        p: model.p_max.clone(),
        theta: theta0.clone(),
    };
    if model.violation(&alloc) <= 0.0 {
        return Some(alloc);
    }
    let try_power = |alloc: &Allocation| {
        let g = model.gains(&alloc.theta);
        power_phase_one(model, &g, &model.p_max).ok().map(|p| Allocation {
            p,
            theta: alloc.theta.clone(),
        })
    };
    if let Some(a) = try_power(&alloc) {
        return Some(a);
    }
    if !move_theta {
        return None;
    }
    for _ in 0..RESTORE_ROUNDS {
        let before = model.violation(&alloc);
        let theta = restore_reflection(model, &alloc).ok()?;
        alloc.theta = theta;
        if let Some(a) = try_power(&alloc) {
            return Some(a);
        }
        if model.violation(&alloc) >= before - 1e-12 {
            break;
        }
    }
    None
}

/// Result of the alternating loop for one pairing.
#[derive(Debug, Clone)]
pub struct AoRun {
    pub allocation: Allocation,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Alternate power and (optionally) reflection updates from a feasible
/// point until the objective gains less than `epsilon`.
pub(crate) fn alternate(
    model: &LinkModel,
    init: Allocation,
    objective: &dyn AoObjective,
    cfg: &SystemConfig,
    move_theta: bool,
) -> AoRun {
    let s = &cfg.solver;
    let mut alloc = init;
    let mut value = objective.value(model, &alloc);
    let mut trace = vec![value];
    let mut iterations = 0;
    while iterations < s.max_outer_iterations {
        iterations += 1;
        // A failed subproblem leaves the (feasible) iterate untouched.
        if let Ok(p) = objective.power_step(model, &alloc, s.barrier_tol) {
            alloc.p = p;
        }
        if move_theta {
            if let Ok(theta) = fp_step(model, &alloc, s.barrier_tol, s.extrapolate) {
                alloc.theta = theta;
            }
        }
        let next = objective.value(model, &alloc);
        trace.push(next);
        let gain = next - value;
        value = next;
        if gain < s.epsilon {
            break;
        }
    }
    AoRun {
        allocation: alloc,
        trace,
        iterations,
    }
}

/// How the pairing is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingChoice {
    /// RCS pairing; if it admits no feasible point, the first pairing in
    /// lexicographic order that does.
    Rcs,
    /// Exactly this pairing.
    Fixed(Pairing),
}

/// Everything [`optimize`] needs besides the channel and the scenario.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub metric: Metric,
    pub feasible_set: FeasibleSet,
    pub pairing: PairingChoice,
    /// Optimize the reflection vector; when false it stays at `theta0`.
    pub move_theta: bool,
    /// Initial reflection vector; random phases from `cfg.seed` when `None`.
    pub theta0: Option<CVec>,
    /// Count the RIS hardware in the energy budget. Off for a network
    /// without a surface.
    pub ris_power: bool,
}

impl RunOptions {
    pub fn new(metric: Metric, feasible_set: FeasibleSet) -> Self {
        Self {
            metric,
            feasible_set,
            pairing: PairingChoice::Rcs,
            move_theta: true,
            theta0: None,
            ris_power: true,
        }
    }
}

fn energy_objective(cfg: &SystemConfig, bits: u32, ris_power: bool) -> EnergyObjective {
    if ris_power {
        EnergyObjective::new(cfg, bits)
    } else {
        EnergyObjective::without_ris(cfg)
    }
}

fn objective_for(metric: Metric, cfg: &SystemConfig, bits: u32, ris_power: bool) -> Box<dyn AoObjective> {
    match metric {
        Metric::Se => Box::new(SumRate),
        Metric::Ee => Box::new(energy_objective(cfg, bits, ris_power)),
    }
}

fn bits_of(fs: FeasibleSet, cfg: &SystemConfig) -> u32 {
    match fs {
        FeasibleSet::F3(b) => b,
        _ => cfg.bits,
    }
}

/// Pairing, initialization, alternating loop and projection in one call.
pub fn optimize(ch: &ChannelRealization, cfg: &SystemConfig, opts: &RunOptions) -> Result<SolveReport> {
    cfg.validate()?;
    if ch.elements() != cfg.elements || ch.d2d_count() != cfg.d2d_count || ch.cu_count() != cfg.cu_count {
        return Err(Error::Dimension("realization does not match the configuration".into()));
    }
    if let FeasibleSet::F3(b) = opts.feasible_set {
        if !(1..=10).contains(&b) {
            return Err(Error::Range(format!("bits must be in 1..=10, got {b}")));
        }
    }
    let started = Instant::now();
    let theta0 = opts
        .theta0
        .clone()
        .unwrap_or_else(|| random_phases(cfg.elements, cfg.seed));
    if theta0.len() != cfg.elements {
        return Err(Error::Dimension("theta0 length differs from element count".into()));
    }

    let candidates: Vec<Pairing> = match &opts.pairing {
        PairingChoice::Fixed(p) => vec![p.clone()],
        PairingChoice::Rcs => {
            let first = rcs_pairing(ch, cfg)?;
            let mut all = vec![first.clone()];
            all.extend(
                enumerate_pairings(cfg.d2d_count, cfg.cu_count)?
                    .into_iter()
                    .filter(|p| *p != first),
            );
            all
        }
    };
    let mut found = None;
    for (i, pairing) in candidates.iter().enumerate() {
        let model = LinkModel::new(ch, pairing, cfg)?;
        if let Some(init) = initial_point(&model, &theta0, opts.move_theta) {
            found = Some((model, init, i > 0));
            break;
        }
    }
    let Some((model, init, fallback)) = found else {
        let mut report = SolveReport::infeasible(opts.metric, opts.feasible_set, cfg.seed, started.elapsed());
        report.ris_power = opts.ris_power;
        return Ok(report);
    };

    let bits = bits_of(opts.feasible_set, cfg);
    let objective = objective_for(opts.metric, cfg, bits, opts.ris_power);
    let run = alternate(&model, init, objective.as_ref(), cfg, opts.move_theta);
    let mut report = SolveReport {
        metric: opts.metric,
        feasible_set: FeasibleSet::F1,
        objective: *run.trace.last().expect("trace holds the initial value"),
        trace: run.trace,
        iterations: run.iterations,
        feasible: true,
        sum_rate: model.sum_rate(&run.allocation),
        energy_efficiency: energy_objective(cfg, bits, opts.ris_power).value(&model, &run.allocation),
        allocation: Some(run.allocation),
        pairing: Some(model.pairing.clone()),
        pairing_fallback: fallback,
        repaired: false,
        ris_power: opts.ris_power,
        elapsed: Duration::ZERO,
        seed: cfg.seed,
    };
    if opts.feasible_set != FeasibleSet::F1 {
        report = project_report(&report, ch, cfg, opts.feasible_set)?;
    }
    report.elapsed = started.elapsed();
    Ok(report)
}

/// Map an F1 solution onto `fs`: project the reflection vector, re-check the
/// rate floors, and if they break, search feasible powers at the projected
/// reflection and take one power step from there. A report whose projected
/// point cannot be repaired is marked infeasible.
pub fn project_report(
    report: &SolveReport,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    fs: FeasibleSet,
) -> Result<SolveReport> {
    let mut out = report.clone();
    out.feasible_set = fs;
    let (Some(alloc), Some(pairing)) = (&report.allocation, &report.pairing) else {
        return Ok(out);
    };
    let started = Instant::now();
    let model = LinkModel::new(ch, pairing, cfg)?;
    let bits = bits_of(fs, cfg);
    let objective = objective_for(report.metric, cfg, bits, report.ris_power);
    let mut projected = Allocation {
        p: alloc.p.clone(),
        theta: project(&alloc.theta, fs),
    };
    if model.violation(&projected) > 0.0 {
        let g = model.gains(&projected.theta);
        match power_phase_one(&model, &g, &projected.p) {
            Ok(p) => {
                projected.p = p;
                if let Ok(p) = objective.power_step(&model, &projected, cfg.solver.barrier_tol) {
                    projected.p = p;
                }
                out.repaired = true;
            }
            Err(_) => {
                out.feasible = false;
                out.objective = f64::NAN;
                out.sum_rate = f64::NAN;
                out.energy_efficiency = f64::NAN;
                out.allocation = None;
                out.elapsed += started.elapsed();
                return Ok(out);
            }
        }
    }
    out.objective = objective.value(&model, &projected);
    out.sum_rate = model.sum_rate(&projected);
    out.energy_efficiency = energy_objective(cfg, bits, report.ris_power).value(&model, &projected);
    out.allocation = Some(projected);
    out.elapsed += started.elapsed();
    Ok(out)
}

/// Maximize the sum rate on one realization with RCS pairing.
pub fn maximize_se(ch: &ChannelRealization, cfg: &SystemConfig, fs: FeasibleSet) -> Result<SolveReport> {
    optimize(ch, cfg, &RunOptions::new(Metric::Se, fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polar(r: f64, a: f64) -> Complex64 {
        Complex64::from_polar(r, a)
    }

    #[test]
    fn f2_projection() {
        let t = CVec::from_vec(vec![polar(0.5, PI / 3.0), polar(1.0, -2.0), Complex64::new(0.0, 0.0)]);
        let p = project_f2(&t);
        assert!((p[0] - polar(1.0, PI / 3.0)).norm() < 1e-15);
        assert!((p[1] - t[1]).norm() < 1e-15);
        assert_eq!(p[2], Complex64::new(1.0, 0.0));
        assert_eq!(project_f2(&p), p);
    }

    #[test]
    fn f3_projection() {
        let snap = |a: f64, b: u32| project_f3(&CVec::from_element(1, polar(1.0, a)), b)[0];
        assert!((snap(0.26 * PI, 1) - polar(1.0, 0.0)).norm() < 1e-12);
        assert!((snap(0.9 * PI, 2) - polar(1.0, PI)).norm() < 1e-12);
        assert!((snap(PI / 2.0, 1) - polar(1.0, 0.0)).norm() < 1e-12);
        // Negative phases wrap around the circle.
        assert!((snap(-0.1, 2) - polar(1.0, 0.0)).norm() < 1e-12);
        assert!((snap(-PI / 2.0 + 0.1, 2) - polar(1.0, 1.5 * PI)).norm() < 1e-12);
    }

    #[test]
    fn random_phases_are_unit_and_seeded() {
        let a = random_phases(16, 9);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_eq!(a, random_phases(16, 9));
        assert_ne!(a, random_phases(16, 10));
    }
}
