//! Benchmark schemes and Monte Carlo sweeps.
//!
//! Every draw `i` of a sweep gets its own seed from [`draw_seed`]; the same
//! seed drives the channel (ChaCha8 stream 0) and the random initial phases
//! (stream 1), for every scheme and every axis value. Schemes and axis values
//! are therefore compared on common random numbers.

mod results;

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use toml::{Table, Value};

use crate::channel::{dbm_to_watt, draw_realization, rate_to_sinr, ChannelRealization, RicianFactors, SystemConfig};
use crate::error::{Error, Result};
use crate::pairing::{enumerate_pairings_capped, DEFAULT_ENUMERATION_CAP};
use crate::se_optimizer::{
    optimize, project, random_phases, FeasibleSet, Metric, PairingChoice, RunOptions, SolveReport,
};

pub use results::{read_csv, read_json, round_sig, write_csv, write_json, emit_results, Format, ResultRow};

/// Resource-allocation schemes compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// RCS pairing, alternating power and reflection optimization.
    Proposed,
    /// Same power and pairing machinery with every RIS channel zeroed.
    NoRis,
    /// Reflection fixed at random unit-modulus phases; powers optimized.
    RandomPhase,
    /// Full optimization under every pairing; the best one is kept.
    IdealPairing,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::NoRis, Scheme::RandomPhase, Scheme::IdealPairing];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoRis => "no_ris",
            Scheme::RandomPhase => "random_phase",
            Scheme::IdealPairing => "ideal_pairing",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown scheme `{s}`")))
    }
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Both transmit-power caps, dBm.
    PMax,
    /// RIS elements.
    Elements,
    /// Phase-shifter resolution. Under an F3 sweep the quantizer follows it.
    Bits,
    /// CU rate floor, bps/Hz.
    RMinC,
    /// All four Rician factors (`inf` for pure line of sight).
    RicianFactor,
    /// Number of CUs, positions from the reference list.
    CuCount,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::PMax, Axis::Elements, Axis::Bits, Axis::RMinC, Axis::RicianFactor, Axis::CuCount];

    pub fn name(self) -> &'static str {
        match self {
            Axis::PMax => "p_max",
            Axis::Elements => "m",
            Axis::Bits => "b",
            Axis::RMinC => "r_min_c",
            Axis::RicianFactor => "rician_factor",
            Axis::CuCount => "k",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::Elements | Axis::Bits | Axis::CuCount)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        if self.integral() && (value.fract() != 0.0 || value < 1.0) {
            return Err(Error::Range(format!("axis {} needs positive integers, got {value}", self.name())));
        }
        let mut cfg = base.clone();
        match self {
            Axis::PMax => {
                cfg.p_max_d = dbm_to_watt(value);
                cfg.p_max_c = cfg.p_max_d;
            }
            Axis::Elements => cfg.elements = value as usize,
            Axis::Bits => cfg.bits = value as u32,
            Axis::RMinC => cfg.gamma_min_c = rate_to_sinr(value),
            Axis::RicianFactor => cfg.rician = RicianFactors::uniform(value),
            Axis::CuCount => cfg = cfg.with_cu_count(value as usize)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Feasible set in force at `value` when the sweep asks for `fs`.
    pub fn feasible_set(self, fs: FeasibleSet, value: f64) -> FeasibleSet {
        match (self, fs) {
            (Axis::Bits, FeasibleSet::F3(_)) => FeasibleSet::F3(value as u32),
            _ => fs,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown axis `{s}`")))
    }
}

/// A full sweep: one row per axis value and scheme.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub metric: Metric,
    pub schemes: Vec<Scheme>,
    pub feasible_set: FeasibleSet,
    pub realizations: usize,
    pub base: SystemConfig,
    pub seed: u64,
}

/// Realizations per axis value unless configured otherwise.
pub const DEFAULT_REALIZATIONS: usize = 200;

impl SweepSpec {
    pub fn new(base: SystemConfig, axis: Axis, values: Vec<f64>, metric: Metric) -> Self {
        Self {
            axis,
            values,
            metric,
            schemes: vec![Scheme::Proposed],
            feasible_set: FeasibleSet::F1,
            realizations: DEFAULT_REALIZATIONS,
            seed: base.seed,
            base,
        }
    }

    /// Build from the `[sweep]` table of a scenario file. Keys: `axis`,
    /// `values`, `metric`, `schemes`, `feasible_set`, `realizations`, `seed`.
    pub fn from_table(base: SystemConfig, table: &Table) -> Result<Self> {
        let text = |key: &str| -> Result<Option<&str>> {
            match table.get(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s)),
                Some(_) => Err(Error::Config(format!("sweep.{key} must be a string"))),
            }
        };
        let axis = text("axis")?.map(str::parse).transpose()?.unwrap_or(Axis::PMax);
        let metric = text("metric")?.map(str::parse).transpose()?.unwrap_or(Metric::Se);
        let mut spec = Self::new(base, axis, Vec::new(), metric);
        if let Some(fs) = text("feasible_set")? {
            spec.feasible_set = parse_feasible_set(fs, spec.base.bits)?;
        }
        for (key, value) in table {
            match key.as_str() {
                "axis" | "metric" | "feasible_set" => {}
                "values" => {
                    spec.values = value
                        .as_array()
                        .ok_or_else(|| Error::Config("sweep.values must be an array".into()))?
                        .iter()
                        .map(|v| match v {
                            Value::Integer(i) => Ok(*i as f64),
                            Value::Float(f) => Ok(*f),
                            Value::String(s) => s.parse().map_err(|_| Error::Config(format!("bad sweep value `{s}`"))),
                            _ => Err(Error::Config("sweep.values must hold numbers".into())),
                        })
                        .collect::<Result<_>>()?;
                }
                "schemes" => {
                    spec.schemes = value
                        .as_array()
                        .ok_or_else(|| Error::Config("sweep.schemes must be an array".into()))?
                        .iter()
                        .map(|v| {
                            v.as_str()
                                .ok_or_else(|| Error::Config("sweep.schemes must hold strings".into()))?
                                .parse()
                        })
                        .collect::<Result<_>>()?;
                }
                "realizations" | "seed" => {
                    let n = value
                        .as_integer()
                        .filter(|n| *n >= 0)
                        .ok_or_else(|| Error::Config(format!("sweep.{key} must be a non-negative integer")))?;
                    if key == "seed" {
                        spec.seed = n as u64;
                    } else {
                        spec.realizations = n as usize;
                    }
                }
                other => return Err(Error::Config(format!("unknown sweep key `{other}`"))),
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one axis value".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("sweep needs at least one realization".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one scheme".into()));
        }
        for &v in &self.values {
            let cfg = self.axis.apply(&self.base, v)?;
            if self.schemes.contains(&Scheme::IdealPairing) {
                enumerate_pairings_capped(cfg.d2d_count, cfg.cu_count, DEFAULT_ENUMERATION_CAP)?;
            }
        }
        Ok(())
    }
}

/// `f1`, `f2`, `f3` (at `bits`) or `f3/B`.
pub fn parse_feasible_set(s: &str, bits: u32) -> Result<FeasibleSet> {
    if s.trim().eq_ignore_ascii_case("f3") {
        format!("f3/{bits}").parse()
    } else {
        s.parse()
    }
}

/// Seed of draw `index` under sweep seed `seed`.
pub fn draw_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// The channel of a draw: ChaCha8 seeded with `seed`, stream 0.
pub fn realization(cfg: &SystemConfig, seed: u64) -> Result<ChannelRealization> {
    draw_realization(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Run one scheme on one realization. The initial reflection vector of
/// every scheme is [`random_phases`] from `cfg.seed`.
pub fn run_scheme(
    scheme: Scheme,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    metric: Metric,
    fs: FeasibleSet,
) -> Result<SolveReport> {
    let base = RunOptions::new(metric, fs);
    match scheme {
        Scheme::Proposed => optimize(ch, cfg, &base),
        Scheme::NoRis => optimize(
            &ch.without_ris(),
            cfg,
            &RunOptions {
                move_theta: false,
                ris_power: false,
                ..base
            },
        ),
        Scheme::RandomPhase => {
            let theta0 = project(&random_phases(cfg.elements, cfg.seed), fs);
            optimize(
                ch,
                cfg,
                &RunOptions {
                    move_theta: false,
                    theta0: Some(theta0),
                    ..base
                },
            )
        }
        Scheme::IdealPairing => {
            let mut best: Option<SolveReport> = None;
            for pairing in enumerate_pairings_capped(cfg.d2d_count, cfg.cu_count, DEFAULT_ENUMERATION_CAP)? {
                let opts = RunOptions {
                    pairing: PairingChoice::Fixed(pairing),
                    ..base.clone()
                };
                let report = optimize(ch, cfg, &opts)?;
                let better = report.feasible && best.as_ref().map_or(true, |b| !b.feasible || report.objective > b.objective);
                if better || best.is_none() {
                    best = Some(report);
                }
            }
            Ok(best.expect("at least one pairing"))
        }
    }
}

/// Result of one draw; solver errors are kept as messages so a sweep can
/// finish and report them.
#[derive(Debug, Clone)]
pub struct DrawOutcome {
    pub index: usize,
    pub seed: u64,
    pub report: std::result::Result<SolveReport, String>,
}

impl DrawOutcome {
    pub fn feasible(&self) -> Option<&SolveReport> {
        self.report.as_ref().ok().filter(|r| r.feasible)
    }
}

/// Run `scheme` on draws `0..realizations`, in parallel, ordered by index.
pub fn solve_draws(
    scheme: Scheme,
    cfg: &SystemConfig,
    metric: Metric,
    fs: FeasibleSet,
    seed: u64,
    realizations: usize,
) -> Vec<DrawOutcome> {
    (0..realizations)
        .into_par_iter()
        .map(|index| {
            let s = draw_seed(seed, index);
            let mut c = cfg.clone();
            c.seed = s;
            let report = realization(&c, s)
                .and_then(|ch| run_scheme(scheme, &ch, &c, metric, fs))
                .map_err(|e| e.to_string());
            DrawOutcome { index, seed: s, report }
        })
        .collect()
}

/// A draw whose solver returned an error.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawFailure {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub draw: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// [`trace_rows`] of every (axis value, scheme) cell, in row order.
    pub traces: Vec<ResultRow>,
    pub failures: Vec<DrawFailure>,
}

impl SweepOutput {
    /// Axis values at which some scheme found no feasible draw.
    pub fn infeasible_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.feasibility_rate == 0.0)
            .map(|r| r.axis_value)
            .collect();
        v.dedup();
        v
    }
}

/// Mean, standard error, feasibility rate and mean iterations of one
/// (scheme, axis value) cell. Infeasible and failed draws are left out of
/// the averages and counted against the feasibility rate.
pub fn summarize(
    scheme: Scheme,
    axis: &str,
    axis_value: f64,
    metric: Metric,
    seed: u64,
    outcomes: &[DrawOutcome],
) -> ResultRow {
    let ok: Vec<&SolveReport> = outcomes.iter().filter_map(DrawOutcome::feasible).collect();
    let values: Vec<f64> = ok.iter().map(|r| r.objective).collect();
    let (mean, stderr) = mean_stderr(&values);
    let iterations: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    ResultRow::new(
        scheme.name(),
        axis,
        axis_value,
        &metric.to_string(),
        mean,
        stderr,
        ok.len() as f64 / outcomes.len().max(1) as f64,
        mean_stderr(&iterations).0,
        outcomes.len(),
        seed,
    )
}

/// Sample mean and standard error; NaN where undefined.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean objective per outer iteration over the feasible draws, as rows with
/// `axis = "iteration"`. Runs that stopped early hold their final value.
pub fn trace_rows(scheme: Scheme, metric: Metric, seed: u64, outcomes: &[DrawOutcome]) -> Vec<ResultRow> {
    let traces: Vec<&[f64]> = outcomes
        .iter()
        .filter_map(DrawOutcome::feasible)
        .map(|r| r.trace.as_slice())
        .filter(|t| !t.is_empty())
        .collect();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let rate = traces.len() as f64 / outcomes.len().max(1) as f64;
    (0..len)
        .map(|i| {
            let at: Vec<f64> = traces.iter().map(|t| t[i.min(t.len() - 1)]).collect();
            let (mean, stderr) = mean_stderr(&at);
            ResultRow::new(
                scheme.name(),
                "iteration",
                i as f64,
                &metric.to_string(),
                mean,
                stderr,
                rate,
                f64::NAN,
                outcomes.len(),
                seed,
            )
        })
        .collect()
}

/// Run every (axis value, scheme) cell of `spec`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for &value in &spec.values {
        let cfg = spec.axis.apply(&spec.base, value)?;
        let fs = spec.axis.feasible_set(spec.feasible_set, value);
        for &scheme in &spec.schemes {
            let outcomes = solve_draws(scheme, &cfg, spec.metric, fs, spec.seed, spec.realizations);
            for o in &outcomes {
                if let Err(message) = &o.report {
                    failures.push(DrawFailure {
                        scheme,
                        axis_value: value,
                        draw: o.index,
                        seed: o.seed,
                        message: message.clone(),
                    });
                }
            }
            rows.push(summarize(scheme, spec.axis.name(), value, spec.metric, spec.seed, &outcomes));
            traces.extend(trace_rows(scheme, spec.metric, spec.seed, &outcomes));
        }
    }
    Ok(SweepOutput { rows, traces, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::default_topology;

    #[test]
    fn draw_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..50).map(|i| draw_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(a[13], draw_seed(7, 13));
        assert_ne!(draw_seed(7, 0), draw_seed(8, 0));
    }

    #[test]
    fn names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("m2".parse::<Axis>().is_err());
    }

    #[test]
    fn axis_application() {
        let base = default_topology();
        assert_eq!(Axis::Elements.apply(&base, 64.0).unwrap().elements, 64);
        assert!(Axis::Elements.apply(&base, 6.5).is_err());
        assert_eq!(Axis::CuCount.apply(&base, 6.0).unwrap().cus.len(), 6);
        let p = Axis::PMax.apply(&base, 30.0).unwrap();
        assert!((p.p_max_c - 1.0).abs() < 1e-12);
        assert!(Axis::RicianFactor.apply(&base, f64::INFINITY).unwrap().rician.k2.is_infinite());
        assert_eq!(Axis::Bits.feasible_set(FeasibleSet::F3(1), 4.0), FeasibleSet::F3(4));
        assert_eq!(Axis::Bits.feasible_set(FeasibleSet::F2, 4.0), FeasibleSet::F2);
    }

    #[test]
    fn sweep_table() {
        let t: Table = r#"
            axis = "m"
            values = [50, 100]
            metric = "ee"
            schemes = ["proposed", "no_ris"]
            feasible_set = "f3"
            realizations = 7
            seed = 3
        "#
        .parse()
        .unwrap();
        let s = SweepSpec::from_table(default_topology(), &t).unwrap();
        assert_eq!(s.axis, Axis::Elements);
        assert_eq!(s.values, vec![50.0, 100.0]);
        assert_eq!(s.metric, Metric::Ee);
        assert_eq!(s.schemes, vec![Scheme::Proposed, Scheme::NoRis]);
        assert_eq!(s.feasible_set, FeasibleSet::F3(3));
        assert_eq!((s.realizations, s.seed), (7, 3));
        let bad: Table = "colour = 1".parse().unwrap();
        assert!(SweepSpec::from_table(default_topology(), &bad).is_err());
    }

    #[test]
    fn validation() {
        let mut s = SweepSpec::new(default_topology(), Axis::PMax, vec![], Metric::Se);
        assert!(s.validate().is_err());
        s.values = vec![20.0];
        s.validate().unwrap();
        s.realizations = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn stats() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[]).0.is_nan());
        assert!(mean_stderr(&[1.0]).1.is_nan());
    }
}
