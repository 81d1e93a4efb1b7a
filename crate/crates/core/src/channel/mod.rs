//! Scenario configuration, the reference topology, unit conversions and the
//! channel realization generator.

mod config;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::CVec;

pub use config::{parse_power, ConfigFile};

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Angle of `other` as seen from `self`, radians.
    pub fn bearing(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Large-scale fading `C·d^(−ple)` with separate exponents per link class.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossModel {
    pub reference: f64,
    pub ple_direct: f64,
    pub ple_ris_bs: f64,
    pub ple_ris_other: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            reference: 1e-3,
            ple_direct: 4.0,
            ple_ris_bs: 2.0,
            ple_ris_other: 2.2,
        }
    }
}

/// Rician factors of the RIS-related links: `k1` TX→RIS, `k2` CU→RIS,
/// `k3` RIS→RX, `k4` RIS→BS. `f64::INFINITY` means pure line of sight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianFactors {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl RicianFactors {
    pub const fn uniform(k: f64) -> Self {
        Self {
            k1: k,
            k2: k,
            k3: k,
            k4: k,
        }
    }
}

/// Parameters of the RIS hardware power model.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPowerParams {
    /// Controller power, watts.
    pub p_fpga: f64,
    /// DAC sampling frequency, Hz.
    pub sampling_hz: f64,
    /// Per-element varactor power indexed by `bits − 1`, watts.
    pub p_v: Vec<f64>,
}

impl Default for RisPowerParams {
    fn default() -> Self {
        Self {
            p_fpga: 1.188,
            sampling_hz: 10e3,
            p_v: vec![0.0; 10],
        }
    }
}

/// Stopping rules of the alternating optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Outer loop stops when the objective gains less than this.
    pub epsilon: f64,
    /// Dinkelbach inner loop stops once `f(λ)` drops below this.
    pub delta: f64,
    pub max_outer_iterations: usize,
    pub max_dinkelbach_iterations: usize,
    /// Duality-gap tolerance of the interior-point kernels.
    pub barrier_tol: f64,
    /// Stretch each reflection update along its direction while the sum
    /// rate keeps improving.
    pub extrapolate: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            delta: 1e-3,
            max_outer_iterations: 50,
            max_dinkelbach_iterations: 50,
            barrier_tol: 1e-8,
            extrapolate: true,
        }
    }
}

/// Every constant of a scenario. Powers are watts, distances meters, SINR
/// floors linear.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub cu_count: usize,
    pub d2d_count: usize,
    pub elements: usize,
    pub bits: u32,
    pub cell_radius: f64,
    pub cluster_radius: f64,
    pub p_max_d: f64,
    pub p_max_c: f64,
    pub gamma_min_d: f64,
    pub gamma_min_c: f64,
    pub noise_power: f64,
    /// Circuit power per transceiver.
    pub circuit_power: f64,
    pub path_loss: PathLossModel,
    pub rician: RicianFactors,
    /// Per-element RIS gain, applied as an amplitude factor on every
    /// RIS-related channel vector. Zero disables it.
    pub ris_gain_db: f64,
    /// Orientation of the RIS array axis, radians.
    pub ris_array_axis: f64,
    pub ris_power: RisPowerParams,
    pub bs: Point,
    pub ris: Point,
    pub cus: Vec<Point>,
    pub d2d_tx: Vec<Point>,
    pub d2d_rx: Vec<Point>,
    pub seed: u64,
    pub solver: SolverSettings,
}

/// CU positions of the reference layout; the first four are the default
/// cell, the remainder extend it for larger CU counts.
pub const REFERENCE_CUS: [Point; 10] = [
    Point::new(38.0, 54.0),
    Point::new(87.0, 92.0),
    Point::new(112.0, 136.0),
    Point::new(155.0, 89.0),
    Point::new(99.0, 44.0),
    Point::new(122.0, 174.0),
    Point::new(138.0, 162.0),
    Point::new(74.0, 121.0),
    Point::new(56.0, 112.0),
    Point::new(149.0, 78.0),
];

/// Rate floor in bps/Hz to linear SINR floor: `2^r − 1`.
pub fn rate_to_sinr(r: f64) -> f64 {
    r.exp2() - 1.0
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// `C·d^(−ple)`.
pub fn path_loss(d: f64, ple: f64, reference: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(reference * d.powf(-ple))
}

/// The reference cell: four CUs, two D2D pairs, a 200-element RIS at the
/// cell edge and the BS at the origin.
pub fn default_topology() -> SystemConfig {
    SystemConfig {
        cu_count: 4,
        d2d_count: 2,
        elements: 200,
        bits: 3,
        cell_radius: 250.0,
        cluster_radius: 60.0,
        p_max_d: dbm_to_watt(24.0),
        p_max_c: dbm_to_watt(24.0),
        gamma_min_d: rate_to_sinr(0.3),
        gamma_min_c: rate_to_sinr(0.3),
        noise_power: dbm_to_watt(-114.0),
        circuit_power: dbm_to_watt(24.0),
        path_loss: PathLossModel::default(),
        rician: RicianFactors::uniform(10.0),
        ris_gain_db: 3.0,
        ris_array_axis: 0.0,
        ris_power: RisPowerParams::default(),
        bs: Point::new(0.0, 0.0),
        ris: Point::new(100.0, 0.0),
        cus: REFERENCE_CUS[..4].to_vec(),
        d2d_tx: vec![Point::new(97.0, 28.0), Point::new(44.0, 103.0)],
        d2d_rx: vec![Point::new(144.0, 52.0), Point::new(52.0, 154.0)],
        seed: 0,
        solver: SolverSettings::default(),
    }
}

/// Settings of the energy-efficiency experiments: 500 elements and a
/// 0.55 bps/Hz rate floor on every link.
pub fn default_ee_topology() -> SystemConfig {
    let mut cfg = default_topology();
    cfg.elements = 500;
    cfg.gamma_min_d = rate_to_sinr(0.55);
    cfg.gamma_min_c = rate_to_sinr(0.55);
    cfg
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.cu_count == 0 || self.d2d_count == 0 || self.elements == 0 {
            return bad("cu_count, d2d_count and elements must be at least 1".into());
        }
        if self.cu_count < self.d2d_count {
            return bad(format!(
                "need at least as many CUs as D2D pairs ({} < {})",
                self.cu_count, self.d2d_count
            ));
        }
        if !(1..=10).contains(&self.bits) {
            return bad(format!("bits must be in 1..=10, got {}", self.bits));
        }
        for (name, v) in [
            ("cell_radius", self.cell_radius),
            ("cluster_radius", self.cluster_radius),
            ("p_max_d", self.p_max_d),
            ("p_max_c", self.p_max_c),
            ("noise_power", self.noise_power),
            ("circuit_power", self.circuit_power),
            ("path_loss_reference", self.path_loss.reference),
            ("p_fpga", self.ris_power.p_fpga),
            ("sampling_hz", self.ris_power.sampling_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("gamma_min_d", self.gamma_min_d), ("gamma_min_c", self.gamma_min_c)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite non-negative SINR, got {v}"));
            }
        }
        let r = self.rician;
        if [r.k1, r.k2, r.k3, r.k4].iter().any(|k| !(*k >= 0.0)) {
            return bad("Rician factors must be non-negative".into());
        }
        if self.ris_power.p_v.len() < 10 || self.ris_power.p_v.iter().any(|p| !(*p >= 0.0)) {
            return bad("p_v needs 10 non-negative entries (bits 1..=10)".into());
        }
        if self.cus.len() != self.cu_count {
            return bad(format!("{} CU positions for cu_count = {}", self.cus.len(), self.cu_count));
        }
        if self.d2d_tx.len() != self.d2d_count || self.d2d_rx.len() != self.d2d_count {
            return bad(format!(
                "{}/{} D2D TX/RX positions for d2d_count = {}",
                self.d2d_tx.len(),
                self.d2d_rx.len(),
                self.d2d_count
            ));
        }
        // Every link needs a positive length for its path loss.
        let mut nodes: Vec<(&str, Point)> = vec![("bs", self.bs), ("ris", self.ris)];
        nodes.extend(self.cus.iter().map(|p| ("cu", *p)));
        nodes.extend(self.d2d_tx.iter().map(|p| ("d2d_tx", *p)));
        nodes.extend(self.d2d_rx.iter().map(|p| ("d2d_rx", *p)));
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if nodes[i].1.distance(&nodes[j].1) == 0.0 {
                    return bad(format!("{} and {} share a position", nodes[i].0, nodes[j].0));
                }
            }
        }
        Ok(())
    }

    /// Resize the CU population, taking positions from the reference list.
    pub fn with_cu_count(mut self, k: usize) -> Result<Self> {
        if k > REFERENCE_CUS.len() {
            return Err(Error::Range(format!(
                "at most {} reference CU positions, requested {k}",
                REFERENCE_CUS.len()
            )));
        }
        self.cu_count = k;
        self.cus = REFERENCE_CUS[..k].to_vec();
        Ok(self)
    }

    pub fn ris_gain_amplitude(&self) -> f64 {
        10f64.powf(self.ris_gain_db / 20.0)
    }

    /// Per-element RIS power table entry for the configured bit depth.
    pub fn p_v(&self, bits: u32) -> f64 {
        self.ris_power.p_v[(bits - 1) as usize]
    }
}

/// One draw of every channel coefficient. Index conventions: `h[l][i]` is
/// TX `i` → RX `l`, `v[l][k]` is CU `k` → RX `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Vec<Complex64>>,
    pub f: Vec<CVec>,
    pub h_tilde: Vec<Complex64>,
    pub f_tilde: Vec<CVec>,
    pub g: Vec<CVec>,
    pub g_tilde: CVec,
    pub u: Vec<Complex64>,
    pub v: Vec<Vec<Complex64>>,
    pub noise_power: f64,
}

impl ChannelRealization {
    pub fn elements(&self) -> usize {
        self.g_tilde.len()
    }

    pub fn d2d_count(&self) -> usize {
        self.f.len()
    }

    pub fn cu_count(&self) -> usize {
        self.f_tilde.len()
    }

    /// Same realization with every RIS-related vector set to zero.
    pub fn without_ris(&self) -> Self {
        let zero = |x: &CVec| CVec::zeros(x.len());
        Self {
            f: self.f.iter().map(zero).collect(),
            f_tilde: self.f_tilde.iter().map(zero).collect(),
            g: self.g.iter().map(zero).collect(),
            g_tilde: zero(&self.g_tilde),
            ..self.clone()
        }
    }

    /// Multiply every channel by `s` (noise untouched).
    pub fn scaled(&self, s: f64) -> Self {
        let c = Complex64::new(s, 0.0);
        let sv = |x: &CVec| x * c;
        Self {
            h: self.h.iter().map(|r| r.iter().map(|z| z * s).collect()).collect(),
            f: self.f.iter().map(sv).collect(),
            h_tilde: self.h_tilde.iter().map(|z| z * s).collect(),
            f_tilde: self.f_tilde.iter().map(sv).collect(),
            g: self.g.iter().map(sv).collect(),
            g_tilde: sv(&self.g_tilde),
            u: self.u.iter().map(|z| z * s).collect(),
            v: self.v.iter().map(|r| r.iter().map(|z| z * s).collect()).collect(),
            noise_power: self.noise_power,
        }
    }
}

/// Uniform linear array response toward `bearing` with half-wavelength
/// spacing: entries `exp(jπ m cos(bearing − axis))`.
pub fn steering_vector(m: usize, bearing: f64, axis: f64) -> CVec {
    let phase = std::f64::consts::PI * (bearing - axis).cos();
    CVec::from_fn(m, |i, _| Complex64::from_polar(1.0, phase * i as f64))
}

/// Circularly symmetric complex Gaussian with unit variance.
fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    Complex64::new(normal.sample(rng), normal.sample(rng))
}

fn rayleigh<R: Rng + ?Sized>(rng: &mut R, gain: f64) -> Complex64 {
    cn01(rng) * gain.sqrt()
}

fn rician<R: Rng + ?Sized>(rng: &mut R, los: &CVec, gain: f64, k: f64, amp: f64) -> CVec {
    let (w_los, w_nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let scale = gain.sqrt() * amp;
    CVec::from_fn(los.len(), |i, _| {
        // Always consume the NLoS draw so the stream layout is independent of k.
        let nlos = cn01(rng);
        (los[i] * w_los + nlos * w_nlos) * scale
    })
}

/// Draw every channel for `cfg`'s topology.
///
/// Draw order (fixed, part of the reproducibility contract): `h` row-major,
/// `u`, `h_tilde`, `v` row-major, `f`, `f_tilde`, `g`, `g_tilde`.
pub fn draw_realization<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    cfg.validate()?;
    let pl = &cfg.path_loss;
    let loss = |a: &Point, b: &Point, ple: f64| path_loss(a.distance(b), ple, pl.reference);
    let (n, k, m) = (cfg.d2d_count, cfg.cu_count, cfg.elements);
    let amp = cfg.ris_gain_amplitude();
    let los = |p: &Point| steering_vector(m, cfg.ris.bearing(p), cfg.ris_array_axis);

    let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for l in 0..n {
        for i in 0..n {
            h[l][i] = rayleigh(rng, loss(&cfg.d2d_tx[i], &cfg.d2d_rx[l], pl.ple_direct)?);
        }
    }
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        u.push(rayleigh(rng, loss(&cfg.d2d_tx[i], &cfg.bs, pl.ple_direct)?));
    }
    let mut h_tilde = Vec::with_capacity(k);
    for c in 0..k {
        h_tilde.push(rayleigh(rng, loss(&cfg.cus[c], &cfg.bs, pl.ple_direct)?));
    }
    let mut v = vec![vec![Complex64::new(0.0, 0.0); k]; n];
    for l in 0..n {
        for c in 0..k {
            v[l][c] = rayleigh(rng, loss(&cfg.cus[c], &cfg.d2d_rx[l], pl.ple_direct)?);
        }
    }
    let mut f = Vec::with_capacity(n);
    for i in 0..n {
        let tx = &cfg.d2d_tx[i];
        f.push(rician(rng, &los(tx), loss(tx, &cfg.ris, pl.ple_ris_other)?, cfg.rician.k1, amp));
    }
    let mut f_tilde = Vec::with_capacity(k);
    for c in 0..k {
        let cu = &cfg.cus[c];
        f_tilde.push(rician(rng, &los(cu), loss(cu, &cfg.ris, pl.ple_ris_other)?, cfg.rician.k2, amp));
    }
    let mut g = Vec::with_capacity(n);
    for l in 0..n {
        let rx = &cfg.d2d_rx[l];
        g.push(rician(rng, &los(rx), loss(rx, &cfg.ris, pl.ple_ris_other)?, cfg.rician.k3, amp));
    }
    let g_tilde = rician(rng, &los(&cfg.bs), loss(&cfg.bs, &cfg.ris, pl.ple_ris_bs)?, cfg.rician.k4, amp);

    Ok(ChannelRealization {
        h,
        f,
        h_tilde,
        f_tilde,
        g,
        g_tilde,
        u,
        v,
        noise_power: cfg.noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(dbm_to_watt(30.0), 1.0);
        assert_relative_eq!(dbm_to_watt(0.0), 1e-3);
        assert_relative_eq!(dbm_to_watt(-114.0), 3.981e-15, max_relative = 1e-3);
        assert_relative_eq!(watt_to_dbm(dbm_to_watt(24.0)), 24.0, epsilon = 1e-12);
        assert_relative_eq!(rate_to_sinr(1.0), 1.0);
    }

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(path_loss(1.0, 4.0, 1e-3).unwrap(), 1e-3);
        assert_relative_eq!(path_loss(10.0, 2.0, 1e-3).unwrap(), 1e-5);
        assert_relative_eq!(path_loss(100.0, 4.0, 1e-3).unwrap(), 1e-11);
        assert!(matches!(path_loss(0.0, 2.0, 1e-3), Err(Error::Domain(_))));
        assert!(path_loss(-3.0, 2.0, 1e-3).is_err());
    }

    #[test]
    fn reference_layout() {
        let cfg = default_topology();
        cfg.validate().unwrap();
        assert_eq!(cfg.cus[2], Point::new(112.0, 136.0));
        assert_eq!(cfg.elements, 200);
        assert_relative_eq!(watt_to_dbm(cfg.p_max_d), 24.0, epsilon = 1e-12);
        assert_eq!(cfg.rician, RicianFactors::uniform(10.0));
        assert_eq!(cfg.clone().with_cu_count(10).unwrap().cus.len(), 10);
        assert!(cfg.with_cu_count(11).is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = default_topology();
        cfg.d2d_count = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = default_topology();
        cfg.noise_power = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = default_topology();
        cfg.bits = 11;
        assert!(cfg.validate().is_err());
        let mut cfg = default_topology();
        cfg.cus[0] = cfg.bs;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pure_los_has_deterministic_magnitude() {
        let mut cfg = default_topology();
        cfg.rician = RicianFactors::uniform(f64::INFINITY);
        let ch = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let pl = path_loss(cfg.d2d_tx[0].distance(&cfg.ris), 2.2, 1e-3).unwrap();
        let expected = (pl * 10f64.powf(0.3)).sqrt();
        for z in ch.f[0].iter() {
            assert_relative_eq!(z.norm(), expected, max_relative = 1e-12);
        }
        let pl_bs = path_loss(cfg.bs.distance(&cfg.ris), 2.0, 1e-3).unwrap();
        for z in ch.g_tilde.iter() {
            assert_relative_eq!(z.norm(), (pl_bs * 10f64.powf(0.3)).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let a = steering_vector(64, 1.1, 0.3);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn same_seed_same_draw() {
        let cfg = default_topology();
        let a = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn without_ris_zeroes_only_ris_links() {
        let ch = draw_realization(&default_topology(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let z = ch.without_ris();
        assert!(z.g_tilde.iter().all(|c| c.norm() == 0.0));
        assert!(z.f.iter().chain(&z.f_tilde).chain(&z.g).all(|x| x.norm() == 0.0));
        assert_eq!(z.h, ch.h);
        assert_eq!(z.v, ch.v);
    }
}
