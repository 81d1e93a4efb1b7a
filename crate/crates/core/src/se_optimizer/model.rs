use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::CVec;
use crate::pairing::Pairing;

use super::Allocation;

/// One effective link `direct + Σ_m θ_m·cascade_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub direct: Complex64,
    pub cascade: CVec,
}

impl Link {
    fn new(direct: Complex64, rx: &CVec, tx: &CVec, scale: f64) -> Self {
        let cascade = CVec::from_fn(rx.len(), |m, _| rx[m].conj() * tx[m] * scale);
        Self {
            direct: direct * scale,
            cascade,
        }
    }

    pub fn gain(&self, theta: &CVec) -> Complex64 {
        self.direct + theta.dot(&self.cascade)
    }
}

/// Effective channels of every link at one reflection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// D2D `n` at its own receiver.
    pub dd: Vec<Complex64>,
    /// Paired CU at D2D receiver `n`.
    pub cd: Vec<Complex64>,
    /// CU `k` at the BS.
    pub cc: Vec<Complex64>,
    /// Paired D2D transmitter at the BS for CU `k` (zero when unpaired).
    pub dc: Vec<Complex64>,
}

/// Channels of a realization under a fixed pairing, normalized by the noise
/// amplitude so every SINR reads `P|a|² / (P'|a'|² + 1)`.
///
/// Power vectors are ordered `(P^d_1..P^d_N, P^c_1..P^c_K)`.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub pairing: Pairing,
    pub dd: Vec<Link>,
    pub cd: Vec<Link>,
    pub cc: Vec<Link>,
    pub dc: Vec<Option<Link>>,
    pub p_max: DVector<f64>,
    pub gamma_min_d: f64,
    pub gamma_min_c: f64,
}

impl LinkModel {
    pub fn new(ch: &ChannelRealization, pairing: &Pairing, cfg: &SystemConfig) -> Result<Self> {
        let (n, k) = (ch.d2d_count(), ch.cu_count());
        if pairing.d2d_count() != n || pairing.cu_count() != k {
            return Err(Error::Dimension(format!(
                "pairing is {}x{}, realization is {n}x{k}",
                pairing.d2d_count(),
                pairing.cu_count()
            )));
        }
        if !(ch.noise_power > 0.0) {
            return Err(Error::Domain("noise power must be positive".into()));
        }
        let s = 1.0 / ch.noise_power.sqrt();
        let dd = (0..n).map(|i| Link::new(ch.h[i][i], &ch.g[i], &ch.f[i], s)).collect();
        let cd = (0..n)
            .map(|i| {
                let c = pairing.cu_of(i);
                Link::new(ch.v[i][c], &ch.g[i], &ch.f_tilde[c], s)
            })
            .collect();
        let cc = (0..k)
            .map(|c| Link::new(ch.h_tilde[c], &ch.g_tilde, &ch.f_tilde[c], s))
            .collect();
        let dc = (0..k)
            .map(|c| {
                pairing
                    .d2d_of(c)
                    .map(|i| Link::new(ch.u[i], &ch.g_tilde, &ch.f[i], s))
            })
            .collect();
        let mut p_max = DVector::zeros(n + k);
        p_max.rows_mut(0, n).fill(cfg.p_max_d);
        p_max.rows_mut(n, k).fill(cfg.p_max_c);
        Ok(Self {
            pairing: pairing.clone(),
            dd,
            cd,
            cc,
            dc,
            p_max,
            gamma_min_d: cfg.gamma_min_d,
            gamma_min_c: cfg.gamma_min_c,
        })
    }

    pub fn d2d_count(&self) -> usize {
        self.dd.len()
    }

    pub fn cu_count(&self) -> usize {
        self.cc.len()
    }

    pub fn elements(&self) -> usize {
        self.cc[0].cascade.len()
    }

    /// Index of CU `k`'s power in the power vector.
    pub fn cu_index(&self, k: usize) -> usize {
        self.d2d_count() + k
    }

    pub fn gains(&self, theta: &CVec) -> Gains {
        Gains {
            dd: self.dd.iter().map(|l| l.gain(theta)).collect(),
            cd: self.cd.iter().map(|l| l.gain(theta)).collect(),
            cc: self.cc.iter().map(|l| l.gain(theta)).collect(),
            dc: self
                .dc
                .iter()
                .map(|l| l.as_ref().map_or(Complex64::new(0.0, 0.0), |l| l.gain(theta)))
                .collect(),
        }
    }

    /// Interference-plus-noise at D2D receiver `n` (noise normalized to 1).
    pub fn interference_d2d(&self, n: usize, p: &DVector<f64>, g: &Gains) -> f64 {
        p[self.cu_index(self.pairing.cu_of(n))] * g.cd[n].norm_sqr() + 1.0
    }

    pub fn interference_cu(&self, k: usize, p: &DVector<f64>, g: &Gains) -> f64 {
        match self.pairing.d2d_of(k) {
            Some(n) => p[n] * g.dc[k].norm_sqr() + 1.0,
            None => 1.0,
        }
    }

    pub fn sinr_d2d(&self, n: usize, p: &DVector<f64>, g: &Gains) -> f64 {
        p[n] * g.dd[n].norm_sqr() / self.interference_d2d(n, p, g)
    }

    pub fn sinr_cu(&self, k: usize, p: &DVector<f64>, g: &Gains) -> f64 {
        p[self.cu_index(k)] * g.cc[k].norm_sqr() / self.interference_cu(k, p, g)
    }

    /// `(SINR of every D2D link, SINR of every CU)`.
    pub fn sinrs(&self, p: &DVector<f64>, g: &Gains) -> (Vec<f64>, Vec<f64>) {
        (
            (0..self.d2d_count()).map(|n| self.sinr_d2d(n, p, g)).collect(),
            (0..self.cu_count()).map(|k| self.sinr_cu(k, p, g)).collect(),
        )
    }

    pub fn sum_rate_at(&self, p: &DVector<f64>, g: &Gains) -> f64 {
        let (d, c) = self.sinrs(p, g);
        d.iter().chain(&c).map(|s| s.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
    }

    pub fn sum_rate(&self, alloc: &Allocation) -> f64 {
        self.sum_rate_at(&alloc.p, &self.gains(&alloc.theta))
    }

    /// Largest relative shortfall `(γ_min − γ)/max(1, γ_min)` over all links;
    /// non-positive when every rate floor holds.
    pub fn violation_at(&self, p: &DVector<f64>, g: &Gains) -> f64 {
        let (d, c) = self.sinrs(p, g);
        let vd = d
            .iter()
            .map(|s| (self.gamma_min_d - s) / self.gamma_min_d.max(1.0));
        let vc = c
            .iter()
            .map(|s| (self.gamma_min_c - s) / self.gamma_min_c.max(1.0));
        vd.chain(vc).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violation(&self, alloc: &Allocation) -> f64 {
        self.violation_at(&alloc.p, &self.gains(&alloc.theta))
    }

    pub fn is_feasible(&self, alloc: &Allocation, tol: f64) -> bool {
        self.violation(alloc) <= tol
            && alloc.p.iter().zip(self.p_max.iter()).all(|(p, m)| *p >= -tol * m && *p <= m * (1.0 + tol))
            && alloc.theta.iter().all(|t| t.norm_sqr() <= 1.0 + tol)
    }
}

fn check_alloc(alloc: &Allocation, pairing: &Pairing, ch: &ChannelRealization) -> Result<()> {
    let (n, k) = (ch.d2d_count(), ch.cu_count());
    if alloc.p.len() != n + k || alloc.theta.len() != ch.elements() {
        return Err(Error::Dimension(format!(
            "allocation has {} powers and {} elements; expected {} and {}",
            alloc.p.len(),
            alloc.theta.len(),
            n + k,
            ch.elements()
        )));
    }
    if pairing.d2d_count() != n || pairing.cu_count() != k {
        return Err(Error::Dimension("pairing does not match the realization".into()));
    }
    Ok(())
}

fn through_ris(rx: &CVec, theta: &CVec, tx: &CVec) -> Complex64 {
    rx.iter()
        .zip(theta.iter())
        .zip(tx.iter())
        .map(|((g, t), f)| g.conj() * t * f)
        .sum()
}

/// SINR of D2D link `n` in physical units.
pub fn sinr_d2d(
    n: usize,
    alloc: &Allocation,
    pairing: &Pairing,
    ch: &ChannelRealization,
) -> Result<f64> {
    check_alloc(alloc, pairing, ch)?;
    if n >= ch.d2d_count() {
        return Err(Error::Range(format!("D2D index {n} out of range")));
    }
    let signal = through_ris(&ch.g[n], &alloc.theta, &ch.f[n]) + ch.h[n][n];
    let k = pairing.cu_of(n);
    let interf = through_ris(&ch.g[n], &alloc.theta, &ch.f_tilde[k]) + ch.v[n][k];
    let pk = alloc.p[ch.d2d_count() + k];
    Ok(alloc.p[n] * signal.norm_sqr() / (pk * interf.norm_sqr() + ch.noise_power))
}

/// SINR of CU `k` at the BS in physical units.
pub fn sinr_cu(k: usize, alloc: &Allocation, pairing: &Pairing, ch: &ChannelRealization) -> Result<f64> {
    check_alloc(alloc, pairing, ch)?;
    if k >= ch.cu_count() {
        return Err(Error::Range(format!("CU index {k} out of range")));
    }
    let signal = through_ris(&ch.g_tilde, &alloc.theta, &ch.f_tilde[k]) + ch.h_tilde[k];
    let mut denom = ch.noise_power;
    if let Some(n) = pairing.d2d_of(k) {
        let interf = through_ris(&ch.g_tilde, &alloc.theta, &ch.f[n]) + ch.u[n];
        denom += alloc.p[n] * interf.norm_sqr();
    }
    Ok(alloc.p[ch.d2d_count() + k] * signal.norm_sqr() / denom)
}

/// Network sum rate in bps/Hz.
pub fn sum_rate(alloc: &Allocation, pairing: &Pairing, ch: &ChannelRealization) -> Result<f64> {
    let mut r = 0.0;
    for n in 0..ch.d2d_count() {
        r += sinr_d2d(n, alloc, pairing, ch)?.ln_1p();
    }
    for k in 0..ch.cu_count() {
        r += sinr_cu(k, alloc, pairing, ch)?.ln_1p();
    }
    Ok(r / std::f64::consts::LN_2)
}
