#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risd2d_core::channel::REFERENCE_CUS;
use risd2d_core::se_optimizer::LinkModel;
use risd2d_core::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a − b| ≤ tol·max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn random_theta<R: Rng>(m: usize, rng: &mut R) -> CVec {
    CVec::from_fn(m, |_, _| Complex64::from_polar(rng.random_range(0.0..=1.0f64).sqrt(), rng.random_range(0.0..std::f64::consts::TAU)))
}

/// Reference topology, one realization, the RCS pairing and a random
/// allocation (powers in `(0, p_max]`, reflection in the unit polydisc).
pub fn random_instance(seed: u64) -> (SystemConfig, ChannelRealization, LinkModel, Allocation) {
    let mut cfg = default_topology();
    cfg.seed = seed;
    let ch = draw_realization(&cfg, &mut rng(seed)).unwrap();
    let pairing = rcs_pairing(&ch, &cfg).unwrap();
    let model = LinkModel::new(&ch, &pairing, &cfg).unwrap();
    let mut r = rng(seed ^ 0xA5A5);
    let p = model.p_max.map(|m| m * r.random_range(0.05..=1.0));
    let theta = random_theta(cfg.elements, &mut r);
    (cfg, ch, model, Allocation { p, theta })
}

/// One D2D pair, one CU, `m` elements.
pub fn small_config(m: usize) -> SystemConfig {
    let mut cfg = default_topology();
    cfg.d2d_count = 1;
    cfg.cu_count = 1;
    cfg.cus = vec![REFERENCE_CUS[0]];
    cfg.d2d_tx.truncate(1);
    cfg.d2d_rx.truncate(1);
    cfg.elements = m;
    cfg
}

/// Every channel equal to `c`; `n` D2D pairs, `k` CUs, `m` elements, noise `noise`.
pub fn flat_channel(n: usize, k: usize, m: usize, c: Complex64, noise: f64) -> ChannelRealization {
    ChannelRealization {
        h: vec![vec![c; n]; n],
        f: vec![CVec::from_element(m, c); n],
        h_tilde: vec![c; k],
        f_tilde: vec![CVec::from_element(m, c); k],
        g: vec![CVec::from_element(m, c); n],
        g_tilde: CVec::from_element(m, c),
        u: vec![c; n],
        v: vec![vec![c; k]; n],
        noise_power: noise,
    }
}

pub fn powers(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
