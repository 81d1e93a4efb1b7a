//! Fixtures shared by the benchmarks.

use risd2d_core::harness::{draw_seed, realization};
use risd2d_core::se_optimizer::{initial_point, random_phases, LinkModel};
use risd2d_core::{default_topology, rcs_pairing, Allocation, ChannelRealization, SystemConfig};

/// One reference-cell draw with `m` elements and a feasible starting point.
/// Tries successive draws until the starting point exists.
pub struct Fixture {
    pub cfg: SystemConfig,
    pub ch: ChannelRealization,
    pub model: LinkModel,
    pub alloc: Allocation,
}

impl Fixture {
    pub fn new(m: usize) -> Self {
        let mut cfg = default_topology();
        cfg.elements = m;
        for i in 0.. {
            cfg.seed = draw_seed(0, i);
            let ch = realization(&cfg, cfg.seed).expect("valid topology");
            let pairing = rcs_pairing(&ch, &cfg).expect("non-degenerate draw");
            let model = LinkModel::new(&ch, &pairing, &cfg).expect("matching sizes");
            if let Some(alloc) = initial_point(&model, &random_phases(m, cfg.seed), true) {
                return Self { cfg, ch, model, alloc };
            }
        }
        unreachable!()
    }
}
