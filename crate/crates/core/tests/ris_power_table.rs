//! Per-element RIS power against the published table (mW, three decimals).

use risd2d_core::channel::RisPowerParams;
use risd2d_core::ee_optimizer::{per_element_power, RisPowerModel};

const TABLE: [(usize, [f64; 10]); 3] = [
    (200, [5.970, 6.000, 6.060, 6.180, 6.420, 6.900, 7.860, 9.780, 13.620, 21.300]),
    (500, [2.406, 2.436, 2.496, 2.616, 2.856, 3.336, 4.296, 6.216, 10.056, 17.736]),
    (1000, [1.218, 1.248, 1.308, 1.428, 1.668, 2.148, 3.108, 5.028, 8.868, 16.548]),
];

#[test]
fn all_thirty_cells_within_half_a_percent() {
    let params = RisPowerParams::default();
    let mut worst = 0.0f64;
    for (m, row) in TABLE {
        for (i, want) in row.iter().enumerate() {
            let model = RisPowerModel {
                p_fpga: params.p_fpga,
                sampling_hz: params.sampling_hz,
                p_v: params.p_v.clone(),
                bits: i as u32 + 1,
                elements: m,
            };
            let got = per_element_power(&model).unwrap() * 1e3;
            let rel = (got - want).abs() / want;
            worst = worst.max(rel);
            assert!(rel <= 5e-3, "M={m} B={}: {got:.4} mW vs {want}", i + 1);
        }
    }
    // The residual is rounding only.
    assert!(worst < 1e-3, "worst relative error {worst}");
}
