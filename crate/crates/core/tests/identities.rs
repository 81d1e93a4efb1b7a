//! Exact identities of the transformed problems, checked on random draws.

mod common;

use common::{close, flat_channel, powers, random_instance};
use num_complex::Complex64;
use risd2d_core::numerics::eig_floor_check_with;
use risd2d_core::se_optimizer::{
    assemble, eta_update, fp_state, ra_value, rate_lower_bound_value, rb_quadratic, rb_ratio,
    sinr_cu, sinr_d2d, sinr_surrogate_cu, sinr_surrogate_d2d, sum_rate, x_update, y_update,
};
use risd2d_core::*;

const DRAWS: u64 = 100;

#[test]
fn rate_bound_is_tight_at_expansion_point() {
    for seed in 0..DRAWS {
        let (_, _, model, alloc) = random_instance(seed);
        let g = model.gains(&alloc.theta);
        let lb = rate_lower_bound_value(&model, &g, &alloc.p, &alloc.p);
        let r = model.sum_rate(&alloc);
        assert!((lb - r).abs() <= 1e-9, "draw {seed}: {lb} vs {r}");
    }
}

#[test]
fn rate_bound_is_below_rate_and_tangent() {
    for seed in 0..20 {
        let (_, _, model, alloc) = random_instance(seed);
        let g = model.gains(&alloc.theta);
        let p0 = &alloc.p;
        // Global minorant.
        for t in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let p = p0 * (1.0 - t) + &model.p_max * t;
            assert!(rate_lower_bound_value(&model, &g, p0, &p) <= model.sum_rate_at(&p, &g) + 1e-9);
        }
        // Same gradient at p0, by central differences.
        for i in 0..p0.len() {
            let h = 1e-6 * model.p_max[i];
            let mut up = p0.clone();
            let mut dn = p0.clone();
            up[i] += h;
            dn[i] -= h;
            let d_lb = (rate_lower_bound_value(&model, &g, p0, &up) - rate_lower_bound_value(&model, &g, p0, &dn)) / (2.0 * h);
            let d_r = (model.sum_rate_at(&up, &g) - model.sum_rate_at(&dn, &g)) / (2.0 * h);
            assert!(close(d_lb * model.p_max[i], d_r * model.p_max[i], 1e-5), "draw {seed} coord {i}: {d_lb} vs {d_r}");
        }
    }
}

#[test]
fn decoupled_objective_equals_rate_at_optimal_eta() {
    for seed in 0..DRAWS {
        let (_, _, model, alloc) = random_instance(seed);
        let (ed, ec) = eta_update(&model, &alloc);
        let ra = ra_value(&model, &alloc, &ed, &ec);
        let r_nats = model.sum_rate(&alloc) * std::f64::consts::LN_2;
        assert!((ra - r_nats).abs() <= 1e-10 * r_nats.max(1.0), "draw {seed}: {ra} vs {r_nats}");
        // Any other η gives less.
        let shifted: Vec<f64> = ed.iter().map(|e| e * 1.1 + 0.1).collect();
        assert!(ra_value(&model, &alloc, &shifted, &ec) < ra);
    }
}

#[test]
fn quadratic_transform_matches_ratio_form() {
    for seed in 0..DRAWS {
        let (_, _, model, alloc) = random_instance(seed);
        let (ed, ec) = eta_update(&model, &alloc);
        let (yd, yc) = y_update(&model, &alloc, &ed, &ec);
        let q = rb_quadratic(&model, &alloc, &ed, &ec, &yd, &yc);
        let r = rb_ratio(&model, &alloc, &ed, &ec);
        assert!(close(q, r, 1e-10), "draw {seed}: {q} vs {r}");
    }
}

#[test]
fn y_is_stationary() {
    for seed in 0..20 {
        let (_, _, model, alloc) = random_instance(seed);
        let (ed, ec) = eta_update(&model, &alloc);
        let (yd, yc) = y_update(&model, &alloc, &ed, &ec);
        let f = |yd: &[Complex64], yc: &[Complex64]| rb_quadratic(&model, &alloc, &ed, &ec, yd, yc);
        let base = f(&yd, &yc);
        for i in 0..yd.len() + yc.len() {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let (mut up_d, mut up_c, mut dn_d, mut dn_c) = (yd.clone(), yc.clone(), yd.clone(), yc.clone());
                let y = if i < yd.len() { yd[i] } else { yc[i - yd.len()] };
                let h = dir * 1e-3 * y.norm();
                if i < yd.len() {
                    up_d[i] += h;
                    dn_d[i] -= h;
                } else {
                    up_c[i - yd.len()] += h;
                    dn_c[i - yd.len()] -= h;
                }
                let resid = (f(&up_d, &up_c) - f(&dn_d, &dn_c)).abs() / (2.0 * h.norm()) * y.norm() / base.abs();
                assert!(resid < 1e-8, "draw {seed} link {i}: {resid}");
                assert!(f(&up_d, &up_c) <= base);
            }
        }
    }
}

#[test]
fn sinr_minorant_is_tight_at_optimal_x() {
    for seed in 0..DRAWS {
        let (_, _, model, alloc) = random_instance(seed);
        let g = model.gains(&alloc.theta);
        let (xd, xc) = x_update(&model, &alloc);
        for (n, x) in xd.iter().enumerate() {
            let s = sinr_surrogate_d2d(&model, &alloc, n, *x);
            assert!(close(s, model.sinr_d2d(n, &alloc.p, &g), 1e-9), "draw {seed} d2d {n}");
            // Stationary in x: both neighbours are lower.
            let h = 1e-3 * x.norm();
            for d in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
                let up = sinr_surrogate_d2d(&model, &alloc, n, x + d);
                let dn = sinr_surrogate_d2d(&model, &alloc, n, x - d);
                assert!(up <= s && dn <= s);
                assert!((up - dn).abs() / (2.0 * h) * x.norm() / s < 1e-8);
            }
        }
        for (k, x) in xc.iter().enumerate() {
            let s = sinr_surrogate_cu(&model, &alloc, k, *x);
            assert!(close(s, model.sinr_cu(k, &alloc.p, &g), 1e-9), "draw {seed} cu {k}");
        }
    }
}

#[test]
fn assembled_program_matches_direct_evaluation() {
    for seed in 0..DRAWS {
        let (_, _, model, alloc) = random_instance(seed);
        let st = fp_state(&model, &alloc);
        let prog = assemble(&model, &alloc, &st);
        let v = alloc.theta.map(|z| z.conj());
        let direct = rb_quadratic(&model, &alloc, &st.eta_d, &st.eta_c, &st.y_d, &st.y_c);
        assert!(close(prog.objective.evaluate(&prog.dictionary, &v), direct, 1e-9), "draw {seed}");
        // Constraint functions are the SINR minorants, tight at θ.
        let g = model.gains(&alloc.theta);
        let (sd, sc) = model.sinrs(&alloc.p, &g);
        for (c, s) in prog.constraints.iter().zip(sd.iter().chain(&sc)) {
            assert!(close(c.function.evaluate(&prog.dictionary, &v), *s, 1e-9));
        }
        // The quadratic form is PSD (relative to its own scale).
        let b = prog.objective.b_matrix(&prog.dictionary, prog.dim);
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max) * prog.dim as f64;
        assert!(eig_floor_check_with(&b, 1e-10 * scale.max(1e-300)), "draw {seed}");
    }
}

#[test]
fn zero_y_gives_empty_quadratic() {
    let (_, _, model, alloc) = random_instance(3);
    let mut st = fp_state(&model, &alloc);
    st.y_d.iter_mut().chain(st.y_c.iter_mut()).for_each(|y| *y = Complex64::new(0.0, 0.0));
    let prog = assemble(&model, &alloc, &st);
    let b = prog.objective.b_matrix(&prog.dictionary, prog.dim);
    let e = prog.objective.e_vector(&prog.dictionary, prog.dim);
    assert!(b.iter().all(|z| z.norm() == 0.0));
    assert!(e.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn eta_equals_sinr() {
    let (_, _, model, alloc) = random_instance(5);
    let (ed, ec) = eta_update(&model, &alloc);
    let (sd, sc) = model.sinrs(&alloc.p, &model.gains(&alloc.theta));
    assert_eq!((ed, ec), (sd, sc));
    let zero = Allocation {
        p: alloc.p.map(|_| 0.0),
        theta: alloc.theta.clone(),
    };
    let (ed, ec) = eta_update(&model, &zero);
    assert!(ed.iter().chain(&ec).all(|e| *e == 0.0));
}

#[test]
fn zero_channels_give_zero_auxiliaries() {
    let ch = flat_channel(1, 1, 3, Complex64::new(0.0, 0.0), 1e-3);
    let mut cfg = common::small_config(3);
    cfg.noise_power = 1e-3;
    let pairing = Pairing::new(vec![0], 1).unwrap();
    let model = se_optimizer::LinkModel::new(&ch, &pairing, &cfg).unwrap();
    let alloc = Allocation {
        p: powers(&[0.1, 0.1]),
        theta: CVec::from_element(3, Complex64::new(1.0, 0.0)),
    };
    let (ed, ec) = eta_update(&model, &alloc);
    let (yd, yc) = y_update(&model, &alloc, &ed, &ec);
    let (xd, xc) = x_update(&model, &alloc);
    assert!(yd.iter().chain(&yc).chain(&xd).chain(&xc).all(|z| z.norm() == 0.0));
}

#[test]
fn sinr_hand_cases() {
    // M = 1, every channel 1, unit powers and noise: |1+1|² / (|1+1|² + 1).
    let ch = flat_channel(1, 1, 1, Complex64::new(1.0, 0.0), 1.0);
    let pairing = Pairing::new(vec![0], 1).unwrap();
    let alloc = Allocation {
        p: powers(&[1.0, 1.0]),
        theta: CVec::from_element(1, Complex64::new(1.0, 0.0)),
    };
    assert!((sinr_d2d(0, &alloc, &pairing, &ch).unwrap() - 0.8).abs() < 1e-15);
    assert!((sinr_cu(0, &alloc, &pairing, &ch).unwrap() - 0.8).abs() < 1e-15);

    // θ = 0 and a silent CU: pure direct-link SNR.
    let mut ch = flat_channel(1, 2, 1, Complex64::new(1e-6, 0.0), 1e-15);
    ch.h_tilde[1] = Complex64::new(0.0, 1e-6);
    let alloc = Allocation {
        p: powers(&[1.0, 0.0, 1.0]),
        theta: CVec::zeros(1),
    };
    assert!((sinr_d2d(0, &alloc, &pairing_of(2), &ch).unwrap() - 1000.0).abs() < 1e-9);
    // CU 1 is unpaired: SNR with no interference.
    assert!((sinr_cu(1, &alloc, &pairing_of(2), &ch).unwrap() - 1000.0).abs() < 1e-9);
}

fn pairing_of(k: usize) -> Pairing {
    Pairing::new(vec![0], k).unwrap()
}

#[test]
fn sum_rate_hand_cases() {
    // Cross channels zero, direct SNR 1 everywhere: six links at 1 bps/Hz.
    let mut ch = flat_channel(2, 4, 2, Complex64::new(1.0, 0.0), 1.0);
    for row in ch.v.iter_mut() {
        row.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
    ch.u.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    let pairing = Pairing::new(vec![0, 1], 4).unwrap();
    let alloc = Allocation {
        p: powers(&[1.0; 6]),
        theta: CVec::zeros(2),
    };
    assert!((sum_rate(&alloc, &pairing, &ch).unwrap() - 6.0).abs() < 1e-12);
    let silent = Allocation {
        p: powers(&[0.0; 6]),
        theta: CVec::zeros(2),
    };
    assert_eq!(sum_rate(&silent, &pairing, &ch).unwrap(), 0.0);
    assert!(sum_rate(&alloc, &Pairing::new(vec![0], 4).unwrap(), &ch).is_err());
}

#[test]
fn normalized_model_matches_physical_units_and_a_scalar_loop() {
    for seed in 0..20 {
        let (cfg, ch, model, alloc) = random_instance(seed);
        let g = model.gains(&alloc.theta);
        let pairing = &model.pairing;
        for n in 0..cfg.d2d_count {
            let phys = sinr_d2d(n, &alloc, pairing, &ch).unwrap();
            assert!(close(model.sinr_d2d(n, &alloc.p, &g), phys, 1e-10));
            // Scalar loop over elements, written independently.
            let k = pairing.cu_of(n);
            let (mut s, mut i) = (ch.h[n][n], ch.v[n][k]);
            for m in 0..cfg.elements {
                s += ch.g[n][m].conj() * alloc.theta[m] * ch.f[n][m];
                i += ch.g[n][m].conj() * alloc.theta[m] * ch.f_tilde[k][m];
            }
            let pc = alloc.p[cfg.d2d_count + k];
            let want = alloc.p[n] * s.norm_sqr() / (pc * i.norm_sqr() + ch.noise_power);
            assert!(close(phys, want, 1e-10));
        }
        for k in 0..cfg.cu_count {
            let phys = sinr_cu(k, &alloc, pairing, &ch).unwrap();
            assert!(close(model.sinr_cu(k, &alloc.p, &g), phys, 1e-10));
        }
        assert!(close(model.sum_rate(&alloc), sum_rate(&alloc, pairing, &ch).unwrap(), 1e-12));
    }
}
