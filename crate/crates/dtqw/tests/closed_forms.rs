mod common;

use common::*;
use dtqw::protocol::REGISTRY;
use dtqw::spectrum::{
    bloch, d_closed_form, group_velocity_closed, group_velocity_numeric, rho_closed_form, CLOSED_FORM_IDS, FD_STEP,
};

#[test]
fn registry_matches_independent_products() {
    let mut r = rng(11);
    for id in REGISTRY.iter().filter(|id| !id.ends_with("diii") && !id.ends_with("cii") && !id.ends_with("aii") && !id.ends_with("-c")) {
        for _ in 0..200 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let err = s.build_unitary(&k).unwrap().dist(&oracle_unitary(&s, &k));
            assert!(err < 1e-12, "{id}: {err:e}");
        }
    }
}

#[test]
fn rho_matches_oracle() {
    let mut r = rng(1);
    for id in CLOSED_FORM_IDS {
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let (d0, _) = oracle_decompose(&oracle_unitary(&s, &k));
            worst = worst.max((rho_closed_form(&s, &k).unwrap() - d0).abs());
        }
        assert!(worst <= 1e-10, "{id}: {worst:e}");
    }
}

#[test]
fn d_matches_oracle_with_positive_sign() {
    let mut r = rng(2);
    for id in CLOSED_FORM_IDS {
        for _ in 0..1000 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let (_, d) = oracle_decompose(&oracle_unitary(&s, &k));
            let c = d_closed_form(&s, &k).unwrap();
            let err = c.iter().zip(d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "{id} at {k:?}: {err:e}");
        }
    }
}

#[test]
fn decomposition_matches_oracle() {
    let mut r = rng(3);
    for id in CLOSED_FORM_IDS {
        for _ in 0..200 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let b = bloch(&s, &k).unwrap();
            let (d0, d) = oracle_decompose(&oracle_unitary(&s, &k));
            assert!((b.d0 - d0).abs() < 1e-12);
            assert!(b.d.iter().zip(d).all(|(a, c)| (a - c).abs() < 1e-12));
            assert!((b.d0 * b.d0 + b.d_norm().powi(2) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn velocity_matches_finite_difference() {
    let mut r = rng(4);
    for id in CLOSED_FORM_IDS {
        let mut n = 0;
        while n < 300 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            if bloch(&s, &k).unwrap().gap() < 1e-2 {
                continue;
            }
            n += 1;
            for axis in 0..s.dimension {
                let v = group_velocity_closed(&s, &k, axis).unwrap();
                let mut kp = k.clone();
                let mut km = k.clone();
                kp[axis] += FD_STEP;
                km[axis] -= FD_STEP;
                let fd = (oracle_energy(&s, &kp) - oracle_energy(&s, &km)) / (2.0 * FD_STEP);
                assert!((v - fd).abs() <= 1e-6, "{id} axis {axis} at {k:?}: {v} vs {fd}");
                let num = group_velocity_numeric(&s, &k, axis, FD_STEP).unwrap();
                assert!((v - num).abs() <= 1e-6);
            }
        }
    }
}
