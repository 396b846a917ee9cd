mod common;

use std::f64::consts::PI;

use dtqw::linalg::{eig_unitary, pauli_exp, tau_sigma, tensor, ComplexMatrix, PauliVector, C64};
use dtqw::protocol::{registry_lookup, Doubling, ProtocolSpec, Symbol, REGISTRY};
use dtqw::spectrum::{bloch, group_velocity_closed, group_velocity_numeric, FD_STEP};
use dtqw::symmetry::{classify, generic_spec};
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = PauliVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            PauliVector([x / n, y / n, z / n])
        })
}

fn matrix4() -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16).prop_map(|v| {
        let rows: Vec<Vec<C64>> = v.chunks(4).map(|r| r.iter().map(|(a, b)| C64::new(*a, *b)).collect()).collect();
        ComplexMatrix::from_rows(&rows).unwrap()
    })
}

fn matrix2() -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4).prop_map(|v| {
        let rows: Vec<Vec<C64>> = v.chunks(2).map(|r| r.iter().map(|(a, b)| C64::new(*a, *b)).collect()).collect();
        ComplexMatrix::from_rows(&rows).unwrap()
    })
}

/// (registry id, steps, angles, momentum).
fn protocol(max_t: u32) -> impl Strategy<Value = (ProtocolSpec, Vec<f64>)> {
    (0..REGISTRY.len(), 1..=max_t, prop::collection::vec(-PI..PI, 4), prop::collection::vec(-PI..PI, 3)).prop_map(
        |(i, t, a, k)| {
            let mut s = registry_lookup(REGISTRY[i]).unwrap().with_steps(t);
            for (j, sym) in s.symbols().into_iter().enumerate() {
                s = s.with_angle(sym, a[j]).unwrap();
            }
            let k = k[..s.dimension].to_vec();
            (s, k)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exponentials_compose(a in axis(), x in -10.0..10.0f64, y in -10.0..10.0f64) {
        let lhs = pauli_exp(a, x).unwrap() * pauli_exp(a, y).unwrap();
        prop_assert!(lhs.dist(&pauli_exp(a, x + y).unwrap()) <= 1e-12);
    }

    #[test]
    fn tensor_mixed_product(a in matrix2(), b in matrix2(), c in matrix2(), d in matrix2()) {
        let lhs = tensor(&a, &b).unwrap() * tensor(&c, &d).unwrap();
        prop_assert!(lhs.dist(&tensor(&(a * c), &(b * d)).unwrap()) <= 1e-12);
    }

    #[test]
    fn eigen_decomposition_of_walk_unitaries((s, k) in protocol(20)) {
        let u = s.build_unitary(&k).unwrap();
        let pairs = eig_unitary(&u).unwrap();
        let prod = pairs.iter().fold(C64::new(1.0, 0.0), |p, e| p * e.value);
        prop_assert!((prod.norm() - 1.0).abs() <= 1e-12);
        for (i, p) in pairs.iter().enumerate() {
            for (j, q) in pairs.iter().enumerate() {
                let ip: C64 = p.vector.iter().zip(&q.vector).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).norm() <= 1e-10, "{} {}", i, j);
            }
        }
    }

    #[test]
    fn random_matrix_eigen_of_unitary_part(m in matrix4()) {
        // exp(0.8i(M + M†)) by truncated series and repeated squaring.
        let h = m + m.adjoint();
        let u = (0..40).fold((ComplexMatrix::identity(4), ComplexMatrix::identity(4)), |(acc, term), n| {
            let term = term * h.scale(C64::new(0.0, 0.1 / (n as f64 + 1.0)));
            (acc + term, term)
        }).0;
        let mut v = u;
        for _ in 0..3 { v = v * v; }
        prop_assert!(v.unitarity_defect() <= 1e-9);
        let pairs = eig_unitary(&v).unwrap();
        let prod = pairs.iter().fold(C64::new(1.0, 0.0), |p, e| p * e.value);
        prop_assert!((prod.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn angle_period((s, k) in protocol(12), which in 0usize..4) {
        let syms = s.symbols();
        let sym = syms[which % syms.len()];
        let shifted = s.clone().with_angle(sym, s.angle(sym).unwrap() + 4.0 * PI / f64::from(s.steps)).unwrap();
        prop_assert!(s.build_unitary(&k).unwrap().dist(&shifted.build_unitary(&k).unwrap()) <= 1e-12);
    }

    #[test]
    fn momentum_period((s, k) in protocol(12), axis in 0usize..3) {
        let axis = axis % s.dimension;
        let mut kp = k.clone();
        kp[axis] += 2.0 * PI;
        prop_assert!(s.build_unitary(&k).unwrap().dist(&s.build_unitary(&kp).unwrap()) <= 1e-12);
    }

    #[test]
    fn doubled_blocks_are_exact((s, k) in protocol(12)) {
        if matches!(s.doubled, Doubling::TransposeBlock | Doubling::ConjugateBlock) {
            let u = s.build_unitary(&k).unwrap();
            prop_assert_eq!(u.block(0, 1).max_abs(), 0.0);
            prop_assert_eq!(u.block(1, 0).max_abs(), 0.0);
        }
    }

    #[test]
    fn bloch_normalization_and_range((s, k) in protocol(12)) {
        if s.is_two_band() {
            let b = bloch(&s, &k).unwrap();
            prop_assert!((b.d0 * b.d0 + b.d_norm().powi(2) - 1.0).abs() <= 1e-10);
            prop_assert!((0.0..=PI).contains(&b.e_plus()));
            if b.is_gapless() {
                prop_assert!(b.e_plus() <= 1e-8 || PI - b.e_plus() <= 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn walk_unitarity((s, k) in protocol(20)) {
        let u = s.build_unitary(&k).unwrap();
        let d = (u.adjoint() * u).dist(&ComplexMatrix::identity(u.dim()));
        prop_assert!(d <= 1e-12, "{}: {:e}", s.id, d);
    }

    #[test]
    fn velocity_bounds(t in 1u32..=12, a in -PI..PI, b in -PI..PI, k in -PI..PI) {
        for (id, bound) in [("1d-chs", 1.0), ("1d-phs", 2.0)] {
            let s = registry_lookup(id).unwrap().with_steps(t).with_angles(&[(Symbol::Alpha, a), (Symbol::Beta, b)]).unwrap();
            if bloch(&s, &[k]).unwrap().gap() < 1e-3 {
                continue;
            }
            let v = group_velocity_closed(&s, &[k], 0).unwrap();
            prop_assert!(v.abs() <= bound + 1e-9, "{} T={} {}", id, t, v);
            let fd = group_velocity_numeric(&s, &[k], 0, FD_STEP).unwrap();
            prop_assert!((v - fd).abs() <= 1e-6);
        }
    }
}

#[test]
fn tau_sigma_is_hermitian_and_squares_to_identity() {
    for i in 0..4 {
        for j in 0..4 {
            let m = tau_sigma(i, j);
            assert_eq!(m.dist(&m.adjoint()), 0.0);
            assert!((m * m).dist(&ComplexMatrix::identity(4)) < 1e-15);
        }
    }
}

/// E(k) = E(−k) for every protocol whose classification contains TRS.
#[test]
fn time_reversal_energy_symmetry() {
    for id in REGISTRY {
        let s = generic_spec(id).unwrap();
        if !classify(&s).unwrap().trs.present {
            continue;
        }
        let worst = common::trs_energy_defect(&s, 64);
        assert!(worst <= 1e-10, "{id}: {worst:e}");
    }
}
