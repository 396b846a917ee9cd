#![allow(dead_code)]

use std::f64::consts::PI;

use dtqw::linalg::{pauli_exp, ComplexMatrix, PauliVector, C64};
use dtqw::protocol::{registry_lookup, ProtocolSpec, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spec: angles in [−π, π], T in 1..=12.
pub fn random_spec(id: &str, r: &mut ChaCha8Rng) -> ProtocolSpec {
    let mut s = registry_lookup(id).unwrap().with_steps(r.gen_range(1..=12));
    for sym in s.symbols() {
        s = s.with_angle(sym, r.gen_range(-PI..=PI)).unwrap();
    }
    s
}

pub fn random_k(dim: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| r.gen_range(-PI..PI)).collect()
}

/// Independent oracle: explicit 2×2 products of the momentum-space factors,
/// multiplied left to right (last-applied factor first).
pub fn oracle_unitary(s: &ProtocolSpec, k: &[f64]) -> ComplexMatrix {
    let t = f64::from(s.steps);
    let a = |sym: Symbol| s.angle(sym).unwrap_or(0.0);
    let cy = |sym: Symbol| pauli_exp(PauliVector::Y, t * a(sym)).unwrap();
    let cn = |sym: Symbol| pauli_exp(PauliVector::NU, t * a(sym)).unwrap();
    let e = |p: f64| C64::from_polar(1.0, p);
    let sud = |p: f64| ComplexMatrix::diag(&[e(p), e(-p)]).unwrap();
    let sdn = |p: f64| ComplexMatrix::diag(&[e(p), C64::new(1.0, 0.0)]).unwrap();
    let sup = |p: f64| ComplexMatrix::diag(&[C64::new(1.0, 0.0), e(-p)]).unwrap();
    let x = k[0];
    let y = k.get(1).copied().unwrap_or(0.0);
    let z = k.get(2).copied().unwrap_or(0.0);
    use Symbol::*;
    let prod = |ms: Vec<ComplexMatrix>| ms.into_iter().fold(ComplexMatrix::identity(2), |acc, m| acc * m);
    match s.id.as_str() {
        "1d-simple" => prod(vec![sup(x), sdn(x), cy(Beta)]),
        "1d-split" => prod(vec![sup(x), cy(Alpha), sdn(x), cy(Beta)]),
        "1d-phs" => prod(vec![sup(x), cy(Alpha), sdn(x), cy(Beta), sud(x)]),
        "1d-chs" => prod(vec![sup(x), cn(Alpha), sdn(x), cn(Beta)]),
        "2d-simple" => prod(vec![sud(x + y), cy(Beta)]),
        "2d-split" => prod(vec![sud(y), cy(Alpha), sud(x), cy(Beta)]),
        "2d-phs" => prod(vec![sud(x), cy(Beta), sud(y), cy(Alpha), sud(x + y), cy(Beta)]),
        "2d-nosym" => prod(vec![sud(y), cy(Gamma), sud(x), cn(Alpha), sud(x + y), cy(Beta)]),
        "3d-simple" => prod(vec![sud(z), sud(y), sud(x), cy(Beta)]),
        "3d-split" => prod(vec![sud(z), cy(Gamma), sud(y), cy(Alpha), sud(x), cy(Beta)]),
        "3d-phs" => prod(vec![sud(z), cy(Zeta), sud(y), cy(Gamma), sud(x), cy(Alpha), sud(x + y + z), cy(Beta)]),
        "3d-chs" => prod(vec![sud(z), cn(Gamma), sud(y), cn(Alpha), sud(x), cn(Beta)]),
        "3d-nosym" => prod(vec![sud(z), cy(Zeta), sud(y), cy(Gamma), sud(x), cn(Alpha), sud(x + y + z), cy(Beta)]),
        other => panic!("no oracle for {other}"),
    }
}

/// (d0, d) of a 2×2 unitary from its entries: U = d0 − i d·σ.
pub fn oracle_decompose(u: &ComplexMatrix) -> (f64, [f64; 3]) {
    let (a, b, c, d) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let d0 = ((a + d) / 2.0).re;
    let dx = -((b + c) / 2.0).im;
    let dy = -((b - c) / 2.0).re;
    let dz = -((a - d) / 2.0).im;
    (d0, [dx, dy, dz])
}

/// Upper band energy from the oracle.
pub fn oracle_energy(s: &ProtocolSpec, k: &[f64]) -> f64 {
    let (d0, d) = oracle_decompose(&oracle_unitary(s, k));
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().atan2(d0)
}

/// n points per axis starting at −π, k1 slowest.
pub fn k_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect();
    let mut pts = vec![vec![]];
    for _ in 0..dim {
        pts = pts.into_iter().flat_map(|p: Vec<f64>| axis.iter().map(move |a| [p.clone(), vec![*a]].concat())).collect();
    }
    pts
}

/// max over the grid of |E_j(k) − E_j(−k)| across all sorted quasi-energies.
pub fn trs_energy_defect(s: &ProtocolSpec, n: usize) -> f64 {
    k_grid(s.dimension, n)
        .iter()
        .map(|k| {
            let mk: Vec<f64> = k.iter().map(|v| -v).collect();
            let e = dtqw::spectrum::quasi_energies(s, k).unwrap();
            let em = dtqw::spectrum::quasi_energies(s, &mk).unwrap();
            e.iter().zip(&em).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
