//! Particle-hole, time-reversal and chiral symmetry checks, operator search,
//! and Altland–Zirnbauer classification.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{floquet_hamiltonian, eig_unitary, pauli, principal_arg, tau_sigma, ComplexMatrix, PauliVector, C64};
use crate::protocol::{registry_lookup, Doubling, ProtocolSpec, Symbol};
use crate::spectrum::{bloch, EPS_GAP};

/// Residual threshold for a verified symmetry.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Tolerance on operator squares.
pub const SQUARE_TOL: f64 = 1e-10;
/// Default grid points per axis.
pub const DEFAULT_GRID: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Phs,
    Trs,
    Chs,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Phs, Relation::Trs, Relation::Chs];
}

/// Candidate or known symmetry operator.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryOperator {
    pub matrix: ComplexMatrix,
    /// Acts with complex conjugation.
    pub antiunitary: bool,
    /// Relation compares H at −k.
    pub momentum_flip: bool,
    pub label: String,
}

impl SymmetryOperator {
    pub fn new(matrix: ComplexMatrix, antiunitary: bool, momentum_flip: bool, label: impl Into<String>) -> Self {
        Self { matrix, antiunitary, momentum_flip, label: label.into() }
    }

    /// ±1 when M·M* (antiunitary) or M² (unitary) equals ±I.
    pub fn square(&self) -> Option<i8> {
        let m = self.matrix;
        let sq = if self.antiunitary { m * m.conj() } else { m * m };
        let id = ComplexMatrix::identity(m.dim());
        if sq.dist(&id) <= SQUARE_TOL {
            Some(1)
        } else if sq.dist(&id.scale(C64::from(-1.0))) <= SQUARE_TOL {
            Some(-1)
        } else {
            None
        }
    }

    /// Canonical form of a relation: antiunitary with flip for PHS/TRS,
    /// unitary without flip for CHS.
    pub fn is_canonical_for(&self, rel: Relation) -> bool {
        match rel {
            Relation::Phs | Relation::Trs => self.antiunitary && self.momentum_flip,
            Relation::Chs => !self.antiunitary && !self.momentum_flip,
        }
    }
}

/// Momentum grid with precomputed H(k) and H(−k); `None` marks gapless points.
pub struct HamiltonianGrid {
    pub points: Vec<Vec<f64>>,
    h: Vec<Option<ComplexMatrix>>,
    h_neg: Vec<Option<ComplexMatrix>>,
}

/// n points per axis at cell centres of [−π, π); closed under k → −k.
pub fn centered_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64).collect();
    let mut pts = vec![vec![]];
    for _ in 0..dim {
        pts = pts.into_iter().flat_map(|p| axis.iter().map(move |a| [p.clone(), vec![*a]].concat())).collect();
    }
    pts
}

/// H(k) = E n·σ (two bands) or Σ ε_j v_j v_j† (four bands); `None` at gapless points.
pub fn hamiltonian(spec: &ProtocolSpec, k: &[f64]) -> Result<Option<ComplexMatrix>> {
    if spec.is_two_band() {
        return Ok(bloch(spec, k)?.hamiltonian());
    }
    let u = spec.build_unitary(k)?;
    let gapless = eig_unitary(&u)?.iter().any(|p| {
        let e = principal_arg(p.value).abs();
        e <= EPS_GAP || PI - e <= EPS_GAP
    });
    if gapless {
        return Ok(None);
    }
    Ok(Some(floquet_hamiltonian(&u)?))
}

impl HamiltonianGrid {
    pub fn new(spec: &ProtocolSpec, n: usize) -> Result<Self> {
        Self::from_points(spec, centered_grid(spec.dimension, n))
    }

    pub fn from_points(spec: &ProtocolSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        let pairs: Result<Vec<_>> = points
            .par_iter()
            .map(|k| {
                let mk: Vec<f64> = k.iter().map(|v| -v).collect();
                Ok((hamiltonian(spec, k)?, hamiltonian(spec, &mk)?))
            })
            .collect();
        let (h, h_neg) = pairs?.into_iter().unzip();
        Ok(Self { points, h, h_neg })
    }

    /// Max residual of a relation; `stop_above` allows early exit once exceeded.
    fn residual(&self, op: &SymmetryOperator, rel: Relation, stop_above: f64) -> Result<f64> {
        let m = op.matrix;
        let m_dag = m.adjoint();
        let mut worst: f64 = 0.0;
        let mut used = 0usize;
        for i in 0..self.points.len() {
            let (Some(h), Some(hp)) = (self.h[i], if op.momentum_flip { self.h_neg[i] } else { self.h[i] }) else {
                continue;
            };
            if h.dim() != m.dim() {
                return Err(Error::InvalidInput(format!("operator is {0}×{0}, Hamiltonian is {1}×{1}", m.dim(), h.dim())));
            }
            used += 1;
            let hp = if op.antiunitary { hp.conj() } else { hp };
            let r = match rel {
                Relation::Phs => m * hp * m_dag + h,
                Relation::Trs => m * hp * m_dag - h,
                Relation::Chs => m_dag * hp * m + h,
            }
            .max_abs();
            worst = worst.max(r);
            if worst > stop_above {
                return Ok(worst);
            }
        }
        if used == 0 {
            return Err(Error::Degenerate("every grid point is gapless".into()));
        }
        Ok(worst)
    }

    /// Gap-open Hamiltonians, for inspection.
    pub fn open_points(&self) -> usize {
        self.h.iter().filter(|h| h.is_some()).count()
    }
}

/// Max residual of `rel` for `op` over the grid.
pub fn check_relation(grid: &HamiltonianGrid, op: &SymmetryOperator, rel: Relation) -> Result<f64> {
    grid.residual(op, rel, f64::INFINITY)
}

/// Default candidates: phase·σ_j (2×2) or phase·τ_i⊗σ_j (4×4), phases {1, i},
/// each as unitary/antiunitary, with and without momentum flip.
pub fn default_candidates(bands: usize) -> Vec<SymmetryOperator> {
    let mut out = Vec::new();
    let names = ["0", "x", "y", "z"];
    let bases: Vec<(String, ComplexMatrix)> = if bands == 2 {
        (0..4).map(|j| (format!("s{}", names[j]), pauli(j))).collect()
    } else {
        (0..4)
            .flat_map(|i| (0..4).map(move |j| (format!("t{}s{}", names[i], names[j]), tau_sigma(i, j))))
            .collect()
    };
    for (name, m) in &bases {
        for (pname, phase) in [("", C64::new(1.0, 0.0)), ("i·", C64::new(0.0, 1.0))] {
            for anti in [true, false] {
                for flip in [true, false] {
                    let label = format!("{pname}{name}{}{}", if anti { "·K" } else { "" }, if flip { "(−k)" } else { "" });
                    out.push(SymmetryOperator::new(m.scale(phase), anti, flip, label));
                }
            }
        }
    }
    out
}

/// Candidates whose residual is ≤ the symmetry threshold.
pub fn operator_search(
    grid: &HamiltonianGrid,
    rel: Relation,
    candidates: &[SymmetryOperator],
) -> Result<Vec<(SymmetryOperator, f64)>> {
    let found: Result<Vec<Option<(SymmetryOperator, f64)>>> = candidates
        .iter()
        .map(|op| {
            let r = grid.residual(op, rel, SYMMETRY_TOL)?;
            Ok((r <= SYMMETRY_TOL).then(|| (op.clone(), r)))
        })
        .collect();
    Ok(found?.into_iter().flatten().collect())
}

/// Unit normal A of the best-fit plane through the sampled d vectors, and the
/// planarity defect max|d·A| / max‖d‖ (0 for exactly planar d).
pub fn plane_normal(spec: &ProtocolSpec, points: &[Vec<f64>]) -> Result<(PauliVector, f64)> {
    let ds = points.iter().map(|k| bloch(spec, k).map(|b| b.d)).collect::<Result<Vec<_>>>()?;
    let mut m = Matrix3::<f64>::zeros();
    for d in &ds {
        let d = nalgebra::Vector3::from(*d);
        m += d * d.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let lo = (0..3).min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite")).expect("3");
    let max_d = ds.iter().map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    if max_d <= EPS_GAP {
        return Err(Error::Degenerate("d vanishes on the whole grid".into()));
    }
    let mut a: [f64; 3] = [0, 1, 2].map(|i| eig.eigenvectors[(i, lo)]);
    if let Some(p) = a.iter().find(|v| v.abs() > 1e-12) {
        let s = p.signum();
        a.iter_mut().for_each(|v| *v *= s);
    }
    let off = ds.iter().map(|d| (d[0] * a[0] + d[1] * a[1] + d[2] * a[2]).abs()).fold(0.0, f64::max);
    Ok((PauliVector(a), off / max_d))
}

/// Presence and square of one symmetry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presence {
    pub present: bool,
    pub square: Option<i8>,
}

impl Presence {
    const ABSENT: Presence = Presence { present: false, square: None };

    /// −1, 0 or +1 in the notation of the classification table.
    pub fn signature(&self) -> i8 {
        self.square.filter(|_| self.present).unwrap_or(0)
    }
}

/// One verified operator, kept for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoundOperator {
    pub relation: Relation,
    pub label: String,
    pub antiunitary: bool,
    pub momentum_flip: bool,
    pub square: Option<i8>,
    pub residual: f64,
    /// Residual of the same antiunitary operator without the momentum flip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub literal_residual: Option<f64>,
}

/// Classification of one protocol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub id: String,
    pub dimension: usize,
    pub phs: Presence,
    pub trs: Presence,
    pub chs: Presence,
    pub az_family: String,
    pub invariant_group: String,
    /// Every verified operator, canonical or not.
    pub operators: Vec<FoundOperator>,
}

/// Tenfold-way family from the (P, T, Γ) signature.
pub fn az_family(p: i8, t: i8, c: i8) -> Option<&'static str> {
    Some(match (p, t, c) {
        (0, 0, 0) => "A",
        (0, 0, 1) => "AIII",
        (0, 1, 0) => "AI",
        (1, 1, 1) => "BDI",
        (1, 0, 0) => "D",
        (1, -1, 1) => "DIII",
        (0, -1, 0) => "AII",
        (-1, -1, 1) => "CII",
        (-1, 0, 0) => "C",
        (-1, 1, 1) => "CI",
        _ => return None,
    })
}

/// Invariant group of a family in dimension 1–3.
pub fn invariant_group(family: &str, dimension: usize) -> Option<&'static str> {
    let row: [&str; 3] = match family {
        "A" => ["0", "Z", "0"],
        "AIII" => ["Z", "0", "Z"],
        "AI" => ["0", "0", "0"],
        "BDI" => ["Z", "0", "0"],
        "D" => ["Z2", "Z", "0"],
        "DIII" => ["Z2", "Z2", "Z"],
        "AII" => ["0", "Z2", "Z2"],
        "CII" => ["Z", "0", "Z2"],
        "C" => ["0", "Z", "0"],
        "CI" => ["0", "0", "Z"],
        _ => return None,
    };
    row.get(dimension.checked_sub(1)?).copied()
}

/// Generic parameters used when a protocol is classified by id alone.
pub fn generic_spec(id: &str) -> Result<ProtocolSpec> {
    let s = registry_lookup(id)?.with_steps(3);
    let vals = [(Symbol::Alpha, 0.713), (Symbol::Beta, 1.291), (Symbol::Gamma, -0.537), (Symbol::Zeta, 2.113)];
    let used = s.symbols();
    s.with_angles(&vals.iter().copied().filter(|(sym, _)| used.contains(sym)).collect::<Vec<_>>())
}

/// Chiral operators known in closed form: the plane normal of d for two-band
/// protocols, lifted to diag(Γ, Γ*) for transpose/conjugate doublings.
fn known_chiral(spec: &ProtocolSpec, grid: &HamiltonianGrid) -> Result<Vec<SymmetryOperator>> {
    let base = spec.base();
    let (a, _) = match plane_normal(&base, &grid.points) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => return Ok(vec![]),
        Err(e) => return Err(e),
    };
    let g = a.dot_sigma();
    let label = format!("A·σ, A = ({:.6}, {:.6}, {:.6})", a.0[0], a.0[1], a.0[2]);
    Ok(match spec.doubled {
        Doubling::None => vec![SymmetryOperator::new(g, false, false, label)],
        Doubling::TransposeBlock | Doubling::ConjugateBlock => {
            vec![SymmetryOperator::new(ComplexMatrix::block_diag(&g, &g.conj())?, false, false, format!("diag({label}, c.c.)"))]
        }
        Doubling::TrsSandwich { .. } => vec![],
    })
}

/// Classifies a protocol at its configured parameters on an n-per-axis grid.
pub fn classify_on(spec: &ProtocolSpec, n: usize) -> Result<SymmetryReport> {
    let grid = HamiltonianGrid::new(spec, n)?;
    let mut found: Vec<(Relation, SymmetryOperator, f64)> = Vec::new();
    let candidates = default_candidates(spec.bands());
    for rel in Relation::ALL {
        for (op, r) in operator_search(&grid, rel, &candidates)? {
            found.push((rel, op, r));
        }
    }
    for op in known_chiral(spec, &grid)? {
        let r = check_relation(&grid, &op, Relation::Chs)?;
        if r <= SYMMETRY_TOL {
            found.push((Relation::Chs, op, r));
        }
    }
    // Γ composed with an antiunitary symmetry yields the other antiunitary one.
    let chiral: Vec<SymmetryOperator> = canonical(&found, Relation::Chs).into_iter().cloned().collect();
    let mut composed = Vec::new();
    for g in &chiral {
        for (src, dst) in [(Relation::Phs, Relation::Trs), (Relation::Trs, Relation::Phs)] {
            for x in canonical(&found, src) {
                let op = SymmetryOperator::new(g.matrix * x.matrix, true, true, format!("[{}]·[{}]", g.label, x.label));
                let r = check_relation(&grid, &op, dst)?;
                if r > SYMMETRY_TOL && src == Relation::Phs {
                    return Err(Error::Inconsistent(format!(
                        "`{}`: PHS ({}) and CHS ({}) verify but their product fails TRS (residual {r:e})",
                        spec.id, x.label, g.label
                    )));
                }
                if r <= SYMMETRY_TOL {
                    composed.push((dst, op, r));
                }
            }
        }
    }
    found.extend(composed);

    let pick = |rel: Relation| -> Presence {
        let squares: Vec<i8> = canonical(&found, rel).iter().filter_map(|o| o.square()).collect();
        if squares.is_empty() {
            return Presence::ABSENT;
        }
        // Extra unitary symmetries can admit operators of both squares; a
        // Hermitian chiral operator and a Kramers-type antiunitary are reported.
        let sq = match rel {
            Relation::Chs => if squares.contains(&1) { 1 } else { -1 },
            _ => if squares.contains(&-1) { -1 } else { 1 },
        };
        Presence { present: true, square: Some(sq) }
    };
    let (phs, trs, chs) = (pick(Relation::Phs), pick(Relation::Trs), pick(Relation::Chs));
    let family = az_family(phs.signature(), trs.signature(), chs.signature()).unwrap_or("unknown");
    let group = invariant_group(family, spec.dimension).unwrap_or("unknown");
    let operators = found
        .iter()
        .map(|(rel, op, r)| {
            let literal_residual = if op.antiunitary && op.momentum_flip {
                let literal = SymmetryOperator { momentum_flip: false, ..op.clone() };
                Some(check_relation(&grid, &literal, *rel)?)
            } else {
                None
            };
            Ok(FoundOperator {
                relation: *rel,
                label: op.label.clone(),
                antiunitary: op.antiunitary,
                momentum_flip: op.momentum_flip,
                square: op.square(),
                residual: *r,
                literal_residual,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SymmetryReport {
        id: spec.id.clone(),
        dimension: spec.dimension,
        phs,
        trs,
        chs,
        az_family: family.to_string(),
        invariant_group: group.to_string(),
        operators,
    })
}

fn canonical(found: &[(Relation, SymmetryOperator, f64)], rel: Relation) -> Vec<&SymmetryOperator> {
    found.iter().filter(|(r, op, _)| *r == rel && op.is_canonical_for(rel)).map(|(_, op, _)| op).collect()
}

/// Classification on the default grid.
pub fn classify(spec: &ProtocolSpec) -> Result<SymmetryReport> {
    classify_on(spec, DEFAULT_GRID)
}

/// One row of the reference classification table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub id: String,
    #[serde(rename = "P")]
    pub p: i8,
    #[serde(rename = "T")]
    pub t: i8,
    #[serde(rename = "C")]
    pub c: i8,
    pub family: String,
    pub invariant: String,
}

impl From<&SymmetryReport> for TableRow {
    fn from(r: &SymmetryReport) -> Self {
        TableRow {
            id: r.id.clone(),
            p: r.phs.signature(),
            t: r.trs.signature(),
            c: r.chs.signature(),
            family: r.az_family.clone(),
            invariant: r.invariant_group.clone(),
        }
    }
}

/// The bundled reference table.
pub fn golden_table() -> Vec<TableRow> {
    serde_json::from_str(include_str!("../fixtures/table1.json")).expect("bundled table parses")
}

/// Rows of `reports` that differ from the reference table.
pub fn golden_diff(reports: &[SymmetryReport]) -> Vec<(TableRow, Option<TableRow>)> {
    let golden = golden_table();
    reports
        .iter()
        .map(TableRow::from)
        .filter_map(|row| {
            let g = golden.iter().find(|g| g.id == row.id).cloned();
            (g.as_ref() != Some(&row)).then_some((row, g))
        })
        .collect()
}
