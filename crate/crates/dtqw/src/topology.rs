//! Gap closings, boundary-state taxonomy, winding and Chern numbers, and
//! phase-boundary sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::PauliVector;
use crate::protocol::{ProtocolSpec, Symbol};
use crate::spectrum::{bloch, Bloch, EPS_GAP};
use crate::symmetry::{centered_grid, plane_normal};

/// Total band variation below which a band counts as flat.
pub const EPS_FLAT: f64 = 1e-8;
/// Half-width of the local fit window at a closing.
pub const FIT_WINDOW: f64 = 0.05;
/// Minimum slope of a Dirac closing.
pub const DIRAC_SLOPE: f64 = 0.1;
/// Maximum relative deviation from |s|-linearity of a Dirac closing.
pub const DIRAC_LINEARITY: f64 = 1e-6;
/// Tolerance for merging closings and matching gapless-set members.
pub const K_TOL: f64 = 1e-6;
/// Accepted distance of a raw invariant from its integer.
pub const QUANT_TOL: f64 = 0.02;

const FIT_SAMPLES: usize = 41;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Wraps into [−π, π).
pub fn wrap(x: f64) -> f64 {
    let y = x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor();
    if y >= PI { y - 2.0 * PI } else { y }
}

fn periodic_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| wrap(x - y).abs()).fold(0.0, f64::max)
}

/// Minimises `f` on [a, b] by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)].into_iter().fold((x, fx), |best, p| if p.1 < best.1 { p } else { best })
}

/// A refined point where the two bands touch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapPoint {
    pub k: Vec<f64>,
    /// 0 or π.
    pub quasi_energy: f64,
    /// ‖d‖ at the point.
    pub residual: f64,
}

fn norm_d(spec: &ProtocolSpec, k: &[f64]) -> f64 {
    bloch(spec, k).map(|b| b.d_norm()).unwrap_or(f64::INFINITY)
}

fn require_two_band(spec: &ProtocolSpec) -> Result<()> {
    if spec.is_two_band() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("`{}` is a four-band protocol", spec.id)))
    }
}

/// Coordinate descent on ‖d‖ from a grid point with spacing `h`.
fn refine(spec: &ProtocolSpec, start: &[f64], h: f64) -> (Vec<f64>, f64) {
    let mut k = start.to_vec();
    let mut best = norm_d(spec, &k);
    let mut h = h;
    for _ in 0..200 {
        if best <= EPS_GAP * 1e-3 || h < 1e-13 {
            break;
        }
        let before = best;
        for axis in 0..k.len() {
            let c = k[axis];
            let (x, fx) = golden_section(
                |v| {
                    let mut probe = k.clone();
                    probe[axis] = v;
                    norm_d(spec, &probe)
                },
                c - h,
                c + h,
                1e-15 * h.max(1.0),
            );
            if fx < best {
                best = fx;
                k[axis] = x;
            }
        }
        if k.len() == 1 || best > 0.5 * before {
            h *= 0.5;
        }
    }
    (k.into_iter().map(wrap).collect(), best)
}

/// Local minima of ‖d‖ on a grid_n-per-axis grid, each refined.
fn refined_minima(spec: &ProtocolSpec, grid_n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    require_two_band(spec)?;
    let dim = spec.dimension;
    let axis: Vec<f64> = (0..grid_n).map(|i| -PI + 2.0 * PI * i as f64 / grid_n as f64).collect();
    let total = grid_n.pow(dim as u32);
    let index = |flat: usize| -> Vec<usize> { (0..dim).map(|a| (flat / grid_n.pow(a as u32)) % grid_n).collect() };
    let flat_of = |idx: &[usize]| -> usize { idx.iter().enumerate().map(|(a, i)| i * grid_n.pow(a as u32)).sum() };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|f| norm_d(spec, &index(f).iter().map(|&i| axis[i]).collect::<Vec<_>>()))
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        bloch(spec, &index(bad).iter().map(|&i| axis[i]).collect::<Vec<_>>())?;
    }
    let minima: Vec<usize> = (0..total)
        .filter(|&f| {
            let idx = index(f);
            (0..dim).all(|a| {
                [1, grid_n - 1].iter().all(|step| {
                    let mut j = idx.clone();
                    j[a] = (j[a] + step) % grid_n;
                    values[f] <= values[flat_of(&j)]
                })
            })
        })
        .collect();
    let h = 2.0 * PI / grid_n as f64;
    Ok(minima
        .par_iter()
        .map(|&f| {
            let k: Vec<f64> = index(f).iter().map(|&i| axis[i]).collect();
            if values[f] <= EPS_GAP * 1e-3 { (k, values[f]) } else { refine(spec, &k, h) }
        })
        .collect())
}

/// Gap closings at quasi-energy 0 or π, refined to ‖d‖ ≤ ε_gap and merged.
pub fn find_gap_closings(spec: &ProtocolSpec, grid_n: usize) -> Result<Vec<GapPoint>> {
    if grid_n < 32 {
        return Err(Error::InvalidInput(format!("grid must have at least 32 points per axis, got {grid_n}")));
    }
    let mut out: Vec<GapPoint> = Vec::new();
    for (k, r) in refined_minima(spec, grid_n)? {
        if r > EPS_GAP || out.iter().any(|p| periodic_dist(&p.k, &k) <= K_TOL) {
            continue;
        }
        let d0 = bloch(spec, &k)?.d0;
        out.push(GapPoint { k, quasi_energy: if d0 >= 0.0 { 0.0 } else { PI }, residual: r });
    }
    out.sort_by(|a, b| a.k.partial_cmp(&b.k).expect("finite"));
    Ok(out)
}

/// Smallest ‖d‖ over the zone and where it occurs.
pub fn global_gap(spec: &ProtocolSpec, grid_n: usize) -> Result<(f64, Vec<f64>)> {
    refined_minima(spec, grid_n)?
        .into_iter()
        .map(|(k, v)| (v, k))
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"))
        .ok_or_else(|| Error::Numeric("no minimum found".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    DiracTypeOne,
    DiracTypeTwo,
    /// Linear closing outside the one-dimensional subtypes.
    Dirac,
    FermiArc,
    FlatBand,
    Unclassified,
}

/// Local fit e(k* + s·u) ≈ c0 + a|s| along one axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisFit {
    pub axis: usize,
    pub slope: f64,
    pub offset: f64,
    /// Largest deviation from the fit relative to a·window.
    pub relative_residual: f64,
    pub linear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosingEvidence {
    pub point: GapPoint,
    pub fits: Vec<AxisFit>,
    pub linear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryClassification {
    pub kind: BoundaryKind,
    /// max − min of E₊ over the zone.
    pub band_variation: f64,
    pub closings: Vec<ClosingEvidence>,
    /// Gapless momenta (one-dimensional protocols) or closing count summary.
    pub gapless_set: Vec<Vec<f64>>,
}

/// Fits E₊ near a closing along `axis`, with periodic wraparound.
pub fn fit_closing(spec: &ProtocolSpec, k: &[f64], axis: usize) -> Result<AxisFit> {
    let mut rows = Vec::with_capacity(FIT_SAMPLES);
    for i in 0..FIT_SAMPLES {
        let s = -FIT_WINDOW + 2.0 * FIT_WINDOW * i as f64 / (FIT_SAMPLES - 1) as f64;
        let mut q = k.to_vec();
        q[axis] = wrap(q[axis] + s);
        rows.push((s.abs(), bloch(spec, &q)?.gap()));
    }
    let n = rows.len() as f64;
    let (sx, sy) = rows.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = rows.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let dev = rows.iter().map(|(x, y)| (y - offset - slope * x).abs()).fold(0.0, f64::max);
    let scale = slope.abs() * FIT_WINDOW;
    let relative_residual = if scale > 0.0 { dev / scale } else { f64::INFINITY };
    if !relative_residual.is_finite() && !slope.is_finite() {
        return Err(Error::Numeric(format!("ill-conditioned fit at k = {k:?}")));
    }
    let linear = slope.abs() >= DIRAC_SLOPE && relative_residual <= DIRAC_LINEARITY;
    Ok(AxisFit { axis, slope, offset, relative_residual, linear })
}

/// Total variation of E₊ over an n-per-axis grid.
pub fn band_variation(spec: &ProtocolSpec, n: usize) -> Result<f64> {
    let e: Result<Vec<f64>> = centered_grid(spec.dimension, n)
        .par_iter()
        .map(|k| bloch(spec, k).map(|b| b.e_plus()))
        .collect();
    let e = e?;
    let (lo, hi) = e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    Ok(hi - lo)
}

fn flat_grid(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 48,
        _ => 16,
    }
}

fn in_set(x: f64, set: &[f64]) -> bool {
    set.iter().any(|s| wrap(x - s).abs() <= K_TOL)
}

/// Classifies the boundary state formed by `gap_points`; `None` when the
/// band is neither flat nor closed anywhere.
pub fn classify_boundary(spec: &ProtocolSpec, gap_points: &[GapPoint]) -> Result<Option<BoundaryClassification>> {
    require_two_band(spec)?;
    let variation = band_variation(spec, flat_grid(spec.dimension))?;
    let gapless_set: Vec<Vec<f64>> = gap_points.iter().map(|p| p.k.clone()).collect();
    if variation <= EPS_FLAT {
        return Ok(Some(BoundaryClassification {
            kind: BoundaryKind::FlatBand,
            band_variation: variation,
            closings: vec![],
            gapless_set,
        }));
    }
    if gap_points.is_empty() {
        return Ok(None);
    }
    let closings: Vec<ClosingEvidence> = gap_points
        .iter()
        .map(|p| {
            let fits = (0..spec.dimension).map(|a| fit_closing(spec, &p.k, a)).collect::<Result<Vec<_>>>()?;
            let linear = fits.iter().all(|f| f.linear);
            Ok(ClosingEvidence { point: p.clone(), fits, linear })
        })
        .collect::<Result<_>>()?;
    let kind = if closings.iter().any(|c| c.fits.iter().any(|f| !f.relative_residual.is_finite() && f.slope.abs() >= DIRAC_SLOPE)) {
        BoundaryKind::Unclassified
    } else if !closings.iter().all(|c| c.linear) {
        BoundaryKind::FermiArc
    } else if spec.dimension == 1 {
        let xs: Vec<f64> = gap_points.iter().map(|p| p.k[0]).collect();
        let one = [0.0, PI];
        let two = [0.0, PI, PI / 2.0, -PI / 2.0];
        if xs.iter().all(|x| in_set(*x, &one)) {
            BoundaryKind::DiracTypeOne
        } else if xs.iter().all(|x| in_set(*x, &two)) && xs.iter().any(|x| in_set(*x, &two[2..])) {
            BoundaryKind::DiracTypeTwo
        } else {
            BoundaryKind::Dirac
        }
    } else {
        BoundaryKind::Dirac
    };
    Ok(Some(BoundaryClassification { kind, band_variation: variation, closings, gapless_set }))
}

/// Quantized invariant with its pre-rounding value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvariantResult {
    pub value: i64,
    pub raw: f64,
}

fn quantize(raw: f64) -> Result<InvariantResult> {
    let value = raw.round();
    if (raw - value).abs() > QUANT_TOL {
        return Err(Error::Numeric(format!("invariant not quantized: raw = {raw}")));
    }
    Ok(InvariantResult { value: value as i64, raw })
}

pub type WindingResult = InvariantResult;
pub type ChernResult = InvariantResult;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    a.map(|v| v / n)
}

/// Orthonormal (e1, e2) with (e1, e2, A) right-handed.
pub fn chiral_plane_basis(a: PauliVector) -> ([f64; 3], [f64; 3]) {
    let a = normalize(a.0);
    let seed = if cross(a, [1.0, 0.0, 0.0]).iter().map(|v| v * v).sum::<f64>() > 1e-6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(a, seed));
    let e2 = cross(a, e1);
    (e1, e2)
}

/// Winding of the projection of d(k) onto the plane ⊥ A over k ∈ [−π, π].
/// Intervals whose angle step exceeds π/4 are bisected.
pub fn winding_of(d: impl Fn(f64) -> Result<[f64; 3]>, a: PauliVector, grid_n: usize) -> Result<WindingResult> {
    let (e1, e2) = chiral_plane_basis(a);
    let angle = |k: f64| -> Result<f64> {
        let v = d(k)?;
        let (x, y) = (dot(v, e1), dot(v, e2));
        if x.hypot(y) <= EPS_GAP {
            return Err(Error::Gapless { k: vec![k], residual: x.hypot(y) });
        }
        Ok(y.atan2(x))
    };
    fn step(angle: &dyn Fn(f64) -> Result<f64>, k0: f64, t0: f64, k1: f64, t1: f64, depth: u32) -> Result<f64> {
        let dt = wrap(t1 - t0);
        if dt.abs() <= PI / 4.0 || depth == 0 {
            return Ok(dt);
        }
        let km = 0.5 * (k0 + k1);
        let tm = angle(km)?;
        Ok(step(angle, k0, t0, km, tm, depth - 1)? + step(angle, km, tm, k1, t1, depth - 1)?)
    }
    let ks: Vec<f64> = (0..=grid_n).map(|j| -PI + 2.0 * PI * j as f64 / grid_n as f64).collect();
    let thetas = ks.iter().map(|&k| angle(k)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for j in 0..grid_n {
        total += step(&angle, ks[j], thetas[j], ks[j + 1], thetas[j + 1], 40)?;
    }
    quantize(total / (2.0 * PI))
}

/// Chiral axis A of a one-dimensional two-band protocol (d·A = 0 for all k).
pub fn chiral_axis(spec: &ProtocolSpec) -> Result<PauliVector> {
    require_two_band(spec)?;
    if spec.dimension != 1 {
        return Err(Error::Unsupported(format!("winding number needs a one-dimensional protocol, `{}` is {}-d", spec.id, spec.dimension)));
    }
    let (a, ratio) = plane_normal(spec, &centered_grid(1, 64))?;
    if ratio > 1e-8 {
        return Err(Error::Unsupported(format!("`{}` has no chiral axis at these angles (planarity {ratio:e})", spec.id)));
    }
    Ok(a)
}

/// Winding number of a one-dimensional chiral protocol.
pub fn winding_number(spec: &ProtocolSpec, grid_n: usize) -> Result<WindingResult> {
    let a = chiral_axis(spec)?;
    if let Some(p) = find_gap_closings(spec, grid_n.max(32))?.into_iter().next() {
        return Err(Error::Gapless { k: p.k, residual: p.residual });
    }
    winding_of(|k| bloch(spec, &[k]).map(|b| b.d), a, grid_n)
}

/// Signed solid angle of the spherical triangle (a, b, c).
pub fn solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    2.0 * dot(a, cross(b, c)).atan2(1.0 + dot(a, b) + dot(b, c) + dot(c, a))
}

/// Degree of n̂ = d/‖d‖ over the torus cell [−Lx/2, Lx/2) × [−Ly/2, Ly/2).
pub fn degree_on_torus(d: impl Fn(&[f64]) -> Result<[f64; 3]> + Sync, cell: [f64; 2], grid_n: usize) -> Result<ChernResult> {
    let pts: Vec<[f64; 2]> = (0..grid_n * grid_n)
        .map(|f| {
            let (i, j) = (f % grid_n, f / grid_n);
            [-cell[0] / 2.0 + cell[0] * i as f64 / grid_n as f64, -cell[1] / 2.0 + cell[1] * j as f64 / grid_n as f64]
        })
        .collect();
    let n: Vec<[f64; 3]> = pts
        .par_iter()
        .map(|k| {
            let v = d(k)?;
            let m = dot(v, v).sqrt();
            if m <= EPS_GAP {
                return Err(Error::Gapless { k: k.to_vec(), residual: m });
            }
            Ok(v.map(|x| x / m))
        })
        .collect::<Result<_>>()?;
    let at = |i: usize, j: usize| n[(i % grid_n) + (j % grid_n) * grid_n];
    let rows: Vec<f64> = (0..grid_n)
        .into_par_iter()
        .map(|j| {
            (0..grid_n)
                .map(|i| {
                    let (p00, p10, p11, p01) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                    solid_angle(p00, p10, p11) + solid_angle(p00, p11, p01)
                })
                .sum()
        })
        .collect();
    quantize(rows.iter().sum::<f64>() / (4.0 * PI))
}

/// Per-axis period of d: π when d(k + π·e_axis) = d(k) on probe points, else 2π.
pub fn fundamental_cell(spec: &ProtocolSpec) -> Result<Vec<f64>> {
    let probes = centered_grid(spec.dimension, 5);
    (0..spec.dimension)
        .map(|axis| {
            for k in &probes {
                let mut q = k.clone();
                q[axis] += PI;
                let (a, b) = (bloch(spec, k)?, bloch(spec, &q)?);
                if (a.d0 - b.d0).abs() > 1e-12 || a.d.iter().zip(&b.d).any(|(x, y)| (x - y).abs() > 1e-12) {
                    return Ok(2.0 * PI);
                }
            }
            Ok(PI)
        })
        .collect()
}

/// Chern number of a two-dimensional two-band protocol over its fundamental cell.
pub fn chern_number(spec: &ProtocolSpec, grid_n: usize) -> Result<ChernResult> {
    require_two_band(spec)?;
    if spec.dimension != 2 {
        return Err(Error::Unsupported(format!("Chern number needs a two-dimensional protocol, `{}` is {}-d", spec.id, spec.dimension)));
    }
    if let Some(p) = find_gap_closings(spec, grid_n.max(32))?.into_iter().next() {
        return Err(Error::Gapless { k: p.k, residual: p.residual });
    }
    let cell = fundamental_cell(spec)?;
    degree_on_torus(|k| bloch(spec, k).map(|b: Bloch| b.d), [cell[0], cell[1]], grid_n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapStatus {
    Gapped,
    Gapless,
}

/// One sample of a phase-boundary sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub value: f64,
    pub status: GapStatus,
    pub invariant: Option<InvariantResult>,
    /// Inserted by the critical-point locator rather than sampled.
    pub critical: bool,
}

/// Evenly spaced sweep values; `count` ≥ 2.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()
}

/// Sweep values at which the gap closes, located by minimising the global
/// gap between samples.
pub fn critical_values(
    spec: &ProtocolSpec,
    symbol: Symbol,
    values: &[f64],
    grid_n: usize,
    link: &(dyn Fn(&ProtocolSpec, Symbol, f64) -> Result<ProtocolSpec> + Sync),
) -> Result<Vec<f64>> {
    let g = |v: f64| -> f64 { link(spec, symbol, v).and_then(|s| global_gap(&s, grid_n)).map(|r| r.0).unwrap_or(f64::INFINITY) };
    let gs: Vec<f64> = values.par_iter().map(|&v| g(v)).collect();
    let n = values.len();
    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let lo = if i == 0 { values[0] } else { values[i - 1] };
            let hi = if i + 1 == n { values[n - 1] } else { values[i + 1] };
            let is_min = (i == 0 || gs[i] <= gs[i - 1]) && (i + 1 == n || gs[i] <= gs[i + 1]);
            if !is_min {
                return None;
            }
            if gs[i] <= EPS_GAP {
                return Some(values[i]);
            }
            let (x, fx) = golden_section(g, lo.min(hi), lo.max(hi), 1e-13 * values[i].abs().max(1.0));
            (fx <= EPS_GAP).then_some(x)
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    Ok(out)
}

/// Sample values with critical values inserted (or flagged when they coincide
/// with a sample), ascending.
pub fn merge_critical(values: &[f64], critical: &[f64]) -> Vec<(f64, bool)> {
    let mut samples: Vec<(f64, bool)> = values.iter().map(|&v| (v, false)).collect();
    for &c in critical {
        match samples.iter_mut().find(|(v, _)| (v - c).abs() <= 1e-9) {
            Some(s) => s.1 = true,
            None => samples.push((c, true)),
        }
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    samples
}

/// Sets one angle, the default link used by sweeps.
pub fn set_angle(spec: &ProtocolSpec, symbol: Symbol, value: f64) -> Result<ProtocolSpec> {
    spec.clone().with_angle(symbol, value)
}

/// Invariant of a two-band protocol where one applies: winding (1-d, chiral)
/// or Chern (2-d); `Ok(None)` for protocols without an in-scope invariant.
pub fn invariant(spec: &ProtocolSpec, grid_n: usize) -> Result<Option<InvariantResult>> {
    match spec.dimension {
        1 => match chiral_axis(spec) {
            Ok(_) => winding_number(spec, grid_n).map(Some),
            Err(Error::Unsupported(_)) => Ok(None),
            Err(e) => Err(e),
        },
        2 => chern_number(spec, grid_n).map(Some),
        _ => Ok(None),
    }
}

/// Sweeps an angle, reporting gap status and invariant per sample, with
/// refined critical values inserted.
pub fn phase_boundary_trace(
    spec: &ProtocolSpec,
    symbol: Symbol,
    values: &[f64],
    grid_n: usize,
    link: &(dyn Fn(&ProtocolSpec, Symbol, f64) -> Result<ProtocolSpec> + Sync),
) -> Result<Vec<TraceRow>> {
    if spec.dimension > 2 {
        return Err(Error::Unsupported("phase-boundary traces cover one- and two-dimensional protocols".into()));
    }
    let crit = critical_values(spec, symbol, values, grid_n, link)?;
    merge_critical(values, &crit)
        .par_iter()
        .map(|&(value, critical)| {
            let s = link(spec, symbol, value)?;
            if critical {
                return Ok(TraceRow { value, status: GapStatus::Gapless, invariant: None, critical });
            }
            match invariant(&s, grid_n) {
                Ok(inv) => {
                    let closed = inv.is_none() && !find_gap_closings(&s, grid_n.max(32))?.is_empty();
                    let status = if closed { GapStatus::Gapless } else { GapStatus::Gapped };
                    Ok(TraceRow { value, status, invariant: inv, critical })
                }
                Err(Error::Gapless { .. }) => Ok(TraceRow { value, status: GapStatus::Gapless, invariant: None, critical }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
