//! Acceptance criteria 1–12; prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#[path = "../../dtqw/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use clap::Parser;
use common::*;
use dtqw::cli::{run, Cli};
use dtqw::protocol::{registry_lookup, ProtocolSpec, Symbol};
use dtqw::spectrum::{bloch, d_closed_form, group_velocity_closed, rho_closed_form, CLOSED_FORM_IDS, FD_STEP};
use dtqw::symmetry::{generic_spec, golden_table};
use dtqw::topology::*;
use rand::Rng;

type Outcome = Result<String, String>;

/// (protocol, steps, fixed angles, β, expected Chern number or `None` for a boundary).
type ChernCase<'a> = (&'a str, u32, &'a [(Symbol, f64)], f64, Option<i64>);

fn fixture(name: &str) -> String {
    format!("{}/../dtqw/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let parsed = Cli::try_parse_from(std::iter::once("phase-scan").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(&parsed, &mut out).map_err(|e| format!("exit {}: {e}", e.exit_code()))?;
    Ok(out)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_energy() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for id in CLOSED_FORM_IDS {
        for _ in 0..10_000 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let e = oracle_energy(&s, &k);
            let err = (rho_closed_form(&s, &k).map_err(|e| e.to_string())? - e.cos()).abs();
            worst = worst.max(err);
            ensure(err <= 1e-10, || format!("{id} at {k:?}: {err:e}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max error {worst:.2e}, {secs:.1} s"))
}

fn c2_d_vector() -> Outcome {
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    for id in CLOSED_FORM_IDS {
        for _ in 0..2_000 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            let (_, d) = oracle_decompose(&oracle_unitary(&s, &k));
            let c = d_closed_form(&s, &k).map_err(|e| e.to_string())?;
            let err = c.iter().zip(d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("{id} at {k:?}: {err:e}"))?;
        }
    }
    Ok(format!("max component error {worst:.2e}"))
}

fn c3_velocity() -> Outcome {
    let mut r = rng(103);
    let mut worst: f64 = 0.0;
    for id in CLOSED_FORM_IDS {
        let mut n = 0;
        while n < 500 {
            let s = random_spec(id, &mut r);
            let k = random_k(s.dimension, &mut r);
            if bloch(&s, &k).map_err(|e| e.to_string())?.gap() < 1e-2 {
                continue;
            }
            n += 1;
            for axis in 0..s.dimension {
                let v = group_velocity_closed(&s, &k, axis).map_err(|e| e.to_string())?;
                let (mut kp, mut km) = (k.clone(), k.clone());
                kp[axis] += FD_STEP;
                km[axis] -= FD_STEP;
                let fd = (oracle_energy(&s, &kp) - oracle_energy(&s, &km)) / (2.0 * FD_STEP);
                worst = worst.max((v - fd).abs());
                ensure((v - fd).abs() <= 1e-6, || format!("{id} axis {axis} at {k:?}: {v} vs {fd}"))?;
            }
        }
    }
    Ok(format!("max deviation {worst:.2e}"))
}

fn c4_table() -> Outcome {
    cli(&["symmetry", "all", "--golden"])?;
    Ok("22 of 22 rows match".into())
}

fn chern_at(id: &str, t: u32, fixed: &[(Symbol, f64)], beta: f64) -> Result<Option<i64>, String> {
    let s = registry_lookup(id).unwrap().with_steps(t).with_angles(fixed).unwrap().with_angle(Symbol::Beta, beta).unwrap();
    match chern_number(&s, 64) {
        Ok(c) if (c.raw - c.value as f64).abs() <= 0.02 => Ok(Some(c.value)),
        Ok(c) => Err(format!("unquantized raw {}", c.raw)),
        Err(dtqw::Error::Gapless { .. }) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

fn c5_chern() -> Outcome {
    let phs = [(Symbol::Alpha, PI / 3.0)];
    let nosym = [(Symbol::Alpha, PI / 3.0), (Symbol::Gamma, PI / 4.0)];
    let cases: [ChernCase; 11] = [
        ("2d-phs", 2, &phs, PI / 12.0, Some(0)),
        ("2d-phs", 2, &phs, PI / 4.0, Some(1)),
        ("2d-phs", 2, &phs, PI / 2.0, Some(0)),
        ("2d-phs", 2, &phs, PI / 6.0, None),
        ("2d-phs", 2, &phs, PI / 3.0, None),
        ("2d-phs", 2, &phs, 2.0 * PI / 3.0, None),
        ("2d-nosym", 3, &nosym, 0.0, Some(0)),
        ("2d-nosym", 3, &nosym, PI / 3.0, Some(0)),
        ("2d-nosym", 3, &nosym, PI / 2.0, Some(1)),
        ("2d-nosym", 3, &nosym, PI / 4.0, None),
        ("2d-nosym", 3, &nosym, 3.0 * PI / 4.0, None),
    ];
    let mut bad = Vec::new();
    for (id, t, fixed, beta, want) in cases {
        let got = chern_at(id, t, fixed, beta)?;
        if got != want {
            bad.push(format!("{id} β = {:.4}π: got {got:?}, expected {want:?}", beta / PI));
        }
    }
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok("all 11 fixture points".into())
}

fn linked(s: &ProtocolSpec, _: Symbol, a: f64) -> dtqw::Result<ProtocolSpec> {
    s.clone().with_angles(&[(Symbol::Alpha, a), (Symbol::Beta, (a + PI) / 3.0)])
}

fn c6_winding() -> Outcome {
    let s = registry_lookup("1d-chs").unwrap().with_steps(6);
    let rows = phase_boundary_trace(&s, Symbol::Alpha, &linspace(-PI, PI, 97), 256, &linked).map_err(|e| e.to_string())?;
    let values: BTreeSet<i64> = rows.iter().filter_map(|r| r.invariant.map(|i| i.value)).collect();
    ensure(values == BTreeSet::from([-1, 0, 1]), || format!("windings {values:?}"))?;
    for w in rows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].invariant, w[1].invariant) {
            ensure(a.value == b.value, || format!("w changes between α = {} and {} without a boundary", w[0].value, w[1].value))?;
        }
    }
    let boundaries = rows.iter().filter(|r| r.status == GapStatus::Gapless).count();
    ensure(boundaries > 0, || "no boundary rows".into())?;
    for r in rows.iter().filter(|r| r.invariant.is_some()) {
        let w2 = winding_number(&linked(&s, Symbol::Alpha, r.value).unwrap(), 512).map_err(|e| e.to_string())?;
        ensure(w2.value == r.invariant.unwrap().value, || format!("grid doubling changes w at α = {}", r.value))?;
    }
    Ok(format!("{} rows, {boundaries} boundary rows, w ∈ {values:?}", rows.len()))
}

fn max_deviation(s: &ProtocolSpec, n: usize, target: impl Fn(&[f64]) -> f64) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for k in k_grid(s.dimension, n) {
        worst = worst.max((bloch(s, &k).map_err(|e| e.to_string())?.e_plus() - target(&k)).abs());
    }
    Ok(worst)
}

fn c7_band_laws() -> Outcome {
    for t in 1..=6 {
        let s = registry_lookup("1d-chs").unwrap().with_steps(t).with_angles(&[(Symbol::Alpha, 0.0), (Symbol::Beta, 0.0)]).unwrap();
        let dev = max_deviation(&s, 256, |k| k[0].abs())?;
        ensure(dev <= 1e-10, || format!("1d-chs T = {t}: |E − |k|| = {dev:e}"))?;
    }
    for t in 1..=6 {
        for m in [1.0, 5.0, -3.0] {
            let s = registry_lookup("3d-simple").unwrap().with_steps(t).with_angle(Symbol::Beta, m * PI / f64::from(t)).unwrap();
            let dev = max_deviation(&s, 16, |_| PI / 2.0)?;
            ensure(dev <= 1e-10, || format!("3d-simple T = {t}, Tβ = {m}π: {dev:e}"))?;
        }
    }
    for t in 1..=6 {
        for c in 0..3 {
            let a = f64::from(2 * c + 1) * PI / f64::from(t);
            let s = registry_lookup("3d-split").unwrap().with_steps(t);
            let s = s.with_angles(&[(Symbol::Alpha, a), (Symbol::Beta, a), (Symbol::Gamma, a)]).unwrap();
            let dev = max_deviation(&s, 16, |_| PI / 2.0)?;
            ensure(dev <= 1e-10, || format!("3d-split T = {t}, angle (2·{c}+1)π/T: {dev:e}"))?;
        }
    }
    Ok("1d-chs E = |k|; 3d-simple and 3d-split flat at π/2".into())
}

fn c8_velocity_ranges() -> Outcome {
    let mut r = rng(108);
    let mut vmax: f64 = 0.0;
    for _ in 0..20_000 {
        let s = random_spec("1d-chs", &mut r);
        let k = r.gen_range(-PI..PI);
        if let Ok(v) = group_velocity_closed(&s, &[k], 0) {
            vmax = vmax.max(v.abs());
        }
    }
    ensure((0.99..=1.0 + 1e-9).contains(&vmax), || format!("1d-chs max |V| = {vmax}"))?;
    let mut phs: f64 = 0.0;
    for t in [6u32, 8] {
        let s = registry_lookup("1d-phs").unwrap().with_steps(t);
        for a in linspace(-PI / 2.0, PI / 8.0, 61) {
            let sp = linked(&s, Symbol::Alpha, a).unwrap();
            for k in k_grid(1, 256) {
                if let Ok(v) = group_velocity_closed(&sp, &k, 0) {
                    phs = phs.max(v.abs());
                }
            }
        }
    }
    ensure(phs >= 1.9, || format!("1d-phs max |V| = {phs}"))?;
    Ok(format!("1d-chs max |V| = {vmax:.6}; 1d-phs max |V| = {phs:.6}"))
}

struct StepKinds {
    steps: u32,
    kinds: BTreeSet<String>,
    criticals: usize,
    type_two_sets: Vec<Vec<f64>>,
    type_one_sets: Vec<Vec<f64>>,
}

fn step_kinds(s: &ProtocolSpec, link: &(dyn Fn(&ProtocolSpec, Symbol, f64) -> dtqw::Result<ProtocolSpec> + Sync)) -> Result<StepKinds, String> {
    let crit = critical_values(s, Symbol::Alpha, &linspace(-PI, PI, 121), 256, link).map_err(|e| e.to_string())?;
    let mut out = StepKinds { steps: s.steps, kinds: BTreeSet::new(), criticals: crit.len(), type_two_sets: vec![], type_one_sets: vec![] };
    for a in crit {
        let sp = link(s, Symbol::Alpha, a).map_err(|e| e.to_string())?;
        let pts = find_gap_closings(&sp, 256).map_err(|e| e.to_string())?;
        if let Some(c) = classify_boundary(&sp, &pts).map_err(|e| e.to_string())? {
            let ks: Vec<f64> = c.gapless_set.iter().map(|k| k[0]).collect();
            match c.kind {
                BoundaryKind::DiracTypeOne => out.type_one_sets.push(ks),
                BoundaryKind::DiracTypeTwo => out.type_two_sets.push(ks),
                _ => {}
            }
            out.kinds.insert(format!("{:?}", c.kind));
        }
    }
    Ok(out)
}

fn near(x: f64, y: f64) -> bool {
    wrap(x - y).abs() <= K_TOL
}

fn c9_taxonomy(counts: &mut Vec<(String, u32, usize)>) -> Outcome {
    let mut summary = Vec::new();
    let fixed = |s: &ProtocolSpec, sym: Symbol, v: f64| set_angle(s, sym, v);
    for t in 2..=8 {
        let s = registry_lookup("1d-phs").unwrap().with_steps(t).with_angle(Symbol::Beta, PI / 3.0).unwrap();
        let sk = step_kinds(&s, &fixed)?;
        counts.push(("fig1".into(), t, sk.criticals));
        ensure(sk.kinds.len() == 1, || format!("fig1 T = {t}: kinds {:?}", sk.kinds))?;
        summary.push(format!("T{t}:{}", sk.kinds.iter().next().unwrap()));
    }
    for t in 2..=8 {
        let s = registry_lookup("1d-phs").unwrap().with_steps(t);
        let sk = step_kinds(&s, &linked)?;
        counts.push(("fig2".into(), t, sk.criticals));
        if t != 6 && t != 8 {
            continue;
        }
        for want in ["DiracTypeOne", "DiracTypeTwo", "FermiArc"] {
            ensure(sk.kinds.contains(want), || format!("fig2 T = {}: kinds {:?} lack {want}", sk.steps, sk.kinds))?;
        }
        for set in &sk.type_one_sets {
            ensure(set.iter().all(|k| near(*k, 0.0) || near(*k, PI)), || format!("type one set {set:?}"))?;
        }
        for set in &sk.type_two_sets {
            ensure(set.iter().any(|k| near(*k, PI / 2.0) || near(*k, -PI / 2.0)), || format!("type two set {set:?}"))?;
        }
    }
    Ok(format!("fig1 one kind per step ({}); fig2 T = 6, 8 mix both Dirac subtypes and Fermi arcs", summary.join(" ")))
}

fn c10_trs() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for row in golden_table().iter().filter(|r| r.t != 0) {
        let s = generic_spec(&row.id).map_err(|e| e.to_string())?;
        let d = trs_energy_defect(&s, 64);
        ensure(d <= 1e-10, || format!("{}: {d:e}", row.id))?;
        worst = worst.max(d);
        n += 1;
    }
    Ok(format!("{n} protocols, max |E(k) − E(−k)| = {worst:.2e}"))
}

fn c11_step_independent() -> Outcome {
    let runs: [Vec<&str>; 6] = [
        vec!["bands", "--protocol", "1d-phs", "--set", "beta=pi/3", "--sweep", "alpha:-pi:pi:9", "--grid", "64"],
        vec!["bands", "--protocol", "2d-nosym", "--set", "alpha=pi/3", "--set", "gamma=pi/4", "--sweep", "beta:0:pi:5", "--grid", "16"],
        vec!["bands", "--protocol", "3d-split", "--set", "alpha=0.3", "--set", "gamma=-1.2", "--sweep", "beta:0:pi:3", "--grid", "8"],
        vec!["invariant", "--protocol", "1d-chs", "--set", "beta=(alpha+pi)/3", "--sweep", "alpha:-pi:pi:25"],
        vec!["invariant", "--protocol", "2d-phs", "--set", "alpha=pi/3", "--sweep", "beta:0:pi:7", "--grid", "32"],
        vec!["classify-gaps", "--protocol", "1d-phs", "--set", "beta=pi/3", "--sweep", "alpha:-pi:pi:31"],
    ];
    for args in &runs {
        let a = cli(&[&args[..], &["--steps", "1"]].concat())?;
        let b = cli(&[&args[..], &["--steps", "1", "--step-independent"]].concat())?;
        ensure(a == b, || format!("{args:?} differs"))?;
    }
    Ok(format!("{} commands byte-identical", runs.len()))
}

fn c12_determinism() -> Outcome {
    let fig6 = fixture("fig6.cfg");
    let fig10 = fixture("fig10.cfg");
    let fig1 = fixture("fig1.cfg");
    let runs: [Vec<&str>; 5] = [
        vec!["bands", "--config", &fig1, "--steps", "3", "--sweep", "alpha:-pi:pi:7"],
        vec!["invariant", "--config", &fig6],
        vec!["invariant", "--config", &fig10, "--grid", "32", "--sweep", "beta:0:pi:9"],
        vec!["classify-gaps", "--config", &fig1, "--steps", "3", "--sweep", "alpha:-pi:pi:13"],
        vec!["symmetry", "1d-phs", "2d-nosym", "3d-diii"],
    ];
    for args in &runs {
        let a = cli(&[&args[..], &["--workers", "1"]].concat())?;
        let b = cli(&[&args[..], &["--workers", "4"]].concat())?;
        ensure(a == b, || format!("{args:?} differs between worker counts"))?;
    }
    Ok(format!("{} commands byte-identical across 1 and 4 workers", runs.len()))
}

fn main() {
    let mut counts = Vec::new();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {msg} [{secs:.1} s]");
            }
        }
    };
    report(1, "closed-form energy vs oracle", &mut c1_energy);
    report(2, "closed-form d vector vs oracle", &mut c2_d_vector);
    report(3, "analytic vs finite-difference velocity", &mut c3_velocity);
    report(4, "symmetry table", &mut c4_table);
    report(5, "Chern fixtures", &mut c5_chern);
    report(6, "winding fixtures", &mut c6_winding);
    report(7, "special-case band laws", &mut c7_band_laws);
    report(8, "velocity ranges", &mut c8_velocity_ranges);
    report(9, "boundary taxonomy", &mut || c9_taxonomy(&mut counts));
    report(10, "time-reversal energy symmetry", &mut c10_trs);
    report(11, "step-independent reduction", &mut c11_step_independent);
    report(12, "determinism across worker counts", &mut c12_determinism);
    for fig in ["fig1", "fig2"] {
        let c: Vec<String> = counts.iter().filter(|(f, _, _)| f == fig).map(|(_, t, n)| format!("T{t}={n}")).collect();
        println!("note: critical α count per step on {fig}: {}", c.join(" "));
    }
    if failed > 0 {
        println!("{failed} of 12 criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
