//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to stderr
//! (bypassing the test harness capture) before asserting.

mod common;

use std::io::Write;
use std::time::Instant;

use common::{case_table, dense_backprop, PAULIS};
use plateau::bench::{run_experiment, AnsatzVariant, ExperimentPlan};
use plateau::circuit::{split_check, Gate, Observable, ParamCircuit, ParamRef, GADGET_LAYER};
use plateau::estimator::{bounds, Estimator, EstimatorOptions, Mode, NoiseModel, ParamSelection};
use plateau::io::{csv_bytes, EstimateRow};
use plateau::mpqc::{activate_single, activate_zone, gadget_backpropagate, insert_gadget_layer, OpModel, PROBE_BUDGET};
use plateau::oracle::{continuous_variance, loss, two_design_check, two_design_control, SampleMode};
use plateau::pauli::{Pauli1, PauliWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {id} [{name}]: {verdict} ({detail})");
}

fn opts(cap: usize) -> EstimatorOptions {
    EstimatorOptions { exact_param_cap: cap, ..Default::default() }
}

fn exact(c: &ParamCircuit, o: &Observable, noise: Option<&NoiseModel>, sel: &ParamSelection) -> plateau::estimator::ExactOutput {
    Estimator::new(c, o, noise, opts(40)).unwrap().exact(sel).unwrap()
}

/// Gradient variances of the original circuit, which need not split.
fn pqc_grads(c: &ParamCircuit, o: &Observable) -> Vec<f64> {
    let e = Estimator::new(c, o, None, EstimatorOptions { mode: Mode::FullMoments, exact_param_cap: 12, ..Default::default() }).unwrap();
    e.exact(&ParamSelection::All).unwrap().grads.into_iter().map(|(_, g)| g).collect()
}

/// Single-qubit free rotations on system wires before the gadget layer.
fn activation_targets(c: &ParamCircuit) -> Vec<usize> {
    let layer = c.mark(GADGET_LAYER).unwrap();
    (0..layer)
        .filter(|&i| {
            matches!(&c.gates[i], Gate::Rotation { generator, param: ParamRef::Free(_) }
                if generator.sites().len() == 1 && generator.sites()[0].0 < c.n_system)
        })
        .collect()
}

/// Wires touched by a free rotation before the gadget layer.
fn zone_wires(c: &ParamCircuit) -> Vec<usize> {
    let layer = c.mark(GADGET_LAYER).unwrap();
    let mut w: Vec<usize> = c.gates[..layer]
        .iter()
        .filter(|g| g.free_index().is_some())
        .flat_map(|g| g.qubits())
        .filter(|&q| q < c.n_system)
        .collect();
    w.sort_unstable();
    w.dedup();
    w
}

/// A random PQC with a gadget layer and, for `kind` 1 or 2, a single or zone activation.
fn random_mpqc(rng: &mut ChaCha8Rng, n: usize, m: usize, kind: u8) -> Option<(ParamCircuit, ParamCircuit, Observable, OpModel)> {
    let pqc = common::random_pqc(rng, n, m, 0.3);
    let o = common::random_observable(rng, n, 3);
    let op = if rng.gen_bool(0.5) { OpModel::FixedOptimal } else { OpModel::TrainableRxRy };
    let pos = rng.gen_range(if kind == 0 { 0 } else { 1 }..=pqc.gates.len());
    let mp = insert_gadget_layer(&pqc, pos, op).ok()?;
    let c = match kind {
        0 => mp,
        1 => {
            let t = activation_targets(&mp);
            if t.is_empty() {
                return None;
            }
            activate_single(&mp, &o, t[rng.gen_range(0..t.len())], PROBE_BUDGET, rng.gen()).ok()?
        }
        _ => {
            let w = zone_wires(&mp);
            if w.is_empty() {
                return None;
            }
            let pick: Vec<usize> = w.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
            let frontier = if pick.is_empty() { vec![w[0]] } else { pick };
            activate_zone(&mp, &frontier, None).ok()?
        }
    };
    Some((pqc, c, o, op))
}

#[test]
fn acceptance_1_two_design_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for g in ["Z0", "X0", "X0 X1", "Z0 Z1", "Y0 X1"] {
        worst = worst.max(two_design_check(&PauliWord::parse(g, 2).unwrap()).unwrap());
    }
    let mut control = f64::INFINITY;
    for g in ["Z0", "X0 X1"] {
        control = control.min(two_design_control(&PauliWord::parse(g, 2).unwrap()).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && control > 1e-3 && secs < 1.0;
    report(1, "2-design identity", pass, &format!("max deviation {worst:.2e}, 3-angle control {control:.3e}, {secs:.3} s"));
    assert!(pass);
}

#[test]
fn acceptance_2_discrete_continuous_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cases, mut var_ok, mut grad_ok, mut nontrivial) = (0, 0, 0, 0);
    let mut worst_z: f64 = 0.0;
    while cases < 50 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=8);
        let c = common::random_pqc(&mut rng, n, m, 0.3);
        let o = common::random_observable(&mut rng, n, 4);
        if !split_check(&c, &o).unwrap().splits {
            continue;
        }
        let Ok(est) = Estimator::new(&c, &o, None, EstimatorOptions::default()) else { continue };
        let j = rng.gen_range(0..m);
        let ex = est.exact(&ParamSelection::List(vec![j])).unwrap();
        let seed = cases as u64;
        let v = continuous_variance(&c, &o, 1_000_000, seed, SampleMode::Loss).unwrap();
        let g = continuous_variance(&c, &o, 1_000_000, seed + 1000, SampleMode::Grad(j)).unwrap();
        let agree = |want: f64, got: &plateau::estimator::EstimateResult| (want - got.mean).abs() <= 3.0 * got.stderr + 1e-12;
        var_ok += agree(ex.variance, &v) as usize;
        grad_ok += agree(ex.grads[0].1, &g) as usize;
        if ex.variance > 1e-12 {
            nontrivial += 1;
            worst_z = worst_z.max((ex.variance - v.mean).abs() / v.stderr);
        }
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = var_ok >= 47 && grad_ok >= 47 && secs < 600.0;
    report(
        2,
        "discrete-continuous equivalence",
        pass,
        &format!("var {var_ok}/50, grad {grad_ok}/50, {nontrivial} nonconstant losses, worst var z {worst_z:.2}, {secs:.1} s"),
    );
    assert!(pass);
}

#[test]
fn acceptance_3_bound_soundness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut made, mut checks, mut violations) = (0, 0, Vec::new());
    let mut tightest = f64::INFINITY;
    while made < 30 {
        let kind = if made < 18 { 0 } else if made < 24 { 1 } else { 2 };
        let n = rng.gen_range(if kind == 0 { 1 } else { 2 }..=3);
        let m = rng.gen_range(2..=8);
        let Some((pqc, c, o, op)) = random_mpqc(&mut rng, n, m, kind) else { continue };
        assert!(c.n_qubits() <= 10);
        let rep = bounds(&c, &o, op, None).unwrap();
        let ex = exact(&c, &o, None, &ParamSelection::All);
        let grad = |j: usize| ex.grads[j].1;
        let mut check = |what: String, value: f64, lower: f64| {
            checks += 1;
            if lower > 0.0 {
                tightest = tightest.min(value / lower);
            }
            if value < lower * (1.0 - 1e-12) {
                violations.push(format!("{what}: {value:.3e} < {lower:.3e}"));
            }
        };
        let orig = pqc_grads(&pqc, &o);
        if let Some(a) = &rep.activated {
            for &j in &a.params {
                check(format!("instance {made} activated grad {j}"), grad(j), a.lower);
            }
            made += 1;
            continue;
        }
        check(format!("instance {made} variance"), ex.variance, rep.variance_lower);
        for &(j, b) in &rep.grad_after {
            if j < orig.len() && orig[j] > 1e-12 {
                check(format!("instance {made} grad {j} after layer"), grad(j), b);
            }
        }
        let layer = c.mark(GADGET_LAYER).unwrap();
        for g in &c.gates[..layer] {
            if let Some(j) = g.free_index() {
                if j < orig.len() {
                    check(format!("instance {made} grad {j} before layer"), grad(j), rep.before_factor * orig[j]);
                }
            }
        }
        made += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations.is_empty() && secs < 600.0;
    report(
        3,
        "bound soundness",
        pass,
        &format!("30 circuits, {checks} bound checks, {} violations, tightest ratio {tightest:.3}, {secs:.1} s {}", violations.len(), violations.join("; ")),
    );
    assert!(pass);
}

#[test]
fn acceptance_4_gadget_table() {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut splits_ok = true;
    for p in PAULIS {
        let mut counts = std::collections::BTreeMap::new();
        for k1 in 0..4 {
            for k2 in 0..4 {
                for k3 in 0..4 {
                    let k = (k1, k2, k3);
                    let got = gadget_backpropagate(p, k);
                    if got != case_table(p, k) || got != dense_backprop(p, k) {
                        mismatches += 1;
                    }
                    *counts.entry(got).or_insert(0) += 1;
                }
            }
        }
        let expect: Vec<usize> = if p == Pauli1::I { vec![64] } else { vec![16; 4] };
        splits_ok &= counts.values().copied().collect::<Vec<usize>>() == expect;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && splits_ok && secs < 1.0;
    report(4, "gadget table", pass, &format!("256 configurations, {mismatches} mismatches, 16/16/16/16 splits {splits_ok}, {secs:.3} s"));
    assert!(pass);
}

#[test]
fn acceptance_5_zero_init_equality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut made, mut worst) = (0, 0.0f64);
    let mut circuits = 0;
    while made < 20 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=8);
        let pqc = common::random_pqc(&mut rng, n, m, 0.3);
        let o = common::random_observable(&mut rng, n, 3);
        let op = if made % 2 == 0 { OpModel::FixedOptimal } else { OpModel::TrainableRxRy };
        let mp = insert_gadget_layer(&pqc, rng.gen_range(1..=pqc.gates.len()), op).unwrap();
        let targets = activation_targets(&mp);
        let wires = zone_wires(&mp);
        let act = if made % 3 == 2 && !wires.is_empty() {
            activate_zone(&mp, &wires[..1], None).ok()
        } else if !targets.is_empty() {
            activate_single(&mp, &o, targets[0], PROBE_BUDGET, 5).ok()
        } else {
            None
        };
        let Some(act) = act else { continue };
        for _ in 0..10 {
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let base = loss(&pqc, &o, &a).unwrap();
            for c in [&mp, &act] {
                let mut z = a.clone();
                z.resize(c.num_params(), 0.0);
                worst = worst.max((loss(c, &o, &z).unwrap() - base).abs());
            }
        }
        circuits += 2;
        made += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 60.0;
    report(5, "zero-init equality", pass, &format!("20 PQCs, {circuits} transformed circuits, 10 angle vectors each, max |dL| {worst:.2e}, {secs:.2} s"));
    assert!(pass);
}

struct TfiClauses {
    decay: f64,
    in_window: bool,
    min_frac: f64,
    grad_range: (f64, f64),
    pqc_n4: (f64, f64),
}

impl TfiClauses {
    fn pass(&self) -> bool {
        self.decay >= 10.0 && self.in_window && self.min_frac > 0.1 && self.grad_range.0 >= 1e-3 && self.grad_range.1 <= 1e-1
    }

    fn summary(&self, name: &str) -> String {
        format!(
            "{name}: PQC var decay {:.2}x, MPQC var in [bound, HS] {}, min MPQC var/HS {:.3}, n=20 MPQC post-gadget gradvar [{:.2e}, {:.2e}]",
            self.decay, self.in_window, self.min_frac, self.grad_range.0, self.grad_range.1
        )
    }
}

fn tfi_clauses(variant: AnsatzVariant) -> TfiClauses {
    let plan = ExperimentPlan { n_values: (4..=20).collect(), blocks: None, samples: 10_000, seed: 6, variant, ..ExperimentPlan::default() };
    let out = run_experiment(&plan).unwrap();
    let var = |n: usize, kind: &str| out.rows.iter().find(|r| r.n == n && r.circuit_kind == kind && r.quantity == "var").unwrap().clone();
    let mut in_window = true;
    let mut min_frac = f64::INFINITY;
    for p in &out.manifest.points {
        let v = var(p.n, "mpqc").mean;
        in_window &= v >= p.variance_lower && v <= p.hs_norm_sq;
        min_frac = min_frac.min(v / p.hs_norm_sq);
    }
    let grad_range = out
        .rows
        .iter()
        .filter(|r| r.n == 20 && r.circuit_kind == "mpqc" && r.quantity == "gradvar")
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.mean), b.max(r.mean)));
    let n4 = var(4, "pqc");
    TfiClauses { decay: n4.mean / var(20, "pqc").mean, in_window, min_frac, grad_range, pqc_n4: (n4.mean, n4.stderr) }
}

#[test]
fn acceptance_6_tfi_separation() {
    let start = Instant::now();
    let default = tfi_clauses(AnsatzVariant::XxZ);
    let with_y = tfi_clauses(AnsatzVariant::XxZY);
    // independent check of the n = 4 PQC value against the dense simulator
    let pqc = plateau::bench::thermal_ansatz(4, 4, AnsatzVariant::XxZ).unwrap();
    let obs = plateau::bench::tfi_observable(4, 1.0, 0.5, true).unwrap();
    let dense = continuous_variance(&pqc, &obs, 200_000, 6, SampleMode::Loss).unwrap();
    let z = (dense.mean - default.pqc_n4.0).abs() / (dense.stderr.powi(2) + default.pqc_n4.1.powi(2)).sqrt();
    let secs = start.elapsed().as_secs_f64();
    let pass = default.pass() && secs < 1800.0;
    report(
        6,
        "TFI separation",
        pass,
        &format!(
            "{}; {}; n=4 PQC var vs dense simulator z {z:.2}; {secs:.1} s",
            default.summary("xx-z"),
            with_y.summary("xx-z-y")
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_7_scale() {
    let start = Instant::now();
    let plan = ExperimentPlan { n_values: vec![100], blocks: Some(100), samples: 10_000, seed: 7, variant: AnsatzVariant::XxZ, ..ExperimentPlan::default() };
    let out = run_experiment(&plan).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let p = &out.manifest.points[0];
    let threads = rayon::current_num_threads();
    // per-sample cost per gate at n = 50 and n = 100, on the plain ansatz
    let per_gate = |n: usize| {
        let c = plateau::bench::thermal_ansatz(n, n, AnsatzVariant::XxZ).unwrap();
        let o = plateau::bench::tfi_observable(n, 1.0, 0.5, true).unwrap();
        let e = Estimator::new(&c, &o, None, EstimatorOptions::default()).unwrap();
        let t = Instant::now();
        e.monte_carlo(4000, 70, &ParamSelection::None).unwrap();
        t.elapsed().as_secs_f64() / c.gates.len() as f64
    };
    let slope = per_gate(100) / per_gate(50);
    let pass = secs < 900.0 && out.rows.iter().all(|r| r.mean.is_finite()) && (0.5..2.0).contains(&slope);
    report(
        7,
        "scale",
        pass,
        &format!("n=100, {} PQC gates, {} MPQC gates, {} samples, {} rows, {secs:.1} s on {threads} thread(s), per-gate cost ratio n=100/n=50 {slope:.2}", p.gates_pqc, p.gates_mpqc, plan.samples, out.rows.len()),
    );
    assert!(pass);
}

#[test]
fn acceptance_8_noise_robustness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut made, mut violations, mut increases) = (0, 0, 0);
    let mut tightest = f64::INFINITY;
    while made < 20 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=6);
        let Some((_, c, o, op)) = random_mpqc(&mut rng, n, m, 0) else { continue };
        let clean = exact(&c, &o, None, &ParamSelection::None).variance;
        for gamma in [0.01, 0.05] {
            let noise = NoiseModel::block_layout(&c, gamma).unwrap();
            let noisy = exact(&c, &o, Some(&noise), &ParamSelection::None).variance;
            let rep = bounds(&c, &o, op, Some(&noise)).unwrap();
            tightest = tightest.min(noisy / rep.noisy_variance_lower);
            violations += (noisy < rep.noisy_variance_lower * (1.0 - 1e-12)) as usize;
            increases += (noisy > clean * (1.0 + 1e-12) + 1e-15) as usize;
        }
        made += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && increases == 0 && secs < 600.0;
    report(8, "noise robustness", pass, &format!("20 MPQCs x 2 strengths, {violations} bound violations, {increases} increases, tightest ratio {tightest:.3}, {secs:.2} s"));
    assert!(pass);
}

#[test]
fn acceptance_9_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pqc = common::random_pqc(&mut rng, 4, 8, 0.3);
    let mp = insert_gadget_layer(&pqc, 4, OpModel::FixedOptimal).unwrap();
    let o = common::random_observable(&mut rng, 4, 4);
    let noise = NoiseModel::block_layout(&mp, 0.02).unwrap();
    let plan = ExperimentPlan { n_values: vec![4, 6], blocks: Some(3), samples: 3000, seed: 9, ..ExperimentPlan::default() };
    let run = || {
        let e = Estimator::new(&mp, &o, Some(&noise), EstimatorOptions::default()).unwrap();
        let mc = e.monte_carlo(20_000, 42, &ParamSelection::All).unwrap();
        let rows: Vec<EstimateRow> = std::iter::once(&mc.variance).chain(&mc.grads).map(EstimateRow::from).collect();
        let mut bytes = csv_bytes(&rows).unwrap();
        bytes.extend(csv_bytes(&run_experiment(&plan).unwrap().rows).unwrap());
        bytes
    };
    let outputs: Vec<Vec<u8>> = [1, 4, 8]
        .iter()
        .map(|&t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(run))
        .collect();
    let pass = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    report(9, "determinism", pass, &format!("estimate and bench CSV ({} bytes) identical across 1, 4, 8 workers: {pass}", outputs[0].len()));
    assert!(pass);
}
