//! Gadget-layer insertion and parameter activation.
//!
//! A gadget couples one fresh ancilla to one system wire through
//! `R_XX, R_YY, R_ZZ` (ancilla first). The ancilla preparation `op` is either
//! folded into the input state or realized as trainable `R_X, R_Y` rotations
//! at the start of the circuit, ahead of the `op_end` mark.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{
    quarter_turns, ActivationMeta, Bloch, Gate, Generator, Observable, ParamCircuit, ParamRef, GADGET_LAYER, GADGET_LAYER_END,
};
use crate::error::{Error, Result};
use crate::pauli::{Direction, Pauli1, PauliWord};

/// Mark placed after the trainable `op` prefix (0 when `op` is fixed).
pub const OP_END: &str = "op_end";

/// Default number of random draws used to pick the enlarged gadget.
pub const PROBE_BUDGET: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpModel {
    /// Ancilla prepared with Bloch vector `(1, 1, 1)/√3`.
    FixedOptimal,
    /// Ancilla in |0⟩ followed by free `R_X` then `R_Y`.
    TrainableRxRy,
}

impl OpModel {
    pub fn tau(self) -> f64 {
        match self {
            OpModel::FixedOptimal => 1.0 / 3.0,
            OpModel::TrainableRxRy => 0.25,
        }
    }

    pub fn bloch(self) -> Bloch {
        match self {
            OpModel::FixedOptimal => {
                let c = 1.0 / 3f64.sqrt();
                Bloch([c, c, c])
            }
            OpModel::TrainableRxRy => Bloch::ZERO,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpModel::FixedOptimal => "fixed",
            OpModel::TrainableRxRy => "trainable",
        }
    }

    pub fn from_name(s: &str) -> Option<OpModel> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed-optimal" => Some(OpModel::FixedOptimal),
            "trainable" | "rxry" => Some(OpModel::TrainableRxRy),
            _ => None,
        }
    }

    /// Infers the model from an MPQC: a non-empty `op` prefix means trainable.
    pub fn detect(c: &ParamCircuit) -> OpModel {
        match c.mark(OP_END) {
            Some(p) if p > 0 => OpModel::TrainableRxRy,
            _ => OpModel::FixedOptimal,
        }
    }
}

/// One gadget: ancilla, system wire and the free indices of `R_XX, R_YY, R_ZZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GadgetSpec {
    pub system: usize,
    pub ancilla: usize,
    pub params: [usize; 3],
}

impl GadgetSpec {
    pub fn gates(&self) -> Vec<Gate> {
        [Pauli1::X, Pauli1::Y, Pauli1::Z]
            .iter()
            .zip(self.params)
            .map(|(&p, j)| Gate::free(Generator::two(self.ancilla, p, self.system, p).expect("distinct wires"), j))
            .collect()
    }
}

fn two_body(a: usize, b: usize, p: Pauli1, j: usize) -> Gate {
    Gate::free(Generator::two(a, p, b, p).expect("distinct wires"), j)
}

/// Three sub-layers over `pairs` of (ancilla, system): all `R_XX`, then all
/// `R_YY`, then all `R_ZZ`. Indices are assigned in gate order from `next`.
fn layer_gates(pairs: &[(usize, usize)], next: &mut usize) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(3 * pairs.len());
    for p in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
        for &(a, s) in pairs {
            gates.push(two_body(a, s, p, *next));
            *next += 1;
        }
    }
    gates
}

/// Adds ancillas prepared by `op`, returning their wire indices. Trainable
/// `op` rotations are appended to the prefix before `op_end`.
fn add_ancillas(c: &mut ParamCircuit, count: usize, op: OpModel, next: &mut usize) -> Vec<usize> {
    let first = c.n_qubits();
    c.n_ancilla += count;
    c.input.0.extend(std::iter::repeat(op.bloch()).take(count));
    let wires: Vec<usize> = (first..first + count).collect();
    if op == OpModel::TrainableRxRy {
        let at = c.mark(OP_END).unwrap_or(0);
        let mut gates = Vec::with_capacity(2 * count);
        for &a in &wires {
            gates.push(Gate::free(Generator::one(a, Pauli1::X).expect("valid"), *next));
            gates.push(Gate::free(Generator::one(a, Pauli1::Y).expect("valid"), *next + 1));
            *next += 2;
        }
        c.splice(at, gates, false);
        c.marks.insert(OP_END.into(), at + 2 * count);
    }
    wires
}

/// Splices a gadget layer at `position`: one ancilla per system wire.
pub fn insert_gadget_layer(c: &ParamCircuit, position: usize, op: OpModel) -> Result<ParamCircuit> {
    c.validate()?;
    if position > c.gates.len() {
        return Err(Error::Position { position, len: c.gates.len() });
    }
    if c.n_ancilla > 0 || c.mark(GADGET_LAYER).is_some() {
        return Err(Error::Circuit("circuit already carries ancillas or a gadget layer".into()));
    }
    let mut out = c.clone();
    out.activation = None;
    let n = c.n_system;
    let mut next = c.num_params();
    let pairs: Vec<(usize, usize)> = (0..n).map(|s| (n + s, s)).collect();
    let gates = layer_gates(&pairs, &mut next);
    let len = gates.len();
    out.splice(position, gates, true);
    out.marks.insert(GADGET_LAYER.into(), position);
    out.marks.insert(GADGET_LAYER_END.into(), position + len);
    // `op_end` sits at 0 until the ancillas exist; the prefix then shifts every later mark.
    out.marks.insert(OP_END.into(), 0);
    add_ancillas(&mut out, n, op, &mut next);
    out.validate()?;
    Ok(out)
}

/// Gadgets of the inserted layer, one per system wire.
pub fn gadget_layer_specs(c: &ParamCircuit) -> Result<Vec<GadgetSpec>> {
    let (a, b) = layer_bounds(c)?;
    let n = c.n_system;
    let mut specs: Vec<Option<GadgetSpec>> = vec![None; n];
    let sub = (b - a) / 3;
    for (k, g) in c.gates[a..b].iter().enumerate() {
        let (Gate::Rotation { generator, param: ParamRef::Free(j) }, qs) = (g, g.qubits()) else {
            return Err(Error::Circuit(format!("gate {} inside the gadget layer is not a free rotation", a + k)));
        };
        if qs.len() != 2 || qs[0] >= n || qs[1] < n || generator.sites()[0].1 != generator.sites()[1].1 {
            return Err(Error::Circuit(format!("gate {} inside the gadget layer is not a gadget rotation", a + k)));
        }
        let slot = specs[qs[0]].get_or_insert(GadgetSpec { system: qs[0], ancilla: qs[1], params: [usize::MAX; 3] });
        slot.params[k / sub.max(1)] = *j;
    }
    Ok(specs.into_iter().flatten().collect())
}

fn layer_bounds(c: &ParamCircuit) -> Result<(usize, usize)> {
    match (c.mark(GADGET_LAYER), c.mark(GADGET_LAYER_END)) {
        (Some(a), Some(b)) if a <= b && b <= c.gates.len() && (b - a) % 3 == 0 => Ok((a, b)),
        (Some(_), Some(_)) => Err(Error::Circuit("inconsistent gadget layer marks".into())),
        _ => Err(Error::MissingGadgetLayer),
    }
}

/// Backward conjugation of `I ⊗ p_out` (ancilla, system) through
/// `R_ZZ(k₃), R_YY(k₂), R_XX(k₁)` at quarter turns. Returns the (ancilla,
/// system) letters; the sign is dropped.
pub fn gadget_backpropagate(p_out: Pauli1, k: (u8, u8, u8)) -> (Pauli1, Pauli1) {
    let mut w = PauliWord::single(2, 1, p_out).expect("two qubits");
    for (p, turns) in [(Pauli1::Z, k.2), (Pauli1::Y, k.1), (Pauli1::X, k.0)] {
        w.apply_rotation_sparse(&[(0, p), (1, p)], turns, Direction::Backward);
    }
    (w.get(0), w.get(1))
}

fn ancilla_of(c: &ParamCircuit, wire: usize) -> Result<usize> {
    gadget_layer_specs(c)?
        .into_iter()
        .find(|g| g.system == wire)
        .map(|g| g.ancilla)
        .ok_or_else(|| Error::Circuit(format!("no gadget on system wire {wire}")))
}

/// Pulls `term` backward through `gates[from..]` at random quarter turns. At a
/// fixed non-quarter rotation that anticommutes, one of the two branches is
/// chosen at random.
fn propagate_tail(c: &ParamCircuit, term: &PauliWord, from: usize, rng: &mut ChaCha8Rng) -> PauliWord {
    let mut w = term.clone();
    for g in c.gates[from..].iter().rev() {
        match g {
            Gate::Clifford(cg) => {
                let (a, b) = cg.pair();
                w.apply_clifford_unchecked(cg.kind, a, b, Direction::Backward);
            }
            Gate::Rotation { generator, param } => {
                let k = match *param {
                    ParamRef::Free(_) => rng.gen_range(0..4u8),
                    ParamRef::Fixed(a) => quarter_turns(a).unwrap_or_else(|| if rng.gen::<bool>() { 1 } else { 0 }),
                };
                w.apply_rotation_sparse(generator.sites(), k, Direction::Backward);
            }
        }
    }
    w
}

/// Hit counts per system wire of the Pauli arriving at the gadget layer over
/// `budget` random draws (random term, random angles).
pub fn probe_wires(c: &ParamCircuit, obs: &Observable, budget: usize, seed: u64) -> Result<Vec<usize>> {
    let (_, end) = layer_bounds(c)?;
    let terms = obs.lifted(c.n_qubits())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; c.n_system];
    for _ in 0..budget {
        let t = &terms[rng.gen_range(0..terms.len())].1;
        let w = propagate_tail(c, t, end, &mut rng);
        for (q, _) in w.sites() {
            if q < c.n_system {
                hits[q] += 1;
            }
        }
    }
    Ok(hits)
}

/// Builds a T-activating circuit for the single-qubit free rotation at gate
/// index `target`, located before the gadget layer.
///
/// A fresh gadget is placed right before T, and three rotations coupling the
/// ancilla of the enlarged gadget to T's wire are placed right after T. The
/// enlarged gadget sits on T's wire when the probe sees that wire reach the
/// gadget layer, otherwise on the most frequently hit wire.
pub fn activate_single(c: &ParamCircuit, obs: &Observable, target: usize, budget: usize, seed: u64) -> Result<ParamCircuit> {
    c.validate()?;
    let (layer, _) = layer_bounds(c)?;
    let Some(Gate::Rotation { generator, param: ParamRef::Free(tj) }) = c.gates.get(target) else {
        return Err(Error::Invalid(format!("gate {target} is not a free rotation")));
    };
    if generator.sites().len() != 1 {
        return Err(Error::Invalid(format!("gate {target} is not a single-qubit rotation")));
    }
    if target >= layer {
        return Err(Error::Invalid(format!("gate {target} does not precede the gadget layer at {layer}")));
    }
    let t = generator.sites()[0].0;
    if t >= c.n_system {
        return Err(Error::Invalid(format!("gate {target} acts on an ancilla")));
    }
    let hits = probe_wires(c, obs, budget, seed)?;
    let wire = if hits[t] > 0 {
        t
    } else {
        let (best, &count) = hits.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).expect("non-empty register");
        if count == 0 {
            return Err(Error::ActivationInfeasible(format!(
                "no observable term reached a system wire at the gadget layer in {budget} draws (hits {hits:?})"
            )));
        }
        best
    };
    let op = OpModel::detect(c);
    let anc_i = ancilla_of(c, wire)?;
    let mut out = c.clone();
    let mut next = c.num_params();
    let tj = *tj;
    let new_anc = out.n_qubits();
    // Splice before adding ancillas: a trainable op prefix shifts positions.
    let after: Vec<Gate> = [Pauli1::X, Pauli1::Y, Pauli1::Z].iter().map(|&p| two_body(anc_i, t, p, 0)).collect();
    let before: Vec<Gate> = [Pauli1::X, Pauli1::Y, Pauli1::Z].iter().map(|&p| two_body(new_anc, t, p, 0)).collect();
    let after = renumber(after, &mut next);
    let before = renumber(before, &mut next);
    out.splice(target + 1, after, false);
    out.splice(target, before, true);
    add_ancillas(&mut out, 1, op, &mut next);
    out.activation = Some(ActivationMeta::Single { target_param: tj, wire });
    out.validate()?;
    Ok(out)
}

fn renumber(gates: Vec<Gate>, next: &mut usize) -> Vec<Gate> {
    gates
        .into_iter()
        .map(|g| match g {
            Gate::Rotation { generator, param: ParamRef::Free(_) } => {
                let j = *next;
                *next += 1;
                Gate::free(generator, j)
            }
            other => other,
        })
        .collect()
}

/// Zone description returned alongside the transformed circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    pub start: usize,
    pub end: usize,
    /// Gate indices inside the zone (in the input circuit), ascending.
    pub gates: Vec<usize>,
    pub wires: Vec<usize>,
    pub params: Vec<usize>,
}

/// Locates the activation zone for `frontier` in an MPQC without modifying it.
///
/// `T_i` is the last free rotation touching `t_i` before the gadget layer. The
/// zone is the backward cone of the frontier wires from just after the latest
/// `T_i` down to `zone_start` (default: the earliest `T_i`).
pub fn find_zone(c: &ParamCircuit, frontier: &[usize], zone_start: Option<usize>) -> Result<Zone> {
    let (layer, _) = layer_bounds(c)?;
    if frontier.is_empty() {
        return Err(Error::Invalid("empty frontier".into()));
    }
    let set: BTreeSet<usize> = frontier.iter().copied().collect();
    if set.len() != frontier.len() {
        return Err(Error::Invalid("repeated frontier wire".into()));
    }
    let mut t_pos = Vec::with_capacity(frontier.len());
    for &t in frontier {
        if t >= c.n_system {
            return Err(Error::Invalid(format!("frontier wire {t} is not a system wire")));
        }
        let pos = (0..layer)
            .rev()
            .find(|&i| c.gates[i].free_index().is_some() && c.gates[i].qubits().contains(&t))
            .ok_or_else(|| Error::Invalid(format!("no free rotation on wire {t} before the gadget layer")))?;
        t_pos.push(pos);
    }
    let end = t_pos.iter().max().expect("non-empty") + 1;
    let earliest = *t_pos.iter().min().expect("non-empty");
    let start = zone_start.unwrap_or(earliest);
    if start > earliest {
        return Err(Error::Invalid(format!("zone start {start} lies after frontier gate {earliest}")));
    }
    let mut wires = set.clone();
    let mut gates = Vec::new();
    for i in (start..end).rev() {
        let qs = c.gates[i].qubits();
        if qs.iter().any(|q| wires.contains(q)) {
            wires.extend(qs);
            gates.push(i);
        }
    }
    gates.reverse();
    if wires.iter().any(|&q| q >= c.n_system) {
        return Err(Error::Invalid("activation zone reaches an ancilla".into()));
    }
    let params = gates.iter().filter_map(|&i| c.gates[i].free_index()).collect();
    Ok(Zone { start, end, gates, wires: wires.into_iter().collect(), params })
}

/// Activates every free rotation in the zone of `frontier`.
///
/// The gadgets on the frontier wires are enlarged with three rotations
/// inserted at the zone's later boundary, and a fresh gadget layer covering the
/// zone's wires is inserted at its earlier boundary.
pub fn activate_zone(c: &ParamCircuit, frontier: &[usize], zone_start: Option<usize>) -> Result<ParamCircuit> {
    c.validate()?;
    let zone = find_zone(c, frontier, zone_start)?;
    let op = OpModel::detect(c);
    let mut out = c.clone();
    let mut next = c.num_params();
    let mut enlarge = Vec::with_capacity(3 * frontier.len());
    for p in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
        for &t in frontier {
            enlarge.push(two_body(ancilla_of(c, t)?, t, p, 0));
        }
    }
    let enlarge = renumber(enlarge, &mut next);
    let first_new = out.n_qubits();
    let pairs: Vec<(usize, usize)> = zone.wires.iter().enumerate().map(|(i, &w)| (first_new + i, w)).collect();
    let fresh = layer_gates(&pairs, &mut next);
    out.splice(zone.end, enlarge, false);
    out.splice(zone.start, fresh, true);
    add_ancillas(&mut out, zone.wires.len(), op, &mut next);
    let f_act = zone.params.len();
    out.activation = Some(ActivationMeta::Zone {
        frontier: frontier.to_vec(),
        target_params: zone.params,
        k_act: zone.wires.len(),
        f_act,
    });
    out.validate()?;
    Ok(out)
}
