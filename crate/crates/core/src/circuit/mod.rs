//! Flat circuit IR, observables, product input states and static analyses.

mod json;
mod lightcone;
mod placement;
mod split;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

pub use json::{CircuitDoc, GateDoc, ObservableDoc, ParamDoc, TermDoc};
pub use lightcone::{backward_lightcone, LightconeReport, TermCone};
pub use placement::{placement_advisor, placement_for_depth, Placement};
pub use split::{pushed_generators, split_check, Gf2Basis, SplitReport};

use crate::error::{Error, Result};
use crate::pauli::{CliffordGate, Pauli1, PauliWord};

/// Name of the mark placed at the first gate of an inserted gadget layer.
pub const GADGET_LAYER: &str = "gadget_layer";
/// Name of the mark placed just after the last gate of the gadget layer.
pub const GADGET_LAYER_END: &str = "gadget_layer_end";

const ANGLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamRef {
    Free(usize),
    Fixed(f64),
}

/// Returns `k` with `angle ≡ k·π/2 (mod 2π)` when the angle is a quarter turn.
pub fn quarter_turns(angle: f64) -> Option<u8> {
    let t = angle / FRAC_PI_2;
    let r = t.round();
    if (t - r).abs() <= ANGLE_TOL * (1.0 + t.abs()) {
        Some((r as i64).rem_euclid(4) as u8)
    } else {
        None
    }
}

/// Hermitian Pauli generator in sparse form, sorted by qubit, never the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Generator(Vec<(usize, Pauli1)>);

impl Generator {
    pub fn new(mut sites: Vec<(usize, Pauli1)>) -> Result<Self> {
        sites.retain(|&(_, p)| p != Pauli1::I);
        if sites.is_empty() {
            return Err(Error::InvalidGenerator("identity generator".into()));
        }
        sites.sort();
        if sites.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidGenerator("repeated qubit".into()));
        }
        Ok(Generator(sites))
    }

    pub fn from_word(w: &PauliWord) -> Result<Self> {
        if w.phase_pow() != 0 {
            return Err(Error::InvalidGenerator(format!("{w} must carry phase +1")));
        }
        Self::new(w.sites())
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Self::from_word(&PauliWord::parse(text, n)?)
    }

    pub fn two(a: usize, pa: Pauli1, b: usize, pb: Pauli1) -> Result<Self> {
        Self::new(vec![(a, pa), (b, pb)])
    }

    pub fn one(q: usize, p: Pauli1) -> Result<Self> {
        Self::new(vec![(q, p)])
    }

    pub fn sites(&self) -> &[(usize, Pauli1)] {
        &self.0
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&(q, _)| q)
    }

    pub fn max_qubit(&self) -> usize {
        self.0.last().map(|s| s.0).unwrap_or(0)
    }

    pub fn to_word(&self, n: usize) -> Result<PauliWord> {
        PauliWord::from_sparse(n, &self.0)
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(q, p)| format!("{}{}", p.letter(), q)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Clifford(CliffordGate),
    Rotation { generator: Generator, param: ParamRef },
}

impl Gate {
    pub fn rotation(generator: Generator, param: ParamRef) -> Gate {
        Gate::Rotation { generator, param }
    }

    pub fn free(generator: Generator, index: usize) -> Gate {
        Gate::Rotation { generator, param: ParamRef::Free(index) }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Clifford(g) => g.qubits().to_vec(),
            Gate::Rotation { generator, .. } => generator.qubits().collect(),
        }
    }

    pub fn free_index(&self) -> Option<usize> {
        match self {
            Gate::Rotation { param: ParamRef::Free(j), .. } => Some(*j),
            _ => None,
        }
    }
}

/// Single-qubit Bloch vector; the overlap of a Pauli with the state is its component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bloch(pub [f64; 3]);

impl Bloch {
    pub const ZERO: Bloch = Bloch([0.0, 0.0, 1.0]);

    pub fn new(rx: f64, ry: f64, rz: f64) -> Result<Self> {
        let b = Bloch([rx, ry, rz]);
        if !b.0.iter().all(|v| v.is_finite()) || b.norm_sq() > 1.0 + 1e-9 {
            return Err(Error::Circuit(format!("Bloch vector ({rx}, {ry}, {rz}) has norm above 1")));
        }
        Ok(b)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// `tr(P ρ)` for a single-qubit Pauli `P`.
    #[inline]
    pub fn overlap(&self, p: Pauli1) -> f64 {
        match p {
            Pauli1::I => 1.0,
            Pauli1::X => self.0[0],
            Pauli1::Y => self.0[1],
            Pauli1::Z => self.0[2],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputState(pub Vec<Bloch>);

impl InputState {
    pub fn zeros(n: usize) -> Self {
        InputState(vec![Bloch::ZERO; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_pure(&self) -> bool {
        self.0.iter().all(|b| (b.norm_sq() - 1.0).abs() < 1e-12)
    }

    /// `tr(P ρ)` for a word on the full register.
    pub fn expectation(&self, p: &PauliWord) -> f64 {
        let mut v = p.hermitian_sign();
        for (q, s) in p.sites() {
            v *= self.0[q].overlap(s);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub input: InputState,
    pub gates: Vec<Gate>,
    pub marks: BTreeMap<String, usize>,
    /// Set by the activation transforms; read by the bound evaluator.
    pub activation: Option<ActivationMeta>,
}

/// Record of an activation transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActivationMeta {
    Single {
        target_param: usize,
        /// System wire whose gadget was enlarged.
        wire: usize,
    },
    Zone {
        frontier: Vec<usize>,
        target_params: Vec<usize>,
        /// Wires covered by the zone's fresh gadget layer.
        k_act: usize,
        /// Free rotations inside the zone.
        f_act: usize,
    },
}

impl ParamCircuit {
    /// Empty circuit on `n_system` qubits prepared in |0…0⟩.
    pub fn new(n_system: usize) -> Self {
        ParamCircuit { n_system, n_ancilla: 0, input: InputState::zeros(n_system), gates: Vec::new(), marks: BTreeMap::new(), activation: None }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    pub fn num_params(&self) -> usize {
        self.gates.iter().filter(|g| g.free_index().is_some()).count()
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// Appends a rotation with the next free index.
    pub fn push_free(&mut self, generator: Generator) -> usize {
        let j = self.num_params();
        self.gates.push(Gate::free(generator, j));
        j
    }

    pub fn mark(&self, name: &str) -> Option<usize> {
        self.marks.get(name).copied()
    }

    /// Gate-list position of each free parameter.
    pub fn param_positions(&self) -> Vec<usize> {
        let mut pos = vec![usize::MAX; self.num_params()];
        for (i, g) in self.gates.iter().enumerate() {
            if let Some(j) = g.free_index() {
                if j < pos.len() {
                    pos[j] = i;
                }
            }
        }
        pos
    }

    /// Checks qubit ranges, the dense free-index invariant, marks and the input state.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        if n == 0 {
            return Err(Error::Circuit("circuit has no qubits".into()));
        }
        if self.input.len() != n {
            return Err(Error::Circuit(format!("input state has {} qubits, circuit has {n}", self.input.len())));
        }
        let m = self.num_params();
        let mut seen = vec![false; m];
        for (index, g) in self.gates.iter().enumerate() {
            for q in g.qubits() {
                if q >= n {
                    return Err(Error::Gate { index, reason: format!("qubit {q} out of range for {n} qubits") });
                }
            }
            if let Gate::Rotation { param, .. } = g {
                match *param {
                    ParamRef::Free(j) => {
                        if j >= m {
                            return Err(Error::Gate { index, reason: format!("free index {j} leaves a gap (m = {m})") });
                        }
                        if seen[j] {
                            return Err(Error::Gate { index, reason: format!("duplicate free index {j}") });
                        }
                        seen[j] = true;
                    }
                    ParamRef::Fixed(a) if !a.is_finite() => {
                        return Err(Error::Gate { index, reason: "non-finite fixed angle".into() });
                    }
                    ParamRef::Fixed(_) => {}
                }
            }
        }
        for (name, &pos) in &self.marks {
            if pos > self.gates.len() {
                return Err(Error::Circuit(format!("mark {name:?} at {pos} beyond gate count {}", self.gates.len())));
            }
        }
        Ok(())
    }

    /// Inserts gates at `position`, shifting marks at or after it.
    /// Marks exactly at `position` stay put when `keep_marks_at` is set.
    pub(crate) fn splice(&mut self, position: usize, gates: Vec<Gate>, keep_marks_at: bool) {
        let k = gates.len();
        for pos in self.marks.values_mut() {
            if *pos > position || (*pos == position && !keep_marks_at) {
                *pos += k;
            }
        }
        self.gates.splice(position..position, gates);
    }

    /// Count of fixed rotations whose angle is not a quarter turn.
    pub fn continuous_fixed_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Rotation { param: ParamRef::Fixed(a), .. } if quarter_turns(*a).is_none()))
            .count()
    }
}

/// Real combination of Hermitian Pauli terms over the system register.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    n: usize,
    terms: Vec<(f64, PauliWord)>,
}

/// Default term cap: `10·n²`.
pub fn default_term_cap(n: usize) -> usize {
    10 * n * n
}

impl Observable {
    /// Builds an observable, folding signs into coefficients and merging duplicates.
    /// Terms that cancel exactly are dropped.
    pub fn new(n: usize, terms: Vec<(f64, PauliWord)>) -> Result<Self> {
        let mut merged: Vec<(f64, PauliWord)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (c, p) in terms {
            if p.num_qubits() != n {
                return Err(Error::Dimension(p.num_qubits(), n));
            }
            if !c.is_finite() || c == 0.0 {
                return Err(Error::Observable(format!("coefficient of {p} must be finite and nonzero")));
            }
            if !p.is_hermitian() {
                return Err(Error::Observable(format!("term {p} is not Hermitian")));
            }
            let c = c * p.hermitian_sign();
            let p = p.with_phase(0);
            if p.is_identity() {
                return Err(Error::Observable("identity term shifts the loss by a constant; remove it".into()));
            }
            match index.get(&p) {
                Some(&i) => {
                    let slot: &mut (f64, PauliWord) = &mut merged[i];
                    slot.0 += c;
                }
                None => {
                    index.insert(p.clone(), merged.len());
                    merged.push((c, p));
                }
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        if merged.is_empty() {
            return Err(Error::Observable("no terms".into()));
        }
        Ok(Observable { n, terms: merged })
    }

    pub fn parse_terms(n: usize, terms: &[(f64, &str)]) -> Result<Self> {
        let t = terms.iter().map(|&(c, s)| Ok((c, PauliWord::parse(s, n)?))).collect::<Result<Vec<_>>>()?;
        Self::new(n, t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliWord)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ c_α²`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c * c).sum()
    }

    /// `min |c_α|`.
    pub fn min_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn check_cap(&self, cap: usize) -> Result<()> {
        if self.terms.len() > cap {
            return Err(Error::Cap { what: "observable term", value: self.terms.len(), cap, hint: String::new() });
        }
        Ok(())
    }

    /// Terms lifted onto an `n_total`-qubit register.
    pub fn lifted(&self, n_total: usize) -> Result<Vec<(f64, PauliWord)>> {
        self.terms.iter().map(|(c, p)| Ok((*c, p.resized(n_total)?))).collect()
    }

    /// Checks that the observable lives on the circuit's system register.
    pub fn check_against(&self, c: &ParamCircuit) -> Result<()> {
        if self.n > c.n_system {
            return Err(Error::Observable(format!("observable has {} qubits, circuit system register has {}", self.n, c.n_system)));
        }
        Ok(())
    }
}
