use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActivationMeta, Bloch, Gate, Generator, InputState, Observable, ParamCircuit, ParamRef};
use crate::error::{Error, Result};
use crate::pauli::{CliffordGate, CliffordKind, PauliWord};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDoc {
    pub n_system: usize,
    #[serde(default)]
    pub n_ancilla: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_state: Option<Vec<[f64; 3]>>,
    pub gates: Vec<GateDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marks: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationMeta>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GateDoc {
    Clifford { name: String, qubits: Vec<usize> },
    Rotation { generator: String, param: ParamDoc },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamDoc {
    Free(usize),
    Fixed(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub coeff: f64,
    pub pauli: String,
}

impl ParamCircuit {
    pub fn from_doc(doc: &CircuitDoc) -> Result<Self> {
        let n = doc.n_system + doc.n_ancilla;
        let input = match &doc.input_state {
            None => InputState::zeros(n),
            Some(v) => InputState(v.iter().map(|b| Bloch::new(b[0], b[1], b[2])).collect::<Result<_>>()?),
        };
        let mut gates = Vec::with_capacity(doc.gates.len());
        for (index, g) in doc.gates.iter().enumerate() {
            let wrap = |e: Error| Error::Gate { index, reason: e.to_string() };
            let gate = match g {
                GateDoc::Clifford { name, qubits } => {
                    let kind = CliffordKind::from_name(name).ok_or_else(|| Error::Gate { index, reason: format!("unknown Clifford gate {name:?}") })?;
                    Gate::Clifford(CliffordGate::new(kind, qubits).map_err(wrap)?)
                }
                GateDoc::Rotation { generator, param } => {
                    let word = PauliWord::parse(generator, n).map_err(wrap)?;
                    if word.phase_pow() != 0 {
                        return Err(Error::Gate { index, reason: format!("generator {generator:?} must be a Hermitian Pauli word without sign") });
                    }
                    let generator = Generator::from_word(&word).map_err(wrap)?;
                    let param = match *param {
                        ParamDoc::Free(j) => ParamRef::Free(j),
                        ParamDoc::Fixed(a) => ParamRef::Fixed(a),
                    };
                    Gate::Rotation { generator, param }
                }
            };
            gates.push(gate);
        }
        let c = ParamCircuit { n_system: doc.n_system, n_ancilla: doc.n_ancilla, input, gates, marks: doc.marks.clone(), activation: doc.activation.clone() };
        c.validate()?;
        Ok(c)
    }

    pub fn to_doc(&self) -> CircuitDoc {
        let gates = self
            .gates
            .iter()
            .map(|g| match g {
                Gate::Clifford(c) => GateDoc::Clifford { name: c.kind.name().to_string(), qubits: c.qubits().to_vec() },
                Gate::Rotation { generator, param } => GateDoc::Rotation {
                    generator: generator.to_text(),
                    param: match *param {
                        ParamRef::Free(j) => ParamDoc::Free(j),
                        ParamRef::Fixed(a) => ParamDoc::Fixed(a),
                    },
                },
            })
            .collect();
        CircuitDoc {
            n_system: self.n_system,
            n_ancilla: self.n_ancilla,
            input_state: Some(self.input.0.iter().map(|b| b.0).collect()),
            gates,
            marks: self.marks.clone(),
            activation: self.activation.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitDoc = serde_json::from_str(text).map_err(|e| Error::Circuit(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("circuit documents always serialize")
    }
}

impl Observable {
    /// Parses an observable document; `n` defaults to the document's `n`,
    /// then to one past the highest qubit mentioned.
    pub fn from_doc(doc: &ObservableDoc, n: Option<usize>) -> Result<Self> {
        let n = match n.or(doc.n) {
            Some(n) => n,
            None => {
                let mut hi = 0;
                for t in &doc.terms {
                    hi = hi.max(PauliWord::required_qubits(&t.pauli)?);
                }
                hi.max(1)
            }
        };
        let terms = doc.terms.iter().map(|t| Ok((t.coeff, PauliWord::parse(&t.pauli, n)?))).collect::<Result<Vec<_>>>()?;
        Observable::new(n, terms)
    }

    pub fn to_doc(&self) -> ObservableDoc {
        ObservableDoc {
            n: Some(self.num_qubits()),
            terms: self.terms().iter().map(|(c, p)| TermDoc { coeff: *c, pauli: p.to_sparse_string() }).collect(),
        }
    }

    pub fn from_json(text: &str, n: Option<usize>) -> Result<Self> {
        let doc: ObservableDoc = serde_json::from_str(text).map_err(|e| Error::Observable(e.to_string()))?;
        Self::from_doc(&doc, n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("observable documents always serialize")
    }
}
