use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, Generator, ParamCircuit, GADGET_LAYER, GADGET_LAYER_END};
use crate::error::{Error, Result};
use crate::mpqc::OP_END;
use crate::pauli::{Pauli1, PauliWord};

/// Pauli channel `ρ ↦ (1 − Σp)ρ + Σ p_i σ_i ρ σ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliChannel {
    pub terms: Vec<(Generator, f64)>,
}

impl PauliChannel {
    pub fn new(terms: Vec<(Generator, f64)>) -> Result<Self> {
        let ch = PauliChannel { terms };
        for (_, p) in &ch.terms {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::Noise(format!("probability {p} must be finite and non-negative")));
            }
        }
        if ch.gamma() >= 0.5 {
            return Err(Error::Noise(format!("channel strength {} must stay below 1/2", ch.gamma())));
        }
        Ok(ch)
    }

    /// Total error probability `γ = Σ p_i`.
    pub fn gamma(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p).sum()
    }

    /// Uniform mixture of every non-identity Pauli on up to two qubits, or of
    /// single-qubit Paulis on each wire for wider supports.
    pub fn depolarizing(qubits: &[usize], gamma: f64) -> Result<Self> {
        let mut terms = Vec::new();
        if qubits.len() <= 2 {
            let k = qubits.len() as u32;
            let count = 4usize.pow(k) - 1;
            for code in 1..=count {
                let sites: Vec<(usize, Pauli1)> = qubits.iter().enumerate().map(|(i, &q)| (q, Pauli1::from_code(((code >> (2 * i)) & 3) as u8))).collect();
                terms.push((Generator::new(sites)?, gamma / count as f64));
            }
        } else {
            let count = 3 * qubits.len();
            for &q in qubits {
                for p in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
                    terms.push((Generator::one(q, p)?, gamma / count as f64));
                }
            }
        }
        Self::new(terms)
    }

    /// Depolarizing-style noise spread evenly over disjoint groups of at most two qubits.
    pub fn grouped(groups: &[Vec<usize>], gamma: f64) -> Result<Self> {
        let mut terms = Vec::new();
        let share = gamma / groups.len().max(1) as f64;
        for g in groups {
            terms.extend(Self::depolarizing(g, share)?.terms);
        }
        Self::new(terms)
    }

    /// `1 − 2 Σ_i p_i [σ_i anticommutes with s]`.
    #[inline]
    pub fn attenuation(&self, s: &PauliWord) -> f64 {
        let mut acc = 0.0;
        for (g, p) in &self.terms {
            if s.anticommutes_sparse(g.sites()) {
                acc += p;
            }
        }
        1.0 - 2.0 * acc
    }
}

/// Channels attached to gate-list boundaries. Key `b` means the channel acts
/// after gate `b − 1` and before gate `b`; key 0 acts on the input state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseModel {
    pub sites: BTreeMap<usize, Vec<PauliChannel>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_two_qubit_depol: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<NoiseOverride>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseOverride {
    /// Gate index the channel follows; −1 places it on the input state.
    pub after_gate: i64,
    pub channel: Vec<NoiseTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTerm {
    pub pauli: String,
    pub p: f64,
}

impl NoiseModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, boundary: usize, ch: PauliChannel) {
        self.sites.entry(boundary).or_default().push(ch);
    }

    pub fn is_empty(&self) -> bool {
        self.sites.values().all(|v| v.is_empty())
    }

    /// Largest single-channel strength.
    pub fn max_gamma(&self) -> f64 {
        self.sites.values().flatten().map(PauliChannel::gamma).fold(0.0, f64::max)
    }

    pub fn validate(&self, c: &ParamCircuit) -> Result<()> {
        let n = c.n_qubits();
        for (&b, chans) in &self.sites {
            if b > c.gates.len() {
                return Err(Error::Noise(format!("channel boundary {b} beyond gate count {}", c.gates.len())));
            }
            for ch in chans {
                for (g, _) in &ch.terms {
                    if g.max_qubit() >= n {
                        return Err(Error::Noise(format!("channel Pauli {} outside {n} qubits", g.to_text())));
                    }
                }
            }
        }
        Ok(())
    }

    /// Layout with one channel of strength `γ` after every free rotation outside
    /// the gadget layer (on that rotation's support), one after each of the three
    /// gadget sub-layers (spread over the gadgets) and one on the ancillas right
    /// after their preparation.
    pub fn block_layout(c: &ParamCircuit, gamma: f64) -> Result<Self> {
        let mut model = NoiseModel::new();
        let layer = match (c.mark(GADGET_LAYER), c.mark(GADGET_LAYER_END)) {
            (Some(a), Some(b)) if b >= a => Some((a, b)),
            _ => None,
        };
        let op_end = c.mark(OP_END).unwrap_or(0);
        for (i, g) in c.gates.iter().enumerate() {
            let in_layer = layer.is_some_and(|(a, b)| i >= a && i < b);
            if in_layer || i < op_end {
                continue;
            }
            if let Gate::Rotation { generator, param: crate::circuit::ParamRef::Free(_) } = g {
                let qs: Vec<usize> = generator.qubits().collect();
                model.add(i + 1, PauliChannel::depolarizing(&qs, gamma)?);
            }
        }
        if let Some((a, b)) = layer {
            let len = b - a;
            if len % 3 != 0 {
                return Err(Error::Noise(format!("gadget layer of {len} gates is not three sub-layers")));
            }
            let sub = len / 3;
            for s in 0..3 {
                let lo = a + s * sub;
                let groups: Vec<Vec<usize>> = c.gates[lo..lo + sub].iter().map(Gate::qubits).collect();
                model.add(lo + sub, PauliChannel::grouped(&groups, gamma)?);
            }
            if c.n_ancilla > 0 {
                let anc: Vec<Vec<usize>> = (c.n_system..c.n_qubits()).map(|q| vec![q]).collect();
                model.add(op_end, PauliChannel::grouped(&anc, gamma)?);
            }
        }
        Ok(model)
    }

    pub fn from_doc(doc: &NoiseDoc, c: &ParamCircuit) -> Result<Self> {
        let mut model = match doc.default_two_qubit_depol {
            Some(g) => Self::block_layout(c, g)?,
            None => NoiseModel::new(),
        };
        let n = c.n_qubits();
        for ov in &doc.overrides {
            if ov.after_gate < -1 || ov.after_gate >= c.gates.len() as i64 {
                return Err(Error::Noise(format!("after_gate {} out of range", ov.after_gate)));
            }
            let boundary = (ov.after_gate + 1) as usize;
            let terms = ov
                .channel
                .iter()
                .map(|t| Ok((Generator::from_word(&PauliWord::parse(&t.pauli, n)?)?, t.p)))
                .collect::<Result<Vec<_>>>()?;
            model.sites.insert(boundary, vec![PauliChannel::new(terms)?]);
        }
        model.validate(c)?;
        Ok(model)
    }

    pub fn from_json(text: &str, c: &ParamCircuit) -> Result<Self> {
        let doc: NoiseDoc = serde_json::from_str(text).map_err(|e| Error::Noise(e.to_string()))?;
        Self::from_doc(&doc, c)
    }
}
