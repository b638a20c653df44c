use serde::Serialize;

use super::{Gate, Observable, ParamCircuit};
use crate::error::{Error, Result};

/// Backward cone of one observable term, from the end of the circuit down to a position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermCone {
    /// Qubits in the cone at the position, ascending.
    pub support: Vec<usize>,
    /// Gate indices inside the cone, descending.
    pub gates: Vec<usize>,
    /// Free rotations among `gates`.
    pub free_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LightconeReport {
    pub position: usize,
    pub terms: Vec<TermCone>,
    /// Largest cone support at the position.
    pub k: usize,
    /// Largest count of free rotations inside a single term's cone after the position.
    pub f_g: usize,
    /// Per free parameter located after the position: the largest number of free
    /// rotations that follow it inside a cone containing it. `None` when the
    /// parameter sits before the position or in no cone.
    pub f_param: Vec<Option<usize>>,
}

impl LightconeReport {
    /// Union of all cone gate sets, ascending.
    pub fn gate_union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.terms.iter().flat_map(|t| t.gates.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }
    #[inline]
    fn contains(&self, q: usize) -> bool {
        (self.0[q >> 6] >> (q & 63)) & 1 == 1
    }
    #[inline]
    fn insert(&mut self, q: usize) {
        self.0[q >> 6] |= 1 << (q & 63);
    }
    fn to_vec(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.0.iter().enumerate() {
            let mut m = w;
            while m != 0 {
                out.push(wi * 64 + m.trailing_zeros() as usize);
                m &= m - 1;
            }
        }
        out
    }
}

/// Grows each term's support backward from the end of the circuit to `position`
/// using gate-support adjacency.
pub fn backward_lightcone(c: &ParamCircuit, obs: &Observable, position: usize) -> Result<LightconeReport> {
    if position > c.gates.len() {
        return Err(Error::Position { position, len: c.gates.len() });
    }
    obs.check_against(c)?;
    let n = c.n_qubits();
    let gate_qubits: Vec<Vec<usize>> = c.gates.iter().map(Gate::qubits).collect();
    let m = c.num_params();
    let mut f_param: Vec<Option<usize>> = vec![None; m];
    let mut terms = Vec::with_capacity(obs.len());
    for (_, p) in obs.terms() {
        let mut set = BitSet::new(n);
        for q in p.support() {
            set.insert(q);
        }
        let mut gates = Vec::new();
        let mut free_after = 0usize;
        for i in (position..c.gates.len()).rev() {
            let qs = &gate_qubits[i];
            if qs.iter().any(|&q| set.contains(q)) {
                for &q in qs {
                    set.insert(q);
                }
                gates.push(i);
                if let Some(j) = c.gates[i].free_index() {
                    let slot = &mut f_param[j];
                    *slot = Some(slot.map_or(free_after, |v: usize| v.max(free_after)));
                    free_after += 1;
                }
            }
        }
        terms.push(TermCone { support: set.to_vec(), gates, free_count: free_after });
    }
    let k = terms.iter().map(|t| t.support.len()).max().unwrap_or(0);
    let f_g = terms.iter().map(|t| t.free_count).max().unwrap_or(0);
    Ok(LightconeReport { position, terms, k, f_g, f_param })
}
