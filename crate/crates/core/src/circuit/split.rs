use super::{quarter_turns, Gate, Observable, ParamCircuit, ParamRef};
use crate::error::{Error, Result};
use crate::pauli::{Direction, PauliWord};

#[derive(Clone, Debug, PartialEq)]
pub struct SplitReport {
    pub splits: bool,
    /// Two distinct terms with identical commutation signatures, if any.
    pub witness: Option<(PauliWord, PauliWord)>,
    /// GF(2) rank of the pushed-forward generators over the full register.
    pub rank: usize,
    /// Whether the pushed-forward generators generate every Pauli word up to phase.
    pub generates_full_group: bool,
}

/// Incremental GF(2) row basis over symplectic vectors.
#[derive(Clone, Debug, Default)]
pub struct Gf2Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Gf2Basis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Inserts a row; returns whether it was independent of the basis.
    pub fn insert(&mut self, mut row: Vec<u64>) -> bool {
        for (pivot, r) in &self.rows {
            if (row[pivot >> 6] >> (pivot & 63)) & 1 == 1 {
                for (a, b) in row.iter_mut().zip(r) {
                    *a ^= b;
                }
            }
        }
        let Some(pivot) = row.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize) else {
            return false;
        };
        // keep the basis reduced so later insertions see a single pivot per row
        for (_, r) in self.rows.iter_mut() {
            if (r[pivot >> 6] >> (pivot & 63)) & 1 == 1 {
                for (a, b) in r.iter_mut().zip(&row) {
                    *a ^= b;
                }
            }
        }
        self.rows.push((pivot, row));
        true
    }
}

fn symplectic_row(p: &PauliWord) -> Vec<u64> {
    let n = p.num_qubits();
    let mut row = vec![0u64; (2 * n).div_ceil(64)];
    for (q, s) in p.sites() {
        let c = s.code();
        if c & 1 == 1 {
            row[q >> 6] |= 1 << (q & 63);
        }
        if c & 2 == 2 {
            let b = n + q;
            row[b >> 6] |= 1 << (b & 63);
        }
    }
    row
}

/// Whether a gate counts as part of the Clifford skeleton: named Cliffords and
/// fixed rotations at quarter turns.
fn clifford_part(g: &Gate) -> bool {
    match g {
        Gate::Clifford(_) => true,
        Gate::Rotation { param: ParamRef::Fixed(a), .. } => quarter_turns(*a).is_some(),
        Gate::Rotation { .. } => false,
    }
}

fn apply_forward(p: &mut PauliWord, g: &Gate) {
    match g {
        Gate::Clifford(cg) => {
            let (a, b) = cg.pair();
            p.apply_clifford_unchecked(cg.kind, a, b, Direction::Forward);
        }
        Gate::Rotation { generator, param: ParamRef::Fixed(a) } => {
            let k = quarter_turns(*a).expect("clifford part");
            p.apply_rotation_sparse(generator.sites(), k, Direction::Forward);
        }
        _ => {}
    }
}

fn apply_backward(p: &mut PauliWord, g: &Gate) {
    match g {
        Gate::Clifford(cg) => {
            let (a, b) = cg.pair();
            p.apply_clifford_unchecked(cg.kind, a, b, Direction::Backward);
        }
        Gate::Rotation { generator, param: ParamRef::Fixed(a) } => {
            let k = quarter_turns(*a).expect("clifford part");
            p.apply_rotation_sparse(generator.sites(), k, Direction::Backward);
        }
        _ => {}
    }
}

/// Split condition for an observable under a circuit.
///
/// Every rotation that is not part of the Clifford skeleton contributes a
/// generator pushed forward through the later skeleton. Terms split when their
/// commutation signatures against these generators are pairwise distinct. The
/// signature is evaluated by pulling each term backward through the skeleton,
/// which gives the same commutation bits without materializing the pushed words.
pub fn split_check(c: &ParamCircuit, obs: &Observable) -> Result<SplitReport> {
    obs.check_against(c)?;
    let n = c.n_qubits();
    let rot_positions: Vec<usize> = c.gates.iter().enumerate().filter(|(_, g)| !clifford_part(g)).map(|(i, _)| i).collect();
    if rot_positions.is_empty() {
        return Err(Error::Circuit("split check needs at least one non-Clifford rotation".into()));
    }
    let words = rot_positions.len().div_ceil(64);
    let lifted = obs.lifted(n)?;
    let mut signatures: Vec<Vec<u64>> = Vec::with_capacity(lifted.len());
    for (_, term) in &lifted {
        let mut p = term.clone();
        let mut sig = vec![0u64; words];
        let mut r = rot_positions.len();
        for i in (0..c.gates.len()).rev() {
            let g = &c.gates[i];
            if clifford_part(g) {
                apply_backward(&mut p, g);
            } else if let Gate::Rotation { generator, .. } = g {
                r -= 1;
                if p.anticommutes_sparse(generator.sites()) {
                    sig[r >> 6] |= 1 << (r & 63);
                }
            }
        }
        signatures.push(sig);
    }
    let mut witness = None;
    let mut order: Vec<usize> = (0..signatures.len()).collect();
    order.sort_by(|&a, &b| signatures[a].cmp(&signatures[b]));
    for w in order.windows(2) {
        if signatures[w[0]] == signatures[w[1]] {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            witness = Some((obs.terms()[a].1.clone(), obs.terms()[b].1.clone()));
            break;
        }
    }

    // Rank of the pushed-forward generators. Conjugating the whole set by the
    // full skeleton is a symplectic bijection, so each generator can instead be
    // pulled backward through the earlier skeleton.
    let mut basis = Gf2Basis::new();
    let full = 2 * n;
    let mut pulled: Vec<PauliWord> = Vec::new();
    let mut skeleton_before: Vec<usize> = Vec::new();
    let mut next_rot = 0;
    for (i, g) in c.gates.iter().enumerate() {
        if next_rot < rot_positions.len() && rot_positions[next_rot] == i {
            next_rot += 1;
            if let Gate::Rotation { generator, .. } = g {
                let mut p = generator.to_word(n)?;
                for &s in skeleton_before.iter().rev() {
                    apply_backward(&mut p, &c.gates[s]);
                }
                pulled.push(p);
            }
        } else {
            skeleton_before.push(i);
        }
    }
    for p in &pulled {
        basis.insert(symplectic_row(p));
        if basis.rank() == full {
            break;
        }
    }
    Ok(SplitReport { splits: witness.is_none(), witness, rank: basis.rank(), generates_full_group: basis.rank() == full })
}

/// Generators pushed forward through every later skeleton gate, in gate order.
pub fn pushed_generators(c: &ParamCircuit) -> Result<Vec<PauliWord>> {
    let n = c.n_qubits();
    let mut out = Vec::new();
    for (i, g) in c.gates.iter().enumerate() {
        if clifford_part(g) {
            continue;
        }
        if let Gate::Rotation { generator, .. } = g {
            let mut p = generator.to_word(n)?;
            for later in &c.gates[i + 1..] {
                if clifford_part(later) {
                    apply_forward(&mut p, later);
                }
            }
            out.push(p);
        }
    }
    Ok(out)
}
