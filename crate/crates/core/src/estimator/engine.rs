//! Compiled gate program and backward Pauli propagation.

use crate::circuit::{quarter_turns, Bloch, Gate, ParamCircuit, ParamRef};
use crate::error::{Error, Result};
use crate::pauli::{CliffordKind, Direction, Pauli1, PauliWord};

use super::noise::{NoiseModel, PauliChannel};

/// Upper limit on fixed rotations at non-quarter angles in exact-split mode.
pub const MAX_SPLIT_ROTATIONS: usize = 12;

#[derive(Clone, Debug)]
pub(crate) enum Slot {
    Free(u32),
    Quarter(u8),
    Angle { cos: f64, sin: f64 },
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Cliff { kind: CliffordKind, a: usize, b: usize },
    Rot { gen: Box<[(usize, Pauli1)]>, slot: Slot },
    Noise(Vec<PauliChannel>),
}

#[derive(Clone, Debug)]
pub(crate) struct Program {
    pub ops: Vec<Op>,
    pub m: usize,
    pub input: Vec<Bloch>,
    /// Number of fixed rotations at non-quarter angles.
    pub splits: usize,
}

/// One Pauli path (or, in exact-split mode, one branch) reaching the input.
#[derive(Clone, Debug, Default)]
pub(crate) struct Branch {
    /// Signed contribution `w · g · tr(s_0 ρ)`.
    pub value: f64,
    /// Free parameters whose rotation anticommuted with the arriving Pauli.
    pub anti: Vec<u32>,
    /// Product of squared input overlaps.
    pub survival: f64,
    /// Squared noise attenuation.
    pub atten_sq: f64,
}

impl Program {
    pub fn compile(c: &ParamCircuit, noise: Option<&NoiseModel>, exact_split: bool) -> Result<Program> {
        c.validate()?;
        if let Some(nm) = noise {
            nm.validate(c)?;
        }
        let mut ops = Vec::with_capacity(c.gates.len() + 8);
        let mut splits = 0;
        let push_noise = |ops: &mut Vec<Op>, b: usize| {
            if let Some(nm) = noise {
                if let Some(chs) = nm.sites.get(&b) {
                    if !chs.is_empty() {
                        ops.push(Op::Noise(chs.clone()));
                    }
                }
            }
        };
        for (i, g) in c.gates.iter().enumerate() {
            push_noise(&mut ops, i);
            match g {
                Gate::Clifford(cg) => {
                    let (a, b) = cg.pair();
                    ops.push(Op::Cliff { kind: cg.kind, a, b });
                }
                Gate::Rotation { generator, param } => {
                    let slot = match *param {
                        ParamRef::Free(j) => Slot::Free(j as u32),
                        ParamRef::Fixed(angle) => match quarter_turns(angle) {
                            Some(k) => Slot::Quarter(k),
                            None if exact_split => {
                                splits += 1;
                                Slot::Angle { cos: angle.cos(), sin: angle.sin() }
                            }
                            None => return Err(Error::UnsupportedAngle { index: i, angle }),
                        },
                    };
                    ops.push(Op::Rot { gen: generator.sites().to_vec().into_boxed_slice(), slot });
                }
            }
        }
        push_noise(&mut ops, c.gates.len());
        if splits > MAX_SPLIT_ROTATIONS {
            return Err(Error::Cap {
                what: "continuous fixed rotation",
                value: splits,
                cap: MAX_SPLIT_ROTATIONS,
                hint: " (exact-split mode branches 2^B paths)".into(),
            });
        }
        Ok(Program { ops, m: c.num_params(), input: c.input.0.clone(), splits })
    }

    #[inline]
    fn overlap(&self, w: &PauliWord) -> f64 {
        let mut v = w.hermitian_sign();
        for (q, s) in w.sites() {
            v *= self.input[q].overlap(s);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Backward propagation of a single path. Requires `splits == 0`.
    pub fn propagate(&self, term: &PauliWord, angles: &[u8], out: &mut Branch) {
        debug_assert_eq!(self.splits, 0);
        let mut w = term.clone();
        out.anti.clear();
        let mut g = 1.0;
        for op in self.ops.iter().rev() {
            match op {
                Op::Cliff { kind, a, b } => w.apply_clifford_unchecked(*kind, *a, *b, Direction::Backward),
                Op::Rot { gen, slot } => match slot {
                    Slot::Free(j) => {
                        if w.apply_rotation_sparse(gen, angles[*j as usize], Direction::Backward) {
                            out.anti.push(*j);
                        }
                    }
                    Slot::Quarter(k) => {
                        w.apply_rotation_sparse(gen, *k, Direction::Backward);
                    }
                    Slot::Angle { .. } => unreachable!("continuous rotation in single-path mode"),
                },
                Op::Noise(chs) => {
                    for ch in chs {
                        g *= ch.attenuation(&w);
                    }
                }
            }
        }
        let f = self.overlap(&w);
        out.value = g * f;
        out.survival = f * f;
        out.atten_sq = g * g;
    }

    /// Backward propagation with branching at continuous fixed rotations.
    pub fn propagate_branches(&self, term: &PauliWord, angles: &[u8], out: &mut Vec<Branch>) {
        out.clear();
        if self.splits == 0 {
            let mut b = Branch::default();
            self.propagate(term, angles, &mut b);
            out.push(b);
            return;
        }
        struct St {
            w: PauliWord,
            weight: f64,
            anti: Vec<u32>,
        }
        let mut states = vec![St { w: term.clone(), weight: 1.0, anti: Vec::new() }];
        for op in self.ops.iter().rev() {
            match op {
                Op::Cliff { kind, a, b } => {
                    for s in states.iter_mut() {
                        s.w.apply_clifford_unchecked(*kind, *a, *b, Direction::Backward);
                    }
                }
                Op::Rot { gen, slot } => match slot {
                    Slot::Free(j) => {
                        for s in states.iter_mut() {
                            if s.w.apply_rotation_sparse(gen, angles[*j as usize], Direction::Backward) {
                                s.anti.push(*j);
                            }
                        }
                    }
                    Slot::Quarter(k) => {
                        for s in states.iter_mut() {
                            s.w.apply_rotation_sparse(gen, *k, Direction::Backward);
                        }
                    }
                    Slot::Angle { cos, sin } => {
                        let mut extra = Vec::new();
                        for s in states.iter_mut() {
                            if s.w.anticommutes_sparse(gen) {
                                // R† s R = cos φ s − i sin φ sG
                                let mut w2 = s.w.clone();
                                w2.apply_rotation_sparse(gen, 1, Direction::Backward);
                                extra.push(St { w: w2, weight: s.weight * sin, anti: s.anti.clone() });
                                s.weight *= cos;
                            }
                        }
                        states.extend(extra);
                    }
                },
                Op::Noise(chs) => {
                    for s in states.iter_mut() {
                        for ch in chs {
                            s.weight *= ch.attenuation(&s.w);
                        }
                    }
                }
            }
        }
        for s in states {
            let f = self.overlap(&s.w);
            out.push(Branch { value: s.weight * f, anti: s.anti, survival: f * f, atten_sq: f64::NAN });
        }
    }

    /// Exact sum over Pauli paths of one term for the path formula.
    ///
    /// Each free rotation that anticommutes with the arriving Pauli splits the
    /// path into the classes `{0, π}` and `{π/2, 3π/2}`, each with probability
    /// one half. `visit(prob, value², anti)` is called once per complete path.
    pub fn enumerate_paths(&self, term: &PauliWord, visit: &mut dyn FnMut(f64, f64, &[u32])) {
        debug_assert_eq!(self.splits, 0);
        let mut anti = Vec::new();
        self.dfs(self.ops.len(), term.clone(), 1.0, 1.0, &mut anti, visit);
    }

    fn dfs(&self, mut idx: usize, mut w: PauliWord, mut g: f64, prob: f64, anti: &mut Vec<u32>, visit: &mut dyn FnMut(f64, f64, &[u32])) {
        let base = anti.len();
        while idx > 0 {
            idx -= 1;
            match &self.ops[idx] {
                Op::Cliff { kind, a, b } => w.apply_clifford_unchecked(*kind, *a, *b, Direction::Backward),
                Op::Rot { gen, slot } => match slot {
                    Slot::Free(j) => {
                        if w.anticommutes_sparse(gen) {
                            anti.push(*j);
                            let mut turned = w.clone();
                            turned.apply_rotation_sparse(gen, 1, Direction::Backward);
                            self.dfs(idx, turned, g, prob * 0.5, anti, visit);
                            self.dfs(idx, w, g, prob * 0.5, anti, visit);
                            anti.truncate(base);
                            return;
                        }
                    }
                    Slot::Quarter(k) => {
                        w.apply_rotation_sparse(gen, *k, Direction::Backward);
                    }
                    Slot::Angle { .. } => unreachable!("continuous rotation in path enumeration"),
                },
                Op::Noise(chs) => {
                    for ch in chs {
                        g *= ch.attenuation(&w);
                    }
                }
            }
        }
        let f = self.overlap(&w);
        visit(prob, g * g * f * f, anti);
        anti.truncate(base);
    }
}
