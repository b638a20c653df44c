//! Dense statevector and density-matrix reference simulator.
//!
//! Everything here is deliberately independent of the Pauli-path engine: gates
//! act on explicit amplitudes, rotations are applied at arbitrary real angles
//! and variances come from continuous uniform sampling.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::circuit::{Gate, Observable, ParamCircuit, ParamRef};
use crate::error::{Error, Result};
use crate::estimator::{sample_rng, EstimateResult, Quantity};
use crate::pauli::{CliffordKind, Pauli1, PauliWord};

/// Default qubit cap for dense simulation.
pub const DENSE_CAP: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Pauli string as bit masks: `P|b⟩ = i^ny (−1)^{|b ∧ z|} |b ⊕ x⟩`.
#[derive(Clone, Copy, Debug)]
struct Masks {
    x: usize,
    z: usize,
    ny: u32,
}

impl Masks {
    fn from_sites(sites: &[(usize, Pauli1)], offset: usize) -> Masks {
        let mut m = Masks { x: 0, z: 0, ny: 0 };
        for &(q, p) in sites {
            let bit = 1usize << (q + offset);
            match p {
                Pauli1::I => {}
                Pauli1::X => m.x |= bit,
                Pauli1::Z => m.z |= bit,
                Pauli1::Y => {
                    m.x |= bit;
                    m.z |= bit;
                    m.ny += 1;
                }
            }
        }
        m
    }

    fn phase(&self, conj: bool) -> C64 {
        let k = if conj { (4 - self.ny % 4) % 4 } else { self.ny % 4 };
        I.powu(k)
    }
}

#[derive(Clone, Debug)]
enum DenseOp {
    Mat1 { q: usize, m: [[C64; 2]; 2] },
    Cnot { c: usize, t: usize },
    Cz { a: usize, b: usize },
    Swap { a: usize, b: usize },
    Rot { sites: Vec<(usize, Pauli1)>, param: ParamRef },
}

fn mat1(kind: CliffordKind) -> [[C64; 2]; 2] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    match kind {
        CliffordKind::H => [[h, h], [h, -h]],
        CliffordKind::S => [[ONE, ZERO], [ZERO, I]],
        CliffordKind::Sdg => [[ONE, ZERO], [ZERO, -I]],
        CliffordKind::X => [[ZERO, ONE], [ONE, ZERO]],
        CliffordKind::Y => [[ZERO, -I], [I, ZERO]],
        CliffordKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        _ => unreachable!("two-qubit gate"),
    }
}

/// State buffer. A density matrix is stored row-major as a `2q`-qubit vector
/// whose low `q` bits index the column and high `q` bits the row.
#[derive(Clone, Debug, PartialEq)]
pub enum DenseState {
    Pure(Vec<C64>),
    Mixed(Vec<C64>),
}

/// Circuit compiled to dense operations.
#[derive(Clone, Debug)]
pub struct DenseSim {
    q: usize,
    ops: Vec<DenseOp>,
    m: usize,
    initial: DenseState,
}

fn apply_mat1(v: &mut [C64], bit: usize, m: &[[C64; 2]; 2]) {
    let mask = 1usize << bit;
    for i in 0..v.len() {
        if i & mask == 0 {
            let a = v[i];
            let b = v[i | mask];
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | mask] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_rotation(v: &mut [C64], masks: Masks, theta: f64, conj: bool) {
    // exp(−iθP/2) = cos(θ/2) − i sin(θ/2) P; the complex conjugate flips i and P's phase
    let (s, c) = (theta / 2.0).sin_cos();
    let ph = masks.phase(conj);
    let coef = if conj { I * s } else { -I * s } * ph;
    let c = C64::new(c, 0.0);
    if masks.x == 0 {
        for (b, a) in v.iter_mut().enumerate() {
            let sign = if (b & masks.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            *a = *a * (c + coef * sign);
        }
        return;
    }
    // pair b with b ⊕ x; visit each pair once through its member without the top x bit
    let top = 1usize << (usize::BITS - 1 - masks.x.leading_zeros());
    for b in 0..v.len() {
        if b & top != 0 {
            continue;
        }
        let b2 = b ^ masks.x;
        let s1 = if (b & masks.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let s2 = if (b2 & masks.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let (a1, a2) = (v[b], v[b2]);
        // (P v)[b2] = ph s1 v[b], (P v)[b] = ph s2 v[b2]
        v[b] = c * a1 + coef * s2 * a2;
        v[b2] = c * a2 + coef * s1 * a1;
    }
}

impl DenseSim {
    pub fn new(c: &ParamCircuit, cap: usize) -> Result<DenseSim> {
        c.validate()?;
        let q = c.n_qubits();
        let pure = c.input.is_pure();
        let need = if pure { q } else { 2 * q };
        if q > cap || need > 2 * cap {
            return Err(Error::Cap { what: "dense simulator qubit", value: q, cap, hint: String::new() });
        }
        let ops = c
            .gates
            .iter()
            .map(|g| match g {
                Gate::Clifford(cg) => {
                    let qs = cg.qubits();
                    match cg.kind {
                        CliffordKind::CNOT => DenseOp::Cnot { c: qs[0], t: qs[1] },
                        CliffordKind::CZ => DenseOp::Cz { a: qs[0], b: qs[1] },
                        CliffordKind::SWAP => DenseOp::Swap { a: qs[0], b: qs[1] },
                        k => DenseOp::Mat1 { q: qs[0], m: mat1(k) },
                    }
                }
                Gate::Rotation { generator, param } => DenseOp::Rot { sites: generator.sites().to_vec(), param: *param },
            })
            .collect();
        let initial = if pure { DenseState::Pure(product_pure(c)) } else { DenseState::Mixed(product_mixed(c)) };
        Ok(DenseSim { q, ops, m: c.num_params(), initial })
    }

    /// Forces the density-matrix path even for pure inputs.
    pub fn new_mixed(c: &ParamCircuit, cap: usize) -> Result<DenseSim> {
        let mut s = Self::new(c, cap)?;
        s.initial = DenseState::Mixed(product_mixed(c));
        Ok(s)
    }

    pub fn num_params(&self) -> usize {
        self.m
    }

    pub fn initial(&self) -> &DenseState {
        &self.initial
    }

    /// Evolves the input under `angles` into `buf`.
    pub fn evolve_into(&self, angles: &[f64], buf: &mut DenseState) {
        *buf = self.initial.clone();
        match buf {
            DenseState::Pure(v) => self.apply_all(v, 0, false, angles),
            DenseState::Mixed(v) => {
                self.apply_all(v, self.q, false, angles);
                self.apply_all(v, 0, true, angles);
            }
        }
    }

    fn apply_all(&self, v: &mut [C64], offset: usize, conj: bool, angles: &[f64]) {
        for op in &self.ops {
            match op {
                DenseOp::Mat1 { q, m } => {
                    let m = if conj { m.map(|r| r.map(|z| z.conj())) } else { *m };
                    apply_mat1(v, q + offset, &m);
                }
                DenseOp::Cnot { c, t } => {
                    let (cm, tm) = (1usize << (c + offset), 1usize << (t + offset));
                    for b in 0..v.len() {
                        if b & cm != 0 && b & tm == 0 {
                            v.swap(b, b | tm);
                        }
                    }
                }
                DenseOp::Cz { a, b } => {
                    let mask = (1usize << (a + offset)) | (1usize << (b + offset));
                    for (i, z) in v.iter_mut().enumerate() {
                        if i & mask == mask {
                            *z = -*z;
                        }
                    }
                }
                DenseOp::Swap { a, b } => {
                    let (am, bm) = (1usize << (a + offset), 1usize << (b + offset));
                    for i in 0..v.len() {
                        if i & am != 0 && i & bm == 0 {
                            v.swap(i, (i ^ am) | bm);
                        }
                    }
                }
                DenseOp::Rot { sites, param } => {
                    let theta = match *param {
                        ParamRef::Free(j) => angles[j],
                        ParamRef::Fixed(a) => a,
                    };
                    apply_rotation(v, Masks::from_sites(sites, offset), theta, conj);
                }
            }
        }
    }

    /// `tr(P ρ)` for a Pauli word on the first `P.n` qubits.
    pub fn pauli_expectation(&self, state: &DenseState, p: &PauliWord) -> f64 {
        let masks = Masks::from_sites(&p.sites(), 0);
        let ph = masks.phase(false);
        let sign = |b: usize| if (b & masks.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let val = match state {
            DenseState::Pure(v) => {
                // ⟨ψ|P|ψ⟩ = Σ_b conj(ψ[b ⊕ x]) ph s(b) ψ[b]
                v.iter().enumerate().map(|(b, a)| v[b ^ masks.x].conj() * *a * sign(b)).sum::<C64>() * ph
            }
            DenseState::Mixed(v) => {
                let dim = 1usize << self.q;
                // tr(Pρ) = Σ_c ph s(c) ρ[c][c ⊕ x]
                (0..dim).map(|c| v[c * dim + (c ^ masks.x)] * sign(c)).sum::<C64>() * ph
            }
        };
        val.re
    }

    pub fn expectation(&self, state: &DenseState, obs: &Observable) -> f64 {
        obs.terms().iter().map(|(c, p)| c * self.pauli_expectation(state, p)).sum()
    }

    pub fn loss(&self, obs: &Observable, angles: &[f64], buf: &mut DenseState) -> f64 {
        self.evolve_into(angles, buf);
        self.expectation(buf, obs)
    }

    /// `∂L/∂θ_j` by the parameter-shift rule.
    pub fn shift_gradient(&self, obs: &Observable, angles: &mut [f64], j: usize, buf: &mut DenseState) -> f64 {
        let a = angles[j];
        angles[j] = a + PI / 2.0;
        let plus = self.loss(obs, angles, buf);
        angles[j] = a - PI / 2.0;
        let minus = self.loss(obs, angles, buf);
        angles[j] = a;
        0.5 * (plus - minus)
    }
}

fn single_pure(b: &crate::circuit::Bloch) -> [C64; 2] {
    let [x, y, z] = b.0;
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

fn product_pure(c: &ParamCircuit) -> Vec<C64> {
    let mut v = vec![ONE];
    for b in &c.input.0 {
        let s = single_pure(b);
        // new qubit is the next higher bit
        let mut next = Vec::with_capacity(v.len() * 2);
        next.extend(v.iter().map(|a| a * s[0]));
        next.extend(v.iter().map(|a| a * s[1]));
        v = next;
    }
    v
}

fn product_mixed(c: &ParamCircuit) -> Vec<C64> {
    let q = c.n_qubits();
    let dim = 1usize << q;
    let singles: Vec<[[C64; 2]; 2]> = c
        .input
        .0
        .iter()
        .map(|b| {
            let [x, y, z] = b.0;
            [[C64::new((1.0 + z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)], [C64::new(x / 2.0, y / 2.0), C64::new((1.0 - z) / 2.0, 0.0)]]
        })
        .collect();
    let mut rho = vec![ZERO; dim * dim];
    for r in 0..dim {
        for col in 0..dim {
            let mut v = ONE;
            for (k, s) in singles.iter().enumerate() {
                v *= s[(r >> k) & 1][(col >> k) & 1];
            }
            rho[r * dim + col] = v;
        }
    }
    rho
}

/// Loss `tr(O C(θ) ρ C(θ)†)` at the default cap.
pub fn loss(c: &ParamCircuit, obs: &Observable, angles: &[f64]) -> Result<f64> {
    obs.check_against(c)?;
    let sim = DenseSim::new(c, DENSE_CAP)?;
    if angles.len() != sim.m {
        return Err(Error::Dimension(angles.len(), sim.m));
    }
    let mut buf = sim.initial.clone();
    Ok(sim.loss(obs, angles, &mut buf))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Loss,
    Grad(usize),
}

/// Blocks used by the jackknife.
const JACKKNIFE_BLOCKS: u64 = 100;

/// Sample variance of the loss (or of a parameter-shift gradient) over
/// continuous uniform angles, with a blocked-jackknife standard error.
pub fn continuous_variance(c: &ParamCircuit, obs: &Observable, samples: u64, seed: u64, mode: SampleMode) -> Result<EstimateResult> {
    obs.check_against(c)?;
    if samples < 2 {
        return Err(Error::Invalid("continuous variance needs at least two samples".into()));
    }
    let sim = DenseSim::new(c, DENSE_CAP)?;
    if let SampleMode::Grad(j) = mode {
        if j >= sim.m {
            return Err(Error::Invalid(format!("parameter {j} out of range (m = {})", sim.m)));
        }
    }
    let blocks = JACKKNIFE_BLOCKS.min(samples);
    let sums: Vec<(f64, f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * samples / blocks;
            let hi = (b + 1) * samples / blocks;
            let mut angles = vec![0.0; sim.m];
            let mut buf = sim.initial.clone();
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in lo..hi {
                let mut rng = sample_rng(seed, i);
                for a in angles.iter_mut() {
                    *a = rng.gen::<f64>() * 2.0 * PI;
                }
                let x = match mode {
                    SampleMode::Loss => sim.loss(obs, &angles, &mut buf),
                    SampleMode::Grad(j) => sim.shift_gradient(obs, &mut angles, j, &mut buf),
                };
                s1 += x;
                s2 += x * x;
            }
            ((hi - lo) as f64, s1, s2)
        })
        .collect();
    let (n, s1, s2) = sums.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let var = |n: f64, s1: f64, s2: f64| (s2 - s1 * s1 / n) / (n - 1.0);
    let full = var(n, s1, s2);
    let loo: Vec<f64> = sums.iter().map(|b| var(n - b.0, s1 - b.1, s2 - b.2)).collect();
    let mean_loo = loo.iter().sum::<f64>() / blocks as f64;
    let k = blocks as f64;
    let se = ((k - 1.0) / k * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>()).sqrt();
    Ok(EstimateResult {
        quantity: match mode {
            SampleMode::Loss => Quantity::Var,
            SampleMode::Grad(_) => Quantity::GradVar,
        },
        param_index: match mode {
            SampleMode::Loss => None,
            SampleMode::Grad(j) => Some(j),
        },
        mean: full,
        stderr: se,
        samples,
        seed,
        diagnostic: false,
        per_term: None,
    })
}

/// `exp(−iθP/2)` as a dense matrix for a generator on `k` qubits.
fn rotation_matrix(p: &PauliWord, theta: f64) -> Vec<Vec<C64>> {
    let d = 1usize << p.num_qubits();
    let masks = Masks::from_sites(&p.sites(), 0);
    let ph = masks.phase(false);
    let (s, c) = (theta / 2.0).sin_cos();
    let mut m = vec![vec![ZERO; d]; d];
    for (b, row) in m.iter_mut().enumerate() {
        row[b] = C64::new(c, 0.0);
    }
    for b in 0..d {
        let sign = if (b & masks.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        // P|b⟩ = ph s(b) |b ⊕ x⟩, so the matrix entry sits at row b ⊕ x, column b
        m[b ^ masks.x][b] += -I * s * ph * sign;
    }
    m
}

fn kron(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![ZERO; ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn second_moment(p: &PauliWord, theta: f64) -> Vec<Vec<C64>> {
    let r = rotation_matrix(p, theta);
    let rd = rotation_matrix(p, -theta);
    let rr = kron(&r, &rd);
    kron(&rr, &rr)
}

fn average(p: &PauliWord, thetas: &[f64]) -> Vec<Vec<C64>> {
    let mut acc: Option<Vec<Vec<C64>>> = None;
    for &t in thetas {
        let m = second_moment(p, t);
        acc = Some(match acc {
            None => m,
            Some(mut a) => {
                for (ra, rm) in a.iter_mut().zip(m) {
                    for (x, y) in ra.iter_mut().zip(rm) {
                        *x += y;
                    }
                }
                a
            }
        });
    }
    let mut a = acc.expect("at least one angle");
    let k = thetas.len() as f64;
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x /= k;
        }
    }
    a
}

/// Largest entry deviation between the discrete average over `angles` of
/// `(R(θ) ⊗ R(−θ))^{⊗2}` and its continuous average over `[0, 2π)`.
pub fn two_design_deviation(generator: &PauliWord, angles: &[f64]) -> Result<f64> {
    if !generator.is_hermitian() || generator.is_identity() {
        return Err(Error::InvalidGenerator(format!("{generator} must be a Hermitian non-identity word")));
    }
    if generator.num_qubits() > 2 {
        return Err(Error::InvalidGenerator("two-design check supports one- and two-qubit generators".into()));
    }
    // the integrand is a trigonometric polynomial of degree 2 in θ, so 64 trapezoid nodes are exact
    let nodes: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
    let cont = average(generator, &nodes);
    let disc = average(generator, angles);
    let mut dev: f64 = 0.0;
    for (rc, rd) in cont.iter().zip(&disc) {
        for (a, b) in rc.iter().zip(rd) {
            dev = dev.max((a - b).norm());
        }
    }
    Ok(dev)
}

/// Deviation for the four quarter-turn angles.
pub fn two_design_check(generator: &PauliWord) -> Result<f64> {
    two_design_deviation(generator, &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0])
}

/// Negative control: the quarter-turn set with its last angle dropped.
/// Three evenly spaced angles would still integrate the second moment exactly.
pub fn two_design_control(generator: &PauliWord) -> Result<f64> {
    two_design_deviation(generator, &[0.0, PI / 2.0, PI])
}
