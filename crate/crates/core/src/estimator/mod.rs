//! Loss and gradient variance over uniformly random rotation angles.
//!
//! Drawing each free angle from `{0, π/2, π, 3π/2}` reproduces the second
//! moments of the uniform distribution on `[0, 2π)`, so every sample is a
//! Clifford propagation of the observable back to the product input. The path
//! formula sums `c_α² g² f²` over the resulting Pauli paths; the full-moments
//! mode tracks signed values and subtracts the squared mean instead.

mod bounds;
mod engine;
mod noise;
mod rng;

use rand::Rng;
use rayon::prelude::*;

pub use bounds::{bounds, bounds_from_inputs, ActivatedBound, ActivatedInputs, BoundInputs, BoundReport};
pub use engine::MAX_SPLIT_ROTATIONS;
pub use noise::{NoiseDoc, NoiseModel, NoiseOverride, NoiseTerm, PauliChannel};
pub use rng::{sample_rng, SampleRng};

use crate::circuit::{default_term_cap, split_check, Observable, ParamCircuit};
use crate::error::{Error, Result};
use crate::pauli::PauliWord;
use engine::{Branch, Program};

/// Samples per accumulation chunk. Fixed so that results do not depend on the
/// number of worker threads.
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `E[Σ_α c_α² g² f²]` over discrete draws, dropping paths that never meet an
    /// anticommuting free rotation (their contribution is constant in θ).
    PathFormula,
    /// `E[L²] − E[L]²` over discrete draws with signed, phase-tracked values.
    FullMoments,
}

#[derive(Clone, Debug)]
pub struct EstimatorOptions {
    pub mode: Mode,
    /// Branch at fixed rotations whose angle is not a quarter turn.
    pub exact_split: bool,
    /// Run the path formula even when the split condition fails; results are
    /// then flagged as diagnostics.
    pub acknowledge_nonsplit: bool,
    /// Term counts above this use importance sampling in path-formula mode.
    pub importance_threshold: usize,
    /// Observable term cap; `None` means `10·n²` over the system register.
    pub term_cap: Option<usize>,
    /// Largest parameter count accepted by exact enumeration.
    pub exact_param_cap: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            mode: Mode::PathFormula,
            exact_split: false,
            acknowledge_nonsplit: false,
            importance_threshold: 64,
            term_cap: None,
            exact_param_cap: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamSelection {
    None,
    All,
    List(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Var,
    GradVar,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Var => "var",
            Quantity::GradVar => "gradvar",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub quantity: Quantity,
    pub param_index: Option<usize>,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    /// Set when the split condition failed and the caller acknowledged it.
    pub diagnostic: bool,
    /// Per-term means of `c_α² g² f²` (path formula, term loop only).
    pub per_term: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McOutput {
    pub variance: EstimateResult,
    pub grads: Vec<EstimateResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactOutput {
    pub variance: f64,
    pub grads: Vec<(usize, f64)>,
}

/// Record of one sampled path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    /// `Π_q overlap(s_q, ρ_q)²` at the input.
    pub survival_weight: f64,
    /// Per free parameter: whether the arriving Pauli anticommuted with its generator.
    pub anticommute_mask: Vec<bool>,
    /// `g(s)²`; 1 without noise.
    pub attenuation_sq: f64,
    /// Signed `g · tr(s_0 ρ)`.
    pub value: f64,
}

pub struct Estimator {
    program: Program,
    terms: Vec<(f64, PauliWord)>,
    cumulative: Vec<f64>,
    hs: f64,
    opts: EstimatorOptions,
    diagnostic: bool,
}

impl Estimator {
    pub fn new(c: &ParamCircuit, obs: &Observable, noise: Option<&NoiseModel>, opts: EstimatorOptions) -> Result<Self> {
        obs.check_against(c)?;
        obs.check_cap(opts.term_cap.unwrap_or_else(|| default_term_cap(c.n_system)))?;
        let program = Program::compile(c, noise, opts.exact_split)?;
        let mut diagnostic = false;
        if opts.mode == Mode::PathFormula && c.num_params() > 0 {
            let rep = split_check(c, obs)?;
            if let Some((a, b)) = rep.witness {
                if opts.acknowledge_nonsplit {
                    log::warn!("terms {a} and {b} share a signature; path-formula result is a diagnostic");
                    diagnostic = true;
                } else {
                    return Err(Error::NoSplit(a.to_string(), b.to_string()));
                }
            }
        }
        let terms = obs.lifted(c.n_qubits())?;
        let mut cumulative = Vec::with_capacity(terms.len());
        let mut acc = 0.0;
        for (coef, _) in &terms {
            acc += coef * coef;
            cumulative.push(acc);
        }
        Ok(Estimator { program, terms, cumulative, hs: acc, opts, diagnostic })
    }

    pub fn num_params(&self) -> usize {
        self.program.m
    }

    pub fn is_diagnostic(&self) -> bool {
        self.diagnostic
    }

    fn selected(&self, params: &ParamSelection) -> Result<Vec<usize>> {
        let m = self.program.m;
        let list = match params {
            ParamSelection::None => Vec::new(),
            ParamSelection::All => (0..m).collect(),
            ParamSelection::List(v) => v.clone(),
        };
        if let Some(&j) = list.iter().find(|&&j| j >= m) {
            return Err(Error::Invalid(format!("parameter {j} out of range (m = {m})")));
        }
        Ok(list)
    }

    fn slot_map(&self, list: &[usize]) -> Vec<u32> {
        let mut map = vec![u32::MAX; self.program.m];
        for (s, &j) in list.iter().enumerate() {
            map[j] = s as u32;
        }
        map
    }

    fn importance(&self) -> bool {
        self.opts.mode == Mode::PathFormula && self.terms.len() > self.opts.importance_threshold
    }

    /// Monte Carlo over `samples` discrete angle draws. Sample `i` uses the
    /// counter-based stream `(seed, i)`.
    pub fn monte_carlo(&self, samples: u64, seed: u64, params: &ParamSelection) -> Result<McOutput> {
        if samples == 0 {
            return Err(Error::Invalid("zero samples".into()));
        }
        let list = self.selected(params)?;
        let map = self.slot_map(&list);
        let chunks = samples.div_ceil(CHUNK as u64);
        let accs: Vec<Acc> = (0..chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK as u64;
                let hi = (lo + CHUNK as u64).min(samples);
                let mut acc = Acc::new(list.len(), self.terms.len());
                let mut scratch = Scratch::new(self.program.m, list.len());
                for i in lo..hi {
                    let mut rng = sample_rng(seed, i);
                    self.draw(&mut rng, &mut scratch.angles);
                    let chosen = if self.importance() { Some(self.pick_term(&mut rng)) } else { None };
                    self.accumulate_sample(chosen, &map, &mut scratch, &mut acc);
                }
                acc
            })
            .collect();
        let total = pairwise(accs);
        Ok(self.finish_mc(total, samples, seed, &list))
    }

    fn draw(&self, rng: &mut SampleRng, angles: &mut [u8]) {
        let mut i = 0;
        while i < angles.len() {
            let mut bits: u64 = rng.gen();
            for _ in 0..32 {
                if i == angles.len() {
                    break;
                }
                angles[i] = (bits & 3) as u8;
                bits >>= 2;
                i += 1;
            }
        }
    }

    fn pick_term(&self, rng: &mut SampleRng) -> usize {
        let u: f64 = rng.gen::<f64>() * self.hs;
        self.cumulative.partition_point(|&c| c <= u).min(self.terms.len() - 1)
    }

    /// Accumulates one angle assignment into `acc`. `chosen` selects importance
    /// sampling of a single term.
    fn accumulate_sample(&self, chosen: Option<usize>, map: &[u32], s: &mut Scratch, acc: &mut Acc) {
        let range: Vec<usize> = match chosen {
            Some(a) => vec![a],
            None => (0..self.terms.len()).collect(),
        };
        let mut q = 0.0;
        let mut lsum = 0.0;
        for alpha in range {
            let (coef, term) = &self.terms[alpha];
            self.program.propagate_branches(term, &s.angles, &mut s.branches);
            match self.opts.mode {
                Mode::PathFormula => {
                    let w = if chosen.is_some() { self.hs } else { coef * coef };
                    let v: f64 = s.branches.iter().filter(|b| !b.anti.is_empty()).map(|b| b.value).sum();
                    q += w * v * v;
                    if chosen.is_none() {
                        acc.per_term[alpha] += w * v * v;
                    }
                    for b in &s.branches {
                        for &j in &b.anti {
                            let slot = map[j as usize];
                            if slot != u32::MAX {
                                s.term.add(slot as usize, b.value);
                            }
                        }
                    }
                    for &slot in &s.term.touched {
                        let t = s.term.vals[slot as usize];
                        s.sample.add(slot as usize, w * t * t);
                    }
                    s.term.clear();
                }
                Mode::FullMoments => {
                    let v: f64 = s.branches.iter().map(|b| b.value).sum();
                    lsum += coef * v;
                    for b in &s.branches {
                        for &j in &b.anti {
                            let slot = map[j as usize];
                            if slot != u32::MAX {
                                s.sample.add(slot as usize, coef * b.value);
                            }
                        }
                    }
                }
            }
        }
        let x = if self.opts.mode == Mode::PathFormula { q } else { lsum };
        acc.n += 1;
        acc.s[0] += x;
        acc.s[1] += x * x;
        acc.s[2] += x * x * x;
        acc.s[3] += x * x * x * x;
        for &slot in &s.sample.touched {
            let mut g = s.sample.vals[slot as usize];
            if self.opts.mode == Mode::FullMoments {
                g *= g;
            }
            acc.g1[slot as usize] += g;
            acc.g2[slot as usize] += g * g;
        }
        s.sample.clear();
    }

    fn finish_mc(&self, total: Acc, samples: u64, seed: u64, list: &[usize]) -> McOutput {
        let n = total.n as f64;
        let (mean, stderr) = match self.opts.mode {
            Mode::PathFormula => mean_stderr(total.s[0], total.s[1], n),
            Mode::FullMoments => sample_variance_stderr(&total.s, n),
        };
        let per_term = if self.importance() || self.opts.mode == Mode::FullMoments {
            None
        } else {
            Some(total.per_term.iter().map(|v| v / n).collect())
        };
        let variance = EstimateResult {
            quantity: Quantity::Var,
            param_index: None,
            mean,
            stderr,
            samples,
            seed,
            diagnostic: self.diagnostic,
            per_term,
        };
        let grads = list
            .iter()
            .enumerate()
            .map(|(slot, &j)| {
                let (mean, stderr) = mean_stderr(total.g1[slot], total.g2[slot], n);
                EstimateResult {
                    quantity: Quantity::GradVar,
                    param_index: Some(j),
                    mean,
                    stderr,
                    samples,
                    seed,
                    diagnostic: self.diagnostic,
                    per_term: None,
                }
            })
            .collect();
        McOutput { variance, grads }
    }

    fn check_exact_cap(&self) -> Result<()> {
        let m = self.program.m;
        if m > self.opts.exact_param_cap {
            return Err(Error::Cap {
                what: "exact enumeration parameter",
                value: m,
                cap: self.opts.exact_param_cap,
                hint: format!("; 4^{m} assignments is too many, use Monte Carlo with --samples instead"),
            });
        }
        Ok(())
    }

    /// Exact average over all `4^m` discrete assignments.
    pub fn exact(&self, params: &ParamSelection) -> Result<ExactOutput> {
        self.check_exact_cap()?;
        let list = self.selected(params)?;
        if self.opts.mode == Mode::PathFormula && self.program.splits == 0 {
            return Ok(self.exact_paths(&list));
        }
        let map = self.slot_map(&list);
        let m = self.program.m;
        let total_assignments: u64 = 1u64 << (2 * m);
        let chunks = total_assignments.div_ceil(CHUNK as u64);
        let accs: Vec<Acc> = (0..chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK as u64;
                let hi = (lo + CHUNK as u64).min(total_assignments);
                let mut acc = Acc::new(list.len(), self.terms.len());
                let mut scratch = Scratch::new(m, list.len());
                for idx in lo..hi {
                    for (j, a) in scratch.angles.iter_mut().enumerate() {
                        *a = ((idx >> (2 * j)) & 3) as u8;
                    }
                    self.accumulate_sample(None, &map, &mut scratch, &mut acc);
                }
                acc
            })
            .collect();
        let total = pairwise(accs);
        let n = total.n as f64;
        let variance = match self.opts.mode {
            Mode::PathFormula => total.s[0] / n,
            Mode::FullMoments => (total.s[1] / n - (total.s[0] / n).powi(2)).max(0.0),
        };
        let grads = list.iter().enumerate().map(|(slot, &j)| (j, total.g1[slot] / n)).collect();
        Ok(ExactOutput { variance, grads })
    }

    fn exact_paths(&self, list: &[usize]) -> ExactOutput {
        let map = self.slot_map(list);
        let per_term: Vec<(f64, Vec<f64>)> = self
            .terms
            .par_iter()
            .map(|(coef, term)| {
                let c2 = coef * coef;
                let mut var = 0.0;
                let mut grads = vec![0.0; list.len()];
                self.program.enumerate_paths(term, &mut |prob, val_sq, anti| {
                    if anti.is_empty() {
                        return;
                    }
                    let w = c2 * prob * val_sq;
                    var += w;
                    for &j in anti {
                        let slot = map[j as usize];
                        if slot != u32::MAX {
                            grads[slot as usize] += w;
                        }
                    }
                });
                (var, grads)
            })
            .collect();
        let mut variance = 0.0;
        let mut grads = vec![0.0; list.len()];
        for (v, g) in per_term {
            variance += v;
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        ExactOutput { variance, grads: list.iter().copied().zip(grads).collect() }
    }

    /// One path for the term at `term_index`, drawn from `rng`.
    pub fn path_sample(&self, term_index: usize, rng: &mut SampleRng) -> Result<PathOutcome> {
        if self.program.splits > 0 {
            return Err(Error::Invalid("single-path sampling is unavailable in exact-split mode".into()));
        }
        let (_, term) = self.terms.get(term_index).ok_or_else(|| Error::Invalid(format!("term {term_index} out of range")))?;
        let mut angles = vec![0u8; self.program.m];
        self.draw(rng, &mut angles);
        let mut b = Branch::default();
        self.program.propagate(term, &angles, &mut b);
        let mut mask = vec![false; self.program.m];
        for &j in &b.anti {
            mask[j as usize] = true;
        }
        Ok(PathOutcome { survival_weight: b.survival, anticommute_mask: mask, attenuation_sq: b.atten_sq, value: b.value })
    }
}

struct SparseAcc {
    vals: Vec<f64>,
    hit: Vec<bool>,
    touched: Vec<u32>,
}

impl SparseAcc {
    fn new(len: usize) -> Self {
        SparseAcc { vals: vec![0.0; len], hit: vec![false; len], touched: Vec::new() }
    }
    #[inline]
    fn add(&mut self, slot: usize, v: f64) {
        if !self.hit[slot] {
            self.hit[slot] = true;
            self.touched.push(slot as u32);
        }
        self.vals[slot] += v;
    }
    fn clear(&mut self) {
        for &s in &self.touched {
            self.vals[s as usize] = 0.0;
            self.hit[s as usize] = false;
        }
        self.touched.clear();
    }
}

struct Scratch {
    angles: Vec<u8>,
    branches: Vec<Branch>,
    term: SparseAcc,
    sample: SparseAcc,
}

impl Scratch {
    fn new(m: usize, slots: usize) -> Self {
        Scratch { angles: vec![0; m], branches: Vec::new(), term: SparseAcc::new(slots), sample: SparseAcc::new(slots) }
    }
}

#[derive(Clone, Debug)]
struct Acc {
    n: u64,
    /// Power sums of the per-sample scalar.
    s: [f64; 4],
    g1: Vec<f64>,
    g2: Vec<f64>,
    per_term: Vec<f64>,
}

impl Acc {
    fn new(slots: usize, terms: usize) -> Self {
        Acc { n: 0, s: [0.0; 4], g1: vec![0.0; slots], g2: vec![0.0; slots], per_term: vec![0.0; terms] }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.n += other.n;
        for k in 0..4 {
            self.s[k] += other.s[k];
        }
        for (a, b) in self.g1.iter_mut().zip(&other.g1) {
            *a += b;
        }
        for (a, b) in self.g2.iter_mut().zip(&other.g2) {
            *a += b;
        }
        for (a, b) in self.per_term.iter_mut().zip(&other.per_term) {
            *a += b;
        }
        self
    }
}

/// Pairwise reduction in index order; the tree depends only on the chunk count.
fn pairwise(mut v: Vec<Acc>) -> Acc {
    while v.len() > 1 {
        let mut next = Vec::with_capacity(v.len().div_ceil(2));
        let mut it = v.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(b)),
                None => next.push(a),
            }
        }
        v = next;
    }
    v.pop().expect("at least one chunk")
}

fn mean_stderr(s1: f64, s2: f64, n: f64) -> (f64, f64) {
    let mean = s1 / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance and its standard error from power sums.
fn sample_variance_stderr(s: &[f64; 4], n: f64) -> (f64, f64) {
    if n < 2.0 {
        return (0.0, 0.0);
    }
    let m1 = s[0] / n;
    let var = ((s[1] - n * m1 * m1) / (n - 1.0)).max(0.0);
    let mu2 = (s[1] / n - m1 * m1).max(0.0);
    let mu4 = s[3] / n - 4.0 * m1 * s[2] / n + 6.0 * m1 * m1 * s[1] / n - 3.0 * m1.powi(4);
    let se_sq = if n > 3.0 { (mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n } else { 0.0 };
    (var, se_sq.max(0.0).sqrt())
}

/// Monte Carlo estimate of the loss variance with default options.
pub fn variance_mc(c: &ParamCircuit, obs: &Observable, samples: u64, noise: Option<&NoiseModel>, seed: u64) -> Result<EstimateResult> {
    Ok(Estimator::new(c, obs, noise, EstimatorOptions::default())?.monte_carlo(samples, seed, &ParamSelection::None)?.variance)
}

/// Monte Carlo estimate of the variance of `∂L/∂θ_j` with default options.
pub fn grad_variance_mc(c: &ParamCircuit, obs: &Observable, j: usize, samples: u64, noise: Option<&NoiseModel>, seed: u64) -> Result<EstimateResult> {
    let out = Estimator::new(c, obs, noise, EstimatorOptions::default())?.monte_carlo(samples, seed, &ParamSelection::List(vec![j]))?;
    Ok(out.grads.into_iter().next().expect("one parameter requested"))
}

/// Exact loss variance with default options.
pub fn variance_exact(c: &ParamCircuit, obs: &Observable, noise: Option<&NoiseModel>) -> Result<f64> {
    Ok(Estimator::new(c, obs, noise, EstimatorOptions::default())?.exact(&ParamSelection::None)?.variance)
}

/// Exact variance of `∂L/∂θ_j` with default options.
pub fn grad_variance_exact(c: &ParamCircuit, obs: &Observable, j: usize, noise: Option<&NoiseModel>) -> Result<f64> {
    let out = Estimator::new(c, obs, noise, EstimatorOptions::default())?.exact(&ParamSelection::List(vec![j]))?;
    Ok(out.grads[0].1)
}

/// One path sample for `term` (a word on the system register) with default options.
pub fn path_sample(c: &ParamCircuit, term: &PauliWord, rng: &mut SampleRng) -> Result<PathOutcome> {
    let obs = Observable::new(term.num_qubits(), vec![(1.0, term.clone().with_phase(0))])?;
    let opts = EstimatorOptions { acknowledge_nonsplit: true, ..EstimatorOptions::default() };
    Estimator::new(c, &obs, None, opts)?.path_sample(0, rng)
}
