//! Transverse-field Ising benchmark: ansatz builders and the experiment harness.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{Generator, Observable, ParamCircuit};
use crate::error::{Error, Result};
use crate::estimator::{bounds, Estimator, EstimatorOptions, ParamSelection};
use crate::io::{csv_bytes, write_atomic};
use crate::mpqc::{insert_gadget_layer, OpModel};
use crate::pauli::{Pauli1, PauliWord};

/// `−J Σ X_j X_{j+1} − h Σ Z_j`. A two-site ring has a single bond; zero couplings drop their terms.
pub fn tfi_observable(n: usize, j: f64, h: f64, periodic: bool) -> Result<Observable> {
    if n < 2 {
        return Err(Error::Invalid("the Ising chain needs at least two sites".into()));
    }
    let mut terms = Vec::with_capacity(2 * n);
    let bonds = if periodic && n > 2 { n } else { n - 1 };
    for k in (0..bonds).filter(|_| j != 0.0) {
        terms.push((-j, PauliWord::from_sparse(n, &[(k, Pauli1::X), ((k + 1) % n, Pauli1::X)])?));
    }
    for k in (0..n).filter(|_| h != 0.0) {
        terms.push((-h, PauliWord::single(n, k, Pauli1::Z)?));
    }
    Observable::new(n, terms)
}

/// Block layout of the thermal ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzVariant {
    /// Even-bond `R_XX`, odd-bond `R_XX` (with the ring bond), then `R_Z` on every site.
    XxZ,
    /// As `XxZ` followed by `R_Y` on every site.
    XxZY,
}

impl AnsatzVariant {
    pub fn name(self) -> &'static str {
        match self {
            AnsatzVariant::XxZ => "xx-z",
            AnsatzVariant::XxZY => "xx-z-y",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "xx-z" => Some(AnsatzVariant::XxZ),
            "xx-z-y" => Some(AnsatzVariant::XxZY),
            _ => None,
        }
    }

    pub fn sub_layers(self) -> usize {
        match self {
            AnsatzVariant::XxZ => 3,
            AnsatzVariant::XxZY => 4,
        }
    }
}

fn bonds(n: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let even: Vec<_> = (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    let mut odd: Vec<_> = (0..(n - 1) / 2).map(|k| (2 * k + 1, 2 * k + 2)).collect();
    if n > 2 {
        odd.push((n - 1, 0));
    }
    (even, odd)
}

/// Appends one ansatz block to `c`.
pub fn push_block(c: &mut ParamCircuit, variant: AnsatzVariant) -> Result<()> {
    let n = c.n_system;
    let (even, odd) = bonds(n);
    for (a, b) in even.into_iter().chain(odd) {
        c.push_free(Generator::two(a, Pauli1::X, b, Pauli1::X)?);
    }
    for q in 0..n {
        c.push_free(Generator::one(q, Pauli1::Z)?);
    }
    if variant == AnsatzVariant::XxZY {
        for q in 0..n {
            c.push_free(Generator::one(q, Pauli1::Y)?);
        }
    }
    Ok(())
}

/// `blocks` repetitions of the block, all parameters free.
pub fn thermal_ansatz(n: usize, blocks: usize, variant: AnsatzVariant) -> Result<ParamCircuit> {
    if n < 2 {
        return Err(Error::Invalid("the ansatz needs at least two qubits".into()));
    }
    let mut c = ParamCircuit::new(n);
    for _ in 0..blocks {
        push_block(&mut c, variant)?;
    }
    Ok(c)
}

fn block_len(n: usize, variant: AnsatzVariant) -> usize {
    let (e, o) = bonds(n);
    e.len() + o.len() + n * (variant.sub_layers() - 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n_values: Vec<usize>,
    /// Blocks per point; `None` uses `blocks = n`.
    pub blocks: Option<usize>,
    /// Blocks that follow the gadget layer.
    pub tail_blocks: usize,
    pub samples: u64,
    pub seed: u64,
    pub op: String,
    pub variant: AnsatzVariant,
    pub coupling: f64,
    pub field: f64,
    pub periodic: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            n_values: (4..=20).collect(),
            blocks: None,
            tail_blocks: 1,
            samples: 10_000,
            seed: 0,
            op: "fixed".into(),
            variant: AnsatzVariant::XxZ,
            coupling: 1.0,
            field: 0.5,
            periodic: true,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<OpModel> {
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Invalid("every n must be at least 2".into()));
        }
        if self.samples == 0 {
            return Err(Error::Invalid("samples must be positive".into()));
        }
        if let Some(b) = self.blocks {
            if b < self.tail_blocks || b == 0 {
                return Err(Error::Invalid("blocks must be positive and at least tail_blocks".into()));
            }
        }
        OpModel::from_name(&self.op).ok_or_else(|| Error::Invalid(format!("unknown op model {:?}", self.op)))
    }

    pub fn blocks_for(&self, n: usize) -> usize {
        self.blocks.unwrap_or(n).max(self.tail_blocks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub circuit_kind: String,
    pub quantity: String,
    pub param_index: Option<usize>,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointInfo {
    pub n: usize,
    pub blocks: usize,
    pub sub_layers: usize,
    pub gates_pqc: usize,
    pub gates_mpqc: usize,
    pub params_pqc: usize,
    pub params_mpqc: usize,
    pub gadget_position: usize,
    pub hs_norm_sq: f64,
    pub variance_lower: f64,
    pub lightcone_k: usize,
    pub f_g: usize,
    pub pqc_diagnostic: bool,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: ExperimentPlan,
    pub ansatz_variant: String,
    pub csv_columns: Vec<String>,
    pub points: Vec<PointInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

fn push_rows(rows: &mut Vec<ResultRow>, n: usize, kind: &str, out: &crate::estimator::McOutput) {
    for r in std::iter::once(&out.variance).chain(&out.grads) {
        rows.push(ResultRow {
            n,
            circuit_kind: kind.into(),
            quantity: r.quantity.name().into(),
            param_index: r.param_index,
            mean: r.mean,
            stderr: r.stderr,
            samples: r.samples,
            seed: r.seed,
        });
    }
}

/// Builds the PQC and its MPQC for one point; the gadget layer sits before
/// the last `tail_blocks` blocks.
pub fn build_point(plan: &ExperimentPlan, n: usize, op: OpModel) -> Result<(ParamCircuit, ParamCircuit, usize)> {
    let blocks = plan.blocks_for(n);
    let pqc = thermal_ansatz(n, blocks, plan.variant)?;
    let position = (blocks - plan.tail_blocks) * block_len(n, plan.variant);
    let mpqc = insert_gadget_layer(&pqc, position, op)?;
    Ok((pqc, mpqc, position))
}

/// Runs every point of the plan and returns CSV rows plus the manifest.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    let op = plan.validate()?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in &plan.n_values {
        let start = Instant::now();
        let obs = tfi_observable(n, plan.coupling, plan.field, plan.periodic)?;
        let (pqc, mpqc, position) = build_point(plan, n, op)?;
        let post: Vec<usize> = pqc.gates[position..].iter().filter_map(|g| g.free_index()).collect();
        let opts = EstimatorOptions { acknowledge_nonsplit: true, ..EstimatorOptions::default() };
        let pqc_est = Estimator::new(&pqc, &obs, None, opts.clone())?;
        let pqc_out = pqc_est.monte_carlo(plan.samples, plan.seed, &ParamSelection::List(post.clone()))?;
        let mpqc_est = Estimator::new(&mpqc, &obs, None, opts)?;
        let mpqc_out = mpqc_est.monte_carlo(plan.samples, plan.seed, &ParamSelection::List(post))?;
        push_rows(&mut rows, n, "pqc", &pqc_out);
        push_rows(&mut rows, n, "mpqc", &mpqc_out);
        let rep = bounds(&mpqc, &obs, op, None)?;
        let blocks = plan.blocks_for(n);
        points.push(PointInfo {
            n,
            blocks,
            sub_layers: blocks * plan.variant.sub_layers(),
            gates_pqc: pqc.gates.len(),
            gates_mpqc: mpqc.gates.len(),
            params_pqc: pqc.num_params(),
            params_mpqc: mpqc.num_params(),
            gadget_position: position,
            hs_norm_sq: obs.hs_norm_sq(),
            variance_lower: rep.variance_lower,
            lightcone_k: rep.inputs.k,
            f_g: rep.inputs.f_g,
            pqc_diagnostic: pqc_est.is_diagnostic(),
            wall_ms: start.elapsed().as_millis(),
        });
        log::info!("n = {n}: done in {} ms", start.elapsed().as_millis());
    }
    let manifest = Manifest {
        plan: plan.clone(),
        ansatz_variant: plan.variant.name().into(),
        csv_columns: ["n", "circuit_kind", "quantity", "param_index", "mean", "stderr", "samples", "seed"].iter().map(|s| s.to_string()).collect(),
        points,
    };
    Ok(ExperimentOutput { rows, manifest })
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_experiment(out: &ExperimentOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join("results.csv");
    let manifest_path = dir.join("manifest.json");
    write_atomic(&csv_path, &csv_bytes(&out.rows)?)?;
    let mut json = serde_json::to_vec_pretty(&out.manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path, &json)?;
    Ok((csv_path, manifest_path))
}
