use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use plateau::bench::{run_experiment, write_experiment, AnsatzVariant, ExperimentPlan, Manifest};
use plateau::circuit::{backward_lightcone, placement_advisor, placement_for_depth, split_check, Observable, ParamCircuit, GADGET_LAYER_END};
use plateau::estimator::{bounds, Estimator, EstimatorOptions, Mode, NoiseModel, ParamSelection, Quantity};
use plateau::io::{csv_bytes, write_atomic, EstimateRow};
use plateau::mpqc::{activate_single, activate_zone, insert_gadget_layer, OpModel, PROBE_BUDGET};
use plateau::oracle::{continuous_variance, two_design_check, two_design_control, SampleMode, DENSE_CAP};
use plateau::pauli::PauliWord;
use plateau::Error;

const SCHEMAS: &str = r#"INPUT FORMATS

Circuit JSON:
  {"n_system": int, "n_ancilla": int, "input_state": [[rx,ry,rz],...],
   "gates": [{"type":"clifford","name":"CNOT","qubits":[0,1]}
           | {"type":"rotation","generator":"X0 X1","param":{"free":3}|{"fixed":1.5708}}],
   "marks": {"gadget_layer": int}}
  n_ancilla, input_state (default |0...0>) and marks are optional. A rotation
  with generator G and angle t is exp(-i t G / 2). Angles are radians, qubits
  little-endian. Clifford names: H, S, SDG, X, Y, Z, CNOT (CX), CZ, SWAP.

Observable JSON:
  {"terms": [{"coeff": -1.0, "pauli": "X0 X1"}, ...]}
  Pauli strings are sparse ("X0 Z3") or dense ("XIZ"), case-insensitive.

Noise JSON:
  {"default_two_qubit_depol": g,
   "overrides": [{"after_gate": i, "channel": [{"pauli": "X0", "p": 0.001}, ...]}]}
  The default places a two-qubit depolarizing-style channel after every
  two-qubit gate. after_gate = -1 acts on the input state.

EXIT CODES
  0 success, 1 validation failure, 2 usage error, 3 verification failure.

Estimate CSV columns: quantity, param_index, mean, stderr, samples, seed
(samples = 0 marks an exact enumeration)."#;

#[derive(Parser)]
#[command(name = "plateau", version, about = "Variance diagnostics and gadget transforms for parameterized quantum circuits", after_long_help = SCHEMAS)]
struct Cli {
    /// Seed echoed into every artifact.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for tabular and report artifacts.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Log level for stderr: error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Circuit checks.
    #[command(subcommand)]
    Circuit(CircuitCmd),
    /// Circuit-to-circuit transforms; output is circuit JSON.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Static analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Loss and gradient variance estimation.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Benchmarks.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Cross-checks against independent references.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    observable: PathBuf,
}

#[derive(Subcommand)]
enum CircuitCmd {
    /// Parse and validate a circuit (and optionally an observable against it).
    Validate {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        observable: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TransformCmd {
    /// Insert a gadget layer before gate `position`.
    Gadget {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        position: usize,
        /// Ancilla preparation: fixed or trainable.
        #[arg(long, default_value = "fixed")]
        op: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Activate one rotation (--target) or a zone of wires (--zone).
    Activate {
        #[command(flatten)]
        inputs: Inputs,
        /// Gate index of a single-qubit free rotation before the gadget layer.
        #[arg(long, conflicts_with = "zone", required_unless_present = "zone")]
        target: Option<usize>,
        /// Comma-separated frontier wires.
        #[arg(long, value_delimiter = ',')]
        zone: Option<Vec<usize>>,
        /// Gate index of the zone's earlier boundary.
        #[arg(long, requires = "zone")]
        zone_start: Option<usize>,
        #[arg(long, default_value_t = PROBE_BUDGET)]
        probe_budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Backward light cone of every observable term at a gate position.
    Lightcone {
        #[command(flatten)]
        inputs: Inputs,
        /// Defaults to the end of the gadget layer.
        #[arg(long)]
        position: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split condition of the observable under the circuit.
    Split {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form lower bounds for an MPQC.
    Bounds {
        #[command(flatten)]
        inputs: Inputs,
        /// Ancilla preparation; detected from the circuit when absent.
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gadget placement advice for lattice circuits.
    Placement {
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[arg(long)]
        velocity: f64,
        #[arg(long)]
        locality: u32,
        #[arg(long, required_unless_present = "tail_depth")]
        n: Option<usize>,
        /// Evaluate at this tail depth instead of the recommended one.
        #[arg(long)]
        tail_depth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, conflicts_with = "all_params")]
    param: Option<usize>,
    #[arg(long)]
    all_params: bool,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Enumerate every discrete assignment instead of sampling.
    #[arg(long)]
    exact: bool,
    /// Largest parameter count accepted by --exact.
    #[arg(long, default_value_t = 10)]
    exact_cap: usize,
    /// Use E[L^2] - E[L]^2 instead of the path formula.
    #[arg(long)]
    full_moments: bool,
    /// Branch exactly at fixed rotations with non-quarter-turn angles.
    #[arg(long)]
    exact_split: bool,
    /// Run the path formula even if the split condition fails (output is diagnostic).
    #[arg(long)]
    acknowledge_nonsplit: bool,
    /// Observable term cap (default 10 n^2).
    #[arg(long)]
    term_cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EstimateCmd {
    /// Variance of the loss.
    Var(EstimateArgs),
    /// Variance of partial derivatives.
    Gradvar(EstimateArgs),
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Transverse-field Ising thermal ansatz, PQC vs MPQC.
    Tfi {
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        n_step: usize,
        /// Blocks per point (default: n).
        #[arg(long)]
        blocks: Option<usize>,
        /// Blocks after the gadget layer.
        #[arg(long, default_value_t = 1)]
        tail_blocks: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value = "fixed")]
        op: String,
        /// Ansatz block: xx-z or xx-z-y.
        #[arg(long, default_value = "xx-z")]
        variant: String,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long, default_value_t = 0.5)]
        field: f64,
        /// Open boundary conditions.
        #[arg(long)]
        open: bool,
        /// Rerun the plan recorded in a manifest; other plan flags are ignored.
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Four-angle rotation 2-design identity.
    TwoDesign {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete estimator against dense continuous-angle Monte Carlo.
    Oracle {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Also compare the gradient variance of this parameter.
        #[arg(long)]
        param: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Usage(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Cap { .. } | Error::Invalid(_) => Failure::Usage(e.to_string()),
            e => Failure::Lib(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            log::error!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Verify(m)) => {
            log::error!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Lib(Error::Invalid(format!("{}: {e}", path.display()))))
}

fn load_circuit(path: &Path) -> CliResult<ParamCircuit> {
    Ok(ParamCircuit::from_json(&read(path)?)?)
}

fn load_pair(inputs: &Inputs) -> CliResult<(ParamCircuit, Observable)> {
    let c = load_circuit(&inputs.circuit)?;
    let obs = Observable::from_json(&read(&inputs.observable)?, Some(c.n_system))?;
    obs.check_against(&c)?;
    Ok((c, obs))
}

fn load_noise(path: Option<&PathBuf>, c: &ParamCircuit) -> CliResult<Option<NoiseModel>> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(NoiseModel::from_json(&read(p)?, c)?)),
    }
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => {
            write_atomic(p, bytes)?;
            log::info!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        Value::String(s) => rows.push((prefix.into(), s.clone())),
        Value::Null => rows.push((prefix.into(), String::new())),
        other => rows.push((prefix.into(), other.to_string())),
    }
}

#[derive(Serialize)]
struct KeyValue {
    key: String,
    value: String,
}

/// Reports default to JSON; `--format csv` flattens them to key/value rows.
fn emit_report(format: Option<Format>, out: Option<&PathBuf>, report: &impl Serialize) -> CliResult<()> {
    let v = serde_json::to_value(report).map_err(Error::from)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(&v).map_err(Error::from)?;
            bytes.push(b'\n');
            emit(out, &bytes)
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            let rows: Vec<KeyValue> = rows.into_iter().map(|(key, value)| KeyValue { key, value }).collect();
            emit(out, &csv_bytes(&rows)?)
        }
    }
}

fn emit_rows<T: Serialize>(format: Option<Format>, out: Option<&PathBuf>, rows: &[T]) -> CliResult<()> {
    match format.unwrap_or(Format::Csv) {
        Format::Csv => emit(out, &csv_bytes(rows)?),
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(rows).map_err(Error::from)?;
            bytes.push(b'\n');
            emit(out, &bytes)
        }
    }
}

fn emit_circuit(format: Option<Format>, out: Option<&PathBuf>, c: &ParamCircuit) -> CliResult<()> {
    if format == Some(Format::Csv) {
        return Err(Failure::Usage("transforms emit circuit JSON only".into()));
    }
    let mut text = c.to_json();
    text.push('\n');
    emit(out, text.as_bytes())
}

fn parse_op(s: &str) -> CliResult<OpModel> {
    OpModel::from_name(s).ok_or_else(|| Failure::Usage(format!("unknown op model {s:?} (expected fixed or trainable)")))
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Circuit(CircuitCmd::Validate { circuit, observable, out }) => {
            let c = load_circuit(circuit)?;
            c.validate()?;
            let mut report = json!({
                "valid": true,
                "n_system": c.n_system,
                "n_ancilla": c.n_ancilla,
                "gates": c.gates.len(),
                "params": c.num_params(),
                "marks": c.marks,
            });
            if let Some(o) = observable {
                let obs = Observable::from_json(&read(o)?, Some(c.n_system))?;
                obs.check_against(&c)?;
                report["terms"] = json!(obs.len());
                report["splits"] = json!(split_check(&c, &obs)?.splits);
            }
            emit_report(cli.format, out.as_ref(), &report)
        }
        Cmd::Transform(TransformCmd::Gadget { circuit, position, op, out }) => {
            let c = load_circuit(circuit)?;
            let mpqc = insert_gadget_layer(&c, *position, parse_op(op)?)?;
            log::info!("gadget layer inserted: m {} -> {}", c.num_params(), mpqc.num_params());
            emit_circuit(cli.format, out.as_ref(), &mpqc)
        }
        Cmd::Transform(TransformCmd::Activate { inputs, target, zone, zone_start, probe_budget, out }) => {
            let (c, obs) = load_pair(inputs)?;
            let result = match (target, zone) {
                (Some(t), None) => activate_single(&c, &obs, *t, *probe_budget, cli.seed)?,
                (None, Some(z)) => activate_zone(&c, z, *zone_start)?,
                _ => return Err(Failure::Usage("give exactly one of --target or --zone".into())),
            };
            log::info!("activated: m {} -> {}", c.num_params(), result.num_params());
            emit_circuit(cli.format, out.as_ref(), &result)
        }
        Cmd::Analyze(AnalyzeCmd::Lightcone { inputs, position, out }) => {
            let (c, obs) = load_pair(inputs)?;
            let position = match position {
                Some(p) => *p,
                None => c.mark(GADGET_LAYER_END).ok_or(Error::MissingGadgetLayer)?,
            };
            emit_report(cli.format, out.as_ref(), &backward_lightcone(&c, &obs, position)?)
        }
        Cmd::Analyze(AnalyzeCmd::Split { inputs, out }) => {
            let (c, obs) = load_pair(inputs)?;
            let r = split_check(&c, &obs)?;
            let report = json!({
                "splits": r.splits,
                "witness": r.witness.map(|(a, b)| [a.to_sparse_string(), b.to_sparse_string()]),
                "rank": r.rank,
                "generates_full_group": r.generates_full_group,
            });
            emit_report(cli.format, out.as_ref(), &report)
        }
        Cmd::Analyze(AnalyzeCmd::Bounds { inputs, op, noise, out }) => {
            let (c, obs) = load_pair(inputs)?;
            let op = match op {
                Some(s) => parse_op(s)?,
                None => OpModel::detect(&c),
            };
            let noise = load_noise(noise.as_ref(), &c)?;
            emit_report(cli.format, out.as_ref(), &bounds(&c, &obs, op, noise.as_ref())?)
        }
        Cmd::Analyze(AnalyzeCmd::Placement { dim, velocity, locality, n, tail_depth, out }) => {
            let p = match (tail_depth, n) {
                (Some(t), _) => placement_for_depth(*dim, *velocity, *locality, *t)?,
                (None, Some(n)) => placement_advisor(*dim, *velocity, *locality, *n)?,
                (None, None) => return Err(Failure::Usage("give --n or --tail-depth".into())),
            };
            emit_report(cli.format, out.as_ref(), &p)
        }
        Cmd::Estimate(cmd) => estimate(cli, cmd),
        Cmd::Bench(BenchCmd::Tfi {
            n_min,
            n_max,
            n_step,
            blocks,
            tail_blocks,
            samples,
            op,
            variant,
            coupling,
            field,
            open,
            from_manifest,
            out,
        }) => {
            let plan = match from_manifest {
                Some(p) => {
                    let m: Manifest = serde_json::from_str(&read(p)?).map_err(Error::from)?;
                    m.plan
                }
                None => {
                    if n_min > n_max || *n_step == 0 {
                        return Err(Failure::Usage("need n_min <= n_max and n_step >= 1".into()));
                    }
                    ExperimentPlan {
                        n_values: (*n_min..=*n_max).step_by(*n_step).collect(),
                        blocks: *blocks,
                        tail_blocks: *tail_blocks,
                        samples: *samples,
                        seed: cli.seed,
                        op: op.clone(),
                        variant: AnsatzVariant::from_name(variant)
                            .ok_or_else(|| Failure::Usage(format!("unknown ansatz variant {variant:?}")))?,
                        coupling: *coupling,
                        field: *field,
                        periodic: !open,
                    }
                }
            };
            let result = run_experiment(&plan)?;
            if cli.format == Some(Format::Json) {
                let mut bytes = serde_json::to_vec_pretty(&result.rows).map_err(Error::from)?;
                bytes.push(b'\n');
                write_atomic(&out.join("results.json"), &bytes)?;
                let mut m = serde_json::to_vec_pretty(&result.manifest).map_err(Error::from)?;
                m.push(b'\n');
                write_atomic(&out.join("manifest.json"), &m)?;
            } else {
                write_experiment(&result, out)?;
            }
            log::info!("wrote results to {}", out.display());
            Ok(())
        }
        Cmd::Verify(VerifyCmd::TwoDesign { out }) => verify_two_design(cli, out.as_ref()),
        Cmd::Verify(VerifyCmd::Oracle { inputs, samples, param, out }) => verify_oracle(cli, inputs, *samples, *param, out.as_ref()),
    }
}

fn estimate(cli: &Cli, cmd: &EstimateCmd) -> CliResult<()> {
    let (args, quantity) = match cmd {
        EstimateCmd::Var(a) => (a, Quantity::Var),
        EstimateCmd::Gradvar(a) => (a, Quantity::GradVar),
    };
    let (c, obs) = load_pair(&args.inputs)?;
    let noise = load_noise(args.noise.as_ref(), &c)?;
    let opts = EstimatorOptions {
        mode: if args.full_moments { Mode::FullMoments } else { Mode::PathFormula },
        exact_split: args.exact_split,
        acknowledge_nonsplit: args.acknowledge_nonsplit,
        term_cap: args.term_cap,
        exact_param_cap: args.exact_cap,
        ..EstimatorOptions::default()
    };
    let selection = match (quantity, args.param, args.all_params) {
        (Quantity::Var, None, false) => ParamSelection::None,
        (Quantity::Var, _, _) => return Err(Failure::Usage("--param and --all-params apply to gradvar".into())),
        (Quantity::GradVar, Some(j), _) => ParamSelection::List(vec![j]),
        (Quantity::GradVar, None, true) => ParamSelection::All,
        (Quantity::GradVar, None, false) => return Err(Failure::Usage("gradvar needs --param j or --all-params".into())),
    };
    let est = Estimator::new(&c, &obs, noise.as_ref(), opts)?;
    if est.is_diagnostic() {
        log::warn!("split condition fails; path-formula output is diagnostic only");
    }
    let rows: Vec<EstimateRow> = if args.exact {
        let out = est.exact(&selection)?;
        let row = |quantity: Quantity, param_index, mean| EstimateRow {
            quantity: quantity.name().into(),
            param_index,
            mean,
            stderr: 0.0,
            samples: 0,
            seed: cli.seed,
        };
        match quantity {
            Quantity::Var => vec![row(Quantity::Var, None, out.variance)],
            Quantity::GradVar => out.grads.iter().map(|&(j, g)| row(Quantity::GradVar, Some(j), g)).collect(),
        }
    } else {
        if args.samples == 0 {
            return Err(Failure::Usage("--samples must be positive".into()));
        }
        let out = est.monte_carlo(args.samples, cli.seed, &selection)?;
        match quantity {
            Quantity::Var => vec![EstimateRow::from(&out.variance)],
            Quantity::GradVar => out.grads.iter().map(EstimateRow::from).collect(),
        }
    };
    emit_rows(cli.format, args.out.as_ref(), &rows)
}

#[derive(Serialize)]
struct DesignRow {
    generator: String,
    angles: usize,
    deviation: f64,
    threshold: f64,
    pass: bool,
}

fn verify_two_design(cli: &Cli, out: Option<&PathBuf>) -> CliResult<()> {
    let mut rows = Vec::new();
    for g in ["Z0", "X0", "Y0", "X0 X1", "Z0 Z1", "Y0 X1"] {
        let w = PauliWord::parse(g, 2)?;
        let dev = two_design_check(&w)?;
        rows.push(DesignRow { generator: g.into(), angles: 4, deviation: dev, threshold: 1e-12, pass: dev <= 1e-12 });
    }
    for g in ["Z0", "X0 X1"] {
        let w = PauliWord::parse(g, 2)?;
        let dev = two_design_control(&w)?;
        rows.push(DesignRow { generator: g.into(), angles: 3, deviation: dev, threshold: 1e-3, pass: dev > 1e-3 });
    }
    for r in &rows {
        log::info!("{} ({} angles): deviation {:.3e} {}", r.generator, r.angles, r.deviation, if r.pass { "ok" } else { "FAIL" });
    }
    emit_rows(cli.format, out, &rows)?;
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Verify("2-design identity deviation out of tolerance".into()))
    }
}

#[derive(Serialize)]
struct AgreementRow {
    quantity: String,
    param_index: Option<usize>,
    discrete: f64,
    discrete_stderr: f64,
    continuous: f64,
    continuous_stderr: f64,
    z: f64,
    pass: bool,
}

fn verify_oracle(cli: &Cli, inputs: &Inputs, samples: u64, param: Option<usize>, out: Option<&PathBuf>) -> CliResult<()> {
    let (c, obs) = load_pair(inputs)?;
    if c.n_qubits() > DENSE_CAP {
        return Err(Failure::Usage(format!("dense oracle handles at most {DENSE_CAP} qubits")));
    }
    let opts = EstimatorOptions { mode: Mode::FullMoments, exact_param_cap: 12, ..EstimatorOptions::default() };
    let est = Estimator::new(&c, &obs, None, opts)?;
    let selection = match param {
        Some(j) => ParamSelection::List(vec![j]),
        None => ParamSelection::None,
    };
    let (var, grads) = if est.num_params() <= 12 {
        let e = est.exact(&selection)?;
        (( e.variance, 0.0), e.grads.into_iter().map(|(j, g)| (j, g, 0.0)).collect::<Vec<_>>())
    } else {
        let m = est.monte_carlo(samples, cli.seed, &selection)?;
        ((m.variance.mean, m.variance.stderr), m.grads.iter().map(|r| (r.param_index.unwrap_or(0), r.mean, r.stderr)).collect())
    };
    let mut rows = Vec::new();
    let mut push = |quantity: Quantity, j: Option<usize>, (d, ds): (f64, f64), mode: SampleMode| -> CliResult<()> {
        let r = continuous_variance(&c, &obs, samples, cli.seed, mode)?;
        let se = (ds * ds + r.stderr * r.stderr).sqrt();
        let z = if se > 0.0 { (d - r.mean).abs() / se } else if (d - r.mean).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        rows.push(AgreementRow {
            quantity: quantity.name().into(),
            param_index: j,
            discrete: d,
            discrete_stderr: ds,
            continuous: r.mean,
            continuous_stderr: r.stderr,
            z,
            pass: z <= 3.0 || (d - r.mean).abs() <= 1e-12,
        });
        Ok(())
    };
    push(Quantity::Var, None, var, SampleMode::Loss)?;
    for (j, g, s) in grads {
        push(Quantity::GradVar, Some(j), (g, s), SampleMode::Grad(j))?;
    }
    for r in &rows {
        log::info!(
            "{}{}: discrete {:.6} vs continuous {:.6} +/- {:.2e} (z = {:.2}) {}",
            r.quantity,
            r.param_index.map(|j| format!("[{j}]")).unwrap_or_default(),
            r.discrete,
            r.continuous,
            r.continuous_stderr,
            r.z,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    emit_rows(cli.format, out, &rows)?;
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Verify("discrete and continuous variances disagree beyond 3 standard errors".into()))
    }
}
