use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} qubits vs {1} qubits")]
    Dimension(usize, usize),
    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitRange { qubit: usize, n: usize },
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("cannot parse Pauli string {text:?}: {reason}")]
    PauliParse { text: String, reason: String },
    #[error("gate {index}: {reason}")]
    Gate { index: usize, reason: String },
    #[error("invalid circuit: {0}")]
    Circuit(String),
    #[error("invalid observable: {0}")]
    Observable(String),
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("position {position} out of range (gate count {len})")]
    Position { position: usize, len: usize },
    #[error("missing gadget layer mark")]
    MissingGadgetLayer,
    #[error("gate {index}: fixed angle {angle} is not a multiple of pi/2; enable exact-split mode")]
    UnsupportedAngle { index: usize, angle: f64 },
    #[error("{what} cap exceeded: {value} > {cap}{hint}")]
    Cap { what: &'static str, value: usize, cap: usize, hint: String },
    #[error("observable does not split under the circuit: terms {0} and {1} share a commutation signature")]
    NoSplit(String, String),
    #[error("activation infeasible: {0}")]
    ActivationInfeasible(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
