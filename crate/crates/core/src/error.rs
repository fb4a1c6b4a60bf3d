use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("qubit {qubit} has single-qubit gates but no two-qubit gate to absorb them")]
    UnmergeableGate { qubit: usize },

    #[error("invalid gate kind `{0}`")]
    InvalidGateKind(String),

    #[error("invalid tensor: {0}")]
    Tensor(String),

    #[error("tensor of rank {rank} exceeds the exhaustive separability search limit of {limit}")]
    SearchCapacity { rank: usize, limit: usize },

    #[error("gate on qubits {support:?} spans more than k_max = {k_max} qubits")]
    KernelTooWide { support: Vec<usize>, k_max: usize },

    #[error("locality violation: qubit {qubit} is global in the current slice layout")]
    Locality { qubit: usize },

    #[error("incomplete slice family: {0}")]
    IncompleteFamily(String),

    #[error("entanglement index mismatch: {0}")]
    Entanglement(String),

    #[error("plan parse error on line {line}: {message}")]
    PlanParse { line: usize, message: String },

    #[error("plan step {step}: {message}")]
    PlanStep { step: usize, message: String },

    #[error("storage discipline violation: {0}")]
    Discipline(String),

    #[error("slice length {got} does not match the {expected} amplitudes of a logical file")]
    SliceLength { expected: usize, got: usize },

    #[error("missing logical file {id} under {root}")]
    MissingFile { id: usize, root: PathBuf },

    #[error("invalid file assignment: {0}")]
    Assignment(String),

    #[error("{n} qubits exceeds the dense oracle cap of {cap}")]
    QubitBudget { n: usize, cap: usize },

    #[error("state size mismatch: {0} vs {1} amplitudes")]
    SizeMismatch(usize, usize),

    #[error("invalid cost input: {0}")]
    Cost(String),

    #[error("cannot schedule circuit: {0}")]
    Schedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
