use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed polytope: {0}")]
    MalformedPolytope(String),

    #[error("LP solver failed{}: {detail}", row.map(|r| format!(" on row {r}")).unwrap_or_default())]
    Lp { row: Option<usize>, detail: String },

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("state set belongs to a different backend than the system")]
    BackendMismatch,

    #[error("unknown mode {0}")]
    UnknownMode(usize),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid preview automaton: {0}")]
    InvalidAutomaton(String),

    #[error("invalid preview input sequence: {0}")]
    InvalidSequence(crate::preview::SequenceViolation),

    #[error("preview rejected: {0}")]
    PreviewRejected(String),

    #[error("switch to node {to} is not consistent with the announced previews: {detail}")]
    UnannouncedSwitch { to: usize, detail: String },

    #[error("no admissible input keeps the state in target {target}")]
    InfeasibleState { target: String },

    #[error("fixed-point invariant violated: {0}")]
    InvariantViolated(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration budget of {0} nodes exceeded")]
    BudgetExceeded(usize),

    #[error("spec file: {0}")]
    Spec(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
