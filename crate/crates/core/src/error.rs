use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: usize, found: usize },

    #[error("codomain mismatch: {left} vs {right}")]
    CodomainMismatch { left: usize, right: usize },

    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("type clash: {0}")]
    TypeClash(String),

    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("index {index} out of range for a set of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid leg: {0}")]
    InvalidLeg(String),

    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),

    #[error("effect mismatch: {0}")]
    EffectMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dangling port: {0}")]
    DanglingPort(String),

    #[error("port fed more than once: {0}")]
    MultipleFeeds(String),

    #[error("outer input routed straight to outer output: {0}")]
    CyclicThroughOuterInput(String),

    #[error("trace enumeration exceeds the bound of {bound}")]
    HorizonTooLarge { bound: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("division by zero in `{0}`")]
    DivisionByZero(String),

    #[error("non-finite value in state `{var}` at step {step}")]
    NonFiniteValue { step: usize, var: String },

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown junction `{name}` at {line}:{column}")]
    UnknownJunction {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag, used for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DomainMismatch { .. } => "DomainMismatch",
            Error::CodomainMismatch { .. } => "CodomainMismatch",
            Error::BoundaryMismatch(_) => "BoundaryMismatch",
            Error::TypeClash(_) => "TypeClash",
            Error::ArityMismatch(_) => "ArityMismatch",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidTable(_) => "InvalidTable",
            Error::InvalidLeg(_) => "InvalidLeg",
            Error::InterfaceMismatch(_) => "InterfaceMismatch",
            Error::EffectMismatch(_) => "EffectMismatch",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::DanglingPort(_) => "DanglingPort",
            Error::MultipleFeeds(_) => "MultipleFeeds",
            Error::CyclicThroughOuterInput(_) => "CyclicThroughOuterInput",
            Error::HorizonTooLarge { .. } => "HorizonTooLarge",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::DivisionByZero(_) => "DivisionByZero",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownJunction { .. } => "UnknownJunction",
            Error::UnknownName(_) => "UnknownName",
            Error::KindMismatch(_) => "KindMismatch",
            Error::Format(_) => "FormatError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Outcome of checking that a square (or family of squares) commutes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// First failing instance, described for humans.
    Fail(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub(crate) fn fail(msg: impl Into<String>) -> Self {
        Verdict::Fail(msg.into())
    }

    /// Keeps the first failure.
    pub fn and_then(self, next: impl FnOnce() -> Verdict) -> Verdict {
        match self {
            Verdict::Pass => next(),
            fail => fail,
        }
    }
}
