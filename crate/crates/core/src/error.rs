use crate::rational::Rational;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("zero density at value {value}")]
    ZeroDensity { value: Rational },
    #[error("value {value} is not on the grid{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    OffGrid {
        value: Rational,
        context: Option<String>,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("invalid payment grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("distribution is not regular: phi({lo}) > phi({hi})")]
    NotRegular { lo: Box<Rational>, hi: Box<Rational> },
    #[error("distribution is not standard at pair v={hi}, v'={lo}")]
    NotStandard { hi: Box<Rational>, lo: Box<Rational> },
    #[error("conditioning event has zero probability")]
    EmptyCondition,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("too many atoms: {count} exceeds cap {cap}")]
    TooManyAtoms { count: u128, cap: u128 },
    #[error("mechanisms implement different allocations (first difference at instance {instance:?})")]
    AllocationMismatch { instance: Vec<Rational> },
    #[error("mechanism is not truthful: {0}")]
    NotTruthful(String),
    #[error("value set of player {player} is missing {value}")]
    GridMissingValues { player: usize, value: Rational },
    #[error("selector entry ({v1}, {v2}) lies outside the free region")]
    SelectorOutOfRegion { v1: Box<Rational>, v2: Box<Rational> },
    #[error("search space too large: work {work} exceeds cap {cap}")]
    SpaceTooLarge { work: u128, cap: u128 },
    #[error("no payment grid satisfies the feasibility filter")]
    InfeasibleSpace,
    #[error("no grid value reaches virtual value {target}")]
    NoPreimage { target: Rational },
    #[error("hypothesis does not hold: {0}")]
    HypothesisFails(String),
    #[error("step cap {cap} exceeded")]
    NonTermination { cap: usize },
    #[error("internal invariant violated: {0}")]
    Defect(String),
    #[error("input mechanism is not truthful")]
    NotTruthfulInput,
    #[error("integer overflow in scaled arithmetic")]
    Overflow,
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::ZeroDensity { .. } => "zero_density",
            Error::OffGrid { .. } => "off_grid",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidJoint(_) => "invalid_joint",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotRegular { .. } => "not_regular",
            Error::NotStandard { .. } => "not_standard",
            Error::EmptyCondition => "empty_condition",
            Error::EmptyInput(_) => "empty_input",
            Error::TooManyAtoms { .. } => "too_many_atoms",
            Error::AllocationMismatch { .. } => "allocation_mismatch",
            Error::NotTruthful(_) => "not_truthful",
            Error::GridMissingValues { .. } => "grid_missing_values",
            Error::SelectorOutOfRegion { .. } => "selector_out_of_region",
            Error::SpaceTooLarge { .. } => "space_too_large",
            Error::InfeasibleSpace => "infeasible_space",
            Error::NoPreimage { .. } => "no_preimage",
            Error::HypothesisFails(_) => "hypothesis_fails",
            Error::NonTermination { .. } => "non_termination",
            Error::Defect(_) => "defect",
            Error::NotTruthfulInput => "not_truthful_input",
            Error::Overflow => "overflow",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    /// 2 for bad invocations and unreadable input, 1 when the input is
    /// well-formed but fails a mathematical precondition or check.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::OffGrid { .. }
            | Error::InvalidDistribution(_)
            | Error::InvalidJoint(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::EmptyInput(_)
            | Error::TooManyAtoms { .. }
            | Error::SpaceTooLarge { .. }
            | Error::GridMissingValues { .. }
            | Error::SelectorOutOfRegion { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn off_grid(value: &Rational, context: impl Into<String>) -> Self {
        Error::OffGrid {
            value: value.clone(),
            context: Some(context.into()),
        }
    }
}
