use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Topology with zero agents or zero actions, or a value whose shape
    /// disagrees with the topology it is used with.
    Topology(String),
    /// An architecture vector block without exactly one active bit.
    Infeasible { agent: usize, ones: usize },
    /// Chosen-action probability outside `(0, 1]`.
    ImportanceWeight(f64),
    /// Non-finite or otherwise unusable numeric input.
    Input(String),
    /// Tabular benchmark has no entry for the requested joint action.
    Lookup(Vec<usize>),
    /// Metric cannot be computed for this environment.
    UnsupportedMetric(&'static str),
    /// Exhaustive enumeration would exceed the configured limit.
    SpaceTooLarge { size: Option<u128>, limit: u128 },
    /// Loss outside `[0, 1]` while unit-loss checking is on.
    LossOutOfRange { round: usize, loss: f64 },
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Topology(msg) => write!(f, "topology error: {msg}"),
            Error::Infeasible { agent, ones } => write!(
                f,
                "infeasible architecture: agent {agent} block has {ones} active entries (expected 1)"
            ),
            Error::ImportanceWeight(p) => write!(
                f,
                "importance weight error: chosen-action probability {p} is not in (0, 1]"
            ),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Lookup(actions) => write!(f, "no benchmark entry for joint action {actions:?}"),
            Error::UnsupportedMetric(what) => write!(f, "unsupported metric: {what}"),
            Error::SpaceTooLarge { size, limit } => match size {
                Some(size) => write!(
                    f,
                    "joint action space has {size} elements, above the enumeration limit {limit}; use an environment-specific oracle"
                ),
                None => write!(
                    f,
                    "joint action space overflows u128, above the enumeration limit {limit}; use an environment-specific oracle"
                ),
            },
            Error::LossOutOfRange { round, loss } => {
                write!(f, "loss {loss} at round {round} is outside [0, 1]")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
