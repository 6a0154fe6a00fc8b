use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A sample row sums to zero.
    ZeroSumRow { sample: String },
    /// A sample row became all-zero after rescaling.
    RescaledZeroRow { sample: String, scale: f64 },
    DuplicateName { kind: &'static str, name: String },
    Shape(String),
    Tree(String),
    /// Tree leaves and table features do not match one-to-one.
    LeafMismatch {
        missing_in_tree: Vec<String>,
        missing_in_table: Vec<String>,
    },
    InvalidHyper(String),
    InvalidPrior(String),
    EmptyCluster,
    LengthMismatch { expected: usize, found: usize },
    EmptyDraws,
    SingleClassTruth,
    InvalidConfig(String),
    Scenario(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroSumRow { sample } => write!(f, "sample `{sample}` has zero total count"),
            Error::RescaledZeroRow { sample, scale } => write!(
                f,
                "sample `{sample}` has zero total after dividing by {scale}; use a smaller scale"
            ),
            Error::DuplicateName { kind, name } => write!(f, "duplicate {kind} name `{name}`"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Tree(msg) => write!(f, "tree error: {msg}"),
            Error::LeafMismatch {
                missing_in_tree,
                missing_in_table,
            } => write!(
                f,
                "tree/table mismatch: features without a leaf [{}]; leaves without a feature [{}]",
                missing_in_tree.join(","),
                missing_in_table.join(",")
            ),
            Error::InvalidHyper(msg) => write!(f, "invalid hyperparameter: {msg}"),
            Error::InvalidPrior(msg) => write!(f, "invalid partition prior: {msg}"),
            Error::EmptyCluster => write!(f, "partition contains an empty cluster"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::EmptyDraws => write!(f, "no posterior draws"),
            Error::SingleClassTruth => write!(f, "truth vector must contain both classes"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Scenario(msg) => write!(f, "invalid scenario: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
