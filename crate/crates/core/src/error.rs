use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A single argument is outside its admissible range.
    #[error("invalid {name} = {value}: {reason}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Configuration failed validation; every violation is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    /// A closed-form flow denominator collapsed below the division guard.
    #[error(
        "singular flow equation for {constituent}: probability sum {probability} leaves denominator below {guard}"
    )]
    Singularity {
        constituent: &'static str,
        probability: f64,
        guard: f64,
    },

    #[error("rank-deficient flow matrix; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("not enough observations: {rows} rows for {columns} active constituents")]
    TooFewObservations { rows: usize, columns: usize },

    #[error("constituent mask mismatch: {0}")]
    MaskMismatch(String),

    #[error("length mismatch: {0} predictions vs {1} observations")]
    LengthMismatch(usize, usize),

    #[error("observed value is zero at index {0}; percentage error undefined")]
    ZeroObservation(usize),

    #[error("window of {window} slices does not fit a trace of {len} slices")]
    WindowTooLarge { window: usize, len: usize },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("task {task}: {reason}")]
    InvalidTask { task: u32, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient { .. } | Error::Singularity { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn arg(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidArgument { name, value, reason }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
