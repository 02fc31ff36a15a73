use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix data length {len} does not match shape {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },

    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyShape { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("orthonormalize needs rows >= cols (got {rows}x{cols})")]
    WideMatrix { rows: usize, cols: usize },

    #[error("exact SVD oracle limited to min dimension {cap} (got {dim})")]
    OracleCapExceeded { dim: usize, cap: usize },

    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("budget of {budget} bytes below the smallest payload ({needed} bytes)")]
    BudgetTooSmall { budget: usize, needed: usize },

    #[error("error state shaped {expected_rows}x{expected_cols} cannot take a {rows}x{cols} matrix")]
    ShapeTag {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unknown format tag {0}")]
    BadTag(u8),

    #[error("payload length mismatch: expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("malformed payload: {0}")]
    Malformed(String),

    #[error("dimension {0} does not fit in u32")]
    ShapeOverflow(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("stream {stream}: {source}")]
    Stream {
        stream: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Attaches the name of the tensor stream an error came from.
    pub fn in_stream(self, stream: impl Into<String>) -> Error {
        Error::Stream {
            stream: stream.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by configuration rather than execution.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidConfig(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
