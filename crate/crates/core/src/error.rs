use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Geometry violates a structural invariant (ring too short, zero area,
    /// self-intersection, hole outside shell, non-finite coordinate).
    #[error("invalid geometry: {0}")]
    Structural(String),

    /// A value lies outside the domain an operation is defined on.
    #[error("out of domain: {0}")]
    Domain(String),

    /// The requested precision cannot be represented by the grid.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Unknown attribute or inconsistent point schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Canvas dimensions do not match.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("empty input: {0}")]
    Empty(String),

    /// Malformed serialized index.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
