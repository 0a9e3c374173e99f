use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("magnitude {0} does not fit in 31 bits")]
    MagnitudeOverflow(i64),

    #[error("width {0} is not a multiple of 32")]
    UnalignedWidth(usize),

    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("unknown band {0:?}")]
    UnknownBand(String),

    #[error("stale TLB: built for width {tlb_width}, geometry has width {width}")]
    StaleTlb { tlb_width: usize, width: usize },

    #[error("non-causal displacement vector ({dx}, {dy})")]
    NonCausal { dx: i32, dy: i32 },

    #[error("empty candidate list")]
    NoCandidates,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("image format: {0}")]
    Format(String),

    #[error("truncated image at byte offset {offset}: expected {expected}")]
    Truncated { offset: usize, expected: String },
}
