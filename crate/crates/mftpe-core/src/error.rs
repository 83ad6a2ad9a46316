use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block size {block} does not divide image dimensions {width}x{height}")]
    NonDivisibleBlockSize { block: u16, width: u32, height: u32 },

    #[error("block size must be at least 2, got {0}")]
    BlockTooSmall(u16),

    #[error("image has no pixels")]
    EmptyImage,

    #[error("pixel data length {actual} does not match {width}x{height}x{channels}")]
    DataSizeMismatch {
        width: u32,
        height: u32,
        channels: u8,
        actual: usize,
    },

    #[error("unsupported pixel format: {0}")]
    UnsupportedFormat(String),

    #[error("png codec error: {0}")]
    Png(String),

    #[error("group of {actual} pixels does not match profile arity {expected}")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("sum-range substitution needs the block min/max context")]
    MissingBlockContext,

    #[error("invalid factor profile: {0}")]
    InvalidProfile(String),

    #[error("rounds must be at least 1")]
    ZeroRounds,

    #[error("malformed ciphertext envelope: {0}")]
    MalformedEnvelope(String),

    #[error("envelope parameters inconsistent with payload: {0}")]
    ParamMismatch(String),

    #[error("adjacent-pixel correlation undefined: no variance in sampled {0} pairs")]
    DegenerateVariance(&'static str),

    #[error("images have different dimensions: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(u32, u32, u8, u32, u32, u8),

    #[error("brute-force instance too large: {states} states exceeds the {limit} guard")]
    InstanceTooLarge { states: u128, limit: u128 },

    #[error("collision factor exceeds 1: {0}")]
    ProbabilityOverUnity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
