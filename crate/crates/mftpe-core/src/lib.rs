//! Multi-factor thumbnail-preserving image encryption.
//!
//! Thumbnail-preserving encryption keeps the block-mean thumbnail of a
//! ciphertext identical to that of its plaintext, which lets encrypted
//! images stay searchable. Distinct plaintexts can still collide on the
//! thumbnail; the multi-factor schemes here shrink that collision space by
//! preserving a second per-group statistic during substitution: the
//! product, the block range, or a fixed-weight weighted sum.
//!
//! The crate bundles:
//! - the block/thumbnail image model ([`image`]),
//! - exact counting and enumeration of the constrained pixel sets
//!   ([`combinatorics`]),
//! - the rank-then-encipher substitution step ([`cipher`]),
//! - the multi-round block cipher and its envelope format ([`engine`]),
//! - exact collision-probability analysis with brute-force oracles
//!   ([`collision`]),
//! - statistical measurements for ciphertexts ([`metrics`]).

pub mod cipher;
pub mod collision;
pub mod combinatorics;
pub mod engine;
pub mod error;
pub mod image;
pub mod keystream;
pub mod metrics;
pub mod sample;

pub use cipher::{BlockContext, EnumCache, FactorProfile, SerialNumber};
pub use engine::{decrypt, derive_weights, encrypt, CipherParams, CiphertextEnvelope};
pub use error::{Error, Result};
pub use image::{
    extended_thumbnail, group_pixels, partition, thumbnail, BlockGrid, ExtendedThumbnail, Image,
    SecondaryFactors, Thumbnail,
};
