//! Reversible fragile watermarking for grayscale medical images.
//!
//! The SHA-256 digest of an image (optionally HMAC-keyed) is written into the
//! least significant bits of the zero-valued pixels outside a rectangular
//! region of interest, scattered by the keyed mapping `slot = k·x mod n`.
//! Verification extracts the digest, zeroes the embedding bits again and
//! compares against a fresh digest, which both detects any modification and
//! recovers the original pixels exactly.

pub mod analysis;
pub mod auth;
pub mod cli;
pub mod codec;
pub mod embed;
mod error;
pub mod pipeline;
pub mod pixel;

pub use auth::{canonical_string, digest, keyed_digest, Digest256, HashKey, HashMode};
pub use embed::{
    build_slot_map, capacity, extract, flip_restore, map_bit, EmbedKey, LsbDepth, Payload, SlotMap,
};
pub use error::{Error, Result};
pub use pipeline::{
    saw_embed, saw_verify, verify_keyed_hash_agreement, SawParams, Status, VerificationReport,
    WatermarkManifest,
};
pub use pixel::{histogram, pixel_index, psnr, GrayImage, Histogram, Psnr, RoiRect};
