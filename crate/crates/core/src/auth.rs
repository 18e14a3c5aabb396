//! Pixel serialization and SHA-256 / HMAC-SHA-256 digests.

use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pixel::{GrayImage, RoiRect};

/// A SHA-256 sized digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const BITS: usize = 256;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)
            .map_err(|e| Error::InvalidParameter(format!("bad digest hex: {e}")))?;
        Ok(Digest256(out))
    }

    /// Bits most-significant byte first, most-significant bit first.
    pub fn to_bits(&self) -> Vec<bool> {
        self.0
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1 == 1))
            .collect()
    }

    /// Inverse of [`Digest256::to_bits`].
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() != Self::BITS {
            return Err(Error::InvalidPayload(format!(
                "digest needs {} bits, got {}",
                Self::BITS,
                bits.len()
            )));
        }
        let mut out = [0u8; 32];
        for (byte, chunk) in out.iter_mut().zip(bits.chunks(8)) {
            *byte = chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8);
        }
        Ok(Digest256(out))
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Shared secret for keyed hashing, 1 to 64 bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct HashKey(Vec<u8>);

impl HashKey {
    pub const MAX_LEN: usize = 64;

    pub fn new(secret: impl Into<Vec<u8>>) -> Result<Self> {
        let secret = secret.into();
        if secret.is_empty() {
            return Err(Error::InvalidHashKey("key is empty".into()));
        }
        if secret.len() > Self::MAX_LEN {
            return Err(Error::InvalidHashKey(format!(
                "key is {} bytes, at most {} allowed",
                secret.len(),
                Self::MAX_LEN
            )));
        }
        Ok(HashKey(secret))
    }

    pub fn secret(&self) -> &[u8] {
        &self.0
    }
}

// never print the secret
impl fmt::Debug for HashKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashKey([{} bytes])", self.0.len())
    }
}

/// Which pixels the digest covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashMode {
    #[default]
    Whole,
    Roi,
}

impl HashMode {
    pub fn region(self, img: &GrayImage, roi: RoiRect) -> RoiRect {
        match self {
            HashMode::Whole => img.full_rect(),
            HashMode::Roi => roi,
        }
    }
}

impl std::str::FromStr for HashMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(HashMode::Whole),
            "roi" => Ok(HashMode::Roi),
            other => Err(Error::InvalidParameter(format!(
                "hash mode must be whole or roi, got {other:?}"
            ))),
        }
    }
}

/// One byte per pixel of `region`, row-major.
pub fn canonical_string(img: &GrayImage, region: RoiRect) -> Result<Vec<u8>> {
    region.validate(img.width(), img.height())?;
    let mut out = Vec::with_capacity(region.area());
    for y in region.y0..region.y1 {
        let row = y * img.width();
        out.extend_from_slice(&img.pixels()[row + region.x0..row + region.x1]);
    }
    Ok(out)
}

pub fn digest(s: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(s).into())
}

/// HMAC-SHA-256 of `s` under `key`.
pub fn keyed_digest(key: &HashKey, s: &[u8]) -> Digest256 {
    let mut mac =
        <Hmac<Sha256> as KeyInit>::new_from_slice(key.secret()).expect("HMAC accepts any key length");
    mac.update(s);
    Digest256(mac.finalize().into_bytes().into())
}

/// Digest of `region` of `img`, keyed when a key is given.
pub fn image_digest(img: &GrayImage, region: RoiRect, key: Option<&HashKey>) -> Result<Digest256> {
    let s = canonical_string(img, region)?;
    Ok(match key {
        Some(k) => keyed_digest(k, &s),
        None => digest(&s),
    })
}
