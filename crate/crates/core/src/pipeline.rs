//! Sender and receiver sides of strict authentication watermarking.
//!
//! Sender: check the RONI is clean, hash the image, write the 256 digest bits
//! into the RONI through the keyed slot mapping. Receiver: extract the bits,
//! clear them, rehash the restored image and compare.

use serde::{Deserialize, Serialize};

use crate::auth::{image_digest, Digest256, HashKey, HashMode};
use crate::embed::{
    build_slot_map, check_clean, clear_payload_slots, embed, extract, recover_slot_map, EmbedKey,
    LsbDepth, Payload,
};
use crate::error::{Error, Result};
use crate::pixel::{GrayImage, RoiRect};

pub const MANIFEST_VERSION: u32 = 1;

/// Sender-side parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SawParams {
    pub roi: RoiRect,
    pub key: EmbedKey,
    pub depth: LsbDepth,
    pub hash_mode: HashMode,
}

impl SawParams {
    pub fn new(roi: RoiRect, key: EmbedKey, depth: LsbDepth) -> Self {
        SawParams {
            roi,
            key,
            depth,
            hash_mode: HashMode::Whole,
        }
    }

    pub fn with_hash_mode(mut self, mode: HashMode) -> Self {
        self.hash_mode = mode;
        self
    }
}

/// Everything the receiver needs, besides the hash key, to verify and
/// reverse an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatermarkManifest {
    pub roi: RoiRect,
    pub key: EmbedKey,
    pub depth: LsbDepth,
    pub h: usize,
    pub hash_mode: HashMode,
    pub keyed: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestJson {
    version: u32,
    roi: RoiRect,
    k: u64,
    b: u8,
    h: usize,
    hash_mode: HashMode,
    keyed: bool,
}

impl WatermarkManifest {
    pub fn to_json(&self) -> String {
        let repr = ManifestJson {
            version: MANIFEST_VERSION,
            roi: self.roi,
            k: self.key.value(),
            b: self.depth.bits(),
            h: self.h,
            hash_mode: self.hash_mode,
            keyed: self.keyed,
        };
        serde_json::to_string_pretty(&repr).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ManifestJson =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        if repr.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported version {}",
                repr.version
            )));
        }
        if repr.h != Digest256::BITS {
            return Err(Error::Manifest(format!(
                "h must be {} in digest mode, got {}",
                Digest256::BITS,
                repr.h
            )));
        }
        let depth = LsbDepth::from_bits(repr.b).map_err(|e| Error::Manifest(e.to_string()))?;
        let key = EmbedKey::new(repr.k).map_err(|e| Error::Manifest(e.to_string()))?;
        let roi = RoiRect::new(repr.roi.x0, repr.roi.y0, repr.roi.x1, repr.roi.y1)
            .map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(WatermarkManifest {
            roi,
            key,
            depth,
            h: repr.h,
            hash_mode: repr.hash_mode,
            keyed: repr.keyed,
        })
    }
}

/// Outcome of a verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Authentic,
    Tampered,
    Malformed,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Authentic => "authentic",
            Status::Tampered => "tampered",
            Status::Malformed => "malformed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub status: Status,
    pub extracted_digest: Option<Digest256>,
    pub recomputed_digest: Option<Digest256>,
    /// The image with the watermark removed, when extraction succeeded.
    pub recovered_image: Option<GrayImage>,
    pub mismatch_note: String,
}

impl VerificationReport {
    fn malformed(note: impl Into<String>) -> Self {
        VerificationReport {
            status: Status::Malformed,
            extracted_digest: None,
            recomputed_digest: None,
            recovered_image: None,
            mismatch_note: note.into(),
        }
    }

    fn tampered(note: impl Into<String>) -> Self {
        VerificationReport {
            status: Status::Tampered,
            ..VerificationReport::malformed(note)
        }
    }

    pub fn is_authentic(&self) -> bool {
        self.status == Status::Authentic
    }
}

/// Embeds the digest of `img` into its RONI.
///
/// `img` must be in its pre-embedding state: no pixel outside the ROI may
/// hold a value in `1..2^depth`.
pub fn saw_embed(
    img: &GrayImage,
    params: &SawParams,
    hash_key: Option<&HashKey>,
) -> Result<(GrayImage, WatermarkManifest)> {
    params.roi.validate(img.width(), img.height())?;
    check_clean(img, params.roi, params.depth)?;
    let sm = build_slot_map(img, params.roi, params.depth)?;
    if sm.len() < Digest256::BITS {
        return Err(Error::PayloadTooLarge {
            bits: Digest256::BITS,
            capacity: sm.len(),
        });
    }
    params.key.check(sm.len())?;

    let region = params.hash_mode.region(img, params.roi);
    let digest = image_digest(img, region, hash_key)?;
    let payload = Payload::new(digest.to_bits())?;
    let marked = embed(img, &sm, params.key, &payload)?;

    let manifest = WatermarkManifest {
        roi: params.roi,
        key: params.key,
        depth: params.depth,
        h: Digest256::BITS,
        hash_mode: params.hash_mode,
        keyed: hash_key.is_some(),
    };
    Ok((marked, manifest))
}

/// Extracts, restores, rehashes and compares.
///
/// Only the slot bits that carry the digest are cleared before rehashing, so
/// a change to any other slot stays in the recovered image and breaks the
/// comparison in whole-image mode. For a genuine embedding this restores
/// every slot to zero.
pub fn saw_verify(
    img: &GrayImage,
    manifest: &WatermarkManifest,
    hash_key: Option<&HashKey>,
) -> VerificationReport {
    if let Err(e) = manifest.roi.validate(img.width(), img.height()) {
        return VerificationReport::malformed(format!("manifest geometry: {e}"));
    }
    if manifest.h != Digest256::BITS {
        return VerificationReport::malformed(format!("manifest h = {}", manifest.h));
    }
    match (manifest.keyed, hash_key) {
        (true, None) => {
            return VerificationReport::malformed("manifest requires a hash key, none supplied")
        }
        (false, Some(_)) => {
            return VerificationReport::malformed("hash key supplied for an unkeyed manifest")
        }
        _ => {}
    }

    let sm = match recover_slot_map(img, manifest.roi, manifest.depth) {
        Ok(sm) => sm,
        Err(e) => return VerificationReport::tampered(format!("embedding region: {e}")),
    };
    let region = manifest.hash_mode.region(img, manifest.roi);

    let payload = match extract(img, &sm, manifest.key, manifest.h) {
        Ok(p) => p,
        Err(e) => {
            // the slot count no longer matches what the key was bound to
            let mut report = VerificationReport::tampered(format!("extraction failed: {e}"));
            report.recomputed_digest = image_digest(img, region, hash_key).ok();
            return report;
        }
    };
    let extracted = Digest256::from_bits(payload.bits()).expect("payload has 256 bits");
    let restored = clear_payload_slots(img, &sm, manifest.key, manifest.h)
        .expect("extraction succeeded with the same parameters");
    let recomputed = image_digest(&restored, region, hash_key).expect("region validated");

    let (status, note) = if extracted == recomputed {
        (Status::Authentic, String::new())
    } else {
        (
            Status::Tampered,
            "extracted digest differs from digest of restored image".to_string(),
        )
    };
    VerificationReport {
        status,
        extracted_digest: Some(extracted),
        recomputed_digest: Some(recomputed),
        recovered_image: Some(restored),
        mismatch_note: note,
    }
}

/// Verification with a caller-chosen hash key, for checking keyed-hash
/// agreement between sender and receiver.
pub fn verify_keyed_hash_agreement(
    img: &GrayImage,
    manifest: &WatermarkManifest,
    key: &HashKey,
) -> VerificationReport {
    saw_verify(img, manifest, Some(key))
}
