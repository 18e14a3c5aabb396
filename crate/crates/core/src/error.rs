use thiserror::Error;

/// Errors raised by the watermarking library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },

    #[error("coordinate ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("no embeddable pixels outside the region of interest")]
    EmptyRegion,

    #[error("key k={k} rejected for n={n}: gcd(k, n) = {gcd}")]
    KeyRejected { k: u64, n: usize, gcd: u64 },

    #[error("payload of {bits} bits exceeds capacity of {capacity} slots")]
    PayloadTooLarge { bits: usize, capacity: usize },

    #[error("invalid payload: {0}")]
    InvalidPayload(String),

    #[error("slot map does not match image: {0}")]
    SlotMismatch(String),

    #[error("embedding region not clean: {count} pixel(s) outside the ROI hold values in 1..{limit}")]
    RoniNotClean { count: usize, limit: u8 },

    #[error("invalid hash key: {0}")]
    InvalidHashKey(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("malformed DICOM: {0}")]
    Dicom(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed manifest: {0}")]
    Manifest(String),
}

impl Error {
    /// True for errors caused by unreadable or unsupported input data, as
    /// opposed to bad parameters.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Error::Pgm(_) | Error::Dicom(_) | Error::Unsupported(_) | Error::Manifest(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
