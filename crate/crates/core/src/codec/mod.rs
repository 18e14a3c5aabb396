//! Image containers: binary PGM and a minimal explicit-VR little-endian DICOM
//! reader/writer for 8-bit monochrome objects.

pub mod dicom;
pub mod pgm;

use crate::error::{Error, Result};
use crate::pixel::GrayImage;

pub use dicom::{read_dicom, write_dicom, DicomDataset, DicomElement, Tag};
pub use pgm::{read_pgm, write_pgm};

/// Container kinds recognised by their magic bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Pgm,
    Dicom,
}

/// "DICM" at offset 128 wins over "P5" at offset 0.
pub fn detect(bytes: &[u8]) -> Option<ContainerKind> {
    if bytes.len() >= 132 && &bytes[128..132] == b"DICM" {
        Some(ContainerKind::Dicom)
    } else if bytes.starts_with(b"P5") {
        Some(ContainerKind::Pgm)
    } else {
        None
    }
}

/// A decoded image together with whatever is needed to write it back in its
/// original container.
#[derive(Debug, Clone)]
pub enum Container {
    Pgm,
    Dicom(Box<DicomDataset>),
}

impl Container {
    pub fn kind(&self) -> ContainerKind {
        match self {
            Container::Pgm => ContainerKind::Pgm,
            Container::Dicom(_) => ContainerKind::Dicom,
        }
    }

    /// Serializes `img` into the same container it was read from.
    pub fn encode(&self, img: &GrayImage) -> Result<Vec<u8>> {
        match self {
            Container::Pgm => Ok(write_pgm(img)),
            Container::Dicom(ds) => write_dicom(ds, img),
        }
    }
}

/// Reads either container, auto-detected by magic bytes.
pub fn decode(bytes: &[u8]) -> Result<(Container, GrayImage)> {
    match detect(bytes) {
        Some(ContainerKind::Dicom) => {
            let (ds, img) = read_dicom(bytes)?;
            Ok((Container::Dicom(Box::new(ds)), img))
        }
        Some(ContainerKind::Pgm) => Ok((Container::Pgm, read_pgm(bytes)?)),
        None => Err(Error::Unsupported(
            "unrecognised container (expected PGM P5 or DICOM)".into(),
        )),
    }
}
