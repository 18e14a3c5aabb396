#![allow(dead_code)]

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roni_saw::{GrayImage, RoiRect};

/// Hand-assembled explicit-VR little-endian DICOM file. Records where the
/// PixelData value lands so byte-range checks do not depend on the parser.
pub struct DicomFixture {
    pub bytes: Vec<u8>,
    pub pixel_value: Range<usize>,
}

pub struct DicomSpec<'a> {
    pub transfer_syntax: &'a [u8],
    pub bits_allocated: u16,
    pub pixel_vr: &'a [u8; 2],
    pub private_tags: bool,
    pub sequence: bool,
}

impl Default for DicomSpec<'_> {
    fn default() -> Self {
        DicomSpec {
            transfer_syntax: b"1.2.840.10008.1.2.1\0",
            bits_allocated: 8,
            pixel_vr: b"OB",
            private_tags: false,
            sequence: false,
        }
    }
}

fn tag(out: &mut Vec<u8>, g: u16, e: u16) {
    out.extend_from_slice(&g.to_le_bytes());
    out.extend_from_slice(&e.to_le_bytes());
}

fn short(out: &mut Vec<u8>, g: u16, e: u16, vr: &[u8; 2], value: &[u8]) {
    assert!(value.len().is_multiple_of(2));
    tag(out, g, e);
    out.extend_from_slice(vr);
    out.extend_from_slice(&(value.len() as u16).to_le_bytes());
    out.extend_from_slice(value);
}

fn long(out: &mut Vec<u8>, g: u16, e: u16, vr: &[u8; 2], len: u32) {
    tag(out, g, e);
    out.extend_from_slice(vr);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&len.to_le_bytes());
}

pub fn build_dicom(spec: &DicomSpec<'_>, img: &GrayImage) -> DicomFixture {
    let mut out = vec![0u8; 128];
    out[..16].copy_from_slice(b"preamble-bytes!!");
    out.extend_from_slice(b"DICM");

    let mut meta = Vec::new();
    long(&mut meta, 0x0002, 0x0001, b"OB", 2);
    meta.extend_from_slice(&[0, 1]);
    short(&mut meta, 0x0002, 0x0002, b"UI", b"1.2.840.10008.5.1.4.1.1.6.1\0");
    short(&mut meta, 0x0002, 0x0003, b"UI", b"1.2.3.4.5.6.7.8.9\0");
    short(&mut meta, 0x0002, 0x0010, b"UI", spec.transfer_syntax);
    // group length first
    short(&mut out, 0x0002, 0x0000, b"UL", &(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);

    short(&mut out, 0x0008, 0x0060, b"CS", b"US");
    if spec.sequence {
        long(&mut out, 0x0008, 0x1140, b"SQ", 0xFFFF_FFFF);
        tag(&mut out, 0xFFFE, 0xE000);
        out.extend_from_slice(&0xFFFF_FFFFu32.to_le_bytes());
        short(&mut out, 0x0008, 0x1150, b"UI", b"1.2.840.10008.5.1.4.1.1.6.1\0");
        short(&mut out, 0x0008, 0x1155, b"UI", b"9.8.7.6\0");
        tag(&mut out, 0xFFFE, 0xE00D);
        out.extend_from_slice(&0u32.to_le_bytes());
        tag(&mut out, 0xFFFE, 0xE0DD);
        out.extend_from_slice(&0u32.to_le_bytes());
    }
    short(&mut out, 0x0010, 0x0010, b"PN", b"Doe^Jane");
    if spec.private_tags {
        short(&mut out, 0x0019, 0x0010, b"LO", b"ACME 1.0");
        long(&mut out, 0x0019, 0x1001, b"UN", 6);
        out.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
    }
    short(&mut out, 0x0028, 0x0002, b"US", &1u16.to_le_bytes());
    short(&mut out, 0x0028, 0x0004, b"CS", b"MONOCHROME2 ");
    short(&mut out, 0x0028, 0x0010, b"US", &(img.height() as u16).to_le_bytes());
    short(&mut out, 0x0028, 0x0011, b"US", &(img.width() as u16).to_le_bytes());
    short(&mut out, 0x0028, 0x0100, b"US", &spec.bits_allocated.to_le_bytes());
    short(&mut out, 0x0028, 0x0101, b"US", &spec.bits_allocated.to_le_bytes());
    short(&mut out, 0x0028, 0x0102, b"US", &(spec.bits_allocated - 1).to_le_bytes());
    short(&mut out, 0x0028, 0x0103, b"US", &0u16.to_le_bytes());

    let mut px = img.pixels().to_vec();
    if px.len() % 2 == 1 {
        px.push(0);
    }
    long(&mut out, 0x7FE0, 0x0010, spec.pixel_vr, px.len() as u32);
    let start = out.len();
    out.extend_from_slice(&px);
    let end = out.len();
    // trailing padding element after pixel data
    long(&mut out, 0xFFFC, 0xFFFC, b"OB", 4);
    out.extend_from_slice(&[0; 4]);
    DicomFixture {
        bytes: out,
        pixel_value: start..end,
    }
}

/// Zero background with random content in `roi` and a few bright annotation
/// pixels (values >= 4) in the corner.
pub fn textured(width: usize, height: usize, roi: RoiRect, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            if roi.contains(x, y) {
                px[y * width + x] = rng.gen();
            }
        }
    }
    for (x, p) in px.iter_mut().enumerate().take(3.min(width)) {
        if !roi.contains(x, 0) {
            *p = 180 + x as u8;
        }
    }
    GrayImage::new(width, height, px).unwrap()
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Byte offsets where `a` and `b` differ (same length required).
pub fn byte_diffs(a: &[u8], b: &[u8]) -> Vec<usize> {
    assert_eq!(a.len(), b.len());
    (0..a.len()).filter(|&i| a[i] != b[i]).collect()
}
