//! Binary PGM (P5), 8-bit only.

use crate::error::{Error, Result};
use crate::pixel::GrayImage;

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

fn skip_ws_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && is_ws(bytes[pos]) {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_ws_and_comments(bytes, *pos);
    let start = *pos;
    let mut value: usize = 0;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((bytes[*pos] - b'0') as usize))
            .ok_or_else(|| Error::Pgm(format!("{what} overflows")))?;
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Pgm(format!("missing {what}")));
    }
    Ok(value)
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Pgm("bad magic, expected P5".into()));
    }
    let mut pos = 2;
    let width = read_number(bytes, &mut pos, "width")?;
    let height = read_number(bytes, &mut pos, "height")?;
    let maxval = read_number(bytes, &mut pos, "maxval")?;
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(&b) if is_ws(b) => pos += 1,
        _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
    }
    Ok(Header {
        width,
        height,
        maxval,
        data_start: pos,
    })
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let hdr = parse_header(bytes)?;
    if hdr.maxval == 0 {
        return Err(Error::Pgm("maxval must be positive".into()));
    }
    if hdr.maxval > 255 {
        return Err(Error::Unsupported(format!(
            "PGM maxval {} (only 8-bit samples are supported)",
            hdr.maxval
        )));
    }
    if hdr.width == 0 || hdr.height == 0 {
        return Err(Error::Pgm(format!(
            "empty image {}x{}",
            hdr.width, hdr.height
        )));
    }
    let len = hdr
        .width
        .checked_mul(hdr.height)
        .ok_or_else(|| Error::Pgm("dimensions overflow".into()))?;
    let raster = &bytes[hdr.data_start..];
    if raster.len() < len {
        return Err(Error::Pgm(format!(
            "truncated raster: {} of {len} bytes",
            raster.len()
        )));
    }
    if raster.len() > len {
        return Err(Error::Pgm(format!(
            "{} trailing bytes after raster",
            raster.len() - len
        )));
    }
    if let Some(&bad) = raster.iter().find(|&&v| v as usize > hdr.maxval) {
        return Err(Error::Pgm(format!(
            "sample {bad} exceeds maxval {}",
            hdr.maxval
        )));
    }
    GrayImage::new(hdr.width, hdr.height, raster.to_vec())
}

/// Canonical `P5\n<w> <h>\n255\n` header followed by the raster.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
