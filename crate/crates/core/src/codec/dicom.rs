//! Minimal DICOM (PS3.10) support: explicit VR little endian, uncompressed,
//! single-frame, 8-bit MONOCHROME2.
//!
//! Every element is kept as opaque bytes so that a dataset written back with
//! unmodified pixels is byte-identical to the file it was read from. Only the
//! PixelData value is ever replaced.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::pixel::GrayImage;

const PREAMBLE_LEN: usize = 128;
const MAGIC: &[u8; 4] = b"DICM";

pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";

/// A (group, element) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl Tag {
    pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
    pub const SAMPLES_PER_PIXEL: Tag = Tag(0x0028, 0x0002);
    pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag(0x0028, 0x0004);
    pub const NUMBER_OF_FRAMES: Tag = Tag(0x0028, 0x0008);
    pub const ROWS: Tag = Tag(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
    pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
    pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

    const ITEM: Tag = Tag(0xFFFE, 0xE000);
    const ITEM_DELIMITATION: Tag = Tag(0xFFFE, 0xE00D);
    const SEQUENCE_DELIMITATION: Tag = Tag(0xFFFE, 0xE0DD);

    pub fn group(self) -> u16 {
        self.0
    }

    pub fn element(self) -> u16 {
        self.1
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

/// VRs that use the 2 reserved bytes + 32-bit length header form.
fn has_long_length(vr: [u8; 2]) -> bool {
    matches!(
        &vr,
        b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR"
            | b"UT" | b"UV"
    )
}

/// One data element. `value` holds the raw value bytes; for an
/// undefined-length sequence it holds the encoded items without the trailing
/// sequence delimitation item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DicomElement {
    pub tag: Tag,
    pub vr: [u8; 2],
    pub value: Vec<u8>,
    pub undefined_length: bool,
}

impl DicomElement {
    pub fn vr_str(&self) -> &str {
        std::str::from_utf8(&self.vr).unwrap_or("??")
    }

    fn header_len(&self) -> usize {
        if has_long_length(self.vr) {
            12
        } else {
            8
        }
    }

    fn encoded_len(&self) -> usize {
        self.header_len() + self.value.len() + if self.undefined_length { 8 } else { 0 }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.tag.0.to_le_bytes());
        out.extend_from_slice(&self.tag.1.to_le_bytes());
        out.extend_from_slice(&self.vr);
        if has_long_length(self.vr) {
            out.extend_from_slice(&[0, 0]);
            let len = if self.undefined_length {
                UNDEFINED_LENGTH
            } else {
                self.value.len() as u32
            };
            out.extend_from_slice(&len.to_le_bytes());
        } else {
            out.extend_from_slice(&(self.value.len() as u16).to_le_bytes());
        }
        out.extend_from_slice(&self.value);
        if self.undefined_length {
            out.extend_from_slice(&Tag::SEQUENCE_DELIMITATION.0.to_le_bytes());
            out.extend_from_slice(&Tag::SEQUENCE_DELIMITATION.1.to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes());
        }
    }

    fn value_as_u16(&self) -> Result<u16> {
        if self.vr != *b"US" || self.value.len() != 2 {
            return Err(Error::Dicom(format!(
                "{} expected a single US value, got VR {} with {} bytes",
                self.tag,
                self.vr_str(),
                self.value.len()
            )));
        }
        Ok(u16::from_le_bytes([self.value[0], self.value[1]]))
    }

    fn value_as_text(&self) -> String {
        String::from_utf8_lossy(&self.value)
            .trim_end_matches(['\0', ' '])
            .trim_start()
            .to_string()
    }
}

/// A parsed DICOM file: preamble, file meta group and the main dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DicomDataset {
    preamble: Vec<u8>,
    meta: Vec<DicomElement>,
    elements: Vec<DicomElement>,
    rows: usize,
    columns: usize,
    bits_allocated: u16,
    samples_per_pixel: u16,
    photometric: String,
    pixel_index: usize,
}

impl DicomDataset {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn bits_allocated(&self) -> u16 {
        self.bits_allocated
    }

    pub fn samples_per_pixel(&self) -> u16 {
        self.samples_per_pixel
    }

    pub fn photometric_interpretation(&self) -> &str {
        &self.photometric
    }

    pub fn preamble(&self) -> &[u8] {
        &self.preamble
    }

    pub fn meta(&self) -> &[DicomElement] {
        &self.meta
    }

    pub fn elements(&self) -> &[DicomElement] {
        &self.elements
    }

    pub fn transfer_syntax(&self) -> Option<String> {
        self.meta
            .iter()
            .find(|e| e.tag == Tag::TRANSFER_SYNTAX_UID)
            .map(DicomElement::value_as_text)
    }

    pub fn pixel_data(&self) -> &DicomElement {
        &self.elements[self.pixel_index]
    }

    /// Byte range of the PixelData value within the encoded file.
    pub fn pixel_data_span(&self) -> Range<usize> {
        let mut offset = PREAMBLE_LEN + MAGIC.len();
        offset += self.meta.iter().map(DicomElement::encoded_len).sum::<usize>();
        offset += self.elements[..self.pixel_index]
            .iter()
            .map(DicomElement::encoded_len)
            .sum::<usize>();
        let pixel = &self.elements[self.pixel_index];
        let start = offset + pixel.header_len();
        start..start + pixel.value.len()
    }

    fn encoded_len(&self) -> usize {
        PREAMBLE_LEN
            + MAGIC.len()
            + self.meta.iter().map(DicomElement::encoded_len).sum::<usize>()
            + self.elements.iter().map(DicomElement::encoded_len).sum::<usize>()
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| {
                Error::Dicom(format!(
                    "length overrun reading {what} at offset {} ({n} bytes, {} available)",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<Tag> {
        let g = self.u16("tag group")?;
        let e = self.u16("tag element")?;
        Ok(Tag(g, e))
    }

    fn peek_group(&self) -> Option<u16> {
        self.buf
            .get(self.pos..self.pos + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }
}

/// Reads one explicit-VR little-endian element.
fn read_element(cur: &mut Cursor<'_>) -> Result<DicomElement> {
    let tag = cur.tag()?;
    if tag.0 == 0xFFFE {
        return Err(Error::Dicom(format!(
            "unexpected delimiter {tag} at offset {}",
            cur.pos - 4
        )));
    }
    let vr_bytes = cur.take(2, "VR")?;
    let vr = [vr_bytes[0], vr_bytes[1]];
    if !vr.iter().all(u8::is_ascii_uppercase) {
        return Err(Error::Dicom(format!(
            "{tag} has invalid VR bytes {vr:02X?}; is the file implicit VR?"
        )));
    }
    let len = if has_long_length(vr) {
        let reserved = cur.u16("reserved bytes")?;
        if reserved != 0 {
            return Err(Error::Dicom(format!("{tag} has non-zero reserved bytes")));
        }
        cur.u32("value length")?
    } else {
        cur.u16("value length")? as u32
    };

    if len == UNDEFINED_LENGTH {
        if tag == Tag::PIXEL_DATA {
            return Err(Error::Unsupported(
                "encapsulated (compressed) pixel data".into(),
            ));
        }
        if &vr != b"SQ" {
            return Err(Error::Unsupported(format!(
                "undefined length on non-sequence element {tag} (VR {})",
                String::from_utf8_lossy(&vr)
            )));
        }
        let start = cur.pos;
        let end = skip_sequence_items(cur)?;
        let value = cur.buf[start..end].to_vec();
        // consume the sequence delimitation item
        cur.pos = end;
        cur.tag()?;
        if cur.u32("sequence delimiter length")? != 0 {
            return Err(Error::Dicom(format!(
                "{tag} sequence delimiter has non-zero length"
            )));
        }
        return Ok(DicomElement {
            tag,
            vr,
            value,
            undefined_length: true,
        });
    }

    if len % 2 != 0 {
        return Err(Error::Dicom(format!("{tag} has odd value length {len}")));
    }
    let value = cur.take(len as usize, "element value")?.to_vec();
    Ok(DicomElement {
        tag,
        vr,
        value,
        undefined_length: false,
    })
}

/// Walks the items of an undefined-length sequence. Returns the offset of the
/// sequence delimitation tag without consuming it.
fn skip_sequence_items(cur: &mut Cursor<'_>) -> Result<usize> {
    loop {
        let here = cur.pos;
        let tag = cur.tag()?;
        let len = cur.u32("item length")?;
        match tag {
            Tag::SEQUENCE_DELIMITATION => {
                cur.pos = here;
                return Ok(here);
            }
            Tag::ITEM if len == UNDEFINED_LENGTH => skip_item_elements(cur)?,
            Tag::ITEM => {
                cur.take(len as usize, "item value")?;
            }
            other => {
                return Err(Error::Dicom(format!(
                    "expected item or sequence delimiter, found {other} at offset {here}"
                )))
            }
        }
    }
}

/// Skips the nested elements of an undefined-length item, consuming its
/// item delimitation.
fn skip_item_elements(cur: &mut Cursor<'_>) -> Result<()> {
    loop {
        let here = cur.pos;
        let tag = cur.tag()?;
        if tag == Tag::ITEM_DELIMITATION {
            cur.u32("item delimiter length")?;
            return Ok(());
        }
        cur.pos = here;
        read_element(cur)?;
    }
}

fn read_group(
    cur: &mut Cursor<'_>,
    keep: impl Fn(Option<u16>) -> bool,
) -> Result<Vec<DicomElement>> {
    let mut out: Vec<DicomElement> = Vec::new();
    while !cur.at_end() && keep(cur.peek_group()) {
        let el = read_element(cur)?;
        if let Some(prev) = out.last() {
            if el.tag <= prev.tag {
                return Err(Error::Dicom(format!(
                    "element {} does not follow {} in ascending order",
                    el.tag, prev.tag
                )));
            }
        }
        out.push(el);
    }
    Ok(out)
}

fn find(elements: &[DicomElement], tag: Tag) -> Option<&DicomElement> {
    elements.iter().find(|e| e.tag == tag)
}

fn required_u16(elements: &[DicomElement], tag: Tag, name: &str) -> Result<u16> {
    find(elements, tag)
        .ok_or_else(|| Error::Unsupported(format!("pixel module lacks {name} {tag}")))?
        .value_as_u16()
}

/// Parses a DICOM file and extracts its pixel raster.
pub fn read_dicom(bytes: &[u8]) -> Result<(DicomDataset, GrayImage)> {
    if bytes.len() < PREAMBLE_LEN + MAGIC.len() || &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] != MAGIC
    {
        return Err(Error::Dicom("missing DICM magic at offset 128".into()));
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: PREAMBLE_LEN + MAGIC.len(),
    };
    let meta = read_group(&mut cur, |g| g == Some(0x0002))?;
    let ts = find(&meta, Tag::TRANSFER_SYNTAX_UID)
        .ok_or_else(|| Error::Dicom("file meta lacks transfer syntax UID".into()))?
        .value_as_text();
    if ts != EXPLICIT_VR_LITTLE_ENDIAN {
        return Err(Error::Unsupported(format!("transfer syntax {ts}")));
    }
    let elements = read_group(&mut cur, |_| true)?;
    if let (Some(last_meta), Some(first)) = (meta.last(), elements.first()) {
        if first.tag <= last_meta.tag {
            return Err(Error::Dicom("dataset element precedes file meta".into()));
        }
    }

    let samples_per_pixel = required_u16(&elements, Tag::SAMPLES_PER_PIXEL, "SamplesPerPixel")?;
    let bits_allocated = required_u16(&elements, Tag::BITS_ALLOCATED, "BitsAllocated")?;
    let rows = required_u16(&elements, Tag::ROWS, "Rows")? as usize;
    let columns = required_u16(&elements, Tag::COLUMNS, "Columns")? as usize;
    let photometric = find(&elements, Tag::PHOTOMETRIC_INTERPRETATION)
        .ok_or_else(|| Error::Unsupported("pixel module lacks PhotometricInterpretation".into()))?
        .value_as_text();

    if bits_allocated != 8 {
        return Err(Error::Unsupported(format!(
            "bits allocated {bits_allocated} (only 8 is supported)"
        )));
    }
    if samples_per_pixel != 1 {
        return Err(Error::Unsupported(format!(
            "samples per pixel {samples_per_pixel} (only 1 is supported)"
        )));
    }
    if photometric != "MONOCHROME2" {
        return Err(Error::Unsupported(format!(
            "photometric interpretation {photometric}"
        )));
    }
    if let Some(frames) = find(&elements, Tag::NUMBER_OF_FRAMES) {
        let n = frames.value_as_text();
        if n != "1" {
            return Err(Error::Unsupported(format!("multi-frame pixel data ({n} frames)")));
        }
    }
    if rows == 0 || columns == 0 {
        return Err(Error::Dicom(format!("empty image {columns}x{rows}")));
    }

    let pixel_index = elements
        .iter()
        .position(|e| e.tag == Tag::PIXEL_DATA)
        .ok_or_else(|| Error::Dicom("no PixelData element".into()))?;
    let pixel = &elements[pixel_index];
    let raster_len = rows * columns;
    let padded_len = raster_len + raster_len % 2;
    if pixel.value.len() != padded_len {
        return Err(Error::Dicom(format!(
            "PixelData holds {} bytes, expected {padded_len} for {columns}x{rows}",
            pixel.value.len()
        )));
    }
    let img = GrayImage::new(columns, rows, pixel.value[..raster_len].to_vec())?;

    let ds = DicomDataset {
        preamble: bytes[..PREAMBLE_LEN].to_vec(),
        meta,
        elements,
        rows,
        columns,
        bits_allocated,
        samples_per_pixel,
        photometric,
        pixel_index,
    };
    Ok((ds, img))
}

/// Re-encodes `ds` with its PixelData value replaced by `img`'s raster,
/// padded with one zero byte when the raster length is odd.
pub fn write_dicom(ds: &DicomDataset, img: &GrayImage) -> Result<Vec<u8>> {
    if img.width() != ds.columns || img.height() != ds.rows {
        return Err(Error::DimensionMismatch {
            a_w: img.width(),
            a_h: img.height(),
            b_w: ds.columns,
            b_h: ds.rows,
        });
    }
    let mut out = Vec::with_capacity(ds.encoded_len());
    out.extend_from_slice(&ds.preamble);
    out.extend_from_slice(MAGIC);
    for el in &ds.meta {
        el.encode_into(&mut out);
    }
    for (i, el) in ds.elements.iter().enumerate() {
        if i == ds.pixel_index {
            let mut value = img.pixels().to_vec();
            if value.len() % 2 == 1 {
                value.push(0);
            }
            DicomElement {
                value,
                ..el.clone()
            }
            .encode_into(&mut out);
        } else {
            el.encode_into(&mut out);
        }
    }
    Ok(out)
}
