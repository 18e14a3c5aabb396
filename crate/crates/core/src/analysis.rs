//! Capacity/PSNR sweeps, histogram deltas, clone tampering and report output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::embed::{build_slot_map, embed, EmbedKey, LsbDepth, Payload};
use crate::error::{Error, Result};
use crate::pipeline::Status;
use crate::pixel::{histogram, psnr, GrayImage, Psnr, RoiRect};

/// One measured (or infeasible) payload size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub payload_bits: usize,
    /// `None` when the payload exceeds two-plane capacity.
    pub lsb_depth: Option<u8>,
    /// `None` when infeasible.
    #[serde(with = "psnr_serde")]
    pub psnr_db: Option<Psnr>,
    /// Payload size over the slot count at the chosen depth (two-plane
    /// capacity for infeasible rows).
    pub capacity_used: f64,
}

impl SweepRow {
    pub fn is_feasible(&self) -> bool {
        self.psnr_db.is_some()
    }
}

mod psnr_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Psnr>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(Psnr::Infinite) => s.serialize_str("inf"),
            Some(Psnr::Db(db)) => s.serialize_f64(*db),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Psnr>, D::Error> {
        match Option::<Raw>::deserialize(d)? {
            None => Ok(None),
            Some(Raw::Num(v)) => Ok(Some(Psnr::Db(v))),
            Some(Raw::Text(t)) if t == "inf" => Ok(Some(Psnr::Infinite)),
            Some(Raw::Text(t)) => Err(de::Error::custom(format!("bad psnr value {t:?}"))),
        }
    }
}

/// Embeds `bits` keylessly into the zero RONI of `img` (one plane when it
/// fits, else two) and measures PSNR against `img`.
pub fn evaluate_payload(img: &GrayImage, roi: RoiRect, bits: &[bool]) -> Result<SweepRow> {
    let one = build_slot_map(img, roi, LsbDepth::One)?;
    let per_plane = one.len();
    let h = bits.len();
    let depth = if h <= per_plane {
        LsbDepth::One
    } else if h <= 2 * per_plane {
        LsbDepth::Two
    } else {
        return Ok(SweepRow {
            payload_bits: h,
            lsb_depth: None,
            psnr_db: None,
            capacity_used: h as f64 / (2 * per_plane) as f64,
        });
    };
    let sm = if depth == LsbDepth::One {
        one
    } else {
        build_slot_map(img, roi, depth)?
    };
    let capacity_used = h as f64 / sm.len() as f64;
    let psnr_db = if h == 0 {
        Psnr::Infinite
    } else {
        let marked = embed(img, &sm, EmbedKey::KEYLESS, &Payload::new(bits.to_vec())?)?;
        psnr(img, &marked)?
    };
    Ok(SweepRow {
        payload_bits: h,
        lsb_depth: Some(depth.bits()),
        psnr_db: Some(psnr_db),
        capacity_used,
    })
}

/// Runs [`evaluate_payload`] for each size. Payloads are prefixes of one
/// uniform bit stream drawn from `seed`, so a larger payload always contains
/// a smaller one.
pub fn sweep(
    img: &GrayImage,
    roi: RoiRect,
    payload_sizes: &[usize],
    seed: u64,
) -> Result<Vec<SweepRow>> {
    roi.validate(img.width(), img.height())?;
    let per_plane = build_slot_map(img, roi, LsbDepth::One)?.len();
    let longest = payload_sizes
        .iter()
        .copied()
        .filter(|&s| s <= 2 * per_plane)
        .max()
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream: Vec<bool> = (0..longest).map(|_| rng.gen()).collect();

    payload_sizes
        .iter()
        .map(|&size| {
            if size <= longest {
                evaluate_payload(img, roi, &stream[..size])
            } else {
                Ok(SweepRow {
                    payload_bits: size,
                    lsb_depth: None,
                    psnr_db: None,
                    capacity_used: size as f64 / (2 * per_plane) as f64,
                })
            }
        })
        .collect()
}

/// Copy-paste tampering: `src` block pasted over congruent `dst` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TamperSpec {
    pub src: RoiRect,
    pub dst: RoiRect,
}

impl TamperSpec {
    pub fn new(src: RoiRect, dst: RoiRect) -> Result<Self> {
        if src.width() != dst.width() || src.height() != dst.height() {
            return Err(Error::InvalidRegion(format!(
                "clone source {src} and target {dst} differ in size"
            )));
        }
        Ok(TamperSpec { src, dst })
    }

    /// Target block of the same size as `src` with top-left corner `(x, y)`.
    pub fn to_corner(src: RoiRect, x: usize, y: usize) -> Result<Self> {
        let dst = RoiRect::new(x, y, x + src.width(), y + src.height())?;
        TamperSpec::new(src, dst)
    }
}

pub fn clone_tamper(img: &GrayImage, spec: &TamperSpec) -> Result<GrayImage> {
    let TamperSpec { src, dst } = *spec;
    src.validate(img.width(), img.height())?;
    dst.validate(img.width(), img.height())?;
    if src.width() != dst.width() || src.height() != dst.height() {
        return Err(Error::InvalidRegion("clone blocks differ in size".into()));
    }
    let w = img.width();
    let source = img.pixels();
    let mut out = img.clone();
    let px = out.pixels_mut();
    for dy in 0..src.height() {
        let from = (src.y0 + dy) * w + src.x0;
        let to = (dst.y0 + dy) * w + dst.x0;
        px[to..to + src.width()].copy_from_slice(&source[from..from + src.width()]);
    }
    Ok(out)
}

/// `marked` minus `orig`, per histogram bin.
pub fn histogram_delta(orig: &GrayImage, marked: &GrayImage) -> Result<[i64; 256]> {
    if !orig.same_dimensions(marked) {
        return Err(Error::DimensionMismatch {
            a_w: orig.width(),
            a_h: orig.height(),
            b_w: marked.width(),
            b_h: marked.height(),
        });
    }
    let (a, b) = (histogram(orig), histogram(marked));
    let mut out = [0i64; 256];
    for (i, d) in out.iter_mut().enumerate() {
        *d = b.bins()[i] as i64 - a.bins()[i] as i64;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub label: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub rows: Vec<SweepRow>,
    pub histogram_delta: Option<Vec<i64>>,
    pub verdicts: Vec<Verdict>,
}

impl AnalysisReport {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::InvalidParameter(format!("report json: {e}")))
    }
}

pub const CSV_HEADER: [&str; 4] = ["payload_bits", "lsb_depth", "psnr_db", "capacity_used"];

/// Serialized reports: CSV of the sweep rows and JSON of everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedReport {
    pub csv: Vec<u8>,
    pub json: Vec<u8>,
}

pub fn emit_report(
    rows: &[SweepRow],
    deltas: Option<&[i64; 256]>,
    verdicts: &[Verdict],
) -> EmittedReport {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for r in rows {
        let depth = r.lsb_depth.map(|d| d.to_string()).unwrap_or_default();
        let psnr = match r.psnr_db {
            None => "infeasible".to_string(),
            Some(p) => p.to_string(),
        };
        w.write_record([
            r.payload_bits.to_string(),
            depth,
            psnr,
            r.capacity_used.to_string(),
        ])
        .expect("write to memory");
    }
    let csv = w.into_inner().expect("flush to memory");

    let report = AnalysisReport {
        rows: rows.to_vec(),
        histogram_delta: deltas.map(|d| d.to_vec()),
        verdicts: verdicts.to_vec(),
    };
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    EmittedReport { csv, json }
}

/// Synthetic ultrasound-like frame: zero everywhere except a speckled fan
/// sector inscribed in `roi`, apex at the top centre.
pub fn synthetic_ultrasound(width: usize, height: usize, roi: RoiRect, seed: u64) -> Result<GrayImage> {
    roi.validate(width, height)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![0u8; width * height];
    let apex_x = (roi.x0 + roi.x1) as f64 / 2.0;
    let apex_y = roi.y0 as f64;
    let radius = roi.height() as f64;
    let half_angle = 35f64.to_radians();
    for y in roi.y0..roi.y1 {
        for x in roi.x0..roi.x1 {
            let dx = x as f64 + 0.5 - apex_x;
            let dy = y as f64 + 0.5 - apex_y;
            let r = (dx * dx + dy * dy).sqrt();
            if r > radius || dx.atan2(dy).abs() > half_angle {
                continue;
            }
            // brightness falls off with depth, multiplicative speckle on top
            let base = 40.0 + 140.0 * (1.0 - r / radius);
            let speckle: f64 = rng.gen_range(0.4..1.6);
            let v = (base * speckle).round().clamp(16.0, 255.0);
            px[y * width + x] = v as u8;
        }
    }
    GrayImage::new(width, height, px)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (GrayImage, RoiRect) {
        let roi = RoiRect::new(20, 10, 60, 50).unwrap();
        (synthetic_ultrasound(80, 60, roi, 5).unwrap(), roi)
    }

    #[test]
    fn synthetic_has_zero_roni_and_textured_roi() {
        let (img, roi) = fixture();
        let mut inside_nonzero = 0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = img.get(x, y).unwrap();
                if roi.contains(x, y) {
                    inside_nonzero += (v != 0) as usize;
                } else {
                    assert_eq!(v, 0);
                }
            }
        }
        assert!(inside_nonzero > roi.area() / 4);
        assert_eq!(synthetic_ultrasound(80, 60, roi, 5).unwrap(), img);
    }

    #[test]
    fn all_zero_payload_gives_infinite_psnr() {
        let (img, roi) = fixture();
        let row = evaluate_payload(&img, roi, &[false; 500]).unwrap();
        assert_eq!(row.psnr_db, Some(Psnr::Infinite));
        assert_eq!(row.lsb_depth, Some(1));
        let row = evaluate_payload(&img, roi, &[]).unwrap();
        assert_eq!(row.psnr_db, Some(Psnr::Infinite));
    }

    #[test]
    fn sweep_closed_form_and_monotone() {
        let (img, roi) = fixture();
        let per_plane = img.len() - roi.area();
        let sizes: Vec<usize> = (1..=9).map(|i| i * per_plane / 5).collect();
        let rows = sweep(&img, roi, &sizes, 42).unwrap();
        assert_eq!(rows, sweep(&img, roi, &sizes, 42).unwrap());
        let mut prev = Psnr::Infinite;
        for r in &rows {
            let p = r.psnr_db.unwrap();
            assert!(p < prev, "{rows:?}");
            prev = p;
        }
        // one-plane rows obey 10·log10(255²·N / ones)
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let stream: Vec<bool> = (0..*sizes.last().unwrap()).map(|_| rng.gen()).collect();
        for r in rows.iter().filter(|r| r.lsb_depth == Some(1)) {
            let ones = stream[..r.payload_bits].iter().filter(|&&b| b).count() as f64;
            let closed = 10.0 * (255.0f64 * 255.0 * img.len() as f64 / ones).log10();
            assert!((r.psnr_db.unwrap().db().unwrap() - closed).abs() < 0.01);
        }
        assert!(rows.iter().any(|r| r.lsb_depth == Some(2)));
    }

    #[test]
    fn sweep_marks_infeasible() {
        let (img, roi) = fixture();
        let per_plane = img.len() - roi.area();
        let rows = sweep(&img, roi, &[2 * per_plane + 1], 1).unwrap();
        assert!(!rows[0].is_feasible());
        assert_eq!(rows[0].lsb_depth, None);
        assert!(rows[0].capacity_used > 1.0);
    }

    #[test]
    fn clone_tamper_examples() {
        let (img, _) = fixture();
        let same = RoiRect::new(30, 20, 40, 30).unwrap();
        assert_eq!(clone_tamper(&img, &TamperSpec::new(same, same).unwrap()).unwrap(), img);

        let src = RoiRect::new(25, 15, 35, 25).unwrap();
        let spec = TamperSpec::to_corner(src, 40, 30).unwrap();
        let out = clone_tamper(&img, &spec).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let got = out.get(x, y).unwrap();
                if spec.dst.contains(x, y) {
                    assert_eq!(got, img.get(x - 15, y - 15).unwrap());
                } else {
                    assert_eq!(got, img.get(x, y).unwrap());
                }
            }
        }
        // overlapping blocks read from the untouched source
        let spec = TamperSpec::to_corner(src, 30, 15).unwrap();
        let out = clone_tamper(&img, &spec).unwrap();
        assert_eq!(out.get(30, 15).unwrap(), img.get(25, 15).unwrap());
        assert_eq!(out.get(39, 24).unwrap(), img.get(34, 24).unwrap());

        assert!(TamperSpec::new(src, RoiRect::new(0, 0, 5, 5).unwrap()).is_err());
        let oob = TamperSpec::to_corner(src, 75, 0).unwrap();
        assert!(clone_tamper(&img, &oob).is_err());
    }

    #[test]
    fn histogram_delta_support() {
        let (img, roi) = fixture();
        assert_eq!(histogram_delta(&img, &img).unwrap(), [0i64; 256]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for depth in [LsbDepth::One, LsbDepth::Two] {
            let sm = build_slot_map(&img, roi, depth).unwrap();
            let bits: Vec<bool> = (0..sm.len()).map(|_| rng.gen()).collect();
            let marked = embed(&img, &sm, EmbedKey::KEYLESS, &Payload::new(bits).unwrap()).unwrap();
            let d = histogram_delta(&img, &marked).unwrap();
            let limit = depth.value_limit() as usize;
            assert!(d[limit..].iter().all(|&v| v == 0));
            assert!(d[1] > 0 && d[0] < 0);
            if depth == LsbDepth::Two {
                assert!(d[3] > 0);
            }
            assert_eq!(d.iter().sum::<i64>(), 0);
        }
        let other = GrayImage::filled(3, 3, 0).unwrap();
        assert!(histogram_delta(&img, &other).is_err());
    }

    #[test]
    fn report_formats() {
        let empty = emit_report(&[], None, &[]);
        assert_eq!(String::from_utf8(empty.csv).unwrap(), "payload_bits,lsb_depth,psnr_db,capacity_used\n");

        let rows = vec![
            SweepRow {
                payload_bits: 440320,
                lsb_depth: Some(1),
                psnr_db: Some(Psnr::Db(51.514_322_1)),
                capacity_used: 0.9,
            },
            SweepRow {
                payload_bits: 0,
                lsb_depth: Some(1),
                psnr_db: Some(Psnr::Infinite),
                capacity_used: 0.0,
            },
            SweepRow {
                payload_bits: 10,
                lsb_depth: None,
                psnr_db: None,
                capacity_used: 1.25,
            },
        ];
        let one = emit_report(&rows[..1], None, &[]);
        let text = String::from_utf8(one.csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "440320,1,51.5143221,0.9");

        let mut delta = [0i64; 256];
        delta[1] = 5;
        delta[0] = -5;
        let verdicts = vec![Verdict {
            label: "clone".into(),
            status: Status::Tampered,
        }];
        let all = emit_report(&rows, Some(&delta), &verdicts);
        let text = String::from_utf8(all.csv).unwrap();
        assert!(text.contains("0,1,inf,0\n"));
        assert!(text.contains("10,,infeasible,1.25\n"));
        let back = AnalysisReport::from_json(&all.json).unwrap();
        assert_eq!(back.rows, rows);
        assert_eq!(back.histogram_delta.unwrap(), delta.to_vec());
        assert_eq!(back.verdicts, verdicts);
    }
}
