//! RONI slot enumeration, keyed bit-to-slot mapping and LSB read/write.
//!
//! A slot is one writable `(pixel, bit plane)` position outside the ROI. Slots
//! are numbered 0-based: all plane-0 slots in raster order, then (for a depth
//! of two) all plane-1 slots in the same pixel order. Payload bit labels run
//! `1..=h` and label `x` is written to slot `(k * x) mod n`, so `k = 1` is the
//! plain raster mapping and any `k` coprime to `n` permutes the slots.

use crate::error::{Error, Result};
use crate::pixel::{GrayImage, RoiRect};

/// Number of low bit planes used for embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LsbDepth {
    One = 1,
    Two = 2,
}

impl LsbDepth {
    pub fn from_bits(b: u8) -> Result<Self> {
        match b {
            1 => Ok(LsbDepth::One),
            2 => Ok(LsbDepth::Two),
            other => Err(Error::InvalidParameter(format!(
                "LSB depth must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    /// Smallest pixel value that cannot be produced by embedding.
    pub fn value_limit(self) -> u8 {
        1 << self.bits()
    }

    fn mask(self) -> u8 {
        self.value_limit() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub pixel: usize,
    pub plane: u8,
}

/// Ordered writable slots of an image's RONI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotMap {
    pixels: Vec<usize>,
    depth: LsbDepth,
    roi: RoiRect,
    width: usize,
    height: usize,
}

impl SlotMap {
    /// Number of slots, `n` of the mapping.
    pub fn len(&self) -> usize {
        self.pixels.len() * self.depth.bits() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn depth(&self) -> LsbDepth {
        self.depth
    }

    pub fn roi(&self) -> RoiRect {
        self.roi
    }

    /// Flat indices of the pixels backing the slots, in raster order.
    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn slot(&self, index: usize) -> Slot {
        let per_plane = self.pixels.len();
        Slot {
            pixel: self.pixels[index % per_plane],
            plane: (index / per_plane) as u8,
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.len()).map(move |i| self.slot(i))
    }

    fn check_image(&self, img: &GrayImage) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::SlotMismatch(format!(
                "slot map built for {}x{}, image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}

fn roni_pixels(
    img: &GrayImage,
    roi: RoiRect,
    mut select: impl FnMut(u8) -> bool,
) -> Result<Vec<usize>> {
    roi.validate(img.width(), img.height())?;
    let w = img.width();
    Ok(img
        .pixels()
        .iter()
        .enumerate()
        .filter(|&(i, &v)| !roi.contains(i % w, i / w) && select(v))
        .map(|(i, _)| i)
        .collect())
}

/// Slots over the zero-valued pixels outside `roi`.
pub fn build_slot_map(img: &GrayImage, roi: RoiRect, depth: LsbDepth) -> Result<SlotMap> {
    let pixels = roni_pixels(img, roi, |v| v == 0)?;
    finish(pixels, img, roi, depth)
}

/// Receiver-side slot map: every pixel outside `roi` whose value could have
/// been produced by embedding into a zero pixel, i.e. is below `2^depth`.
/// On an image produced by [`embed`] from a clean source this selects exactly
/// the slots of [`build_slot_map`] on that source.
pub fn recover_slot_map(img: &GrayImage, roi: RoiRect, depth: LsbDepth) -> Result<SlotMap> {
    let limit = depth.value_limit();
    let pixels = roni_pixels(img, roi, |v| v < limit)?;
    finish(pixels, img, roi, depth)
}

fn finish(pixels: Vec<usize>, img: &GrayImage, roi: RoiRect, depth: LsbDepth) -> Result<SlotMap> {
    if pixels.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(SlotMap {
        pixels,
        depth,
        roi,
        width: img.width(),
        height: img.height(),
    })
}

/// Errors when pixels outside `roi` hold values in `1..2^depth`. Such pixels
/// would be indistinguishable from embedded ones at the receiver.
pub fn check_clean(img: &GrayImage, roi: RoiRect, depth: LsbDepth) -> Result<()> {
    let limit = depth.value_limit();
    let dirty = roni_pixels(img, roi, |v| v != 0 && v < limit)?;
    if dirty.is_empty() {
        Ok(())
    } else {
        Err(Error::RoniNotClean {
            count: dirty.len(),
            limit,
        })
    }
}

/// Multiplicative embedding key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmbedKey(u64);

impl EmbedKey {
    /// The raster (keyless) mapping.
    pub const KEYLESS: EmbedKey = EmbedKey(1);

    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("embed key must be positive".into()));
        }
        Ok(EmbedKey(k))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Checks that the key permutes `n` slots.
    pub fn check(self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        let g = gcd(self.0, n as u64);
        if g != 1 {
            return Err(Error::KeyRejected { k: self.0, n, gcd: g });
        }
        Ok(())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[inline]
fn slot_for(x: usize, k: u64, n: usize) -> usize {
    ((k as u128 * x as u128) % n as u128) as usize
}

/// Slot index for bit label `x`: `(k * x) mod n`.
pub fn map_bit(x: usize, key: EmbedKey, n: usize) -> Result<usize> {
    key.check(n)?;
    Ok(slot_for(x, key.0, n))
}

/// Bits to embed; bit label `x` is `bits[x - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    bits: Vec<bool>,
}

impl Payload {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidPayload("payload is empty".into()));
        }
        Ok(Payload { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

fn check_fit(sm: &SlotMap, key: EmbedKey, h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::InvalidPayload("payload is empty".into()));
    }
    if h > sm.len() {
        return Err(Error::PayloadTooLarge {
            bits: h,
            capacity: sm.len(),
        });
    }
    key.check(sm.len())
}

/// Writes `payload` into the slots of `sm`, returning a new image.
pub fn embed(img: &GrayImage, sm: &SlotMap, key: EmbedKey, payload: &Payload) -> Result<GrayImage> {
    sm.check_image(img)?;
    check_fit(sm, key, payload.len())?;
    let limit = sm.depth.value_limit();
    if let Some(&p) = sm.pixels.iter().find(|&&p| img.pixels()[p] >= limit) {
        return Err(Error::SlotMismatch(format!(
            "slot pixel {p} holds {} which is outside the embeddable range",
            img.pixels()[p]
        )));
    }
    let n = sm.len();
    let mut out = img.clone();
    let px = out.pixels_mut();
    for (i, &bit) in payload.bits.iter().enumerate() {
        let slot = sm.slot(slot_for(i + 1, key.0, n));
        let mask = 1u8 << slot.plane;
        if bit {
            px[slot.pixel] |= mask;
        } else {
            px[slot.pixel] &= !mask;
        }
    }
    Ok(out)
}

/// Reads `h` bits from the keyed slot positions.
pub fn extract(img: &GrayImage, sm: &SlotMap, key: EmbedKey, h: usize) -> Result<Payload> {
    sm.check_image(img)?;
    check_fit(sm, key, h)?;
    let n = sm.len();
    let px = img.pixels();
    let bits = (1..=h)
        .map(|x| {
            let slot = sm.slot(slot_for(x, key.0, n));
            (px[slot.pixel] >> slot.plane) & 1 == 1
        })
        .collect();
    Ok(Payload { bits })
}

/// Zeroes every slot pixel, all embedding planes at once.
pub fn flip_restore(img: &GrayImage, sm: &SlotMap) -> Result<GrayImage> {
    sm.check_image(img)?;
    let mut out = img.clone();
    let px = out.pixels_mut();
    let keep = !sm.depth.mask();
    for &p in &sm.pixels {
        px[p] &= keep;
    }
    Ok(out)
}

/// Clears only the slot bits that carry payload labels `1..=h`. On an image
/// whose unused slots are zero this is the same as [`flip_restore`]; any
/// other change to the slots is left in place.
pub fn clear_payload_slots(img: &GrayImage, sm: &SlotMap, key: EmbedKey, h: usize) -> Result<GrayImage> {
    sm.check_image(img)?;
    check_fit(sm, key, h)?;
    let n = sm.len();
    let mut out = img.clone();
    let px = out.pixels_mut();
    for x in 1..=h {
        let slot = sm.slot(slot_for(x, key.0, n));
        px[slot.pixel] &= !(1u8 << slot.plane);
    }
    Ok(out)
}

/// Number of slots available for payload bits.
pub fn capacity(sm: &SlotMap) -> usize {
    sm.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zeros(w: usize, h: usize) -> GrayImage {
        GrayImage::filled(w, h, 0).unwrap()
    }

    #[test]
    fn slot_map_left_half_roi() {
        let img = zeros(4, 4);
        let roi = RoiRect::new(0, 0, 2, 4).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::One).unwrap();
        assert_eq!(sm.len(), 8);
        assert_eq!(sm.pixels(), &[2, 3, 6, 7, 10, 11, 14, 15]);

        let sm2 = build_slot_map(&img, roi, LsbDepth::Two).unwrap();
        assert_eq!(sm2.len(), 16);
        let slots: Vec<Slot> = sm2.slots().collect();
        assert!(slots[..8].iter().all(|s| s.plane == 0));
        assert!(slots[8..].iter().all(|s| s.plane == 1));
        assert_eq!(slots[8].pixel, 2);
        assert_eq!(slots[15].pixel, 15);
    }

    #[test]
    fn slot_map_skips_nonzero_and_errors_when_empty() {
        let img = GrayImage::new(3, 1, vec![0, 9, 0]).unwrap();
        let roi = RoiRect::new(0, 0, 1, 1).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::One).unwrap();
        assert_eq!(sm.pixels(), &[2]);

        let full = GrayImage::filled(4, 4, 5).unwrap();
        assert_eq!(
            build_slot_map(&full, roi, LsbDepth::One),
            Err(Error::EmptyRegion)
        );
        let bad_roi = RoiRect::new(0, 0, 5, 1).unwrap();
        assert!(build_slot_map(&img, bad_roi, LsbDepth::One).is_err());
    }

    #[test]
    fn fig8_grid() {
        let key = EmbedKey::new(37).unwrap();
        let got: Vec<usize> = (1..=20).map(|x| map_bit(x, key, 100).unwrap()).collect();
        assert_eq!(
            got,
            vec![37, 74, 11, 48, 85, 22, 59, 96, 33, 70, 7, 44, 81, 18, 55, 92, 29, 66, 3, 40]
        );
        assert_eq!(map_bit(19, key, 100).unwrap(), 3);
        assert_eq!(map_bit(20, key, 100).unwrap(), 40);
        assert_eq!(map_bit(1, EmbedKey::KEYLESS, 20).unwrap(), 1);
    }

    #[test]
    fn key_validation() {
        assert!(EmbedKey::new(0).is_err());
        let five = EmbedKey::new(5).unwrap();
        assert_eq!(
            map_bit(1, five, 10),
            Err(Error::KeyRejected { k: 5, n: 10, gcd: 5 })
        );
        // composite but coprime is fine
        assert!(map_bit(1, EmbedKey::new(9).unwrap(), 10).is_ok());
        assert!(map_bit(3, EmbedKey::new(u64::MAX).unwrap(), 7).is_ok());
    }

    #[test]
    fn bijection_brute_force() {
        for n in 1..=300usize {
            for k in 1..=(n as u64 + 3) {
                let key = EmbedKey::new(k).unwrap();
                if gcd(k, n as u64) != 1 {
                    assert!(map_bit(1, key, n).is_err());
                    continue;
                }
                let mut seen = vec![false; n];
                for x in 1..=n {
                    let s = map_bit(x, key, n).unwrap();
                    assert!(!seen[s], "n={n} k={k} collides at {s}");
                    seen[s] = true;
                }
            }
        }
    }

    #[test]
    fn capacity_examples() {
        // 100 zero RONI pixels: 10x11 image with a 10x1 ROI row
        let img = zeros(10, 11);
        let roi = RoiRect::new(0, 0, 10, 1).unwrap();
        assert_eq!(capacity(&build_slot_map(&img, roi, LsbDepth::One).unwrap()), 100);
        assert_eq!(capacity(&build_slot_map(&img, roi, LsbDepth::Two).unwrap()), 200);
        // 5x4 embedding region beside a 1-pixel-wide ROI column
        let img = zeros(6, 4);
        let roi = RoiRect::new(5, 0, 6, 4).unwrap();
        assert_eq!(capacity(&build_slot_map(&img, roi, LsbDepth::One).unwrap()), 20);
    }

    #[test]
    fn all_zero_payload_is_identity() {
        let img = zeros(8, 8);
        let roi = RoiRect::new(2, 2, 6, 6).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::One).unwrap();
        let p = Payload::new(vec![false; 40]).unwrap();
        assert_eq!(embed(&img, &sm, EmbedKey::new(7).unwrap(), &p).unwrap(), img);
        let got = extract(&img, &sm, EmbedKey::new(7).unwrap(), 40).unwrap();
        assert_eq!(got.ones(), 0);
    }

    #[test]
    fn full_ones_payload_mse() {
        let img = zeros(8, 8);
        let roi = RoiRect::new(2, 2, 6, 6).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::One).unwrap();
        let n = sm.len();
        assert_eq!(n, 48);
        let out = embed(&img, &sm, EmbedKey::new(5).unwrap(), &Payload::new(vec![true; n]).unwrap())
            .unwrap();
        for (i, &v) in out.pixels().iter().enumerate() {
            let inside = roi.contains(i % 8, i / 8);
            assert_eq!(v, if inside { 0 } else { 1 });
        }
        let mse = crate::pixel::mse(&img, &out).unwrap();
        assert_eq!(mse, n as f64 / 64.0);
    }

    #[test]
    fn embed_errors() {
        let img = zeros(4, 4);
        let roi = RoiRect::new(0, 0, 2, 4).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::One).unwrap();
        let too_big = Payload::new(vec![true; 9]).unwrap();
        assert!(matches!(
            embed(&img, &sm, EmbedKey::KEYLESS, &too_big),
            Err(Error::PayloadTooLarge { bits: 9, capacity: 8 })
        ));
        let p = Payload::new(vec![true; 4]).unwrap();
        assert!(matches!(
            embed(&img, &sm, EmbedKey::new(4).unwrap(), &p),
            Err(Error::KeyRejected { .. })
        ));
        let other = zeros(5, 4);
        assert!(matches!(
            embed(&other, &sm, EmbedKey::KEYLESS, &p),
            Err(Error::SlotMismatch(_))
        ));
        let dirty = img.with_pixel(3, 0, 9).unwrap();
        assert!(matches!(
            embed(&dirty, &sm, EmbedKey::KEYLESS, &p),
            Err(Error::SlotMismatch(_))
        ));
        assert!(Payload::new(vec![]).is_err());
    }

    #[test]
    fn flip_restore_touches_only_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let px: Vec<u8> = (0..16 * 16)
            .map(|_| if rng.gen_bool(0.6) { 0 } else { rng.gen_range(4..=255) })
            .collect();
        let img = GrayImage::new(16, 16, px).unwrap();
        let roi = RoiRect::new(4, 4, 12, 12).unwrap();
        let sm = build_slot_map(&img, roi, LsbDepth::Two).unwrap();
        assert_eq!(flip_restore(&img, &sm).unwrap(), img);

        let bits: Vec<bool> = (0..sm.len()).map(|_| rng.gen()).collect();
        let marked = embed(&img, &sm, EmbedKey::KEYLESS, &Payload::new(bits).unwrap()).unwrap();
        let restored = flip_restore(&marked, &sm).unwrap();
        assert_eq!(restored, img);
        let slot_pixels: std::collections::HashSet<usize> = sm.pixels().iter().copied().collect();
        for i in 0..img.len() {
            if marked.pixels()[i] != restored.pixels()[i] {
                assert!(slot_pixels.contains(&i));
            }
        }
        let k = EmbedKey::KEYLESS;
        assert_eq!(clear_payload_slots(&marked, &sm, k, sm.len()).unwrap(), img);
        let partial = clear_payload_slots(&marked, &sm, k, 10).unwrap();
        assert_eq!(extract(&partial, &sm, k, 10).unwrap().ones(), 0);
        // receiver recovers the same slots from the marked image
        assert_eq!(recover_slot_map(&marked, roi, LsbDepth::Two).unwrap(), sm);
    }

    #[test]
    fn clean_check() {
        let img = GrayImage::new(4, 1, vec![0, 1, 4, 0]).unwrap();
        let roi = RoiRect::new(3, 0, 4, 1).unwrap();
        assert_eq!(
            check_clean(&img, roi, LsbDepth::One),
            Err(Error::RoniNotClean { count: 1, limit: 2 })
        );
        let img = GrayImage::new(4, 1, vec![0, 2, 4, 1]).unwrap();
        assert!(check_clean(&img, roi, LsbDepth::One).is_ok());
        assert!(check_clean(&img, roi, LsbDepth::Two).is_err());
        let img = GrayImage::new(4, 1, vec![0, 5, 4, 1]).unwrap();
        assert!(check_clean(&img, roi, LsbDepth::Two).is_ok());
    }

    #[test]
    fn round_trip_many_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut wrong_key_misses = 0;
        for _ in 0..1000 {
            let w = rng.gen_range(4..24);
            let h = rng.gen_range(4..24);
            let img = zeros(w, h);
            let x0 = rng.gen_range(0..w - 1);
            let y0 = rng.gen_range(0..h - 1);
            let roi = RoiRect::new(x0, y0, rng.gen_range(x0 + 1..=w), rng.gen_range(y0 + 1..=h))
                .unwrap();
            let depth = if rng.gen() { LsbDepth::One } else { LsbDepth::Two };
            let Ok(sm) = build_slot_map(&img, roi, depth) else { continue };
            let n = sm.len();
            let key = loop {
                let k = rng.gen_range(1..1000u64);
                if gcd(k, n as u64) == 1 {
                    break EmbedKey::new(k).unwrap();
                }
            };
            let hbits = rng.gen_range(1..=n);
            let bits: Vec<bool> = (0..hbits).map(|_| rng.gen()).collect();
            let p = Payload::new(bits).unwrap();
            let marked = embed(&img, &sm, key, &p).unwrap();
            assert_eq!(extract(&marked, &sm, key, hbits).unwrap(), p);
            assert_eq!(flip_restore(&marked, &sm).unwrap(), img);
            if hbits >= 32 {
                let wrong = loop {
                    let k = rng.gen_range(1..1000u64);
                    if gcd(k, n as u64) == 1 && k % n as u64 != key.value() % n as u64 {
                        break EmbedKey::new(k).unwrap();
                    }
                };
                if extract(&marked, &sm, wrong, hbits).unwrap() == p {
                    wrong_key_misses += 1;
                }
            }
        }
        assert_eq!(wrong_key_misses, 0);
    }

    proptest! {
        #[test]
        fn embed_is_deterministic_and_local(
            seed in any::<u64>(),
            k in 1u64..500,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let px: Vec<u8> = (0..20 * 12)
                .map(|_| if rng.gen_bool(0.7) { 0 } else { rng.gen_range(4..=255) })
                .collect();
            let img = GrayImage::new(20, 12, px).unwrap();
            let roi = RoiRect::new(5, 3, 15, 9).unwrap();
            let sm = build_slot_map(&img, roi, LsbDepth::Two).unwrap();
            let key = EmbedKey::new(k).unwrap();
            prop_assume!(key.check(sm.len()).is_ok());
            let bits: Vec<bool> = (0..sm.len() / 2).map(|_| rng.gen()).collect();
            let p = Payload::new(bits).unwrap();
            let a = embed(&img, &sm, key, &p).unwrap();
            let b = embed(&img, &sm, key, &p).unwrap();
            prop_assert_eq!(&a, &b);
            for i in 0..img.len() {
                if a.pixels()[i] != img.pixels()[i] {
                    prop_assert!(sm.pixels().contains(&i));
                    prop_assert!(a.pixels()[i] < 4);
                }
            }
        }
    }
}
