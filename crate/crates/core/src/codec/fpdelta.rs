//! FP-delta: lossless delta coding of `f64` sequences.
//!
//! Each value is reinterpreted as a two's-complement `i64`; consecutive
//! differences are zigzag-folded and bit-packed at a single width `n`. A
//! difference that does not fit (or that equals the all-ones `n`-bit reset
//! marker) is written as the marker followed by the full 64-bit value.
//!
//! Stream layout: `[n: 8 bits][first value: 64 bits][body]`.

use super::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

pub const MIN_WIDTH: u32 = 1;
pub const MAX_WIDTH: u32 = 64;

pub fn zigzag_encode(delta: i64) -> u64 {
    ((delta >> 63) ^ (delta << 1)) as u64
}

pub fn zigzag_decode(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

pub fn significant_bits(z: u64) -> u32 {
    64 - z.leading_zeros()
}

#[inline]
fn fp_delta(prev: f64, next: f64) -> i64 {
    (next.to_bits() as i64).wrapping_sub(prev.to_bits() as i64)
}

/// All-ones pattern of `width` bits.
pub fn reset_marker(width: u32) -> u64 {
    u64::MAX >> (64 - width)
}

/// Zigzag deltas of a value sequence.
pub fn zigzag_deltas(values: &[f64]) -> impl Iterator<Item = u64> + '_ {
    values.windows(2).map(|w| zigzag_encode(fp_delta(w[0], w[1])))
}

/// Counts of zigzag deltas by exact significant-bit width.
///
/// `collisions[n]` counts deltas equal to the `n`-bit reset marker; those fit in
/// `n` bits but still have to be escaped at width `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaHistogram {
    pub bins: [u64; 65],
    pub collisions: [u64; 65],
    /// Number of values the deltas were taken over.
    pub value_count: u64,
}

impl DeltaHistogram {
    pub fn new() -> Self {
        DeltaHistogram { bins: [0; 65], collisions: [0; 65], value_count: 0 }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut h = Self::new();
        h.value_count = values.len() as u64;
        for z in zigzag_deltas(values) {
            h.add_zigzag(z);
        }
        h
    }

    pub fn add_zigzag(&mut self, z: u64) {
        let n = significant_bits(z) as usize;
        self.bins[n] += 1;
        if n > 0 && z == reset_marker(n as u32) {
            self.collisions[n] += 1;
        }
    }

    pub fn delta_count(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// `suffix[n]` = number of deltas needing at least `n` bits.
    pub fn suffix_sums(&self) -> [u64; 65] {
        let mut s = self.bins;
        for n in (0..64).rev() {
            s[n] += s[n + 1];
        }
        s
    }

    pub fn merge(&mut self, other: &DeltaHistogram) {
        for n in 0..65 {
            self.bins[n] += other.bins[n];
            self.collisions[n] += other.collisions[n];
        }
        self.value_count += other.value_count;
    }

    /// Mean significant bits per delta.
    pub fn mean_bits(&self) -> f64 {
        let total = self.delta_count();
        if total == 0 {
            return 0.0;
        }
        let weighted: u64 = self.bins.iter().enumerate().map(|(n, &c)| n as u64 * c).sum();
        weighted as f64 / total as f64
    }

    /// Exact body size at width `n`, including marker collisions.
    pub fn exact_body_bits(&self, width: u32) -> u64 {
        estimated_size(width, &self.suffix_sums(), self.value_count) + 64 * self.collisions[width as usize]
    }
}

impl Default for DeltaHistogram {
    fn default() -> Self {
        Self::new()
    }
}

/// Body size in bits at width `n` from a suffix-summed histogram:
/// `n * (count - 1) + 64 * (deltas needing more than n bits)`.
/// Marker collisions are not modelled here.
pub fn estimated_size(width: u32, suffix: &[u64; 65], count: u64) -> u64 {
    debug_assert!((MIN_WIDTH..=MAX_WIDTH).contains(&width));
    let overflow = if width >= 64 { 0 } else { suffix[width as usize + 1] };
    width as u64 * count.saturating_sub(1) + 64 * overflow
}

/// Width minimizing the size estimate alone, ties toward the smaller width.
pub fn estimated_best_width(hist: &DeltaHistogram) -> u32 {
    let suffix = hist.suffix_sums();
    (MIN_WIDTH..=MAX_WIDTH)
        .min_by_key(|&n| (estimated_size(n, &suffix, hist.value_count), n))
        .expect("non-empty range")
}

/// Width minimizing the true encoded body length, ties toward the smaller width.
pub fn best_width(hist: &DeltaHistogram) -> u32 {
    let suffix = hist.suffix_sums();
    (MIN_WIDTH..=MAX_WIDTH)
        .min_by_key(|&n| {
            let bits = estimated_size(n, &suffix, hist.value_count) + 64 * hist.collisions[n as usize];
            (bits, n)
        })
        .expect("non-empty range")
}

pub fn compute_best_delta_bits(values: &[f64]) -> u32 {
    best_width(&DeltaHistogram::from_values(values))
}

/// Outcome of encoding one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeStats {
    pub width: u32,
    /// Bits after the header and first value.
    pub body_bits: u64,
    /// Values written as marker + raw 64 bits.
    pub escapes: u64,
    /// Escapes caused by a delta equal to the marker rather than by overflow.
    pub collisions: u64,
}

impl EncodeStats {
    pub fn total_bits(&self) -> u64 {
        8 + 64 + self.body_bits
    }
}

/// Encodes with an explicit delta width.
pub fn fp_delta_encode_with_width(values: &[f64], width: u32, out: &mut BitWriter) -> EncodeStats {
    assert!((MIN_WIDTH..=MAX_WIDTH).contains(&width), "delta width {width} out of range");
    assert!(!values.is_empty(), "FP-delta needs at least one value");
    let marker = reset_marker(width);
    let overflow_mask = if width == 64 { 0 } else { u64::MAX << width };
    out.write(width as u64, 8);
    out.write(values[0].to_bits(), 64);
    let start = out.bit_len();
    let mut escapes = 0;
    let mut collisions = 0;
    for w in values.windows(2) {
        let z = zigzag_encode(fp_delta(w[0], w[1]));
        if z & overflow_mask != 0 || z == marker {
            if z & overflow_mask == 0 {
                collisions += 1;
            }
            escapes += 1;
            out.write(marker, width);
            out.write(w[1].to_bits(), 64);
        } else {
            out.write(z, width);
        }
    }
    EncodeStats { width, body_bits: out.bit_len() - start, escapes, collisions }
}

/// Encodes at the width that minimizes the output.
pub fn fp_delta_encode(values: &[f64], out: &mut BitWriter) -> EncodeStats {
    let width = if values.len() < 2 { MIN_WIDTH } else { compute_best_delta_bits(values) };
    fp_delta_encode_with_width(values, width, out)
}

pub fn fp_delta_decode(input: &mut BitReader<'_>, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let width = input.read(8)? as u32;
    if !(MIN_WIDTH..=MAX_WIDTH).contains(&width) {
        return Err(Error::format(format!("FP-delta width {width} outside [1, 64]")));
    }
    let marker = reset_marker(width);
    let mut prev = input.read(64)?;
    if (count as u64 - 1) > input.remaining() / width as u64 {
        return Err(Error::corruption(format!("FP-delta stream too short for {count} values")));
    }
    let mut out = Vec::with_capacity(count);
    out.push(f64::from_bits(prev));
    while out.len() < count {
        let z = input.read(width)?;
        let next = if z != marker {
            (prev as i64).wrapping_add(zigzag_decode(z)) as u64
        } else {
            input.read(64)?
        };
        out.push(f64::from_bits(next));
        prev = next;
    }
    Ok(out)
}

/// Whether raw storage is at least as small as FP-delta at `width`.
pub fn should_fallback_raw(values: &[f64], width: u32) -> bool {
    if values.len() < 2 {
        return true;
    }
    let body = DeltaHistogram::from_values(values).exact_body_bits(width);
    8 + 64 + body >= 64 * values.len() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PageEncoding {
    Raw = 0,
    FpDelta = 1,
}

impl PageEncoding {
    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(PageEncoding::Raw),
            1 => Ok(PageEncoding::FpDelta),
            f => Err(Error::format(format!("unknown coordinate page encoding flag {f}"))),
        }
    }
}

/// An encoded coordinate page plus what the encoder decided.
#[derive(Debug, Clone)]
pub struct EncodedPage {
    pub bytes: Vec<u8>,
    pub encoding: PageEncoding,
    pub width: Option<u32>,
}

/// Encodes a page: `[flag][FP-delta stream | raw 64-bit values]`, zero-padded
/// to a byte boundary. An empty sequence yields an empty payload.
pub fn encode_page(values: &[f64], allow_fp_delta: bool) -> EncodedPage {
    if values.is_empty() {
        return EncodedPage { bytes: Vec::new(), encoding: PageEncoding::Raw, width: None };
    }
    let hist = DeltaHistogram::from_values(values);
    let width = best_width(&hist);
    let delta_bits = 8 + 64 + hist.exact_body_bits(width);
    let raw = !allow_fp_delta || values.len() < 2 || delta_bits >= 64 * values.len() as u64;
    let mut w = BitWriter::with_capacity(1 + values.len() * 8);
    if raw {
        w.write(PageEncoding::Raw as u64, 8);
        for v in values {
            w.write(v.to_bits(), 64);
        }
        EncodedPage { bytes: w.finish(), encoding: PageEncoding::Raw, width: None }
    } else {
        w.write(PageEncoding::FpDelta as u64, 8);
        fp_delta_encode_with_width(values, width, &mut w);
        EncodedPage { bytes: w.finish(), encoding: PageEncoding::FpDelta, width: Some(width) }
    }
}

pub fn decode_page(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        if !bytes.is_empty() {
            return Err(Error::corruption("non-empty payload for a zero-value page"));
        }
        return Ok(Vec::new());
    }
    let (&flag, rest) = bytes.split_first().ok_or_else(|| Error::corruption("empty coordinate page"))?;
    match PageEncoding::from_flag(flag)? {
        PageEncoding::Raw => {
            if rest.len() != count * 8 {
                return Err(Error::corruption(format!(
                    "raw page holds {} bytes, expected {}",
                    rest.len(),
                    count * 8
                )));
            }
            Ok(rest
                .chunks_exact(8)
                .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect())
        }
        PageEncoding::FpDelta => {
            let mut r = BitReader::new(rest);
            let values = fp_delta_decode(&mut r, count)?;
            if r.remaining() >= 8 {
                return Err(Error::corruption("trailing bytes after FP-delta stream"));
            }
            Ok(values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    fn round_trip(values: &[f64]) -> Vec<f64> {
        let mut w = BitWriter::new();
        fp_delta_encode(values, &mut w);
        let bytes = w.finish();
        fp_delta_decode(&mut BitReader::new(&bytes), values.len()).unwrap()
    }

    #[test]
    fn zigzag_vectors() {
        assert_eq!(zigzag_encode(0), 0);
        assert_eq!(zigzag_encode(-1), 1);
        assert_eq!(zigzag_encode(1), 2);
        assert_eq!(zigzag_encode(-2), 3);
        assert_eq!(zigzag_decode(1), -1);
        assert_eq!(zigzag_decode(2), 1);
        assert_eq!(zigzag_encode(i64::MIN), u64::MAX);
        assert_eq!(zigzag_encode(i64::MAX), u64::MAX - 1);
    }

    #[test]
    fn significant_bits_vectors() {
        assert_eq!(significant_bits(0), 0);
        assert_eq!(significant_bits(1), 1);
        assert_eq!(significant_bits(1 << 63), 64);
    }

    #[test]
    fn estimated_size_vectors() {
        let h = DeltaHistogram::from_values(&[7.5; 101]);
        assert_eq!(estimated_size(1, &h.suffix_sums(), 101), 100);
        let mut two = DeltaHistogram::new();
        two.value_count = 2;
        two.add_zigzag(1 << 63);
        assert_eq!(estimated_size(1, &two.suffix_sums(), 2), 65);
        assert_eq!(estimated_size(64, &two.suffix_sums(), 2), 64);
    }

    #[test]
    fn constant_sequence_width_one() {
        assert_eq!(compute_best_delta_bits(&[3.25; 101]), 1);
    }

    #[test]
    fn neighbouring_floats_width_two() {
        let next = f64::from_bits(1.0f64.to_bits() + 1);
        // delta 1, zigzag 2, two bits; width 1 would escape it
        assert_eq!(compute_best_delta_bits(&[1.0, next]), 2);
    }

    #[test]
    fn three_ones_layout() {
        let mut w = BitWriter::new();
        let stats = fp_delta_encode(&[1.0, 1.0, 1.0], &mut w);
        assert_eq!(stats.width, 1);
        assert_eq!(w.bit_len(), 8 + 64 + 2);
        let bytes = w.finish();
        assert_eq!(bytes[0], 1);
        assert_eq!(&bytes[1..9], &1.0f64.to_bits().to_le_bytes());
        assert_eq!(bytes[9], 0);
    }

    #[test]
    fn single_value_stream() {
        let mut w = BitWriter::new();
        fp_delta_encode(&[42.0], &mut w);
        assert_eq!(w.bit_len(), 72);
        assert_eq!(bits(&round_trip(&[42.0])), bits(&[42.0]));
    }

    #[test]
    fn special_values_round_trip() {
        let v = [
            0.0,
            -0.0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NAN,
            f64::from_bits(0x7ff0_0000_0000_0001),
            f64::from_bits(0xfff8_dead_beef_0001),
            f64::MIN_POSITIVE / 4.0,
            -f64::MIN_POSITIVE / 3.0,
            f64::MAX,
            f64::MIN,
            1.0,
        ];
        assert_eq!(bits(&round_trip(&v)), bits(&v));
    }

    #[test]
    fn alternating_sign_large_values_reset_everywhere() {
        let v: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1e300 } else { -1e300 }).collect();
        assert_eq!(bits(&round_trip(&v)), bits(&v));
    }

    #[test]
    fn marker_collision_escapes() {
        // delta -1 -> zigzag 1, which is the 1-bit marker
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() - 1);
        let v = [a, b, a, b, a];
        let mut w = BitWriter::new();
        let stats = fp_delta_encode_with_width(&v, 1, &mut w);
        assert_eq!(stats.collisions, 2);
        let h = DeltaHistogram::from_values(&v);
        assert_eq!(stats.body_bits, h.exact_body_bits(1));
        let bytes = w.finish();
        assert_eq!(bits(&fp_delta_decode(&mut BitReader::new(&bytes), v.len()).unwrap()), bits(&v));
    }

    #[test]
    fn integer_delta_example_round_trips() {
        let v = [15.0, 16.0, 15.0, 17.0, 20.0];
        assert_eq!(bits(&round_trip(&v)), bits(&v));
    }

    #[test]
    fn decoder_rejects_bad_width_and_truncation() {
        let bytes = [0u8; 9];
        assert!(matches!(fp_delta_decode(&mut BitReader::new(&bytes), 2), Err(Error::Format(_))));
        let bytes = [65u8; 9];
        assert!(matches!(fp_delta_decode(&mut BitReader::new(&bytes), 2), Err(Error::Format(_))));
        let mut w = BitWriter::new();
        fp_delta_encode(&[1.0, 2.0, 3.0], &mut w);
        let bytes = w.finish();
        assert!(matches!(fp_delta_decode(&mut BitReader::new(&bytes[..9]), 3), Err(Error::Corruption(_))));
    }

    #[test]
    fn fallback_decisions() {
        assert!(should_fallback_raw(&[1.0], 1));
        let equal = vec![2.5; 1000];
        assert!(!should_fallback_raw(&equal, compute_best_delta_bits(&equal)));
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let random: Vec<f64> = (0..1000)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                f64::from_bits(state)
            })
            .collect();
        assert!(should_fallback_raw(&random, compute_best_delta_bits(&random)));
    }

    #[test]
    fn page_flags() {
        assert!(encode_page(&[], true).bytes.is_empty());
        let p = encode_page(&[5.0], true);
        assert_eq!(p.encoding, PageEncoding::Raw);
        assert_eq!(p.bytes.len(), 9);
        let p = encode_page(&[5.0; 10], true);
        assert_eq!(p.encoding, PageEncoding::FpDelta);
        assert_eq!(p.bytes[0], 1);
        assert_eq!(p.bytes.len(), 1 + (8 + 64 + 9usize).div_ceil(8));
        assert_eq!(bits(&decode_page(&p.bytes, 10).unwrap()), bits(&[5.0; 10]));
        let p = encode_page(&[5.0; 10], false);
        assert_eq!(p.encoding, PageEncoding::Raw);
        assert_eq!(bits(&decode_page(&p.bytes, 10).unwrap()), bits(&[5.0; 10]));
        assert!(decode_page(&p.bytes, 9).is_err());
        assert!(decode_page(&[7], 1).is_err());
    }

    proptest! {
        #[test]
        fn zigzag_inverse(d in any::<i64>()) {
            prop_assert_eq!(zigzag_decode(zigzag_encode(d)), d);
        }

        #[test]
        fn lossless_on_arbitrary_bits(raw in prop::collection::vec(any::<u64>(), 1..300)) {
            let v: Vec<f64> = raw.iter().map(|&b| f64::from_bits(b)).collect();
            prop_assert_eq!(bits(&round_trip(&v)), raw);
        }

        #[test]
        fn lossless_on_walks(start in -1e6f64..1e6, steps in prop::collection::vec(-1.0f64..1.0, 1..300)) {
            let mut v = vec![start];
            for s in steps {
                let last = *v.last().unwrap();
                v.push(last + s);
            }
            prop_assert_eq!(bits(&round_trip(&v)), bits(&v));
        }

        #[test]
        fn histogram_conservation(raw in prop::collection::vec(any::<u64>(), 1..200)) {
            let v: Vec<f64> = raw.iter().map(|&b| f64::from_bits(b)).collect();
            let h = DeltaHistogram::from_values(&v);
            prop_assert_eq!(h.delta_count(), v.len() as u64 - 1);
            let s = h.suffix_sums();
            prop_assert_eq!(s[0], v.len() as u64 - 1);
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn body_length_matches_formula(raw in prop::collection::vec(any::<u64>(), 2..200), width in 1u32..=64) {
            let v: Vec<f64> = raw.iter().map(|&b| f64::from_bits(b)).collect();
            let h = DeltaHistogram::from_values(&v);
            let mut w = BitWriter::new();
            let stats = fp_delta_encode_with_width(&v, width, &mut w);
            let expect = estimated_size(width, &h.suffix_sums(), v.len() as u64) + 64 * stats.collisions;
            prop_assert_eq!(stats.body_bits, expect);
        }
    }
}
