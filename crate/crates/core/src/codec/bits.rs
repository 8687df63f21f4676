//! LSB-first bit streams.
//!
//! Bits fill each byte starting at the least significant bit; a multi-bit
//! value is written least significant bit first, so a 64-bit value written at
//! a byte boundary lands as its little-endian bytes.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    buf: Vec<u8>,
    /// Bits used in the last byte of `buf` (0 means the last byte is full or `buf` is empty).
    partial: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        BitWriter { buf: Vec::with_capacity(bytes), partial: 0 }
    }

    /// Appends the `width` least significant bits of `value`.
    pub fn write(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        if width == 0 {
            return;
        }
        let mut v = if width == 64 { value } else { value & ((1u64 << width) - 1) };
        let mut remaining = width;
        if self.partial != 0 {
            let free = 8 - self.partial;
            let take = free.min(remaining);
            let last = self.buf.last_mut().expect("partial byte exists");
            *last |= ((v & ((1u64 << take) - 1)) as u8) << self.partial;
            self.partial = (self.partial + take) % 8;
            v = if take == 64 { 0 } else { v >> take };
            remaining -= take;
        }
        while remaining >= 8 {
            self.buf.push(v as u8);
            v >>= 8;
            remaining -= 8;
        }
        if remaining > 0 {
            self.buf.push((v as u8) & ((1u8 << remaining) - 1));
            self.partial = remaining;
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        if self.partial == 0 {
            self.buf.extend_from_slice(bytes);
        } else {
            bytes.iter().for_each(|&b| self.write(b as u64, 8));
        }
    }

    pub fn bit_len(&self) -> u64 {
        if self.partial == 0 {
            self.buf.len() as u64 * 8
        } else {
            (self.buf.len() as u64 - 1) * 8 + self.partial as u64
        }
    }

    /// Returns the bytes, zero-padded to a byte boundary.
    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    buf: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        BitReader { buf, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.buf.len() as u64 * 8 - self.pos
    }

    /// Reads the next `width` bits, zero-extended.
    pub fn read(&mut self, width: u32) -> Result<u64> {
        debug_assert!(width <= 64);
        if width as u64 > self.remaining() {
            return Err(Error::corruption(format!(
                "bit stream exhausted: wanted {width} bits at bit {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let mut out = 0u64;
        let mut got = 0u32;
        while got < width {
            let byte = self.buf[(self.pos / 8) as usize];
            let offset = (self.pos % 8) as u32;
            let take = (8 - offset).min(width - got);
            let bits = ((byte >> offset) as u64) & ((1u64 << take) - 1);
            out |= bits << got;
            got += take;
            self.pos += take as u64;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lsb_first_layout() {
        let mut w = BitWriter::new();
        w.write(0b1, 1);
        w.write(0b10, 2);
        w.write(0xABCD, 16);
        assert_eq!(w.bit_len(), 19);
        let bytes = w.finish();
        assert_eq!(bytes[0] & 0b111, 0b101);
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read(1).unwrap(), 1);
        assert_eq!(r.read(2).unwrap(), 2);
        assert_eq!(r.read(16).unwrap(), 0xABCD);
        // padding bits are zero
        assert_eq!(r.read(5).unwrap(), 0);
        assert!(r.read(1).is_err());
    }

    #[test]
    fn aligned_u64_is_little_endian() {
        let mut w = BitWriter::new();
        w.write(0x0102_0304_0506_0708, 64);
        assert_eq!(w.finish(), 0x0102_0304_0506_0708u64.to_le_bytes());
    }

    #[test]
    fn masks_high_bits() {
        let mut w = BitWriter::new();
        w.write(u64::MAX, 3);
        w.write(0, 5);
        assert_eq!(w.finish(), vec![0b111]);
    }

    proptest! {
        #[test]
        fn width_sequence_round_trips(items in prop::collection::vec((any::<u64>(), 0u32..=64), 0..200)) {
            let mut w = BitWriter::new();
            for &(v, k) in &items {
                w.write(v, k);
            }
            let total: u64 = items.iter().map(|&(_, k)| k as u64).sum();
            prop_assert_eq!(w.bit_len(), total);
            let bytes = w.finish();
            prop_assert_eq!(bytes.len() as u64, total.div_ceil(8));
            let mut r = BitReader::new(&bytes);
            for &(v, k) in &items {
                let expect = if k == 64 { v } else { v & ((1u64 << k) - 1) };
                prop_assert_eq!(r.read(k).unwrap(), expect);
            }
        }
    }
}
