//! Bit-level coding primitives.

pub mod bits;
pub mod fpdelta;

pub use bits::{BitReader, BitWriter};
pub use fpdelta::{
    best_width, compute_best_delta_bits, decode_page, encode_page, estimated_best_width, estimated_size,
    fp_delta_decode, fp_delta_encode, fp_delta_encode_with_width, reset_marker, should_fallback_raw, significant_bits,
    zigzag_decode, zigzag_encode, DeltaHistogram, EncodeStats, EncodedPage, PageEncoding,
};
