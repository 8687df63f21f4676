//! Run-length encoding of the TYPE column.

use super::meta::{read_varint, write_varint, Cursor};
use super::Encoding;
use crate::error::{Error, Result};
use crate::geometry::GeometryType;

/// A maximal run of identical type codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeRun {
    pub count: u64,
    pub value: GeometryType,
}

pub fn rle_encode_types(codes: &[GeometryType]) -> Vec<TypeRun> {
    let mut runs: Vec<TypeRun> = Vec::new();
    for &code in codes {
        match runs.last_mut() {
            Some(run) if run.value == code => run.count += 1,
            _ => runs.push(TypeRun { count: 1, value: code }),
        }
    }
    runs
}

pub fn rle_decode_types(runs: &[TypeRun], count: usize) -> Result<Vec<GeometryType>> {
    let total = runs.iter().fold(0u64, |acc, r| acc.saturating_add(r.count));
    if total != count as u64 {
        return Err(Error::corruption(format!("type runs cover {total} records, expected {count}")));
    }
    let mut out = Vec::with_capacity(count);
    for run in runs {
        if run.count == 0 {
            return Err(Error::corruption("zero-length type run"));
        }
        out.extend(std::iter::repeat_n(run.value, run.count as usize));
    }
    Ok(out)
}

/// `[flag][varint run count][(varint count, u8 code)...]`
pub(crate) fn encode_type_page(runs: &[TypeRun]) -> Vec<u8> {
    let mut out = vec![Encoding::Rle as u8];
    write_varint(&mut out, runs.len() as u64);
    for run in runs {
        write_varint(&mut out, run.count);
        out.push(run.value.code());
    }
    out
}

pub(crate) fn decode_type_page(bytes: &[u8], count: usize) -> Result<Vec<GeometryType>> {
    let mut c = Cursor::new(bytes);
    let flag = c.u8()?;
    if flag != Encoding::Rle as u8 {
        return Err(Error::format(format!("TYPE page has encoding flag {flag}")));
    }
    let n = read_varint(&mut c)?;
    let mut runs = Vec::new();
    for _ in 0..n {
        let count = read_varint(&mut c)?;
        let value = GeometryType::from_code(c.u8()?)?;
        runs.push(TypeRun { count, value });
    }
    if !c.is_empty() {
        return Err(Error::corruption("trailing bytes in TYPE page"));
    }
    rle_decode_types(&runs, count)
}
