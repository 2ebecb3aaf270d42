//! Element types understood by the checkpoint container and their conversion
//! to and from `f32`, which is the type all merge arithmetic runs in.

use std::fmt;
use std::str::FromStr;

use half::{bf16, f16};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dtype {
    F32,
    F16,
    BF16,
}

impl Dtype {
    pub const ALL: [Dtype; 3] = [Dtype::F32, Dtype::F16, Dtype::BF16];

    /// Width of one element in bytes.
    pub const fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F16 | Dtype::BF16 => 2,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "F32",
            Dtype::F16 => "F16",
            Dtype::BF16 => "BF16",
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownDtype(pub String);

impl fmt::Display for UnknownDtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown dtype tag `{}`", self.0)
    }
}

impl std::error::Error for UnknownDtype {}

impl FromStr for Dtype {
    type Err = UnknownDtype;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "F32" => Ok(Dtype::F32),
            "F16" => Ok(Dtype::F16),
            "BF16" => Ok(Dtype::BF16),
            other => Err(UnknownDtype(other.to_string())),
        }
    }
}

/// Decodes little-endian elements of `dtype` from `bytes` into `out`.
///
/// `bytes.len()` must equal `out.len() * dtype.size()`.
pub fn decode_into(dtype: Dtype, bytes: &[u8], out: &mut [f32]) {
    assert_eq!(bytes.len(), out.len() * dtype.size(), "decode length mismatch");
    match dtype {
        Dtype::F32 => {
            for (dst, src) in out.iter_mut().zip(bytes.chunks_exact(4)) {
                *dst = f32::from_le_bytes([src[0], src[1], src[2], src[3]]);
            }
        }
        Dtype::F16 => {
            for (dst, src) in out.iter_mut().zip(bytes.chunks_exact(2)) {
                *dst = f16::from_bits(u16::from_le_bytes([src[0], src[1]])).to_f32();
            }
        }
        Dtype::BF16 => {
            // bf16 is the upper half of an f32 bit pattern
            for (dst, src) in out.iter_mut().zip(bytes.chunks_exact(2)) {
                let bits = u16::from_le_bytes([src[0], src[1]]) as u32;
                *dst = f32::from_bits(bits << 16);
            }
        }
    }
}

/// Appends the little-endian encoding of `values` as `dtype` to `out`.
///
/// Narrowing conversions round to nearest, ties to even; values beyond the
/// target range become infinities.
pub fn encode_into(values: &[f32], dtype: Dtype, out: &mut Vec<u8>) {
    out.reserve(values.len() * dtype.size());
    match dtype {
        Dtype::F32 => {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F16 => {
            for v in values {
                out.extend_from_slice(&f16::from_f32(*v).to_bits().to_le_bytes());
            }
        }
        Dtype::BF16 => {
            for v in values {
                out.extend_from_slice(&bf16::from_f32(*v).to_bits().to_le_bytes());
            }
        }
    }
}

pub fn f32_to_dtype(values: &[f32], dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.size());
    encode_into(values, dtype, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(dtype: Dtype, bytes: &[u8]) -> Vec<f32> {
        let mut out = vec![0.0; bytes.len() / dtype.size()];
        decode_into(dtype, bytes, &mut out);
        out
    }

    #[test]
    fn widths() {
        assert_eq!(Dtype::F32.size(), 4);
        assert_eq!(Dtype::F16.size(), 2);
        assert_eq!(Dtype::BF16.size(), 2);
    }

    #[test]
    fn parse_tags() {
        for d in Dtype::ALL {
            assert_eq!(d.as_str().parse::<Dtype>().unwrap(), d);
        }
        assert!("F64".parse::<Dtype>().is_err());
        assert!("f32".parse::<Dtype>().is_err());
    }

    #[test]
    fn known_bit_patterns() {
        assert_eq!(decode(Dtype::F16, &0x3C00u16.to_le_bytes()), vec![1.0]);
        assert_eq!(decode(Dtype::BF16, &0x3F80u16.to_le_bytes()), vec![1.0]);
        assert_eq!(decode(Dtype::BF16, &0xC000u16.to_le_bytes()), vec![-2.0]);
        assert_eq!(f32_to_dtype(&[1.0], Dtype::F16), 0x3C00u16.to_le_bytes());
        assert_eq!(f32_to_dtype(&[1.0], Dtype::BF16), 0x3F80u16.to_le_bytes());
    }

    #[test]
    fn overflow_saturates() {
        let h = decode(Dtype::F16, &f32_to_dtype(&[1.0e6, -1.0e6], Dtype::F16));
        assert_eq!(h, vec![f32::INFINITY, f32::NEG_INFINITY]);
        let b = decode(Dtype::BF16, &f32_to_dtype(&[f32::MAX], Dtype::BF16));
        assert_eq!(b, vec![f32::INFINITY]);
    }

    #[test]
    fn f32_is_exact() {
        let vals = [0.0, -0.0, 1.5, f32::MIN_POSITIVE, f32::MAX, -3.25e-12];
        let bytes = f32_to_dtype(&vals, Dtype::F32);
        let back = decode(Dtype::F32, &bytes);
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
