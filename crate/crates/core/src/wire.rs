//! Byte format for compressed payloads.
//!
//! Every payload starts with the same 20-byte little-endian header:
//!
//! ```text
//! offset size field
//!      0    4 magic "NSC1"
//!      4    1 format tag (0 = low-rank, 1 = top-k, 2 = quantized)
//!      5    1 padding, zero
//!      6    4 m (rows)
//!     10    4 n (cols)
//!     14    4 r (low-rank), k (top-k) or bit width (quantized)
//!     18    2 reserved, zero
//! ```
//!
//! Bodies:
//! - low-rank: `P` (m x r) then `Q` (n x r), f32 row-major, `4 r (m + n)` bytes
//! - top-k: `k` pairs of (u32 flat index, f32 value), indices strictly increasing
//! - quantized: f32 scale, then `m n` codes of `b` bits packed MSB-first,
//!   last byte zero-padded
//!
//! See `docs/wire-format.md` for worked byte dumps.

use crate::error::{Error, Result};
use crate::oasa::LowRankFactors;
use crate::rank::factor_bytes;
use crate::tensor::Mat;

pub const MAGIC: [u8; 4] = *b"NSC1";
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FormatTag {
    LowRank = 0,
    TopK = 1,
    Quant = 2,
}

impl TryFrom<u8> for FormatTag {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(FormatTag::LowRank),
            1 => Ok(FormatTag::TopK),
            2 => Ok(FormatTag::Quant),
            other => Err(Error::BadTag(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub tag: FormatTag,
    pub m: u32,
    pub n: u32,
    pub r_or_k: u32,
}

impl PayloadHeader {
    /// Body length implied by the header alone.
    pub fn body_len(&self) -> Result<usize> {
        let (m, n, x) = (self.m as u128, self.n as u128, self.r_or_k as u128);
        let len = match self.tag {
            FormatTag::LowRank => 4 * x * (m + n),
            FormatTag::TopK => 8 * x,
            FormatTag::Quant => 4 + (m * n * x).div_ceil(8),
        };
        usize::try_from(len).map_err(|_| Error::Malformed("body length overflows usize".into()))
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(self.tag as u8);
        out.push(0);
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.r_or_k.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
    }

    pub fn parse(buf: &[u8]) -> Result<PayloadHeader> {
        if buf.len() < HEADER_LEN {
            return Err(Error::Length {
                expected: HEADER_LEN,
                actual: buf.len(),
            });
        }
        let magic: [u8; 4] = buf[0..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let tag = FormatTag::try_from(buf[4])?;
        if buf[5] != 0 || buf[18] != 0 || buf[19] != 0 {
            return Err(Error::Malformed("non-zero padding or reserved bytes".into()));
        }
        let m = u32_at(buf, 6);
        let n = u32_at(buf, 10);
        if m == 0 || n == 0 {
            return Err(Error::Malformed(format!("empty shape {m}x{n}")));
        }
        Ok(PayloadHeader {
            tag,
            m,
            n,
            r_or_k: u32_at(buf, 14),
        })
    }
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().expect("4 bytes"))
}

fn f32_at(buf: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(buf[at..at + 4].try_into().expect("4 bytes"))
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ShapeOverflow(v))
}

/// Sparse payload: `(flat row-major index, value)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePayload {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, f32)>,
}

impl SparsePayload {
    pub fn to_mat(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        let data = m.as_mut_slice();
        for &(i, v) in &self.entries {
            data[i as usize] = v as f64;
        }
        m
    }
}

/// Uniformly quantized payload with `2^bits - 1` levels spanning `[-scale, scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantPayload {
    pub rows: usize,
    pub cols: usize,
    pub bits: u8,
    pub scale: f32,
    /// Level index per entry, row-major, each `< 2^bits - 1`.
    pub codes: Vec<u8>,
}

impl QuantPayload {
    pub fn levels(bits: u8) -> u32 {
        (1u32 << bits) - 1
    }

    /// Distance between adjacent levels.
    pub fn spacing(&self) -> f64 {
        2.0 * self.scale as f64 / (Self::levels(self.bits) - 1) as f64
    }

    pub fn level_value(&self, code: u8) -> f64 {
        -(self.scale as f64) + code as f64 * self.spacing()
    }

    pub fn to_mat(&self) -> Mat {
        let data = self.codes.iter().map(|&c| self.level_value(c)).collect();
        Mat::from_vec(self.rows, self.cols, data).expect("finite levels")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    LowRank(LowRankFactors),
    TopK(SparsePayload),
    Quant(QuantPayload),
}

impl Payload {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Payload::LowRank(f) => f.shape(),
            Payload::TopK(s) => (s.rows, s.cols),
            Payload::Quant(q) => (q.rows, q.cols),
        }
    }

    /// Reconstructs the dense matrix the payload stands for.
    pub fn to_mat(&self) -> Mat {
        match self {
            Payload::LowRank(f) => crate::oasa::decompress(f),
            Payload::TopK(s) => s.to_mat(),
            Payload::Quant(q) => q.to_mat(),
        }
    }

    pub fn tag(&self) -> FormatTag {
        match self {
            Payload::LowRank(_) => FormatTag::LowRank,
            Payload::TopK(_) => FormatTag::TopK,
            Payload::Quant(_) => FormatTag::Quant,
        }
    }
}

pub fn encode(payload: &Payload) -> Result<Vec<u8>> {
    let (m, n) = payload.shape();
    let (m32, n32) = (to_u32(m)?, to_u32(n)?);
    let header = |r_or_k| PayloadHeader {
        tag: payload.tag(),
        m: m32,
        n: n32,
        r_or_k,
    };
    match payload {
        Payload::LowRank(f) => {
            let r = f.rank();
            let h = header(to_u32(r)?);
            let mut out = Vec::with_capacity(HEADER_LEN + factor_bytes(m, n, r));
            h.write(&mut out);
            for v in f.p.as_slice().iter().chain(f.q.as_slice()) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
            debug_assert_eq!(out.len() - HEADER_LEN, factor_bytes(m, n, r));
            Ok(out)
        }
        Payload::TopK(s) => {
            let h = header(to_u32(s.entries.len())?);
            let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.entries.len());
            h.write(&mut out);
            for (i, v) in &s.entries {
                out.extend_from_slice(&i.to_le_bytes());
                out.extend_from_slice(&v.to_le_bytes());
            }
            Ok(out)
        }
        Payload::Quant(q) => {
            if !(2..=8).contains(&q.bits) {
                return Err(Error::Malformed(format!("bit width {} outside 2..=8", q.bits)));
            }
            let h = header(q.bits as u32);
            let mut out = Vec::with_capacity(HEADER_LEN + h.body_len()?);
            h.write(&mut out);
            out.extend_from_slice(&q.scale.to_le_bytes());
            out.extend_from_slice(&pack_codes(&q.codes, q.bits));
            Ok(out)
        }
    }
}

pub fn decode(buf: &[u8]) -> Result<Payload> {
    let h = PayloadHeader::parse(buf)?;
    let expected = HEADER_LEN + h.body_len()?;
    if buf.len() != expected {
        return Err(Error::Length {
            expected,
            actual: buf.len(),
        });
    }
    let body = &buf[HEADER_LEN..];
    let (m, n) = (h.m as usize, h.n as usize);
    match h.tag {
        FormatTag::LowRank => {
            let r = h.r_or_k as usize;
            if r == 0 {
                return Err(Error::Malformed("rank 0".into()));
            }
            let read = |offset: usize, rows: usize| -> Result<Mat> {
                let data: Vec<f64> = (0..rows * r).map(|i| f32_at(body, offset + 4 * i) as f64).collect();
                Mat::from_vec(rows, r, data).map_err(|e| Error::Malformed(e.to_string()))
            };
            let p = read(0, m)?;
            let q = read(4 * m * r, n)?;
            Ok(Payload::LowRank(LowRankFactors::new(p, q)?))
        }
        FormatTag::TopK => {
            let k = h.r_or_k as usize;
            let total = m as u64 * n as u64;
            let mut entries = Vec::with_capacity(k);
            for e in 0..k {
                let idx = u32_at(body, 8 * e);
                let val = f32_at(body, 8 * e + 4);
                if idx as u64 >= total {
                    return Err(Error::Malformed(format!("index {idx} out of range")));
                }
                if entries.last().is_some_and(|&(prev, _)| prev >= idx) {
                    return Err(Error::Malformed("indices not strictly increasing".into()));
                }
                if !val.is_finite() {
                    return Err(Error::Malformed(format!("non-finite value at index {idx}")));
                }
                entries.push((idx, val));
            }
            Ok(Payload::TopK(SparsePayload {
                rows: m,
                cols: n,
                entries,
            }))
        }
        FormatTag::Quant => {
            let bits = h.r_or_k;
            if !(2..=8).contains(&bits) {
                return Err(Error::Malformed(format!("bit width {bits} outside 2..=8")));
            }
            let bits = bits as u8;
            let scale = f32_at(body, 0);
            if !scale.is_finite() || scale < 0.0 {
                return Err(Error::Malformed(format!("bad scale {scale}")));
            }
            let codes = unpack_codes(&body[4..], bits, m * n)?;
            let levels = QuantPayload::levels(bits);
            if let Some(c) = codes.iter().find(|&&c| c as u32 >= levels) {
                return Err(Error::Malformed(format!("code {c} exceeds {levels} levels")));
            }
            Ok(Payload::Quant(QuantPayload {
                rows: m,
                cols: n,
                bits,
                scale,
                codes,
            }))
        }
    }
}

/// Packs `bits`-wide codes MSB-first; the final byte is zero-padded.
pub fn pack_codes(codes: &[u8], bits: u8) -> Vec<u8> {
    let mut out = vec![0u8; (codes.len() * bits as usize).div_ceil(8)];
    let mut pos = 0usize;
    for &c in codes {
        for b in (0..bits).rev() {
            if (c >> b) & 1 == 1 {
                out[pos / 8] |= 0x80 >> (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

fn unpack_codes(packed: &[u8], bits: u8, count: usize) -> Result<Vec<u8>> {
    let mut codes = Vec::with_capacity(count);
    let mut pos = 0usize;
    for _ in 0..count {
        let mut c = 0u8;
        for _ in 0..bits {
            let bit = (packed[pos / 8] >> (7 - pos % 8)) & 1;
            c = (c << 1) | bit;
            pos += 1;
        }
        codes.push(c);
    }
    while pos < packed.len() * 8 {
        if (packed[pos / 8] >> (7 - pos % 8)) & 1 == 1 {
            return Err(Error::Malformed("non-zero padding bits".into()));
        }
        pos += 1;
    }
    Ok(codes)
}

/// Deterministic payloads behind the checked-in golden files.
pub fn golden_payloads() -> Vec<(&'static str, Payload)> {
    let p = Mat::from_rows(&[[1.0, -0.5], [0.25, 2.0], [-3.0, 0.125]]);
    let q = Mat::from_rows(&[[0.6, 0.8], [0.8, -0.6]]);
    let lowrank = Payload::LowRank(LowRankFactors::new(p, q).expect("matching ranks"));
    let topk = Payload::TopK(SparsePayload {
        rows: 2,
        cols: 3,
        entries: vec![(0, 5.0), (1, -7.0), (5, 0.5)],
    });
    let quant = Payload::Quant(QuantPayload {
        rows: 2,
        cols: 3,
        bits: 3,
        scale: 1.5,
        codes: vec![0, 3, 6, 1, 5, 2],
    });
    vec![
        ("lowrank_3x2_r2.bin", lowrank),
        ("topk_2x3_k3.bin", topk),
        ("quant_2x3_b3.bin", quant),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gaussian, RngSeed};

    fn lowrank(m: usize, n: usize, r: usize) -> Payload {
        Payload::LowRank(LowRankFactors::new(gaussian(m, r, RngSeed(1)), gaussian(n, r, RngSeed(2))).unwrap())
    }

    #[test]
    fn lowrank_sizes() {
        let bytes = encode(&lowrank(128, 64, 8)).unwrap();
        assert_eq!(bytes.len() - HEADER_LEN, 6144);
        assert_eq!(bytes.len(), 6164);
    }

    #[test]
    fn round_trip_is_bit_stable() {
        let bytes = encode(&lowrank(7, 5, 3)).unwrap();
        let decoded = decode(&bytes).unwrap();
        assert_eq!(encode(&decoded).unwrap(), bytes);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode(&lowrank(3, 3, 1)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic(_))));
    }

    #[test]
    fn bad_tag_is_rejected() {
        let mut bytes = encode(&lowrank(3, 3, 1)).unwrap();
        bytes[4] = 9;
        assert_eq!(decode(&bytes).unwrap_err(), Error::BadTag(9));
    }

    #[test]
    fn truncated_buffer_reports_lengths() {
        let bytes = encode(&lowrank(3, 2, 1)).unwrap();
        assert_eq!(
            decode(&bytes[..bytes.len() - 1]).unwrap_err(),
            Error::Length {
                expected: 40,
                actual: 39
            }
        );
        assert_eq!(
            decode(&bytes[..10]).unwrap_err(),
            Error::Length {
                expected: 20,
                actual: 10
            }
        );
    }

    #[test]
    fn packing_is_msb_first() {
        assert_eq!(pack_codes(&[0b101, 0b011], 3), vec![0b1010_1100]);
        assert_eq!(unpack_codes(&[0b1010_1100], 3, 2).unwrap(), vec![5, 3]);
        assert!(unpack_codes(&[0b1010_1101], 3, 2).is_err());
    }

    #[test]
    fn topk_rejects_unsorted_indices() {
        let mut bytes = encode(&Payload::TopK(SparsePayload {
            rows: 2,
            cols: 2,
            entries: vec![(1, 1.0), (2, 2.0)],
        }))
        .unwrap();
        bytes[HEADER_LEN + 8..HEADER_LEN + 12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Malformed(_))));
    }

    #[test]
    fn quant_levels() {
        let q = QuantPayload {
            rows: 1,
            cols: 3,
            bits: 2,
            scale: 2.0,
            codes: vec![0, 1, 2],
        };
        assert_eq!(q.to_mat().as_slice(), &[-2.0, 0.0, 2.0]);
        let bytes = encode(&Payload::Quant(q.clone())).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 + 1);
        assert_eq!(decode(&bytes).unwrap(), Payload::Quant(q));
    }
}
