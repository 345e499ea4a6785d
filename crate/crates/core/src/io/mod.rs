//! Binary containers and 8-bit image files.
//!
//! * `CSCT` tensor: magic `CSCT`, version byte `1`, little-endian `u32`
//!   height, width, channels, then `h·w·c` little-endian `f32` values in
//!   row-major channel-last order.
//! * `CSCD` dictionary: magic `CSCD`, version byte `1`, little-endian `u32`
//!   m, n, c, s, p, then `m·n·n·c` little-endian `f32` (atoms back to back).
//! * Binary PGM (`P5`) and PPM (`P6`) with maxval 255.
//!
//! Neither container allows padding or trailing bytes.

mod pnm;

pub use pnm::{decode_pnm, encode_pnm, quantize};

use crate::dictionary::ConvDictionary;
use crate::error::{CscError, Result};
use crate::tensor::Tensor3;

pub const CSCT_MAGIC: &[u8; 4] = b"CSCT";
pub const CSCD_MAGIC: &[u8; 4] = b"CSCD";
pub const CONTAINER_VERSION: u8 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CscError::format(self.pos, format!("truncated {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4, "magic")? != magic {
            return Err(CscError::format(0, format!(
                "expected magic {}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.take(1, "version")?[0];
        if version != CONTAINER_VERSION {
            return Err(CscError::format(4, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f32>> {
        let start = self.pos;
        let bytes = self.take(
            count
                .checked_mul(4)
                .ok_or_else(|| CscError::format(start, "payload size overflows"))?,
            "payload",
        )?;
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CscError::format(start + 4 * i, "non-finite value"));
        }
        Ok(values)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(CscError::format(self.pos, "trailing bytes"));
        }
        Ok(())
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_csct(t: &Tensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + 4 * t.len());
    out.extend_from_slice(CSCT_MAGIC);
    out.push(CONTAINER_VERSION);
    push_u32(&mut out, t.height());
    push_u32(&mut out, t.width());
    push_u32(&mut out, t.channels());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_csct(bytes: &[u8]) -> Result<Tensor3> {
    let mut r = Reader::new(bytes);
    r.header(CSCT_MAGIC)?;
    let h = r.u32("height")?;
    let w = r.u32("width")?;
    let c = r.u32("channels")?;
    if h == 0 || w == 0 || c == 0 {
        return Err(CscError::format(5, "zero dimension"));
    }
    let count = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| CscError::format(5, "dimensions overflow"))?;
    let data = r.floats(count)?;
    r.finish()?;
    Tensor3::from_vec(h, w, c, data)
}

pub fn encode_cscd(d: &ConvDictionary) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + 4 * d.atoms().len());
    out.extend_from_slice(CSCD_MAGIC);
    out.push(CONTAINER_VERSION);
    for v in [
        d.atom_count(),
        d.atom_size(),
        d.channels(),
        d.stride(),
        d.padding(),
    ] {
        push_u32(&mut out, v);
    }
    for v in d.atoms() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cscd(bytes: &[u8]) -> Result<ConvDictionary> {
    let mut r = Reader::new(bytes);
    r.header(CSCD_MAGIC)?;
    let m = r.u32("atom count")?;
    let n = r.u32("atom size")?;
    let c = r.u32("channels")?;
    let s = r.u32("stride")?;
    let p = r.u32("padding")?;
    let count = m
        .checked_mul(n)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| CscError::format(5, "dimensions overflow"))?;
    let atoms = r.floats(count)?;
    r.finish()?;
    ConvDictionary::new(m, n, c, s, p, atoms).map_err(|e| CscError::format(5, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    #[test]
    fn csct_layout_is_bit_exact() {
        let t = Tensor3::from_vec(1, 2, 1, vec![1.0, -2.5]).unwrap();
        let bytes = encode_csct(&t);
        let mut expected = b"CSCT\x01".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn cscd_layout_is_bit_exact() {
        let d = ConvDictionary::new(1, 1, 2, 3, 0, vec![0.5, 0.25]).unwrap();
        let bytes = encode_cscd(&d);
        assert_eq!(&bytes[..5], b"CSCD\x01");
        assert_eq!(&bytes[5..25], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(bytes.len(), 25 + 8);
        assert_eq!(decode_cscd(&bytes).unwrap(), d);
    }

    #[test]
    fn malformed_containers_report_offsets() {
        let t = Tensor3::zeros(2, 2, 1).unwrap();
        let good = encode_csct(&t);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_csct(&bad_magic), Err(CscError::Format { offset: 0, .. })));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode_csct(&bad_version), Err(CscError::Format { offset: 4, .. })));

        let truncated = &good[..good.len() - 1];
        assert!(matches!(decode_csct(truncated), Err(CscError::Format { offset: 17, .. })));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode_csct(&trailing), Err(CscError::Format { offset: 33, .. })));

        let mut nan = good.clone();
        nan[21..25].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_csct(&nan), Err(CscError::Format { offset: 21, .. })));

        assert!(matches!(decode_csct(b"CSC"), Err(CscError::Format { offset: 0, .. })));
        assert!(decode_cscd(&good).is_err());
    }

    proptest! {
        #[test]
        fn csct_round_trip(seed in any::<u64>(), h in 1usize..6, w in 1usize..6, c in 1usize..5) {
            let t = Tensor3::random_gaussian(h, w, c, &mut Rng::new(seed)).unwrap();
            let back = decode_csct(&encode_csct(&t)).unwrap();
            prop_assert_eq!(
                back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(back.shape(), t.shape());
        }

        #[test]
        fn cscd_round_trip(seed in any::<u64>(), m in 1usize..5, n in 1usize..5, c in 1usize..4, s in 1usize..3) {
            let d = ConvDictionary::random(m, n, c, s, (n - 1) / 2, &mut Rng::new(seed)).unwrap();
            let bytes = encode_cscd(&d);
            prop_assert_eq!(encode_cscd(&decode_cscd(&bytes).unwrap()), bytes);
        }
    }
}
