//! IDX tensor container (the MNIST distribution format).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    U8,
    I8,
    I16,
    I32,
    F32,
    F64,
}

impl ElementKind {
    pub fn code(self) -> u8 {
        match self {
            ElementKind::U8 => 0x08,
            ElementKind::I8 => 0x09,
            ElementKind::I16 => 0x0B,
            ElementKind::I32 => 0x0C,
            ElementKind::F32 => 0x0D,
            ElementKind::F64 => 0x0E,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0x08 => ElementKind::U8,
            0x09 => ElementKind::I8,
            0x0B => ElementKind::I16,
            0x0C => ElementKind::I32,
            0x0D => ElementKind::F32,
            0x0E => ElementKind::F64,
            other => return Err(Error::IdxUnknownElement(other)),
        })
    }

    pub fn width(self) -> usize {
        match self {
            ElementKind::U8 | ElementKind::I8 => 1,
            ElementKind::I16 => 2,
            ElementKind::I32 | ElementKind::F32 => 4,
            ElementKind::F64 => 8,
        }
    }
}

/// Payload kept in its stored type so writing it back is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl IdxData {
    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::I8(v) => v.len(),
            IdxData::I16(v) => v.len(),
            IdxData::I32(v) => v.len(),
            IdxData::F32(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            IdxData::U8(_) => ElementKind::U8,
            IdxData::I8(_) => ElementKind::I8,
            IdxData::I16(_) => ElementKind::I16,
            IdxData::I32(_) => ElementKind::I32,
            IdxData::F32(_) => ElementKind::F32,
            IdxData::F64(_) => ElementKind::F64,
        }
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            IdxData::U8(v) => v[i] as f64,
            IdxData::I8(v) => v[i] as f64,
            IdxData::I16(v) => v[i] as f64,
            IdxData::I32(v) => v[i] as f64,
            IdxData::F32(v) => v[i] as f64,
            IdxData::F64(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: IdxData) -> Result<Self> {
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(Error::DimensionMismatch {
                what: "IDX payload",
                expected: count,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn kind(&self) -> ElementKind {
        self.data.kind()
    }

    /// Number of items along the first axis.
    pub fn items(&self) -> usize {
        self.dims.first().copied().unwrap_or(1)
    }

    /// Elements per item.
    pub fn item_len(&self) -> usize {
        self.dims.iter().skip(1).product()
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(Error::IdxTruncated {
            expected: 4,
            found: bytes.len(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::IdxBadMagic([bytes[0], bytes[1]]));
    }
    let kind = ElementKind::from_code(bytes[2])?;
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::IdxTruncated {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::InvalidArgument("IDX dimensions overflow".into()))?;
    let expected = count
        .checked_mul(kind.width())
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| Error::InvalidArgument("IDX dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after IDX payload",
            bytes.len() - expected
        )));
    }
    let p = &bytes[header..];
    let data = match kind {
        ElementKind::U8 => IdxData::U8(p.to_vec()),
        ElementKind::I8 => IdxData::I8(p.iter().map(|&b| b as i8).collect()),
        ElementKind::I16 => IdxData::I16(p.chunks_exact(2).map(|c| i16::from_be_bytes([c[0], c[1]])).collect()),
        ElementKind::I32 => IdxData::I32(
            p.chunks_exact(4)
                .map(|c| i32::from_be_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        ElementKind::F32 => IdxData::F32(
            p.chunks_exact(4)
                .map(|c| f32::from_bits(u32::from_be_bytes(c.try_into().expect("4 bytes"))))
                .collect(),
        ),
        ElementKind::F64 => IdxData::F64(
            p.chunks_exact(8)
                .map(|c| f64::from_bits(u64::from_be_bytes(c.try_into().expect("8 bytes"))))
                .collect(),
        ),
    };
    Ok(IdxTensor { dims, data })
}

pub fn write_idx(t: &IdxTensor) -> Result<Vec<u8>> {
    if t.dims.len() > u8::MAX as usize {
        return Err(Error::InvalidArgument("too many IDX dimensions".into()));
    }
    let mut out = vec![0, 0, t.kind().code(), t.dims.len() as u8];
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("dimension {d} exceeds 32 bits")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    match &t.data {
        IdxData::U8(v) => out.extend_from_slice(v),
        IdxData::I8(v) => out.extend(v.iter().map(|&x| x as u8)),
        IdxData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_be_bytes())),
        IdxData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_be_bytes())),
    }
    Ok(out)
}

pub fn read_idx(path: &Path) -> Result<IdxTensor> {
    parse_idx(&std::fs::read(path)?)
}

pub fn save_idx(t: &IdxTensor, path: &Path) -> Result<()> {
    std::fs::write(path, write_idx(t)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_a_small_byte_tensor() {
        let bytes = [0, 0, 0x08, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3, 4];
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![2, 2]);
        assert_eq!(t.data, IdxData::U8(vec![1, 2, 3, 4]));
        assert_eq!(write_idx(&t).unwrap(), bytes);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            parse_idx(&[1, 0, 0x08, 1, 0, 0, 0, 1, 7]),
            Err(Error::IdxBadMagic([1, 0]))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 0x08, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3]),
            Err(Error::IdxTruncated { expected: 16, found: 15 })
        ));
        assert!(matches!(parse_idx(&[0, 0, 0x0A, 0]), Err(Error::IdxUnknownElement(0x0A))));
        assert!(matches!(parse_idx(&[0, 0, 0x08, 3, 0]), Err(Error::IdxTruncated { .. })));
        assert!(matches!(parse_idx(&[0, 0]), Err(Error::IdxTruncated { .. })));
    }

    #[test]
    fn every_kind_round_trips() {
        let cases = vec![
            IdxData::I8(vec![-1, 5, -128]),
            IdxData::I16(vec![-300, 2, 32767]),
            IdxData::I32(vec![-70000, 0, 1]),
            IdxData::F32(vec![1.5, -0.0, f32::from_bits(0x7fa0_0001)]),
            IdxData::F64(vec![std::f64::consts::PI, -1e300, 0.0]),
        ];
        for data in cases {
            let t = IdxTensor::new(vec![3], data).unwrap();
            let bytes = write_idx(&t).unwrap();
            let back = parse_idx(&bytes).unwrap();
            assert_eq!(write_idx(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn payload_must_match_dims() {
        assert!(IdxTensor::new(vec![2, 3], IdxData::U8(vec![0; 5])).is_err());
    }
}
