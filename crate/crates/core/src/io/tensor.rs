//! Binary tensor files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes   "DSG1"
//! dtype   u8        0 = f64, 1 = i64
//! ndim    u8        1 or 2
//! dims    ndim × u64
//! payload product(dims) × 8 bytes, row-major
//! ```
//!
//! Files must be exactly header + payload long; anything shorter is
//! truncated and anything longer is rejected.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"DSG1";

const DTYPE_F64: u8 = 0;
const DTYPE_I64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F64 { dims: Vec<usize>, data: Vec<f64> },
    I64 { dims: Vec<usize>, data: Vec<i64> },
}

impl Tensor {
    pub fn dims(&self) -> &[usize] {
        match self {
            Tensor::F64 { dims, .. } | Tensor::I64 { dims, .. } => dims,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tensor::F64 { data, .. } => data.len(),
            Tensor::I64 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor::F64 {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Tensor::F64 {
            dims: vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_labels(labels: &[ClassId]) -> Self {
        Tensor::I64 {
            dims: vec![labels.len()],
            data: labels.iter().map(|c| c.0 as i64).collect(),
        }
    }

    /// Bitwise equality; `PartialEq` treats NaN payloads as unequal.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        match (self, other) {
            (Tensor::F64 { dims: a, data: x }, Tensor::F64 { dims: b, data: y }) => {
                a == b && x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
            }
            (Tensor::I64 { dims: a, data: x }, Tensor::I64 { dims: b, data: y }) => a == b && x == y,
            _ => false,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(6 + 8 * dims.len() + 8 * self.len());
        out.extend_from_slice(MAGIC);
        out.push(match self {
            Tensor::F64 { .. } => DTYPE_F64,
            Tensor::I64 { .. } => DTYPE_I64,
        });
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match self {
            Tensor::F64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Tensor::I64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    /// Decodes `bytes`; `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
        let truncated = || Error::Truncated(path.to_path_buf());
        if bytes.len() < 6 {
            return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
                Error::BadMagic(path.to_path_buf())
            } else {
                truncated()
            });
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::BadMagic(path.to_path_buf()));
        }
        let dtype = bytes[4];
        if dtype != DTYPE_F64 && dtype != DTYPE_I64 {
            return Err(Error::UnknownDtype {
                path: path.to_path_buf(),
                code: dtype,
            });
        }
        let ndim = bytes[5];
        if !(1..=2).contains(&ndim) {
            return Err(Error::BadRank {
                path: path.to_path_buf(),
                ndim,
            });
        }
        let mut pos = 6;
        let mut dims = Vec::with_capacity(ndim as usize);
        for _ in 0..ndim {
            let raw = bytes.get(pos..pos + 8).ok_or_else(truncated)?;
            let d = u64::from_le_bytes(raw.try_into().expect("8-byte slice"));
            dims.push(usize::try_from(d).map_err(|_| truncated())?);
            pos += 8;
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(truncated)?;
        let payload = &bytes[pos..];
        match count.checked_mul(8) {
            Some(expect) if payload.len() == expect => {}
            Some(expect) if payload.len() > expect => return Err(Error::TrailingBytes(path.to_path_buf())),
            _ => return Err(truncated()),
        }
        let words = payload.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("8-byte chunk"));
        Ok(match dtype {
            DTYPE_F64 => Tensor::F64 {
                dims,
                data: words.map(f64::from_le_bytes).collect(),
            },
            _ => Tensor::I64 {
                dims,
                data: words.map(i64::from_le_bytes).collect(),
            },
        })
    }

    /// Two-dimensional float tensor as a matrix; a 1-D tensor becomes a column.
    pub fn into_matrix(self, path: &Path) -> Result<Matrix> {
        match self {
            Tensor::F64 { dims, data } => match dims[..] {
                [r, c] => Matrix::new(r, c, data),
                [r] => Matrix::new(r, 1, data),
                _ => unreachable!("rank checked on decode"),
            },
            Tensor::I64 { .. } => Err(Error::DtypeMismatch {
                path: path.to_path_buf(),
                expected: "f64",
            }),
        }
    }

    pub fn into_labels(self, path: &Path) -> Result<Vec<ClassId>> {
        match self {
            Tensor::I64 { dims, data } if dims.len() == 1 => data
                .into_iter()
                .map(|v| {
                    u64::try_from(v)
                        .map(ClassId)
                        .map_err(|_| Error::Manifest(format!("{}: negative label {v}", path.display())))
                })
                .collect(),
            Tensor::I64 { .. } => Err(Error::BadRank {
                path: path.to_path_buf(),
                ndim: 2,
            }),
            Tensor::F64 { .. } => Err(Error::DtypeMismatch {
                path: path.to_path_buf(),
                expected: "i64",
            }),
        }
    }
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    fs::write(path, tensor.encode())?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let bytes = fs::read(&path)?;
    Tensor::decode(&bytes, &path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn float_matrix_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let t = Tensor::F64 {
            dims: vec![2, 3],
            data: vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300, -7.25, std::f64::consts::PI],
        };
        write_tensor(&path, &t).unwrap();
        assert!(read_tensor(&path).unwrap().bit_eq(&t));
    }

    #[test]
    fn empty_dimension_round_trips() {
        let t = Tensor::F64 {
            dims: vec![0, 5],
            data: vec![],
        };
        assert!(Tensor::decode(&t.encode(), p()).unwrap().bit_eq(&t));
    }

    #[test]
    fn header_layout_is_fixed() {
        let t = Tensor::I64 {
            dims: vec![2],
            data: vec![1, -2],
        };
        let bytes = t.encode();
        assert_eq!(&bytes[..4], b"DSG1");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[6..14], &2u64.to_le_bytes());
        assert_eq!(&bytes[14..22], &1i64.to_le_bytes());
        assert_eq!(bytes.len(), 30);
    }

    #[test]
    fn corrupted_headers_are_rejected() {
        let mut bytes = Tensor::vector(vec![1.0, 2.0]).encode();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        let err = Tensor::decode(&bad, p()).unwrap_err();
        assert!(err.to_string().starts_with("bad magic"));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Tensor::decode(&bad, p()), Err(Error::UnknownDtype { code: 9, .. })));

        let mut bad = bytes.clone();
        bad[5] = 3;
        assert!(matches!(Tensor::decode(&bad, p()), Err(Error::BadRank { ndim: 3, .. })));

        bytes.pop();
        assert!(matches!(Tensor::decode(&bytes, p()), Err(Error::Truncated(_))));
        assert!(matches!(Tensor::decode(b"DS", p()), Err(Error::Truncated(_))));
    }

    fn any_tensor() -> impl Strategy<Value = Tensor> {
        let dims = prop_oneof![
            (0usize..40).prop_map(|n| vec![n]),
            (0usize..12, 0usize..12).prop_map(|(r, c)| vec![r, c]),
        ];
        (dims, any::<bool>()).prop_flat_map(|(dims, float)| {
            let n: usize = dims.iter().product();
            if float {
                prop::collection::vec(any::<u64>().prop_map(f64::from_bits), n)
                    .prop_map(move |data| Tensor::F64 { dims: dims.clone(), data })
                    .boxed()
            } else {
                prop::collection::vec(any::<i64>(), n)
                    .prop_map(move |data| Tensor::I64 { dims: dims.clone(), data })
                    .boxed()
            }
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(t in any_tensor()) {
            prop_assert!(Tensor::decode(&t.encode(), p()).unwrap().bit_eq(&t));
        }
    }
}
