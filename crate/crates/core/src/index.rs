//! Exact cosine top-k search over dense embeddings.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{dot, norm, Scalar};

const MAGIC: &[u8; 4] = b"SCVX";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("vector for {id:?} has dimension {found}, index dimension is {expected}")]
    Dimension {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("vector for {0:?} has zero norm")]
    ZeroVector(String),
    #[error("vector for {0:?} contains a non-finite value")]
    NonFinite(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("index is empty")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed vector file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredHit<T> {
    pub id: String,
    pub score: T,
}

/// Flat, insertion-ordered store of vectors with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<T> {
    dim: usize,
    ids: Vec<String>,
    data: Vec<T>,
    norms: Vec<T>,
    positions: HashMap<String, usize>,
}

impl<T: Scalar> VectorIndex<T> {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "index dimension must be positive");
        VectorIndex {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[T]> {
        self.positions.get(id).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn check(&self, id: &str, v: &[T]) -> Result<T, IndexError> {
        if v.len() != self.dim {
            return Err(IndexError::Dimension {
                id: id.to_string(),
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFinite(id.to_string()));
        }
        let n = norm(v);
        if n == T::zero() {
            return Err(IndexError::ZeroVector(id.to_string()));
        }
        Ok(n)
    }

    pub fn insert(&mut self, id: &str, vector: &[T]) -> Result<(), IndexError> {
        let n = self.check(id, vector)?;
        if self.positions.contains_key(id) {
            return Err(IndexError::DuplicateId(id.to_string()));
        }
        self.positions.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.data.extend_from_slice(vector);
        self.norms.push(n);
        Ok(())
    }

    /// Cosine similarity of `query` against the stored vector `id`.
    pub fn score(&self, query: &[T], id: &str) -> Result<Option<T>, IndexError> {
        let qn = self.check("query", query)?;
        Ok(self
            .positions
            .get(id)
            .map(|&i| cosine(query, qn, self.row(i), self.norms[i])))
    }

    /// The `k` most similar entries, score descending then id ascending.
    pub fn top_k(&self, query: &[T], k: usize) -> Result<Vec<ScoredHit<T>>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let qn = self.check("query", query)?;
        let mut hits: Vec<(usize, T)> = (0..self.len())
            .map(|i| (i, cosine(query, qn, self.row(i), self.norms[i])))
            .collect();
        let order = |a: &(usize, T), b: &(usize, T)| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| self.ids[a.0].cmp(&self.ids[b.0]))
        };
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_by(order);
        Ok(hits
            .into_iter()
            .map(|(i, score)| ScoredHit {
                id: self.ids[i].clone(),
                score,
            })
            .collect())
    }

    /// Writes the binary `vectors.bin` layout: magic, version, dim, count,
    /// then per entry the id length, id bytes and `dim` little-endian f32s.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for x in self.row(i) {
                w.write_all(&(x.as_f64() as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, IndexError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| IndexError::Format(e.to_string()))?;
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        if cur.take(4)? != MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported version {version}")));
        }
        let dim = cur.u32()? as usize;
        if dim == 0 {
            return Err(IndexError::Format("zero dimension".into()));
        }
        let count = cur.u64()?;
        let mut index = VectorIndex::new(dim);
        let mut v = Vec::with_capacity(dim);
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let id = std::str::from_utf8(cur.take(len)?)
                .map_err(|e| IndexError::Format(e.to_string()))?
                .to_string();
            v.clear();
            for _ in 0..dim {
                let raw: [u8; 4] = cur.take(4)?.try_into().expect("4 bytes");
                v.push(T::of(f64::from(f32::from_le_bytes(raw))));
            }
            index.insert(&id, &v)?;
        }
        if cur.pos != bytes.len() {
            return Err(IndexError::Format("trailing bytes".into()));
        }
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let path = path.as_ref();
        let io_err = |e: std::io::Error| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(io_err)?;
        std::fs::write(path, buf).map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn cosine<T: Scalar>(q: &[T], qn: T, v: &[T], vn: T) -> T {
    let c = dot(q, v) / (qn * vn);
    c.max(-T::one()).min(T::one())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| IndexError::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Rounds every component to the nearest f32, the precision `vectors.bin`
/// stores, so an index built from the result survives a save/load unchanged.
pub fn to_storage_precision(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x as f32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_cosines() {
        let mut idx = VectorIndex::<f64>::new(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        idx.insert("a", &[1.0, 0.0]).unwrap();
        idx.insert("b", &[0.0, 1.0]).unwrap();
        idx.insert("c", &[s, s]).unwrap();
        let hits = idx.top_k(&[1.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].id, "a");
        assert_abs_diff_eq!(hits[0].score, 1.0, epsilon = 1e-12);
        assert_eq!(hits[1].id, "c");
        assert_abs_diff_eq!(hits[1].score, s, epsilon = 1e-12);
    }

    #[test]
    fn insert_errors() {
        let mut idx = VectorIndex::<f64>::new(2);
        idx.insert("a", &[1.0, 0.0]).unwrap();
        assert!(matches!(
            idx.insert("a", &[0.0, 1.0]),
            Err(IndexError::DuplicateId(_))
        ));
        assert!(matches!(
            idx.insert("z", &[0.0, 0.0]),
            Err(IndexError::ZeroVector(_))
        ));
        assert!(matches!(
            idx.insert("d", &[1.0]),
            Err(IndexError::Dimension { .. })
        ));
        assert!(matches!(
            idx.top_k(&[0.0, 0.0], 1),
            Err(IndexError::ZeroVector(_))
        ));
        assert!(matches!(idx.top_k(&[1.0, 0.0], 0), Err(IndexError::ZeroK)));
    }

    #[test]
    fn orthogonal_scores_zero_and_ties_by_id() {
        let mut idx = VectorIndex::<f64>::new(3);
        idx.insert("y", &[0.0, 1.0, 0.0]).unwrap();
        idx.insert("x", &[0.0, 0.0, 2.0]).unwrap();
        let hits = idx.top_k(&[1.0, 0.0, 0.0], 5).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].id, "x");
        assert!(hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let mut idx = VectorIndex::<f64>::new(3);
        idx.insert("a", &to_storage_precision(&[0.1, 0.2, 0.3]))
            .unwrap();
        idx.insert("béta", &to_storage_precision(&[-1.5, 2.25, 1e-3]))
            .unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(VectorIndex::<f64>::read_from(&buf[..]).unwrap(), idx);
        assert!(VectorIndex::<f64>::read_from(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(VectorIndex::<f64>::read_from(&bad[..]).is_err());
    }

    #[test]
    fn f32_index_works() {
        let mut idx = VectorIndex::<f32>::new(2);
        idx.insert("a", &[3.0, 4.0]).unwrap();
        let hits = idx.top_k(&[3.0, 4.0], 1).unwrap();
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn ranking_scale_invariant(
            vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..30),
            q in prop::collection::vec(-1.0f64..1.0, 4),
            c in 0.01f64..100.0,
        ) {
            prop_assume!(q.iter().any(|x| x.abs() > 1e-3));
            let mut idx = VectorIndex::<f64>::new(4);
            for (i, v) in vs.iter().enumerate() {
                if v.iter().any(|x| x.abs() > 1e-3) {
                    idx.insert(&format!("v{i:02}"), v).unwrap();
                }
            }
            prop_assume!(!idx.is_empty());
            let scaled: Vec<f64> = q.iter().map(|x| x * c).collect();
            let a = idx.top_k(&q, 10).unwrap();
            let b = idx.top_k(&scaled, 10).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.score - y.score).abs() < 1e-12);
            }
        }

        #[test]
        fn symmetric_scores(
            u in prop::collection::vec(-1.0f64..1.0, 5),
            v in prop::collection::vec(-1.0f64..1.0, 5),
        ) {
            prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
            let mut idx = VectorIndex::<f64>::new(5);
            idx.insert("u", &u).unwrap();
            idx.insert("v", &v).unwrap();
            let uv = idx.score(&u, "v").unwrap().unwrap();
            let vu = idx.score(&v, "u").unwrap().unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12);
        }
    }
}
