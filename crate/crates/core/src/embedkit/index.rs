use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingVector};

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
}

/// Exact linear-scan index over unit vectors.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dims: usize,
    ids: Vec<String>,
    rows: Vec<EmbeddingVector>,
    positions: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    values: Vec<f64>,
}

impl VectorIndex {
    pub fn new(dims: usize) -> Result<Self, EmbedError> {
        if dims == 0 {
            return Err(EmbedError::ZeroDims);
        }
        Ok(Self {
            dims,
            ids: Vec::new(),
            rows: Vec::new(),
            positions: HashMap::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.positions.get(id).map(|&i| &self.rows[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.ids.iter().map(String::as_str).zip(self.rows.iter())
    }

    pub fn add(&mut self, id: impl Into<String>, vector: EmbeddingVector) -> Result<(), EmbedError> {
        let id = id.into();
        if vector.dims() != self.dims {
            return Err(EmbedError::DimsMismatch {
                expected: self.dims,
                actual: vector.dims(),
            });
        }
        if self.positions.contains_key(&id) {
            return Err(EmbedError::DuplicateChunk(id));
        }
        self.positions.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.rows.push(vector);
        Ok(())
    }

    /// Top `k` by cosine similarity, ties broken by ascending id.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, EmbedError> {
        if query.dims() != self.dims {
            return Err(EmbedError::DimsMismatch {
                expected: self.dims,
                actual: query.dims(),
            });
        }
        if self.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        if query.is_zero() {
            return Err(EmbedError::DegenerateQuery);
        }
        let mut hits: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| (cosine(query.values(), row.values()), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
        };
        let k = k.min(hits.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_by(order);
        Ok(hits
            .into_iter()
            .map(|(score, i)| SearchHit {
                chunk_id: self.ids[i].clone(),
                score,
            })
            .collect())
    }

    /// JSONL sidecar: a `{"dims","count"}` header line, then one `{"id","values"}` row per vector.
    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        let header = Header {
            dims: self.dims,
            count: self.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(std::io::Error::from)?)?;
        for (id, row) in self.iter() {
            let row = Row {
                id: id.to_string(),
                values: row.values().to_vec(),
            };
            writeln!(out, "{}", serde_json::to_string(&row).map_err(std::io::Error::from)?)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let corrupt = |line: usize, reason: String| EmbedError::Corrupt { line, reason };
        let header: Header = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?).map_err(|e| corrupt(1, e.to_string()))?,
            None => return Err(corrupt(1, "missing header".into())),
        };
        let mut index = Self::new(header.dims)?;
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| corrupt(n + 1, e.to_string()))?;
            let dims = row.values.len();
            if dims != header.dims {
                return Err(EmbedError::DimsMismatch { expected: header.dims, actual: dims });
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(corrupt(n + 1, "non-finite value".into()));
            }
            index.add(row.id, EmbeddingVector { values: row.values })?;
        }
        if index.len() != header.count {
            return Err(corrupt(0, format!("header says {} rows, found {}", header.count, index.len())));
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec_of(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_query_scores_one() {
        let mut idx = VectorIndex::new(3).unwrap();
        idx.add("a", vec_of(&[1.0, 2.0, 3.0])).unwrap();
        idx.add("b", vec_of(&[-1.0, 0.5, 0.0])).unwrap();
        let hits = idx.search(&vec_of(&[1.0, 2.0, 3.0]), 1).unwrap();
        assert_eq!(hits[0].chunk_id, "a");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_index_returns_everything() {
        let mut idx = VectorIndex::new(2).unwrap();
        idx.add("x", vec_of(&[1.0, 0.0])).unwrap();
        idx.add("y", vec_of(&[0.0, 1.0])).unwrap();
        let hits = idx.search(&vec_of(&[1.0, 1.0]), 10).unwrap();
        assert_eq!(hits.len(), 2);
        // equal scores: ascending id
        assert_eq!(hits[0].chunk_id, "x");
    }

    #[test]
    fn error_paths() {
        let mut idx = VectorIndex::new(2).unwrap();
        assert!(matches!(idx.search(&vec_of(&[1.0, 0.0]), 1), Err(EmbedError::EmptyIndex)));
        idx.add("x", vec_of(&[1.0, 0.0])).unwrap();
        assert!(matches!(idx.search(&vec_of(&[1.0, 0.0, 0.0]), 1), Err(EmbedError::DimsMismatch { .. })));
        assert!(matches!(idx.search(&EmbeddingVector::zeros(2), 1), Err(EmbedError::DegenerateQuery)));
        assert!(matches!(idx.add("x", vec_of(&[0.0, 1.0])), Err(EmbedError::DuplicateChunk(_))));
        assert!(matches!(idx.add("z", vec_of(&[1.0])), Err(EmbedError::DimsMismatch { .. })));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        let mut idx = VectorIndex::new(3).unwrap();
        idx.add("a#0000", vec_of(&[0.1, 0.2, 0.3])).unwrap();
        idx.add("b#0000", vec_of(&[1.0 / 3.0, -7.0, 1e-300])).unwrap();
        idx.save(&path).unwrap();
        let back = VectorIndex::load(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (id, v) in idx.iter() {
            assert_eq!(back.get(id).unwrap(), v);
        }
    }

    proptest! {
        #[test]
        fn cosine_properties(a in prop::collection::vec(-10.0f64..10.0, 5), b in prop::collection::vec(-10.0f64..10.0, 5)) {
            let ab = cosine(&a, &b);
            prop_assert!(ab.abs() <= 1.0 + 1e-9);
            prop_assert_eq!(ab, cosine(&b, &a));
            if a.iter().any(|&x| x != 0.0) {
                prop_assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
            }
        }
    }
}
