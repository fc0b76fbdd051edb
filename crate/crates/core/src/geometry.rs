//! Embedding storage, cosine similarity and the dense similarity matrix.
//!
//! Binary embedding layout (all integers little-endian):
//!
//! ```text
//! "IDSEL1" | n: u32 | dim: u32 | n × ( id_len: u16 | id: [u8; id_len] | dim × f32 )
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"IDSEL1";

/// One fixed-width vector per document id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    /// Validates shape, finiteness, non-zero norm and id uniqueness.
    pub fn new(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::Validation(format!(
                    "vector for {id:?} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("vector for {id:?} has non-finite entries")));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::Validation(format!("vector for {id:?} is zero")));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::DuplicateId(id));
            }
            ids.push(id);
            vectors.push(v);
        }
        Ok(Self {
            dim,
            ids,
            vectors,
            index,
        })
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

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// The vector for `id` widened to f64.
    pub fn vector_f64(&self, id: &str) -> Result<Vec<f64>> {
        self.get(id)
            .map(|v| v.iter().map(|&x| f64::from(x)).collect())
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| (id.as_str(), v.as_slice()))
    }
}

pub fn read_embeddings<R: Read>(mut reader: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 6];
    read_exact(&mut reader, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let n = read_u32(&mut reader, "row count")? as usize;
    let dim = read_u32(&mut reader, "dim")? as usize;
    if dim == 0 {
        return Err(Error::Format("dim is zero".into()));
    }
    let mut rows = Vec::with_capacity(n.min(1 << 20));
    let mut comp = vec![0u8; dim * 4];
    for row in 0..n {
        let what = format!("row {row} of {n}");
        let mut len = [0u8; 2];
        read_exact(&mut reader, &mut len, &what)?;
        let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
        read_exact(&mut reader, &mut id, &what)?;
        let id = String::from_utf8(id)
            .map_err(|_| Error::Format(format!("{what}: id is not UTF-8")))?;
        read_exact(&mut reader, &mut comp, &what)?;
        let v = comp
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        rows.push((id, v));
    }
    let mut rest = [0u8; 1];
    match reader.read(&mut rest) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format(format!("trailing bytes after {n} rows"))),
        Err(e) => return Err(Error::io("<embeddings>", e)),
    }
    EmbeddingSet::new(dim, rows)
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated payload while reading {what}"))
        } else {
            Error::io("<embeddings>", e)
        }
    })
}

fn read_u32<R: Read>(reader: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(reader, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file))
}

pub fn write_embeddings<W: Write>(emb: &EmbeddingSet, mut writer: W) -> Result<()> {
    let io = |e| Error::io("<embeddings>", e);
    let n = u32::try_from(emb.len()).map_err(|_| Error::Format("too many rows".into()))?;
    writer.write_all(MAGIC).map_err(io)?;
    writer.write_all(&n.to_le_bytes()).map_err(io)?;
    writer.write_all(&(emb.dim as u32).to_le_bytes()).map_err(io)?;
    for (id, v) in emb.iter() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Format(format!("id {id:?} longer than 65535 bytes")))?;
        writer.write_all(&len.to_le_bytes()).map_err(io)?;
        writer.write_all(id.as_bytes()).map_err(io)?;
        for x in v {
            writer.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn save_embeddings(emb: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_embeddings(emb, &mut writer)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Dense pairwise cosine similarities for an ordered id list.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps precomputed values (row-major, n×n). The matrix must be square and
    /// exactly symmetric.
    pub fn from_values(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "{} values for {n} ids",
                values.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::Validation(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids, index, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }
}

/// Computes the upper triangle row-parallel and mirrors it, so the result is
/// bitwise symmetric and independent of thread count.
pub fn similarity_matrix(emb: &EmbeddingSet, ids: &[String]) -> Result<SimilarityMatrix> {
    let vectors: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| emb.vector_f64(id))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
    let n = ids.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| cosine_with_norms(&vectors[i], &vectors[j], norms[i], norms[j]))
                .collect()
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            let j = i + k;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix::from_values(ids.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&str, &[f32])]) -> EmbeddingSet {
        let dim = rows[0].1.len();
        EmbeddingSet::new(
            dim,
            rows.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect(),
        )
        .unwrap()
    }

    fn encode(emb: &EmbeddingSet) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embeddings(emb, &mut buf).unwrap();
        buf
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn reads_two_rows() {
        let emb = set(&[("a", &[1.0, 2.0, 3.0]), ("b", &[0.0, 0.0, 1.0])]);
        let back = read_embeddings(encode(&emb).as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 3);
        assert_eq!(back.get("a").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn truncated_count_rejected() {
        let emb = set(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0]), ("d", &[4.0])]);
        let mut bytes = encode(&emb);
        bytes[6..10].copy_from_slice(&5u32.to_le_bytes());
        let err = read_embeddings(bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        let emb = set(&[("a", &[1.0])]);
        let mut bytes = encode(&emb);
        bytes[0] = b'X';
        assert!(matches!(read_embeddings(bytes.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn zero_vector_named() {
        let emb = set(&[("a", &[1.0, 0.0]), ("zz", &[1.0, 1.0])]);
        let mut bytes = encode(&emb);
        let tail = bytes.len() - 8;
        bytes[tail..].copy_from_slice(&[0u8; 8]);
        let err = read_embeddings(bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("\"zz\""), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rows = vec![("a".to_string(), vec![1.0]), ("a".to_string(), vec![2.0])];
        assert!(matches!(EmbeddingSet::new(1, rows), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn small_matrices() {
        let emb = set(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let ids = vec!["a".to_string(), "b".to_string()];
        let m = similarity_matrix(&emb, &ids).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0]);

        let one = similarity_matrix(&emb, &ids[..1]).unwrap();
        assert_eq!(one.get(0, 0), 1.0);

        assert!(matches!(
            similarity_matrix(&emb, &["nope".to_string()]),
            Err(Error::UnknownId(_))
        ));
    }
}
