use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{DocVector, FeatureError};

/// Token vectors of a fixed dimension, stored row-major.
///
/// A table may also carry hashed-bigram bucket vectors when it comes from a
/// joint-embedding model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    buckets: Option<Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dimension,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            buckets: None,
        }
    }

    /// Adds a token; returns `false` (and keeps the old vector) if the token
    /// is already present.
    pub fn insert(&mut self, token: &str, vector: &[f32]) -> bool {
        assert_eq!(vector.len(), self.dimension, "vector dimension");
        if self.index.contains_key(token) {
            return false;
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.data.extend_from_slice(vector);
        true
    }

    /// Attaches bucket vectors, `dimension` values per bucket.
    pub fn with_buckets(mut self, data: Vec<f32>) -> Self {
        assert_eq!(data.len() % self.dimension, 0, "bucket data shape");
        self.buckets = Some(data);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        let i = *self.index.get(token)?;
        Some(&self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.as_ref().map_or(0, |b| b.len() / self.dimension)
    }

    pub fn bucket(&self, id: usize) -> Option<&[f32]> {
        let b = self.buckets.as_ref()?;
        b.get(id * self.dimension..(id + 1) * self.dimension)
    }

    /// Writes the text format, optionally preceded by a `count dimension`
    /// header. Values use the shortest representation that reads back to the
    /// same `f32`.
    pub fn write<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "{} {}", self.len(), self.dimension)?;
        }
        for (i, token) in self.tokens.iter().enumerate() {
            out.write_all(token.as_bytes())?;
            for v in &self.data[i * self.dimension..(i + 1) * self.dimension] {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((count, dim))
}

/// Reads `token v1 ... vd` lines.
///
/// A first line consisting of exactly two integers is a `count dimension`
/// header; otherwise the dimension comes from the first data line. Blank
/// lines are skipped and repeated tokens keep their first vector.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, FeatureError> {
    let mut table: Option<EmbeddingTable> = None;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FeatureError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if table.is_none() {
            if let Some((_, dim)) = parse_header(&line) {
                if dim == 0 {
                    return Err(FeatureError::Parse {
                        line: line_no,
                        reason: "zero dimension in header".into(),
                    });
                }
                table = Some(EmbeddingTable::new(dim));
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line");
        values.clear();
        for f in fields {
            let v: f32 = f.parse().map_err(|_| FeatureError::Parse {
                line: line_no,
                reason: format!("bad value {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(FeatureError::NonFiniteValue { line: line_no });
            }
            values.push(v);
        }
        let table = match &mut table {
            Some(t) => t,
            None if values.is_empty() => {
                return Err(FeatureError::DimensionMismatch {
                    line: line_no,
                    expected: 1,
                    found: 0,
                })
            }
            None => table.insert(EmbeddingTable::new(values.len())),
        };
        if values.len() != table.dimension {
            return Err(FeatureError::DimensionMismatch {
                line: line_no,
                expected: table.dimension,
                found: values.len(),
            });
        }
        table.insert(token, &values);
    }
    table.ok_or(FeatureError::EmptyFile)
}

/// Mean of the vectors of in-table tokens, each occurrence counted; the zero
/// vector when no token is known.
pub fn average_doc_vector<S: AsRef<str>>(doc: &[S], table: &EmbeddingTable) -> DocVector {
    let mut sum = vec![0.0f64; table.dimension()];
    let mut n = 0usize;
    for t in doc {
        if let Some(v) = table.get(t.as_ref()) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            n += 1;
        }
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        sum.iter_mut().for_each(|s| *s *= scale);
    }
    sum
}
