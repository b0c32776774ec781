use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Pre-trained word vectors in word2vec text layout.
///
/// Out-of-vocabulary words resolve to a dedicated all-zero unknown row whose
/// index is one past the last vocabulary row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { words: Vec::new(), index: HashMap::new(), dim, values: Vec::new() }
    }

    /// Adds or replaces the vector for `word`.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Format {
                expected: format!("{} values for {word:?}", self.dim),
                found: vector.len().to_string(),
            });
        }
        match self.index.get(word) {
            Some(&row) => self.values[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.values.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Row for `word`; OOV words map to [`EmbeddingTable::unk_index`].
    pub fn row_index(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(self.unk_index())
    }

    pub fn unk_index(&self) -> usize {
        self.words.len()
    }

    /// Vector for `word`, or the zero unknown vector.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        match self.index.get(word) {
            Some(&r) => self.values[r * self.dim..(r + 1) * self.dim].to_vec(),
            None => vec![0.0; self.dim],
        }
    }
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Format {
        expected: "header \"<count> <dim>\"".into(),
        found: "empty input".into(),
    })??;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse { line: 1, message: format!("bad header {header:?}") })?;
    let [count, dim] = nums[..] else {
        return Err(Error::Parse { line: 1, message: format!("bad header {header:?}") });
    };

    let mut table = EmbeddingTable::new(dim);
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("non-empty line has a field");
        let vector: Vec<f64> = fields
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: idx + 2, message: format!("{e}") })?;
        if vector.len() != dim {
            return Err(Error::Format {
                expected: format!("{dim} values on line {}", idx + 2),
                found: vector.len().to_string(),
            });
        }
        table.insert(word, &vector)?;
        rows += 1;
    }
    if rows != count {
        return Err(Error::Format { expected: format!("{count} rows"), found: rows.to_string() });
    }
    Ok(table)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    read_embeddings(BufReader::new(File::open(path)?))
}

/// Writes the table; `f64` Display output is the shortest exact decimal, so
/// reading it back reproduces every value bit for bit.
pub fn write_embeddings<W: Write>(writer: W, table: &EmbeddingTable) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (row, word) in table.words.iter().enumerate() {
        write!(w, "{word}")?;
        for v in &table.values[row * table.dim..(row + 1) * table.dim] {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
