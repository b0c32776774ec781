use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, DependencyTree, RelationInstance, Sentence, Token};
use crate::error::{Error, Result};

/// A mention given either as a token index or an inclusive `[start, end]`
/// span. Spans reduce to their last token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MentionRef {
    Index(usize),
    Span([usize; 2]),
}

impl MentionRef {
    pub fn token(&self) -> Result<usize> {
        match *self {
            MentionRef::Index(i) => Ok(i),
            MentionRef::Span([start, end]) if start <= end => Ok(end),
            MentionRef::Span([start, end]) => Err(Error::Validation(format!("span [{start}, {end}] is reversed"))),
        }
    }
}

/// One JSON Lines record of a corpus file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub tokens: Vec<String>,
    pub entity_bio: Vec<String>,
    pub chunk_bio: Vec<String>,
    /// Head index per token, `-1` for the root.
    pub heads: Vec<i64>,
    pub deprels: Vec<String>,
    pub s: MentionRef,
    pub o: MentionRef,
    pub label: String,
    #[serde(default)]
    pub domain: String,
}

impl InstanceRecord {
    pub fn into_instance(self) -> Result<RelationInstance> {
        let n = self.tokens.len();
        for (field, len) in [
            ("entity_bio", self.entity_bio.len()),
            ("chunk_bio", self.chunk_bio.len()),
            ("heads", self.heads.len()),
            ("deprels", self.deprels.len()),
        ] {
            if len != n {
                return Err(Error::Validation(format!("{field} has {len} entries for {n} tokens")));
            }
        }
        let heads = self
            .heads
            .iter()
            .map(|&h| match h {
                -1 => Ok(None),
                h if h >= 0 => Ok(Some(h as usize)),
                h => Err(Error::Validation(format!("invalid head {h}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let tree = DependencyTree::new(heads, self.deprels)?;
        let tokens = self
            .tokens
            .into_iter()
            .zip(self.entity_bio)
            .zip(self.chunk_bio)
            .map(|((form, entity_tag), chunk_tag)| Token { form, entity_tag, chunk_tag })
            .collect();
        let sentence = Sentence::new(tokens, tree)?;
        RelationInstance::new(sentence, self.s.token()?, self.o.token()?, self.label, self.domain)
    }

    pub fn from_instance(inst: &RelationInstance) -> Self {
        let toks = &inst.sentence.tokens;
        let tree = &inst.sentence.tree;
        Self {
            tokens: toks.iter().map(|t| t.form.clone()).collect(),
            entity_bio: toks.iter().map(|t| t.entity_tag.clone()).collect(),
            chunk_bio: toks.iter().map(|t| t.chunk_tag.clone()).collect(),
            heads: tree.heads().iter().map(|h| h.map_or(-1, |h| h as i64)).collect(),
            deprels: tree.labels().to_vec(),
            s: MentionRef::Index(inst.s),
            o: MentionRef::Index(inst.o),
            label: inst.label.clone(),
            domain: inst.domain.clone(),
        }
    }
}

/// Parses JSON Lines; blank lines are skipped. Errors carry 1-based line numbers.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut instances = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |e: String| Error::Parse { line: idx + 1, message: e };
        let record: InstanceRecord = serde_json::from_str(&line).map_err(|e| wrap(e.to_string()))?;
        instances.push(record.into_instance().map_err(|e| wrap(e.to_string()))?);
    }
    Ok(Corpus::new(instances))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    read_corpus(BufReader::new(File::open(path)?))
}

pub fn write_corpus<W: Write>(mut writer: W, corpus: &Corpus) -> Result<()> {
    for inst in &corpus.instances {
        serde_json::to_writer(&mut writer, &InstanceRecord::from_instance(inst))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_corpus(&mut w, corpus)?;
    w.flush()?;
    Ok(())
}
