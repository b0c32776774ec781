//! Relation instances, dependency trees and the files they live in.

mod embeddings;
mod io;
pub mod synth;
mod tree;

use std::collections::BTreeSet;

pub use embeddings::{load_embeddings, read_embeddings, write_embeddings, EmbeddingTable};
pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, InstanceRecord, MentionRef};
pub use synth::{generate_synthetic, SynthSpec};
pub use tree::{adjacency_from_tree, dep_relation_multihot, path_flags, AdjacencyTarget};

use crate::error::{Error, Result};

/// Label used for pairs with no relation.
pub const NONE_LABEL: &str = "None";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub entity_tag: String,
    pub chunk_tag: String,
}

/// Head links of a sentence: `heads[i]` is `None` for the root token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyTree {
    heads: Vec<Option<usize>>,
    labels: Vec<String>,
}

impl DependencyTree {
    /// Validates that the heads form a single rooted tree over all tokens.
    pub fn new(heads: Vec<Option<usize>>, labels: Vec<String>) -> Result<Self> {
        let n = heads.len();
        if n == 0 {
            return Err(Error::Validation("empty dependency tree".into()));
        }
        if labels.len() != n {
            return Err(Error::Validation(format!("{n} heads but {} relation labels", labels.len())));
        }
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(Error::Validation(format!("tree needs exactly one ROOT, found {roots}")));
        }
        for (i, h) in heads.iter().enumerate() {
            match *h {
                Some(h) if h >= n => {
                    return Err(Error::Validation(format!("token {i} has head {h} outside 0..{n}")))
                }
                Some(h) if h == i => return Err(Error::Validation(format!("token {i} heads itself"))),
                _ => {}
            }
        }
        // Every token must reach the root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = heads[cur] {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(Error::Validation(format!("cycle through token {start}")));
                }
            }
        }
        Ok(Self { heads, labels })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn root(&self) -> usize {
        self.heads.iter().position(Option::is_none).expect("validated tree has a root")
    }

    /// Undirected neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for (i, h) in self.heads.iter().enumerate() {
            if let Some(h) = *h {
                adj[i].push(h);
                adj[h].push(i);
            }
        }
        adj
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub tree: DependencyTree,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, tree: DependencyTree) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Validation("sentence has no tokens".into()));
        }
        if tree.len() != tokens.len() {
            return Err(Error::Validation(format!(
                "tree covers {} tokens, sentence has {}",
                tree.len(),
                tokens.len()
            )));
        }
        check_bio(tokens.iter().map(|t| t.entity_tag.as_str()), "entity")?;
        check_bio(tokens.iter().map(|t| t.chunk_tag.as_str()), "chunk")?;
        Ok(Self { tokens, tree })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// `I-X` may only continue a `B-X` or `I-X`.
fn check_bio<'a>(tags: impl Iterator<Item = &'a str>, kind: &str) -> Result<()> {
    let mut prev: Option<&str> = None;
    for (i, tag) in tags.enumerate() {
        if tag == "O" {
            prev = None;
            continue;
        }
        let (prefix, ty) = tag
            .split_once('-')
            .ok_or_else(|| Error::Validation(format!("{kind} tag {tag:?} at {i} is not BIO")))?;
        match prefix {
            "B" => prev = Some(ty),
            "I" if prev == Some(ty) => {}
            "I" => {
                return Err(Error::Validation(format!(
                    "{kind} tag {tag:?} at {i} does not continue a {ty} span"
                )))
            }
            _ => return Err(Error::Validation(format!("{kind} tag {tag:?} at {i} is not BIO"))),
        }
    }
    Ok(())
}

/// One relation mention: a sentence, two token indices and the gold label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationInstance {
    pub sentence: Sentence,
    pub s: usize,
    pub o: usize,
    pub label: String,
    pub domain: String,
}

impl RelationInstance {
    pub fn new(sentence: Sentence, s: usize, o: usize, label: impl Into<String>, domain: impl Into<String>) -> Result<Self> {
        let n = sentence.len();
        if s >= n || o >= n {
            return Err(Error::Validation(format!("mention index out of range: s={s}, o={o}, n={n}")));
        }
        if s == o {
            return Err(Error::Validation(format!("s and o are both {s}")));
        }
        Ok(Self { sentence, s, o, label: label.into(), domain: domain.into() })
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }
}

/// Validated instances plus the sorted label inventories they use.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub instances: Vec<RelationInstance>,
    pub labels: Vec<String>,
    pub dep_labels: Vec<String>,
}

impl Corpus {
    pub fn new(instances: Vec<RelationInstance>) -> Self {
        let labels: BTreeSet<&str> = instances.iter().map(|i| i.label.as_str()).collect();
        let dep_labels: BTreeSet<&str> = instances
            .iter()
            .flat_map(|i| i.sentence.tree.labels().iter().map(String::as_str))
            .collect();
        Self {
            labels: labels.into_iter().map(String::from).collect(),
            dep_labels: dep_labels.into_iter().map(String::from).collect(),
            instances,
        }
    }

    /// Number of instances.
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    /// Instances whose `domain` equals `domain`.
    pub fn filter_domain(&self, domain: &str) -> Corpus {
        Corpus::new(self.instances.iter().filter(|i| i.domain == domain).cloned().collect())
    }
}
