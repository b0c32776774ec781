use std::collections::VecDeque;

use super::DependencyTree;
use crate::error::{Error, Result};

/// Symmetric 0/1 edge matrix of a dependency tree (`n x n`, row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyTarget {
    n: usize,
    a: Vec<f64>,
}

impl AdjacencyTarget {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Row-major entries.
    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn ones(&self) -> usize {
        self.a.iter().filter(|&&v| v == 1.0).count()
    }
}

/// `a[i][j] = a[j][i] = 1` iff one token heads the other; diagonal zero.
pub fn adjacency_from_tree(tree: &DependencyTree) -> AdjacencyTarget {
    let n = tree.len();
    let mut a = vec![0.0; n * n];
    for (i, h) in tree.heads().iter().enumerate() {
        if let Some(h) = *h {
            a[i * n + h] = 1.0;
            a[h * n + i] = 1.0;
        }
    }
    AdjacencyTarget { n, a }
}

/// Indicator of the tokens on the undirected tree path from `s` to `o`,
/// endpoints included.
pub fn path_flags(tree: &DependencyTree, s: usize, o: usize) -> Vec<f64> {
    let n = tree.len();
    let adj = tree.neighbors();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = queue.pop_front() {
        if u == o {
            break;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut flags = vec![0.0; n];
    let mut cur = o;
    flags[cur] = 1.0;
    while cur != s {
        cur = parent[cur];
        flags[cur] = 1.0;
    }
    flags
}

/// Row `i` has a one at relation `r` iff token `i` is an endpoint (head or
/// dependent) of an edge labeled `r`. The root's attachment to ROOT is not
/// an edge between words and sets nothing.
pub fn dep_relation_multihot(tree: &DependencyTree, dep_labels: &[String]) -> Result<Vec<Vec<f64>>> {
    let n = tree.len();
    let mut rows = vec![vec![0.0; dep_labels.len()]; n];
    for i in 0..n {
        let label = tree.label(i);
        let r = dep_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Validation(format!("unknown dependency relation {label:?}")))?;
        if let Some(h) = tree.head(i) {
            rows[i][r] = 1.0;
            rows[h][r] = 1.0;
        }
    }
    Ok(rows)
}
