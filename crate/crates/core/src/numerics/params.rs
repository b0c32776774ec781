use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to one named trainable tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor; names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(self.id_of(&name).is_none(), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let old = &self.tensors[id.0];
        if old.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter {} has shape {:?}, new value {:?}",
                self.names[id.0],
                old.shape(),
                value.shape()
            )));
        }
        self.tensors[id.0] = value;
        Ok(())
    }

    /// Mutable view of a parameter's values (optimizer updates, perturbation).
    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.tensors[id.0].data_mut()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Gradient buffer for one parameter. Embedding lookups touch few rows of
/// large tables, so those gradients stay row-sparse until densified.
#[derive(Clone, Debug, PartialEq)]
pub enum Grad {
    Dense(Vec<f64>),
    Rows { cols: usize, rows: BTreeMap<usize, Vec<f64>> },
}

impl Grad {
    fn add_scaled(&mut self, other: &Grad, scale: f64) {
        match (self, other) {
            (Grad::Dense(a), Grad::Dense(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += scale * y;
                }
            }
            (Grad::Dense(a), Grad::Rows { cols, rows }) => {
                for (&r, vals) in rows {
                    for (x, y) in a[r * cols..(r + 1) * cols].iter_mut().zip(vals) {
                        *x += scale * y;
                    }
                }
            }
            (Grad::Rows { rows: a, .. }, Grad::Rows { cols, rows: b }) => {
                for (&r, vals) in b {
                    let dst = a.entry(r).or_insert_with(|| vec![0.0; *cols]);
                    for (x, y) in dst.iter_mut().zip(vals) {
                        *x += scale * y;
                    }
                }
            }
            (this @ Grad::Rows { .. }, Grad::Dense(b)) => {
                let mut dense = this.to_dense(b.len());
                for (x, y) in dense.iter_mut().zip(b) {
                    *x += scale * y;
                }
                *this = Grad::Dense(dense);
            }
        }
    }

    /// Dense copy with `len` total values.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        match self {
            Grad::Dense(v) => v.clone(),
            Grad::Rows { cols, rows } => {
                let mut out = vec![0.0; len];
                for (&r, vals) in rows {
                    out[r * cols..(r + 1) * cols].copy_from_slice(vals);
                }
                out
            }
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Grad::Dense(v) => Box::new(v.iter().copied()),
            Grad::Rows { rows, .. } => Box::new(rows.values().flat_map(|r| r.iter().copied())),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Grad::Dense(v) => v.iter_mut().for_each(|x| *x *= s),
            Grad::Rows { rows, .. } => {
                rows.values_mut().flat_map(|r| r.iter_mut()).for_each(|x| *x *= s)
            }
        }
    }
}

/// Gradients keyed by parameter. Parameters the loss never reached have no
/// entry; [`Gradients::dense`] reports them as zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    entries: BTreeMap<ParamId, (usize, Grad)>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_dense(&mut self, id: ParamId, len: usize, values: &[f64], scale: f64) {
        let g = Grad::Dense(values.to_vec());
        self.merge_one(id, len, &g, scale);
    }

    pub(crate) fn add_row(&mut self, id: ParamId, len: usize, cols: usize, row: usize, values: &[f64], scale: f64) {
        let mut rows = BTreeMap::new();
        rows.insert(row, values.to_vec());
        self.merge_one(id, len, &Grad::Rows { cols, rows }, scale);
    }

    fn merge_one(&mut self, id: ParamId, len: usize, g: &Grad, scale: f64) {
        match self.entries.get_mut(&id) {
            Some((_, existing)) => existing.add_scaled(g, scale),
            None => {
                let mut fresh = g.clone();
                if scale != 1.0 {
                    fresh.scale(scale);
                }
                self.entries.insert(id, (len, fresh));
            }
        }
    }

    /// `self += scale * other`
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (&id, (len, g)) in &other.entries {
            self.merge_one(id, *len, g, scale);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, g) in self.entries.values_mut() {
            g.scale(s);
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Grad> {
        self.entries.get(&id).map(|(_, g)| g)
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.entries.contains_key(&id)
    }

    /// Dense gradient for `id`, zeros if the parameter was not reached.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Vec<f64> {
        let len = store.get(id).len();
        match self.entries.get(&id) {
            Some((_, g)) => g.to_dense(len),
            None => vec![0.0; len],
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.entries.keys().copied()
    }

    pub fn global_norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|(_, g)| g.values())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// First parameter holding a non-finite gradient value.
    pub fn first_non_finite(&self) -> Option<ParamId> {
        self.entries
            .iter()
            .find(|(_, (_, g))| g.values().any(|v| !v.is_finite()))
            .map(|(&id, _)| id)
    }

    pub fn max_abs(&self, id: ParamId) -> f64 {
        self.entries
            .get(&id)
            .map(|(_, g)| g.values().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0)
    }
}
