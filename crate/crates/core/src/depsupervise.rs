//! All-pairs dependency-edge head and its auxiliary loss.
//!
//! For every ordered pair `(i, j)`, diagonal included,
//! `a_hat[i][j] = sigmoid(W_d2 g(W_d1 [h'_i ; h'_j] + b_d1) + b_d2)`.
//! The first-layer product splits as `U1 h'_i + U2 h'_j`, so both halves are
//! computed once per token and summed per pair.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::AdjacencyTarget;
use crate::encoder::uniform;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepHeadParams {
    /// `2 d_a x d_g`; rows `0..d_a` act on `h'_i`, the rest on `h'_j`.
    pub w_d1: ParamId,
    pub b_d1: ParamId,
    /// `d_g x 1`
    pub w_d2: ParamId,
    pub b_d2: ParamId,
    pub activation: Activation,
}

impl DepHeadParams {
    pub fn init(store: &mut ParamStore, input_dim: usize, hidden: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let l1 = (6.0 / (2 * input_dim + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        Self {
            w_d1: store.add("dep.w_d1", uniform(rng, &[2 * input_dim, hidden], l1)),
            b_d1: store.add("dep.b_d1", Tensor::zeros(&[hidden])),
            w_d2: store.add("dep.w_d2", uniform(rng, &[hidden, 1], l2)),
            b_d2: store.add("dep.b_d2", Tensor::zeros(&[1])),
            activation,
        }
    }
}

/// Edge logits for all ordered pairs as an `n*n x 1` column; row
/// `i*n + j` belongs to pair `(i, j)`.
pub fn edge_logits(tape: &mut Tape, store: &ParamStore, p: &DepHeadParams, h_prime: Var) -> Result<Var> {
    let d = tape.value(h_prime).cols();
    let w1 = tape.param(store, p.w_d1);
    if tape.value(w1).rows() != 2 * d {
        return Err(Error::Shape(format!(
            "dep head expects inputs of width {}, got {d}",
            tape.value(w1).rows() / 2
        )));
    }
    let u1 = tape.slice_rows(w1, 0, d)?;
    let u2 = tape.slice_rows(w1, d, d)?;
    let b1 = tape.param(store, p.b_d1);
    let left = tape.matmul(h_prime, u1)?;
    let left = tape.add(left, b1)?;
    let right = tape.matmul(h_prime, u2)?;
    let pre = tape.pairwise_add(left, right)?;
    let act = match p.activation {
        Activation::Tanh => tape.tanh(pre),
        Activation::Relu => tape.relu(pre),
    };
    let w2 = tape.param(store, p.w_d2);
    let b2 = tape.param(store, p.b_d2);
    let z = tape.matmul(act, w2)?;
    tape.add(z, b2)
}

/// `n x n` matrix of edge probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProbMatrix {
    n: usize,
    probs: Vec<f64>,
}

impl EdgeProbMatrix {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n * n {
            return Err(Error::Shape(format!("{} probabilities for n = {n}", probs.len())));
        }
        Ok(Self { n, probs })
    }

    pub fn from_logits(n: usize, logits: &[f64]) -> Result<Self> {
        Self::new(n, logits.iter().map(|&z| crate::numerics::sigmoid(z)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Fraction of pairs where `a_hat >= 0.5` agrees with the target.
    pub fn pair_accuracy(&self, target: &AdjacencyTarget) -> f64 {
        let hits = self
            .probs
            .iter()
            .zip(target.values())
            .filter(|(&p, &a)| (p >= 0.5) == (a == 1.0))
            .count();
        hits as f64 / self.probs.len() as f64
    }
}

/// Negative log-likelihood of the adjacency under independent Bernoulli
/// edges, summed over all `n^2` ordered pairs. Always `>= 0`.
pub fn dep_loss(probs: &EdgeProbMatrix, target: &AdjacencyTarget) -> Result<f64> {
    if probs.n() != target.n() {
        return Err(Error::Shape(format!("{} x {} probabilities vs {} x {} target", probs.n, probs.n, target.n(), target.n())));
    }
    let mut total = 0.0;
    for (&p, &a) in probs.values().iter().zip(target.values()) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("edge probability {p} outside (0, 1)")));
        }
        total -= a * p.ln() + (1.0 - a) * (1.0 - p).ln();
    }
    Ok(total)
}

/// Same loss on a tape, computed from logits for stability.
pub fn dep_loss_on_tape(tape: &mut Tape, logits: Var, target: &AdjacencyTarget) -> Result<Var> {
    tape.bce_with_logits(logits, target.values())
}
