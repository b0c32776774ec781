//! Aggregation vector, relation distribution and the combined objective.

use rand::Rng;

use crate::encoder::uniform;
use crate::error::{Error, Result};
use crate::numerics::{softmax, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierParams {
    /// `dim(o) x d_ff`
    pub w_1: ParamId,
    pub b_1: ParamId,
    /// `d_ff x K`
    pub w_2: ParamId,
    pub b_2: ParamId,
}

impl ClassifierParams {
    pub fn init(store: &mut ParamStore, input_dim: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let glorot = |i: usize, o: usize| (6.0 / (i + o) as f64).sqrt();
        Self {
            w_1: store.add("cls.w_1", uniform(rng, &[input_dim, hidden], glorot(input_dim, hidden))),
            b_1: store.add("cls.b_1", Tensor::zeros(&[hidden])),
            w_2: store.add("cls.w_2", uniform(rng, &[hidden, classes], glorot(hidden, classes))),
            b_2: store.add("cls.b_2", Tensor::zeros(&[classes])),
        }
    }
}

/// `o = [h_s ; h_o ; g_s ; g_o ; max_i g_i]` where `g` are the gated states.
pub fn aggregate(tape: &mut Tape, h: Var, gated: Var, s: usize, o: usize) -> Result<Var> {
    let hs = tape.row(h, s)?;
    let ho = tape.row(h, o)?;
    let gs = tape.row(gated, s)?;
    let go = tape.row(gated, o)?;
    let pooled = tape.max_rows(gated);
    tape.concat(&[hs, ho, gs, go, pooled], 1)
}

/// Logits `W_2 (W_1 o + b_1) + b_2`; `hidden_relu` inserts a relu between
/// the two layers.
pub fn logits(tape: &mut Tape, store: &ParamStore, p: &ClassifierParams, o: Var, hidden_relu: bool) -> Result<Var> {
    let w1 = tape.param(store, p.w_1);
    let b1 = tape.param(store, p.b_1);
    let w2 = tape.param(store, p.w_2);
    let b2 = tape.param(store, p.b_2);
    let z1 = tape.matmul(o, w1)?;
    let mut hidden = tape.add(z1, b1)?;
    if hidden_relu {
        hidden = tape.relu(hidden);
    }
    let z2 = tape.matmul(hidden, w2)?;
    tape.add(z2, b2)
}

/// Relation distribution with its argmax (lowest index wins ties).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub probs: Vec<f64>,
    pub label: usize,
}

impl PredictionResult {
    pub fn from_logits(logits: &[f64]) -> Self {
        let probs = softmax(logits);
        Self { label: argmax(&probs), probs }
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `-log P(y)`.
pub fn label_loss(probs: &[f64], y: usize) -> Result<f64> {
    let p = *probs
        .get(y)
        .ok_or_else(|| Error::Precondition(format!("label index {y} outside {} classes", probs.len())))?;
    Ok(-p.ln())
}

/// `L_label + lambda * L_dep`; with `lambda == 0` the label loss is returned
/// unchanged.
pub fn total_loss(label: f64, dep: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::Precondition(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(if lambda == 0.0 { label } else { label + lambda * dep })
}

/// Tape version of [`total_loss`]; `dep` is `None` when the dependency head
/// is disabled.
pub fn total_loss_on_tape(tape: &mut Tape, label: Var, dep: Option<Var>, lambda: f64) -> Result<Var> {
    match dep {
        Some(d) if lambda != 0.0 => {
            let weighted = tape.scale(d, lambda);
            tape.add(label, weighted)
        }
        _ => Ok(label),
    }
}
