//! Single-head self-attention: `h'_i = sum_j softmax_j(q_i . k_j) v_j`.

use rand::Rng;

use crate::error::Result;
use crate::numerics::{ParamId, ParamStore, Tape, Var};

/// Key, query and value projections, each stored `dim(h) x d_a` so that a
/// row of `H` times the matrix gives the projected row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttnParams {
    pub w_k: ParamId,
    pub w_q: ParamId,
    pub w_v: ParamId,
}

impl AttnParams {
    pub fn init(store: &mut ParamStore, input_dim: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (input_dim + dim) as f64).sqrt();
        let mut mk = |name: &str| store.add(name, crate::encoder::uniform(rng, &[input_dim, dim], limit));
        Self { w_k: mk("attn.w_k"), w_q: mk("attn.w_q"), w_v: mk("attn.w_v") }
    }
}

/// Attention output `H'` (`n x d_a`) and weight matrix (`n x n`, row `i` is
/// the distribution of token `i` over all tokens, itself included).
#[derive(Clone, Copy, Debug)]
pub struct AttnOutput {
    pub states: Var,
    pub weights: Var,
}

/// Logits are the raw dot products `q_i . k_j`; `scaled` divides them by
/// `sqrt(d_a)`.
pub fn self_attention(tape: &mut Tape, store: &ParamStore, p: &AttnParams, h: Var, scaled: bool) -> Result<AttnOutput> {
    let w_k = tape.param(store, p.w_k);
    let w_q = tape.param(store, p.w_q);
    let w_v = tape.param(store, p.w_v);
    let k = tape.matmul(h, w_k)?;
    let q = tape.matmul(h, w_q)?;
    let v = tape.matmul(h, w_v)?;
    attend(tape, q, k, v, scaled)
}

/// Attention given already-projected queries, keys and values.
pub fn attend(tape: &mut Tape, q: Var, k: Var, v: Var, scaled: bool) -> Result<AttnOutput> {
    let kt = tape.transpose(k);
    let mut logits = tape.matmul(q, kt)?;
    if scaled {
        let d = tape.value(k).cols() as f64;
        logits = tape.scale(logits, 1.0 / d.sqrt());
    }
    let weights = tape.softmax_rows(logits);
    let states = tape.matmul(weights, v)?;
    Ok(AttnOutput { states, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::matrix(rows).unwrap()
    }

    #[test]
    fn singleton_attends_to_itself() {
        let mut tape = Tape::new();
        let q = tape.constant(m(&[vec![0.3, -0.2]]));
        let k = tape.constant(m(&[vec![1.5, 0.7]]));
        let v = tape.constant(m(&[vec![4.0, 5.0]]));
        let out = attend(&mut tape, q, k, v, false).unwrap();
        assert_eq!(tape.value(out.weights).data(), &[1.0]);
        assert_eq!(tape.value(out.states).data(), &[4.0, 5.0]);
    }

    #[test]
    fn equal_logits_give_uniform_rows_and_mean_values() {
        let mut tape = Tape::new();
        let q = tape.constant(m(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]));
        let k = tape.constant(m(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]));
        let v = tape.constant(m(&[vec![1.0, 0.0], vec![2.0, 3.0], vec![6.0, 3.0]]));
        let out = attend(&mut tape, q, k, v, false).unwrap();
        for &w in tape.value(out.weights).data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        for i in 0..3 {
            let row = tape.value(out.states).row(i);
            assert!((row[0] - 3.0).abs() < 1e-12 && (row[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_one_row() {
        let mut tape = Tape::new();
        let q = tape.constant(m(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let k = tape.constant(m(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let v = tape.constant(m(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
        let out = attend(&mut tape, q, k, v, false).unwrap();
        let row = tape.value(out.weights).row(0);
        assert!((row[0] - 0.731_058_578_630_004_9).abs() < 1e-9);
        assert!((row[1] - 0.268_941_421_369_995_1).abs() < 1e-9);
    }

    #[test]
    fn scaling_divides_logits() {
        let mut tape = Tape::new();
        let q = tape.constant(m(&[vec![2.0, 0.0, 0.0, 0.0]]));
        let k = tape.constant(m(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0]]));
        let v = tape.constant(m(&[vec![1.0], vec![0.0]]));
        let out = attend(&mut tape, q, k, v, true).unwrap();
        // logits [2, 0] / sqrt(4) = [1, 0]
        assert!((tape.value(out.weights).row(0)[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }
}
