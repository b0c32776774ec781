//! Entity-conditioned gating of the token representations.
//!
//! `p = relu(W_p [h_s ; h_o])` filters every `h_i`; scores `W_a (p * h_i)`
//! give pooling weights `alpha` for `m = sum_i alpha_i h_i`; and
//! `c = relu(W_c [m ; h_s ; h_o])` gates every attention state `h'_i`.

use rand::Rng;

use crate::encoder::uniform;
use crate::error::Result;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlParams {
    /// `2 dim(h) x dim(h)`
    pub w_p: ParamId,
    pub b_p: ParamId,
    /// `dim(h) x 1`. A bias here would cancel in the softmax, so there is none.
    pub w_alpha: ParamId,
    /// `(dim(m) + 2 dim(h)) x d_a`
    pub w_c: ParamId,
    pub b_c: ParamId,
}

impl ControlParams {
    pub fn init(store: &mut ParamStore, h_dim: usize, gate_dim: usize, rng: &mut impl Rng) -> Self {
        let glorot = |i: usize, o: usize| (6.0 / (i + o) as f64).sqrt();
        Self {
            w_p: store.add("ctl.w_p", uniform(rng, &[2 * h_dim, h_dim], glorot(2 * h_dim, h_dim))),
            b_p: store.add("ctl.b_p", Tensor::zeros(&[h_dim])),
            w_alpha: store.add("ctl.w_alpha", uniform(rng, &[h_dim, 1], glorot(h_dim, 1))),
            w_c: store.add("ctl.w_c", uniform(rng, &[3 * h_dim, gate_dim], glorot(3 * h_dim, gate_dim))),
            b_c: store.add("ctl.b_c", Tensor::zeros(&[gate_dim])),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Filtered {
    /// `1 x dim(h)` control vector.
    pub p: Var,
    /// `n x dim(h)`, row `i` is `p * h_i`.
    pub h_bar: Var,
}

pub fn control_filter(tape: &mut Tape, store: &ParamStore, cp: &ControlParams, h: Var, s: usize, o: usize) -> Result<Filtered> {
    let hs = tape.row(h, s)?;
    let ho = tape.row(h, o)?;
    let x = tape.concat(&[hs, ho], 1)?;
    let w = tape.param(store, cp.w_p);
    let b = tape.param(store, cp.b_p);
    let pre = tape.matmul(x, w)?;
    let pre = tape.add(pre, b)?;
    let p = tape.relu(pre);
    let h_bar = tape.mul(h, p)?;
    Ok(Filtered { p, h_bar })
}

#[derive(Clone, Copy, Debug)]
pub struct Gated {
    /// `1 x n` pooling weights.
    pub alpha: Var,
    /// `1 x dim(h)` pooled summary.
    pub m: Var,
    /// `1 x d_a` control vector for the attention states.
    pub c: Var,
    /// `n x d_a`, row `i` is `c * h'_i`.
    pub gated: Var,
}

/// Pooling weights come from the filtered rows `h_bar`; the pooled rows are
/// the unfiltered `h` unless `pool_filtered` is set.
#[allow(clippy::too_many_arguments)]
pub fn control_gate(
    tape: &mut Tape,
    store: &ParamStore,
    cp: &ControlParams,
    h: Var,
    h_bar: Var,
    h_prime: Var,
    s: usize,
    o: usize,
    pool_filtered: bool,
) -> Result<Gated> {
    let w_alpha = tape.param(store, cp.w_alpha);
    let scores = tape.matmul(h_bar, w_alpha)?;
    let scores = tape.transpose(scores);
    let alpha = tape.softmax_rows(scores);
    let pooled = if pool_filtered { h_bar } else { h };
    let m = tape.matmul(alpha, pooled)?;
    let hs = tape.row(h, s)?;
    let ho = tape.row(h, o)?;
    let x = tape.concat(&[m, hs, ho], 1)?;
    let w_c = tape.param(store, cp.w_c);
    let b_c = tape.param(store, cp.b_c);
    let pre = tape.matmul(x, w_c)?;
    let pre = tape.add(pre, b_c)?;
    let c = tape.relu(pre);
    let gated = tape.mul(h_prime, c)?;
    Ok(Gated { alpha, m, c, gated })
}
