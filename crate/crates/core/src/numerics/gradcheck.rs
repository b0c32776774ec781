use serde::Serialize;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Outcome for one parameter tensor.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    /// Largest `|analytic - numeric| / max(1, |numeric|)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose finite-difference stencil straddles a relu or max kink.
    pub skipped: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }
}

fn evaluate<F>(store: &ParamStore, f: &F) -> Result<(f64, Vec<i64>)>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(store, &mut tape)?;
    let value = tape.value(out);
    if value.len() != 1 {
        return Err(Error::Precondition(format!(
            "grad_check objective must be scalar, got {:?}",
            value.shape()
        )));
    }
    Ok((value.item(), tape.kink_signature()))
}

/// Compares reverse-mode gradients of `f` with central differences for every
/// coordinate of the parameters in `ids`.
pub fn grad_check<F>(store: &ParamStore, ids: &[ParamId], step: f64, tol: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(store, &mut tape)?;
    let base_sig = tape.kink_signature();
    let grads = tape.backward(loss)?;

    let mut work = store.clone();
    let mut params = Vec::with_capacity(ids.len());
    for &id in ids {
        let name = store.name(id).to_string();
        let analytic = grads.dense(id, store);
        let mut max_rel = 0.0f64;
        let (mut checked, mut skipped) = (0, 0);
        for k in 0..analytic.len() {
            let orig = work.values_mut(id)[k];
            work.values_mut(id)[k] = orig + step;
            let (plus, plus_sig) = evaluate(&work, &f)?;
            work.values_mut(id)[k] = orig - step;
            let (minus, minus_sig) = evaluate(&work, &f)?;
            work.values_mut(id)[k] = orig;

            if !plus.is_finite() || !minus.is_finite() || !analytic[k].is_finite() {
                return Err(Error::NonFinite(format!("{name}[{k}] during gradient check")));
            }
            if plus_sig != minus_sig || plus_sig != base_sig {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            let rel = (analytic[k] - numeric).abs() / numeric.abs().max(1.0);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
        params.push(ParamCheck { name, max_rel_error: max_rel, checked, skipped, passed: max_rel <= tol });
    }
    Ok(GradCheckReport { step, tol, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn linear_function_passes() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.7, -1.3]));
        let report = grad_check(&store, &[w], 1e-5, 1e-4, |s, tape| {
            let wv = tape.param(s, w);
            let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
            let p = tape.mul(wv, x)?;
            Ok(tape.sum(p))
        })
        .unwrap();
        assert!(report.passed());
        assert!(report.params[0].max_rel_error < 1e-8);
        assert_eq!(report.params[0].checked, 2);
    }

    #[test]
    fn relu_kink_coordinate_is_skipped() {
        let mut store = ParamStore::new();
        // w . x = 0 exactly: relu sits on its kink.
        let w = store.add("w", Tensor::vector(vec![1.0, -0.5]));
        let report = grad_check(&store, &[w], 1e-5, 1e-4, |s, tape| {
            let wv = tape.param(s, w);
            let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
            let p = tape.mul(wv, x)?;
            let z = tape.sum(p);
            let r = tape.relu(z);
            Ok(tape.sum(r))
        })
        .unwrap();
        assert_eq!(report.params[0].skipped, 2);
        assert_eq!(report.params[0].checked, 0);
        assert!(report.passed());
    }

    #[test]
    fn nan_is_reported_with_parameter_name() {
        let mut store = ParamStore::new();
        let w = store.add("weights", Tensor::vector(vec![f64::NAN]));
        let err = grad_check(&store, &[w], 1e-5, 1e-4, |s, tape| {
            let wv = tape.param(s, w);
            Ok(tape.sum(wv))
        })
        .unwrap_err();
        assert!(err.to_string().contains("weights"), "{err}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.3]));
        // Tight tolerance on a curved function: truncation error alone fails 1e-12.
        let report = grad_check(&store, &[w], 1e-2, 1e-12, |s, tape| {
            let wv = tape.param(s, w);
            let e = tape.exp(wv);
            Ok(tape.sum(e))
        })
        .unwrap();
        assert!(!report.passed());
    }
}
