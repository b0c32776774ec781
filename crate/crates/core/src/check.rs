//! Finite-difference check of the whole model on a tiny synthesized instance.

use serde::Serialize;

use crate::corpus::{Corpus, DependencyTree, RelationInstance, Sentence, Token, NONE_LABEL};
use crate::encoder::Vocabularies;
use crate::error::Result;
use crate::model::{Ablation, Model, ModelConfig, PARAM_GROUPS};
use crate::numerics::{grad_check, ParamCheck};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct GroupCheck {
    pub group: String,
    pub max_rel_error: f64,
    pub passed: bool,
    pub params: Vec<ParamCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelGradCheck {
    pub ablation: Ablation,
    pub step: f64,
    pub tol: f64,
    pub lambda: f64,
    pub groups: Vec<GroupCheck>,
}

impl ModelGradCheck {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }
}

/// Model dims for the check: word 8, LSTM hidden 6, attention 6.
pub fn toy_config() -> ModelConfig {
    let mut c = ModelConfig::default();
    c.features.word_dim = 8;
    c.features.position_dim = 4;
    c.features.entity_tag_dim = 3;
    c.features.chunk_tag_dim = 3;
    c.features.position_clip = 4;
    c.lstm_hidden = 6;
    c.attn_dim = 6;
    c.dep_hidden = 6;
    c.ff_hidden = 6;
    c
}

fn tok(form: &str, entity: &str, chunk: &str) -> Token {
    Token { form: form.into(), entity_tag: entity.into(), chunk_tag: chunk.into() }
}

/// "Ann heads the Acme": a four-token sentence with a relation between the
/// first and last token.
pub fn toy_instance() -> RelationInstance {
    let tokens = vec![tok("Ann", "B-PER", "B-NP"), tok("heads", "O", "B-VP"), tok("the", "O", "B-NP"), tok("Acme", "B-ORG", "I-NP")];
    let tree = DependencyTree::new(
        vec![Some(1), None, Some(3), Some(1)],
        ["nsubj", "root", "det", "dobj"].map(String::from).to_vec(),
    )
    .expect("toy tree is valid");
    let sentence = Sentence::new(tokens, tree).expect("toy sentence is valid");
    RelationInstance::new(sentence, 0, 3, "Leads", "toy").expect("toy instance is valid")
}

fn toy_vocab(inst: &RelationInstance) -> Vocabularies {
    let mut other = inst.clone();
    other.label = NONE_LABEL.into();
    Vocabularies::from_corpus(&Corpus::new(vec![inst.clone(), other]))
}

/// Checks the total loss gradient of every live parameter group.
pub fn check_model_gradients(ablation: Ablation, lambda: f64, step: f64, tol: f64, seed: u64) -> Result<ModelGradCheck> {
    let inst = toy_instance();
    let model = Model::new(toy_config().with_ablation(ablation), toy_vocab(&inst), None, seed)?;
    let mut groups = Vec::new();
    for group in PARAM_GROUPS {
        let ids = model.group_ids(group);
        if ids.is_empty() {
            continue;
        }
        let report = grad_check(&model.store, &ids, step, tol, |store, tape| {
            Ok(model.loss_on_tape(tape, store, &inst, lambda)?.total)
        })?;
        let max_rel_error = report.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
        groups.push(GroupCheck { group: group.into(), max_rel_error, passed: report.passed(), params: report.params });
    }
    Ok(ModelGradCheck { ablation, step, tol, lambda, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_model_passes() {
        let r = check_model_gradients(Ablation::Full, 0.01, DEFAULT_STEP, DEFAULT_TOL, 1).unwrap();
        let names: Vec<_> = r.groups.iter().map(|g| g.group.as_str()).collect();
        assert_eq!(names, PARAM_GROUPS);
        for g in &r.groups {
            assert!(g.passed, "{} max rel error {}", g.group, g.max_rel_error);
        }
    }

    #[test]
    fn ablated_model_checks_only_live_groups() {
        let r = check_model_gradients(Ablation::NoSaDpCm, 0.01, DEFAULT_STEP, DEFAULT_TOL, 1).unwrap();
        let names: Vec<_> = r.groups.iter().map(|g| g.group.as_str()).collect();
        assert_eq!(names, ["emb", "lstm", "cls"]);
        assert!(r.passed());
    }

    #[test]
    fn impossible_tolerance_fails() {
        let r = check_model_gradients(Ablation::Full, 0.01, DEFAULT_STEP, 1e-12, 1).unwrap();
        assert!(!r.passed());
    }
}
