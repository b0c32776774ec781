//! Browser bindings: generate a synthetic sentence, train a tiny model one
//! epoch at a time, and inspect its attention, edge and control weights.
//! Results cross the boundary as JSON strings.

use drpc::corpus::{adjacency_from_tree, generate_synthetic, Corpus, RelationInstance, SynthSpec};
use drpc::model::{Ablation, ModelConfig};
use drpc::training::{TrainConfig, Trainer};
use serde::Serialize;
use wasm_bindgen::prelude::*;

// Logic returns `String` errors so it can run in native tests, where
// constructing a `JsError` is not possible.
type Res<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn js<T>(r: Res<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn to_json(v: &impl Serialize) -> Res<String> {
    serde_json::to_string(v).map_err(err)
}

#[derive(Serialize)]
struct SentenceView {
    tokens: Vec<String>,
    entity_tags: Vec<String>,
    heads: Vec<Option<usize>>,
    deprels: Vec<String>,
    s: usize,
    o: usize,
    label: String,
    adjacency: Vec<Vec<f64>>,
}

impl SentenceView {
    fn new(inst: &RelationInstance) -> Self {
        let sent = &inst.sentence;
        Self {
            tokens: sent.tokens.iter().map(|t| t.form.clone()).collect(),
            entity_tags: sent.tokens.iter().map(|t| t.entity_tag.clone()).collect(),
            heads: sent.tree.heads().to_vec(),
            deprels: sent.tree.labels().to_vec(),
            s: inst.s,
            o: inst.o,
            label: inst.label.clone(),
            adjacency: adjacency_from_tree(&sent.tree).to_rows(),
        }
    }
}

/// One synthetic instance with its tree and adjacency matrix.
#[wasm_bindgen]
pub fn synth_sentence(seed: u32, locality: f64) -> Result<String, JsError> {
    js(sentence_json(seed, locality))
}

fn sentence_json(seed: u32, locality: f64) -> Res<String> {
    let spec = SynthSpec { count: 1, locality, ..SynthSpec::default() };
    let corpus = generate_synthetic(&spec, u64::from(seed)).map_err(err)?;
    to_json(&SentenceView::new(&corpus.instances[0]))
}

fn demo_model_config() -> ModelConfig {
    let mut c = ModelConfig::default();
    c.features.word_dim = 16;
    c.features.position_dim = 8;
    c.features.entity_tag_dim = 4;
    c.features.chunk_tag_dim = 4;
    c.features.position_clip = 20;
    c.lstm_hidden = 12;
    c.attn_dim = 24;
    c.dep_hidden = 24;
    c.ff_hidden = 24;
    c
}

#[derive(Serialize)]
struct Inspection {
    sentence: SentenceView,
    attention: Option<Vec<Vec<f64>>>,
    edge_probs: Option<Vec<Vec<f64>>>,
    alpha: Option<Vec<f64>>,
    labels: Vec<String>,
    probs: Vec<f64>,
    predicted: String,
}

/// A small model trained on a synthetic corpus in the page.
#[wasm_bindgen]
pub struct Demo {
    trainer: Trainer,
    dev: Corpus,
}

#[wasm_bindgen]
impl Demo {
    /// `ablation` is one of full, no_CM, no_DP_CM, no_SA_DP_CM.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, train_size: usize, ablation: &str) -> Result<Demo, JsError> {
        js(Self::build(seed, train_size, ablation))
    }

    /// Trains one epoch and returns its log entry.
    pub fn train_epoch(&mut self) -> Result<String, JsError> {
        js(self.step())
    }

    pub fn dev_size(&self) -> usize {
        self.dev.len()
    }

    /// Forward pass on dev instance `index`.
    pub fn inspect(&self, index: usize) -> Result<String, JsError> {
        js(self.inspection(index))
    }
}

impl Demo {
    fn build(seed: u32, train_size: usize, ablation: &str) -> Res<Demo> {
        let ablation: Ablation = ablation.parse().map_err(err)?;
        let spec = SynthSpec { count: train_size + 100, ..SynthSpec::default() };
        let all = generate_synthetic(&spec, u64::from(seed)).map_err(err)?;
        let dev = Corpus::new(all.instances[train_size..].to_vec());
        let train = Corpus::new(all.instances[..train_size].to_vec());
        let config = TrainConfig { lr: 1e-2, batch_size: 25, seed: u64::from(seed), ablation: Some(ablation), ..TrainConfig::default() };
        let trainer = Trainer::new(&train, Some(&dev), &demo_model_config(), &config, None).map_err(err)?;
        Ok(Demo { trainer, dev })
    }

    fn step(&mut self) -> Res<String> {
        to_json(&self.trainer.run_epoch().map_err(err)?)
    }

    fn inspection(&self, index: usize) -> Res<String> {
        let inst = self.dev.instances.get(index).ok_or_else(|| format!("no dev instance {index}"))?;
        let model = self.trainer.model();
        let trace = model.predict_instance(inst).map_err(err)?;
        to_json(&Inspection {
            sentence: SentenceView::new(inst),
            attention: trace.attn_weights,
            edge_probs: trace.edge_probs.map(|p| p.to_rows()),
            alpha: trace.alpha,
            labels: model.vocab.labels.clone(),
            predicted: model.vocab.labels[trace.prediction.label].clone(),
            probs: trace.prediction.probs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_view_is_consistent() {
        let v: serde_json::Value = serde_json::from_str(&sentence_json(3, 0.1).unwrap()).unwrap();
        let n = v["tokens"].as_array().unwrap().len();
        let adj = v["adjacency"].as_array().unwrap();
        assert_eq!(adj.len(), n);
        let ones: f64 = adj.iter().flat_map(|r| r.as_array().unwrap()).map(|x| x.as_f64().unwrap()).sum();
        assert_eq!(ones as usize, 2 * (n - 1));
    }

    #[test]
    fn demo_trains_and_inspects() {
        let mut demo = Demo::build(1, 60, "full").unwrap();
        let first: serde_json::Value = serde_json::from_str(&demo.step().unwrap()).unwrap();
        assert_eq!(first["epoch"], 1);
        let view: serde_json::Value = serde_json::from_str(&demo.inspection(0).unwrap()).unwrap();
        let n = view["sentence"]["tokens"].as_array().unwrap().len();
        assert_eq!(view["attention"].as_array().unwrap().len(), n);
        assert_eq!(view["edge_probs"].as_array().unwrap().len(), n);
        assert_eq!(view["alpha"].as_array().unwrap().len(), n);
        assert!(demo.inspection(demo.dev_size()).is_err());
        assert!(Demo::build(1, 10, "no_XX").is_err());
    }

    #[test]
    fn ablated_demo_has_no_dependency_view() {
        let demo = Demo::build(2, 30, "no_SA_DP_CM").unwrap();
        let view: serde_json::Value = serde_json::from_str(&demo.inspection(1).unwrap()).unwrap();
        assert!(view["attention"].is_null());
        assert!(view["edge_probs"].is_null());
    }
}
