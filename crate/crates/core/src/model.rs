//! Full model: features, BiLSTM, self-attention, dependency head, control
//! mechanism and classifier, with the component switches used for ablations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{self_attention, AttnParams};
use crate::classifier::{aggregate, logits, total_loss_on_tape, ClassifierParams, PredictionResult};
use crate::control::{control_filter, control_gate, ControlParams};
use crate::corpus::{adjacency_from_tree, EmbeddingTable, RelationInstance};
use crate::depsupervise::{dep_loss_on_tape, edge_logits, Activation, DepHeadParams, EdgeProbMatrix};
use crate::encoder::{bilstm, feature_inputs, feature_matrix, BiLstmParams, EmbeddingParams, FeatureConfig, LstmParams, Vocabularies};
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Var};

/// Cumulative ablation settings: each step removes one more component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "no_CM")]
    NoCm,
    #[serde(rename = "no_DP_CM")]
    NoDpCm,
    #[serde(rename = "no_SA_DP_CM")]
    NoSaDpCm,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoCm, Ablation::NoDpCm, Ablation::NoSaDpCm];

    pub fn components(self) -> Components {
        let mut c = Components::default();
        if self != Ablation::Full {
            c.control = false;
        }
        if matches!(self, Ablation::NoDpCm | Ablation::NoSaDpCm) {
            c.dep_prediction = false;
        }
        if self == Ablation::NoSaDpCm {
            c.self_attention = false;
        }
        c
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoCm => "no_CM",
            Ablation::NoDpCm => "no_DP_CM",
            Ablation::NoSaDpCm => "no_SA_DP_CM",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}; expected full, no_CM, no_DP_CM or no_SA_DP_CM")))
    }
}

/// Independent component switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub self_attention: bool,
    pub dep_prediction: bool,
    pub control: bool,
}

impl Default for Components {
    fn default() -> Self {
        Self { self_attention: true, dep_prediction: true, control: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub features: FeatureConfig,
    /// Per direction; `dim(h)` is twice this.
    pub lstm_hidden: usize,
    /// `d_a`, width of the attention states.
    pub attn_dim: usize,
    /// Hidden width of the dependency head.
    pub dep_hidden: usize,
    /// Hidden width of the two-layer classifier.
    pub ff_hidden: usize,
    pub components: Components,
    pub dep_activation: Activation,
    pub scaled_attention: bool,
    pub classifier_relu: bool,
    /// Pool the filtered rows instead of the raw BiLSTM states.
    pub pool_filtered: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            lstm_hidden: 100,
            attn_dim: 200,
            dep_hidden: 200,
            ff_hidden: 200,
            components: Components::default(),
            dep_activation: Activation::Tanh,
            scaled_attention: false,
            classifier_relu: false,
            pool_filtered: false,
        }
    }
}

impl ModelConfig {
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.components = ablation.components();
        self
    }

    pub fn h_dim(&self) -> usize {
        2 * self.lstm_hidden
    }

    /// Width of the rows fed to the dependency head and the gate.
    pub fn state_dim(&self) -> usize {
        if self.components.self_attention {
            self.attn_dim
        } else {
            self.h_dim()
        }
    }

    /// `dim(o) = 2 dim(h) + 3 d_a`, with `d_a = dim(h)` when attention is off.
    pub fn aggregate_dim(&self) -> usize {
        2 * self.h_dim() + 3 * self.state_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        for (name, v) in [
            ("lstm_hidden", self.lstm_hidden),
            ("attn_dim", self.attn_dim),
            ("dep_hidden", self.dep_hidden),
            ("ff_hidden", self.ff_hidden),
            ("word_dim", self.features.word_dim),
            ("position_dim", self.features.position_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Names of top-level fields that differ from `other`.
    pub fn differing_fields(&self, other: &ModelConfig) -> Vec<String> {
        let a = serde_json::to_value(self).expect("config serializes");
        let b = serde_json::to_value(other).expect("config serializes");
        let mut out = Vec::new();
        if let (Some(a), Some(b)) = (a.as_object(), b.as_object()) {
            for (k, v) in a {
                match (v.as_object(), b.get(k).and_then(|x| x.as_object())) {
                    (Some(inner_a), Some(inner_b)) => {
                        for (ik, iv) in inner_a {
                            if inner_b.get(ik) != Some(iv) {
                                out.push(format!("{k}.{ik}"));
                            }
                        }
                    }
                    _ => {
                        if b.get(k) != Some(v) {
                            out.push(k.clone());
                        }
                    }
                }
            }
        }
        out
    }
}

/// Parameter handles of the live components.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embeddings: EmbeddingParams,
    pub lstm: BiLstmParams,
    pub attention: Option<AttnParams>,
    pub dep_head: Option<DepHeadParams>,
    pub control: Option<ControlParams>,
    pub classifier: ClassifierParams,
}

/// Parameter groups, by name prefix.
pub const PARAM_GROUPS: [&str; 6] = ["emb", "lstm", "attn", "dep", "ctl", "cls"];

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabularies,
    pub store: ParamStore,
    pub params: ModelParams,
}

/// Tape handles for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardGraph {
    pub h: Var,
    /// Attention states, or `h` when attention is off.
    pub h_prime: Var,
    pub attn_weights: Option<Var>,
    pub edge_logits: Option<Var>,
    pub p: Option<Var>,
    pub h_bar: Option<Var>,
    pub alpha: Option<Var>,
    pub m: Option<Var>,
    pub c: Option<Var>,
    /// Gated states, or `h_prime` when the control mechanism is off.
    pub h_bar_prime: Var,
    pub o: Var,
    pub logits: Var,
}

/// Loss handles on the tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub label: Var,
    pub dep: Option<Var>,
    pub total: Var,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub label: f64,
    /// `None` when the dependency head is disabled.
    pub dep: Option<f64>,
    pub total: f64,
}

/// Plain values of every intermediate quantity for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub h: Vec<Vec<f64>>,
    pub h_prime: Vec<Vec<f64>>,
    pub attn_weights: Option<Vec<Vec<f64>>>,
    pub edge_probs: Option<EdgeProbMatrix>,
    pub p: Option<Vec<f64>>,
    pub h_bar: Option<Vec<Vec<f64>>>,
    pub alpha: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub h_bar_prime: Vec<Vec<f64>>,
    pub o: Vec<f64>,
    pub prediction: PredictionResult,
}

impl Model {
    /// Fresh model with parameters drawn from `seed`. Only parameters of
    /// enabled components are created.
    pub fn new(config: ModelConfig, vocab: Vocabularies, pretrained: Option<&EmbeddingTable>, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab.labels.len() < 2 {
            return Err(Error::Config(format!("need at least 2 relation labels, got {}", vocab.labels.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embeddings = EmbeddingParams::init(&mut store, &config.features, &vocab, pretrained, &mut rng)?;
        let d_in = config.features.input_dim(vocab.dep_labels.len());
        let lstm = BiLstmParams {
            forward: LstmParams::init(&mut store, "lstm.fwd", d_in, config.lstm_hidden, &mut rng),
            backward: LstmParams::init(&mut store, "lstm.bwd", d_in, config.lstm_hidden, &mut rng),
        };
        let h_dim = config.h_dim();
        let state_dim = config.state_dim();
        let attention = config
            .components
            .self_attention
            .then(|| AttnParams::init(&mut store, h_dim, config.attn_dim, &mut rng));
        let dep_head = config
            .components
            .dep_prediction
            .then(|| DepHeadParams::init(&mut store, state_dim, config.dep_hidden, config.dep_activation, &mut rng));
        let control = config
            .components
            .control
            .then(|| ControlParams::init(&mut store, h_dim, state_dim, &mut rng));
        let classifier = ClassifierParams::init(&mut store, config.aggregate_dim(), config.ff_hidden, vocab.labels.len(), &mut rng);
        Ok(Self { config, vocab, store, params: ModelParams { embeddings, lstm, attention, dep_head, control, classifier } })
    }

    pub fn label_count(&self) -> usize {
        self.vocab.labels.len()
    }

    /// Parameter ids whose names start with `group` followed by a dot.
    pub fn group_ids(&self, group: &str) -> Vec<ParamId> {
        let prefix = format!("{group}.");
        self.store.iter().filter(|(_, name, _)| name.starts_with(&prefix)).map(|(id, _, _)| id).collect()
    }

    /// Non-empty parameter groups in canonical order.
    pub fn live_groups(&self) -> Vec<&'static str> {
        PARAM_GROUPS.into_iter().filter(|g| !self.group_ids(g).is_empty()).collect()
    }

    /// Records the forward pass on `tape`, reading parameters from `store`
    /// (which must have this model's layout).
    pub fn build(&self, tape: &mut Tape, store: &ParamStore, inst: &RelationInstance) -> Result<ForwardGraph> {
        let cfg = &self.config;
        let p = &self.params;
        let inputs = feature_inputs(inst, &cfg.features, &self.vocab)?;
        let w = feature_matrix(tape, store, &p.embeddings, &cfg.features, &inputs)?;
        let h = bilstm(tape, store, &p.lstm, w)?;

        let (h_prime, attn_weights) = match &p.attention {
            Some(ap) => {
                let out = self_attention(tape, store, ap, h, cfg.scaled_attention)?;
                (out.states, Some(out.weights))
            }
            None => (h, None),
        };
        let edge_logits = match &p.dep_head {
            Some(dp) => Some(edge_logits(tape, store, dp, h_prime)?),
            None => None,
        };
        let mut graph = ForwardGraph {
            h,
            h_prime,
            attn_weights,
            edge_logits,
            p: None,
            h_bar: None,
            alpha: None,
            m: None,
            c: None,
            h_bar_prime: h_prime,
            o: h,
            logits: h,
        };
        if let Some(cp) = &p.control {
            let f = control_filter(tape, store, cp, h, inst.s, inst.o)?;
            let g = control_gate(tape, store, cp, h, f.h_bar, h_prime, inst.s, inst.o, cfg.pool_filtered)?;
            graph.p = Some(f.p);
            graph.h_bar = Some(f.h_bar);
            graph.alpha = Some(g.alpha);
            graph.m = Some(g.m);
            graph.c = Some(g.c);
            graph.h_bar_prime = g.gated;
        }
        graph.o = aggregate(tape, h, graph.h_bar_prime, inst.s, inst.o)?;
        graph.logits = logits(tape, store, &p.classifier, graph.o, cfg.classifier_relu)?;
        Ok(graph)
    }

    /// Adds the label loss, the dependency loss (when the head exists) and
    /// their weighted sum.
    pub fn build_losses(&self, tape: &mut Tape, graph: &ForwardGraph, inst: &RelationInstance, lambda: f64) -> Result<LossVars> {
        if lambda < 0.0 || lambda.is_nan() {
            return Err(Error::Precondition(format!("lambda must be >= 0, got {lambda}")));
        }
        let y = self
            .vocab
            .label_index(&inst.label)
            .ok_or_else(|| Error::Validation(format!("label {:?} is not in the model's label set", inst.label)))?;
        let label = tape.cross_entropy(graph.logits, y)?;
        let dep = match graph.edge_logits {
            Some(z) => Some(dep_loss_on_tape(tape, z, &adjacency_from_tree(&inst.sentence.tree))?),
            None => None,
        };
        let total = total_loss_on_tape(tape, label, dep, lambda)?;
        Ok(LossVars { label, dep, total })
    }

    /// Total loss on a fresh tape, for training and gradient checks.
    pub fn loss_on_tape(&self, tape: &mut Tape, store: &ParamStore, inst: &RelationInstance, lambda: f64) -> Result<LossVars> {
        let graph = self.build(tape, store, inst)?;
        self.build_losses(tape, &graph, inst, lambda)
    }

    pub fn forward_instance(&self, inst: &RelationInstance, lambda: f64) -> Result<(ForwardTrace, Losses)> {
        let mut tape = Tape::new();
        let graph = self.build(&mut tape, &self.store, inst)?;
        let lv = self.build_losses(&mut tape, &graph, inst, lambda)?;
        let losses = Losses {
            label: tape.value(lv.label).item(),
            dep: lv.dep.map(|d| tape.value(d).item()),
            total: tape.value(lv.total).item(),
        };
        Ok((self.trace(&tape, &graph, inst.len())?, losses))
    }

    /// Forward pass without a gold label.
    pub fn predict_instance(&self, inst: &RelationInstance) -> Result<ForwardTrace> {
        let mut tape = Tape::new();
        let graph = self.build(&mut tape, &self.store, inst)?;
        self.trace(&tape, &graph, inst.len())
    }

    pub fn predict_label(&self, inst: &RelationInstance) -> Result<&str> {
        let t = self.predict_instance(inst)?;
        Ok(&self.vocab.labels[t.prediction.label])
    }

    fn trace(&self, tape: &Tape, g: &ForwardGraph, n: usize) -> Result<ForwardTrace> {
        let rows = |v: Var| tape.value(v).to_rows();
        let flat = |v: Var| tape.value(v).data().to_vec();
        Ok(ForwardTrace {
            h: rows(g.h),
            h_prime: rows(g.h_prime),
            attn_weights: g.attn_weights.map(rows),
            edge_probs: g.edge_logits.map(|z| EdgeProbMatrix::from_logits(n, tape.value(z).data())).transpose()?,
            p: g.p.map(flat),
            h_bar: g.h_bar.map(rows),
            alpha: g.alpha.map(flat),
            m: g.m.map(flat),
            c: g.c.map(flat),
            h_bar_prime: rows(g.h_bar_prime),
            o: flat(g.o),
            prediction: PredictionResult::from_logits(tape.value(g.logits).data()),
        })
    }
}
