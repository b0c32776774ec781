//! Mini-batch Adam training with seeded shuffling, best-on-dev retention
//! and a per-epoch log.

mod adam;
mod checkpoint;

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable, RelationInstance};
use crate::encoder::Vocabularies;
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::model::{Ablation, Losses, Model, ModelConfig};
use crate::numerics::{Gradients, Tape};
use crate::seed::sub_seed;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, Manifest, ParamEntry, Precision, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the dependency loss.
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Overrides the model's component switches when set.
    pub ablation: Option<Ablation>,
    /// Stop once dev micro-F1 reaches this value.
    pub stop_at_dev_f1: Option<f64>,
    /// Worker threads for per-instance gradients. Results do not depend on it.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            lr: 0.3,
            batch_size: 50,
            epochs: 30,
            seed: 7,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
            ablation: None,
            stop_at_dev_f1: None,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    /// Model config with this run's ablation applied.
    pub fn resolve(&self, model: &ModelConfig) -> ModelConfig {
        match self.ablation {
            Some(a) => model.clone().with_ablation(a),
            None => model.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_label: f64,
    pub loss_dep: Option<f64>,
    pub loss_total: f64,
    pub dev_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1 (the last epoch
    /// without a dev set).
    pub best: Checkpoint,
    /// Parameters after the final epoch.
    pub last: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_dev_f1: Option<f64>,
}

pub fn write_log<W: Write>(mut w: W, log: &[EpochLog]) -> Result<()> {
    for entry in log {
        serde_json::to_writer(&mut w, entry)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Vocabulary from the training corpus. Relation and dependency labels of
/// `dev` are added so that every dev instance can be scored.
pub fn build_vocab(corpus: &Corpus, dev: Option<&Corpus>) -> Vocabularies {
    let mut vocab = Vocabularies::from_corpus(corpus);
    if let Some(dev) = dev {
        let merge = |a: &[String], b: &[String]| -> Vec<String> {
            a.iter().chain(b).cloned().collect::<BTreeSet<_>>().into_iter().collect()
        };
        vocab.labels = merge(&vocab.labels, &dev.labels);
        vocab.dep_labels = merge(&vocab.dep_labels, &dev.dep_labels);
    }
    vocab
}

/// Gradient of one instance's total loss.
pub fn instance_gradients(model: &Model, inst: &RelationInstance, lambda: f64) -> Result<(Gradients, Losses)> {
    let mut tape = Tape::new();
    let lv = model.loss_on_tape(&mut tape, &model.store, inst, lambda)?;
    let losses = Losses {
        label: tape.value(lv.label).item(),
        dep: lv.dep.map(|d| tape.value(d).item()),
        total: tape.value(lv.total).item(),
    };
    let grads = if losses.total.is_finite() { tape.backward(lv.total)? } else { Gradients::new() };
    Ok((grads, losses))
}

fn batch_gradients(model: &Model, batch: &[&RelationInstance], lambda: f64, jobs: usize) -> Vec<Result<(Gradients, Losses)>> {
    if jobs <= 1 || batch.len() < 2 {
        return batch.iter().map(|inst| instance_gradients(model, inst, lambda)).collect();
    }
    let chunk = batch.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|inst| instance_gradients(model, inst, lambda)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("gradient worker panicked")).collect()
    })
}

/// Trains a fresh model on `corpus`.
pub fn train(
    corpus: &Corpus,
    dev: Option<&Corpus>,
    model_config: &ModelConfig,
    config: &TrainConfig,
    pretrained: Option<&EmbeddingTable>,
) -> Result<TrainOutcome> {
    train_with(corpus, dev, model_config, config, pretrained, |_| {})
}

/// Epoch-at-a-time training state. Holds its own copy of the corpora.
pub struct Trainer {
    corpus: Corpus,
    dev: Option<Corpus>,
    config: TrainConfig,
    model: Model,
    state: AdamState,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    epoch: usize,
}

impl Trainer {
    pub fn new(
        corpus: &Corpus,
        dev: Option<&Corpus>,
        model_config: &ModelConfig,
        config: &TrainConfig,
        pretrained: Option<&EmbeddingTable>,
    ) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::Precondition("training corpus is empty".into()));
        }
        let vocab = build_vocab(corpus, dev);
        let model = Model::new(config.resolve(model_config), vocab, pretrained, sub_seed(config.seed, "init"))?;
        Ok(Self {
            corpus: corpus.clone(),
            dev: dev.cloned(),
            config: config.clone(),
            state: AdamState::new(&model.store),
            model,
            rng: ChaCha8Rng::seed_from_u64(sub_seed(config.seed, "shuffle")),
            order: (0..corpus.len()).collect(),
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            precision: Precision::F64,
            train_config: Some(self.config.clone()),
            epoch: self.epoch,
            dev_f1: None,
        }
    }

    /// One pass over the shuffled corpus, then dev scoring.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let epoch = self.epoch + 1;
        let config = &self.config;
        self.order.shuffle(&mut self.rng);
        let (mut sum_label, mut sum_dep, mut sum_total) = (0.0, 0.0, 0.0);
        let mut has_dep = false;
        let adam = config.adam();
        for (b, idx) in self.order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&RelationInstance> = idx.iter().map(|&i| &self.corpus.instances[i]).collect();
            let scale = 1.0 / batch.len() as f64;
            let mut grads = Gradients::new();
            let mut batch_total = 0.0;
            for result in batch_gradients(&self.model, &batch, config.lambda, config.jobs) {
                let (g, l) = result?;
                grads.accumulate(&g, scale);
                batch_total += l.total * scale;
                sum_label += l.label;
                sum_total += l.total;
                if let Some(d) = l.dep {
                    sum_dep += d;
                    has_dep = true;
                }
            }
            if !batch_total.is_finite() {
                return Err(Error::NonFinite(format!("loss is {batch_total} at epoch {epoch}, batch {}", b + 1)));
            }
            if let Some(max) = config.clip_norm {
                clip_global_norm(&mut grads, max);
            }
            adam_step(&mut self.model.store, &grads, &mut self.state, &adam)
                .map_err(|e| Error::NonFinite(format!("{e} at epoch {epoch}, batch {}", b + 1)))?;
        }
        self.epoch = epoch;
        let n = self.corpus.len() as f64;
        let dev_f1 = match &self.dev {
            Some(d) => Some(evaluate(&self.model, d)?.f1),
            None => None,
        };
        Ok(EpochLog {
            epoch,
            loss_label: sum_label / n,
            loss_dep: has_dep.then_some(sum_dep / n),
            loss_total: sum_total / n,
            dev_f1,
        })
    }
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    corpus: &Corpus,
    dev: Option<&Corpus>,
    model_config: &ModelConfig,
    config: &TrainConfig,
    pretrained: Option<&EmbeddingTable>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(corpus, dev, model_config, config, pretrained)?;
    let mut log = Vec::new();
    let mut best: Option<(f64, Checkpoint)> = None;

    for _ in 0..config.epochs {
        let entry = trainer.run_epoch()?;
        on_epoch(&entry);
        let dev_f1 = entry.dev_f1;
        log.push(entry);

        let score = dev_f1.unwrap_or(f64::NEG_INFINITY);
        let improved = dev_f1.is_none() || best.as_ref().map_or(true, |(s, _)| score > *s);
        if improved {
            best = Some((score, Checkpoint { dev_f1, ..trainer.checkpoint() }));
        }
        if let (Some(target), Some(f)) = (config.stop_at_dev_f1, dev_f1) {
            if f >= target {
                break;
            }
        }
    }
    let last = Checkpoint { dev_f1: log.last().and_then(|e| e.dev_f1), ..trainer.checkpoint() };
    let best = best.map_or_else(|| last.clone(), |(_, c)| c);
    Ok(TrainOutcome { best_dev_f1: best.dev_f1, best, last, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthSpec};

    fn tiny_model_config() -> ModelConfig {
        let mut c = ModelConfig::default();
        c.features.word_dim = 6;
        c.features.position_dim = 3;
        c.features.entity_tag_dim = 2;
        c.features.chunk_tag_dim = 2;
        c.features.position_clip = 8;
        c.lstm_hidden = 4;
        c.attn_dim = 5;
        c.dep_hidden = 4;
        c.ff_hidden = 6;
        c
    }

    fn data() -> (Corpus, Corpus) {
        let all = generate_synthetic(&SynthSpec { count: 60, ..SynthSpec::default() }, 2).unwrap();
        (Corpus::new(all.instances[..45].to_vec()), Corpus::new(all.instances[45..].to_vec()))
    }

    fn quick() -> TrainConfig {
        TrainConfig { lr: 1e-2, epochs: 2, batch_size: 8, ..TrainConfig::default() }
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let (train_set, dev) = data();
        let a = train(&train_set, Some(&dev), &tiny_model_config(), &quick(), None).unwrap();
        let b = train(&train_set, Some(&dev), &tiny_model_config(), &quick(), None).unwrap();
        assert_eq!(a.log, b.log);
        assert!(a.best.to_bytes() == b.best.to_bytes());
        assert_eq!(a.log.len(), 2);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (train_set, dev) = data();
        let a = train(&train_set, Some(&dev), &tiny_model_config(), &quick(), None).unwrap();
        let b = train(&train_set, Some(&dev), &tiny_model_config(), &TrainConfig { jobs: 3, ..quick() }, None).unwrap();
        assert_eq!(a.log, b.log);
        let values = |c: &Checkpoint| c.model.store.iter().map(|(_, _, t)| t.clone()).collect::<Vec<_>>();
        assert!(values(&a.best) == values(&b.best));
    }

    #[test]
    fn zero_lambda_leaves_dependency_head_untouched() {
        let (train_set, _) = data();
        let cfg = TrainConfig { lambda: 0.0, ..quick() };
        let run = train(&train_set, None, &tiny_model_config(), &cfg, None).unwrap();
        let init = Model::new(
            cfg.resolve(&tiny_model_config()),
            build_vocab(&train_set, None),
            None,
            sub_seed(cfg.seed, "init"),
        )
        .unwrap();
        for name in ["dep.w_d1", "dep.b_d1", "dep.w_d2", "dep.b_d2"] {
            let id = init.store.id_of(name).unwrap();
            assert_eq!(init.store.get(id), run.best.model.store.get(id), "{name} moved");
        }
        let other = init.store.id_of("cls.w_1").unwrap();
        assert_ne!(init.store.get(other), run.best.model.store.get(other));
    }

    #[test]
    fn batch_order_does_not_matter() {
        let (train_set, _) = data();
        let model = Model::new(tiny_model_config(), build_vocab(&train_set, None), None, 1).unwrap();
        let batch: Vec<&RelationInstance> = train_set.instances[..6].iter().collect();
        let mut reversed = batch.clone();
        reversed.reverse();
        let sum = |b: &[&RelationInstance]| {
            let mut g = Gradients::new();
            let mut loss = 0.0;
            for r in batch_gradients(&model, b, 0.01, 1) {
                let (gi, li) = r.unwrap();
                g.accumulate(&gi, 1.0 / 6.0);
                loss += li.total / 6.0;
            }
            (g, loss)
        };
        let (ga, la) = sum(&batch);
        let (gb, lb) = sum(&reversed);
        assert!((la - lb).abs() < 1e-12);
        for id in ga.ids() {
            let (a, b) = (ga.dense(id, &model.store), gb.dense(id, &model.store));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn ablation_gradients_touch_only_live_parameters() {
        let (train_set, _) = data();
        for ablation in Ablation::ALL {
            let cfg = tiny_model_config().with_ablation(ablation);
            let model = Model::new(cfg, build_vocab(&train_set, None), None, 1).unwrap();
            let (g, _) = instance_gradients(&model, &train_set.instances[0], 0.01).unwrap();
            let live: Vec<_> = model.store.ids().collect();
            assert!(g.ids().all(|id| live.contains(&id)));
            let touched: BTreeSet<&str> = g.ids().map(|id| model.store.name(id).split('.').next().unwrap()).collect();
            assert_eq!(touched.into_iter().collect::<Vec<_>>().len(), model.live_groups().len(), "{ablation}");
        }
    }

    #[test]
    fn log_lines_are_json() {
        let log = vec![EpochLog { epoch: 1, loss_label: 1.0, loss_dep: Some(2.0), loss_total: 1.02, dev_f1: Some(0.5) }];
        let mut out = Vec::new();
        write_log(&mut out, &log).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        for key in ["epoch", "loss_label", "loss_dep", "loss_total", "dev_f1"] {
            assert!(v.get(key).is_some());
        }
    }

    #[test]
    fn invalid_configs() {
        let (train_set, _) = data();
        for bad in [
            TrainConfig { lambda: -1.0, ..quick() },
            TrainConfig { lr: 0.0, ..quick() },
            TrainConfig { batch_size: 0, ..quick() },
        ] {
            assert!(train(&train_set, None, &tiny_model_config(), &bad, None).is_err());
        }
        assert!(train(&Corpus::new(vec![]), None, &tiny_model_config(), &quick(), None).is_err());
    }
}
