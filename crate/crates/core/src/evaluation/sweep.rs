use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::seed::sub_seed;
use crate::training::{train, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub instances: usize,
    pub f1: f64,
}

/// The first `floor(ratio * T)` instances of a seeded shuffle, returned in
/// their original corpus order. Subsets for growing ratios are nested, and
/// ratio 1 gives the corpus unchanged.
pub fn sweep_subset(corpus: &Corpus, ratio: f64, seed: u64) -> Result<Corpus> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Precondition(format!("ratio {ratio} outside (0, 1]")));
    }
    let count = (ratio * corpus.len() as f64).floor() as usize;
    if count == 0 {
        return Err(Error::Precondition(format!("ratio {ratio} selects no instances out of {}", corpus.len())));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, "sweep")));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    Ok(Corpus::new(chosen.into_iter().map(|i| corpus.instances[i].clone()).collect()))
}

/// Trains one model per ratio and reports the best dev micro-F1 of each.
pub fn sample_complexity_sweep(
    corpus: &Corpus,
    dev: &Corpus,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    pretrained: Option<&EmbeddingTable>,
    ratios: &[f64],
) -> Result<Vec<SweepRow>> {
    if ratios.is_empty() {
        return Err(Error::Precondition("no ratios given".into()));
    }
    let subsets = ratios
        .iter()
        .map(|&r| sweep_subset(corpus, r, train_config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (&ratio, subset) in ratios.iter().zip(&subsets) {
        let run = train(subset, Some(dev), model_config, train_config, pretrained)?;
        rows.push(SweepRow { ratio, instances: subset.len(), f1: run.best_dev_f1.unwrap_or(0.0) });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("ratio,f1\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.ratio, r.f1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthSpec};

    #[test]
    fn subsets_are_nested_prefixes() {
        let c = generate_synthetic(&SynthSpec { count: 40, ..SynthSpec::default() }, 1).unwrap();
        let half = sweep_subset(&c, 0.5, 9).unwrap();
        let quarter = sweep_subset(&c, 0.25, 9).unwrap();
        assert_eq!(half.len(), 20);
        assert_eq!(quarter.len(), 10);
        assert!(quarter.instances.iter().all(|q| half.instances.contains(q)));
        assert_eq!(sweep_subset(&c, 1.0, 9).unwrap().instances, c.instances);
        assert_eq!(sweep_subset(&c, 0.33, 9).unwrap().len(), 13);
        assert!(sweep_subset(&c, 0.01, 9).is_err());
        assert!(sweep_subset(&c, 1.5, 9).is_err());
    }
}
