//! Token feature vectors and the bidirectional LSTM over them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{dep_relation_multihot, path_flags, Corpus, EmbeddingTable, RelationInstance};
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Which parts of `w_i = [e, ps, po, t, c, p, g]` are active, and their sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub use_word: bool,
    pub use_positions: bool,
    pub use_entity_tag: bool,
    pub use_chunk_tag: bool,
    pub use_path_flag: bool,
    pub use_deprel_multihot: bool,
    pub word_dim: usize,
    pub position_dim: usize,
    pub entity_tag_dim: usize,
    pub chunk_tag_dim: usize,
    /// Relative distances are clamped to `[-clip, clip]`.
    pub position_clip: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            use_word: true,
            use_positions: true,
            use_entity_tag: true,
            use_chunk_tag: true,
            use_path_flag: true,
            use_deprel_multihot: true,
            word_dim: 300,
            position_dim: 50,
            entity_tag_dim: 50,
            chunk_tag_dim: 50,
            position_clip: 50,
        }
    }
}

impl FeatureConfig {
    /// Word and position embeddings only.
    pub fn without_linguistic(&self) -> Self {
        Self {
            use_entity_tag: false,
            use_chunk_tag: false,
            use_path_flag: false,
            use_deprel_multihot: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_word || !self.use_positions {
            return Err(Error::Config("word and position features cannot be disabled".into()));
        }
        Ok(())
    }

    /// Dimension of `w_i` given the number of dependency relation labels.
    pub fn input_dim(&self, dep_label_count: usize) -> usize {
        let mut d = 0;
        if self.use_word {
            d += self.word_dim;
        }
        if self.use_positions {
            d += 2 * self.position_dim;
        }
        if self.use_entity_tag {
            d += self.entity_tag_dim;
        }
        if self.use_chunk_tag {
            d += self.chunk_tag_dim;
        }
        if self.use_path_flag {
            d += 1;
        }
        if self.use_deprel_multihot {
            d += dep_label_count;
        }
        d
    }

    /// Row of the position table for token `i` relative to mention `anchor`.
    pub fn position_index(&self, i: usize, anchor: usize) -> usize {
        let c = self.position_clip as i64;
        ((i as i64 - anchor as i64).clamp(-c, c) + c) as usize
    }
}

/// String inventories fixed at model construction. Unknown words and tags
/// map to a trailing unknown row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vec<String>,
    pub entity_tags: Vec<String>,
    pub chunk_tags: Vec<String>,
    pub dep_labels: Vec<String>,
    pub labels: Vec<String>,
}

fn sorted_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = items.collect();
    set.into_iter().map(String::from).collect()
}

impl Vocabularies {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let toks = || corpus.instances.iter().flat_map(|i| i.sentence.tokens.iter());
        Self {
            words: sorted_unique(toks().map(|t| t.form.as_str())),
            entity_tags: sorted_unique(toks().map(|t| t.entity_tag.as_str())),
            chunk_tags: sorted_unique(toks().map(|t| t.chunk_tag.as_str())),
            dep_labels: corpus.dep_labels.clone(),
            labels: corpus.labels.clone(),
        }
    }

    fn lookup(list: &[String], key: &str) -> usize {
        list.binary_search_by(|w| w.as_str().cmp(key)).unwrap_or(list.len())
    }

    pub fn word_index(&self, w: &str) -> usize {
        Self::lookup(&self.words, w)
    }

    pub fn entity_index(&self, t: &str) -> usize {
        Self::lookup(&self.entity_tags, t)
    }

    pub fn chunk_index(&self, t: &str) -> usize {
        Self::lookup(&self.chunk_tags, t)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

/// Table indices and constant columns for one instance, ready to be
/// looked up on a tape.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureInputs {
    pub words: Vec<usize>,
    pub pos_s: Vec<usize>,
    pub pos_o: Vec<usize>,
    pub entity: Vec<usize>,
    pub chunk: Vec<usize>,
    pub path: Vec<f64>,
    pub deprels: Vec<Vec<f64>>,
}

pub fn feature_inputs(inst: &RelationInstance, cfg: &FeatureConfig, vocab: &Vocabularies) -> Result<FeatureInputs> {
    let toks = &inst.sentence.tokens;
    let n = toks.len();
    Ok(FeatureInputs {
        words: toks.iter().map(|t| vocab.word_index(&t.form)).collect(),
        pos_s: (0..n).map(|i| cfg.position_index(i, inst.s)).collect(),
        pos_o: (0..n).map(|i| cfg.position_index(i, inst.o)).collect(),
        entity: toks.iter().map(|t| vocab.entity_index(&t.entity_tag)).collect(),
        chunk: toks.iter().map(|t| vocab.chunk_index(&t.chunk_tag)).collect(),
        path: if cfg.use_path_flag { path_flags(&inst.sentence.tree, inst.s, inst.o) } else { Vec::new() },
        deprels: if cfg.use_deprel_multihot {
            dep_relation_multihot(&inst.sentence.tree, &vocab.dep_labels)?
        } else {
            Vec::new()
        },
    })
}

/// Lookup tables feeding `w_i`. Absent tables belong to disabled features.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub word: ParamId,
    pub pos_s: ParamId,
    pub pos_o: ParamId,
    pub entity: Option<ParamId>,
    pub chunk: Option<ParamId>,
}

pub(crate) fn uniform(rng: &mut impl Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches generated data")
}

/// Init range for the position and tag tables; words use 0.1.
const TAG_INIT: f64 = 1.0;

impl EmbeddingParams {
    pub fn init(
        store: &mut ParamStore,
        cfg: &FeatureConfig,
        vocab: &Vocabularies,
        pretrained: Option<&EmbeddingTable>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let rows = vocab.words.len() + 1;
        let mut word = uniform(rng, &[rows, cfg.word_dim], 0.1).into_data();
        if let Some(table) = pretrained {
            if table.dim() != cfg.word_dim {
                return Err(Error::Config(format!(
                    "pre-trained vectors have dim {}, word_dim is {}",
                    table.dim(),
                    cfg.word_dim
                )));
            }
            for (r, w) in vocab.words.iter().enumerate() {
                if table.contains(w) {
                    word[r * cfg.word_dim..(r + 1) * cfg.word_dim].copy_from_slice(&table.lookup(w));
                }
            }
        }
        // Unknown-word row starts at zero.
        word[(rows - 1) * cfg.word_dim..].iter_mut().for_each(|v| *v = 0.0);
        let word = store.add("emb.word", Tensor::new(vec![rows, cfg.word_dim], word)?);
        let pos_rows = 2 * cfg.position_clip + 1;
        let es = TAG_INIT;
        let pos_s = store.add("emb.pos_s", uniform(rng, &[pos_rows, cfg.position_dim], es));
        let pos_o = store.add("emb.pos_o", uniform(rng, &[pos_rows, cfg.position_dim], es));
        let entity = cfg.use_entity_tag.then(|| {
            store.add("emb.entity", uniform(rng, &[vocab.entity_tags.len() + 1, cfg.entity_tag_dim], es))
        });
        let chunk = cfg.use_chunk_tag.then(|| {
            store.add("emb.chunk", uniform(rng, &[vocab.chunk_tags.len() + 1, cfg.chunk_tag_dim], es))
        });
        Ok(Self { word, pos_s, pos_o, entity, chunk })
    }
}

/// Builds the `n x d_in` matrix whose rows are the `w_i`.
pub fn feature_matrix(
    tape: &mut Tape,
    store: &ParamStore,
    emb: &EmbeddingParams,
    cfg: &FeatureConfig,
    inputs: &FeatureInputs,
) -> Result<Var> {
    let n = inputs.words.len();
    let mut parts = vec![
        tape.gather(store, emb.word, &inputs.words)?,
        tape.gather(store, emb.pos_s, &inputs.pos_s)?,
        tape.gather(store, emb.pos_o, &inputs.pos_o)?,
    ];
    if let (true, Some(id)) = (cfg.use_entity_tag, emb.entity) {
        parts.push(tape.gather(store, id, &inputs.entity)?);
    }
    if let (true, Some(id)) = (cfg.use_chunk_tag, emb.chunk) {
        parts.push(tape.gather(store, id, &inputs.chunk)?);
    }
    if cfg.use_path_flag {
        parts.push(tape.constant(Tensor::new(vec![n, 1], inputs.path.clone())?));
    }
    if cfg.use_deprel_multihot && !inputs.deprels.is_empty() && !inputs.deprels[0].is_empty() {
        parts.push(tape.constant(Tensor::matrix(&inputs.deprels)?));
    }
    tape.concat(&parts, 1)
}

/// Feature vectors `w_i` as plain values.
pub fn embed_tokens(
    inst: &RelationInstance,
    cfg: &FeatureConfig,
    vocab: &Vocabularies,
    store: &ParamStore,
    emb: &EmbeddingParams,
) -> Result<Vec<Vec<f64>>> {
    let inputs = feature_inputs(inst, cfg, vocab)?;
    let mut tape = Tape::new();
    let w = feature_matrix(&mut tape, store, emb, cfg, &inputs)?;
    Ok(tape.value(w).to_rows())
}

/// One LSTM direction. Gate blocks in the `4h` columns are ordered
/// input, forget, output, candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstmParams {
    /// `d_in x 4h`
    pub w_x: ParamId,
    /// `h x 4h`
    pub w_h: ParamId,
    /// `4h`
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w_x = store.add(format!("{prefix}.w_x"), uniform(rng, &[input_dim, 4 * hidden], 0.1));
        let w_h = store.add(format!("{prefix}.w_h"), uniform(rng, &[hidden, 4 * hidden], 0.1));
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = store.add(format!("{prefix}.b"), Tensor::vector(bias));
        Self { w_x, w_h, b, hidden }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

/// Runs one direction over the rows of `x`; output row `i` is the state
/// after reading token `i` (reading right to left when `reverse`).
pub fn lstm_direction(tape: &mut Tape, store: &ParamStore, p: &LstmParams, x: Var, reverse: bool) -> Result<Var> {
    let n = tape.value(x).rows();
    let h = p.hidden;
    let w_x = tape.param(store, p.w_x);
    let w_h = tape.param(store, p.w_h);
    let b = tape.param(store, p.b);
    let xw = tape.matmul(x, w_x)?;
    let pre_all = tape.add(xw, b)?;

    let mut states: Vec<Option<Var>> = vec![None; n];
    let mut prev: Option<(Var, Var)> = None;
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let mut pre = tape.row(pre_all, t)?;
        if let Some((h_prev, _)) = prev {
            let rec = tape.matmul(h_prev, w_h)?;
            pre = tape.add(pre, rec)?;
        }
        let gate = |tape: &mut Tape, k: usize| tape.slice_cols(pre, k * h, h);
        let i_pre = gate(tape, 0)?;
        let f_pre = gate(tape, 1)?;
        let o_pre = gate(tape, 2)?;
        let g_pre = gate(tape, 3)?;
        let i_g = tape.sigmoid(i_pre);
        let o_g = tape.sigmoid(o_pre);
        let g = tape.tanh(g_pre);
        let mut c = tape.mul(i_g, g)?;
        if let Some((_, c_prev)) = prev {
            let f_g = tape.sigmoid(f_pre);
            let keep = tape.mul(f_g, c_prev)?;
            c = tape.add(keep, c)?;
        }
        let c_act = tape.tanh(c);
        let h_t = tape.mul(o_g, c_act)?;
        states[t] = Some(h_t);
        prev = Some((h_t, c));
    }
    let rows: Vec<Var> = states.into_iter().map(|s| s.expect("every step visited")).collect();
    tape.concat(&rows, 0)
}

/// `h_i = [fwd_i ; bwd_i]` for every token.
pub fn bilstm(tape: &mut Tape, store: &ParamStore, p: &BiLstmParams, x: Var) -> Result<Var> {
    if tape.value(x).is_empty() {
        return Err(Error::Precondition("bilstm over an empty sequence".into()));
    }
    let fwd = lstm_direction(tape, store, &p.forward, x, false)?;
    let bwd = lstm_direction(tape, store, &p.backward, x, true)?;
    tape.concat(&[fwd, bwd], 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DependencyTree, RelationInstance, Sentence, Token};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance() -> RelationInstance {
        let forms = ["a", "b", "c"];
        let tokens = forms
            .iter()
            .map(|f| Token { form: f.to_string(), entity_tag: "O".into(), chunk_tag: "O".into() })
            .collect();
        let tree = DependencyTree::new(vec![None, Some(0), Some(1)], vec!["root".into(), "x".into(), "y".into()]).unwrap();
        RelationInstance::new(Sentence::new(tokens, tree).unwrap(), 0, 2, "None", "d").unwrap()
    }

    #[test]
    fn position_index_centering_and_clamp() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.position_index(7, 7), 50);
        assert_eq!(cfg.position_index(0, 120), 0);
        assert_eq!(cfg.position_index(200, 0), 100);
    }

    #[test]
    fn dim_without_linguistic_features() {
        let cfg = FeatureConfig::default().without_linguistic();
        assert_eq!(cfg.input_dim(40), 300 + 2 * 50);
        assert_eq!(FeatureConfig::default().input_dim(7), 300 + 100 + 50 + 50 + 1 + 7);
    }

    #[test]
    fn word_and_positions_are_mandatory() {
        let cfg = FeatureConfig { use_positions: false, ..FeatureConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn embed_tokens_is_pure_and_sized() {
        let inst = instance();
        let corpus = Corpus::new(vec![inst.clone()]);
        let vocab = Vocabularies::from_corpus(&corpus);
        let cfg = FeatureConfig { word_dim: 4, position_dim: 3, entity_tag_dim: 2, chunk_tag_dim: 2, ..FeatureConfig::default() };
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb = EmbeddingParams::init(&mut store, &cfg, &vocab, None, &mut rng).unwrap();
        let a = embed_tokens(&inst, &cfg, &vocab, &store, &emb).unwrap();
        let b = embed_tokens(&inst, &cfg, &vocab, &store, &emb).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|w| w.len() == cfg.input_dim(vocab.dep_labels.len())));
        // Path flag column sits right after the chunk embedding.
        let path_col = 4 + 6 + 2 + 2;
        assert_eq!(a.iter().map(|w| w[path_col]).collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn pretrained_rows_are_copied_and_unk_is_zero() {
        let inst = instance();
        let vocab = Vocabularies::from_corpus(&Corpus::new(vec![inst]));
        let cfg = FeatureConfig { word_dim: 2, ..FeatureConfig::default() };
        let mut table = EmbeddingTable::new(2);
        table.insert("b", &[0.25, -0.5]).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb = EmbeddingParams::init(&mut store, &cfg, &vocab, Some(&table), &mut rng).unwrap();
        let words = store.get(emb.word);
        assert_eq!(words.row(vocab.word_index("b")), &[0.25, -0.5]);
        assert_eq!(words.row(vocab.word_index("zzz")), &[0.0, 0.0]);

        let wrong = EmbeddingTable::new(3);
        let mut store = ParamStore::new();
        assert!(EmbeddingParams::init(&mut store, &cfg, &vocab, Some(&wrong), &mut rng).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_states() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fwd = LstmParams::init(&mut store, "f", 3, 4, &mut rng);
        let bwd = LstmParams::init(&mut store, "b", 3, 4, &mut rng);
        for id in store.ids().collect::<Vec<_>>() {
            store.values_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(uniform(&mut rng, &[5, 3], 1.0));
        let h = bilstm(&mut tape, &store, &BiLstmParams { forward: fwd, backward: bwd }, x).unwrap();
        assert_eq!(tape.value(h).shape(), &[5, 8]);
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_token_sequence() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = BiLstmParams {
            forward: LstmParams::init(&mut store, "f", 2, 3, &mut rng),
            backward: LstmParams::init(&mut store, "b", 2, 3, &mut rng),
        };
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(&[vec![0.5, -1.0]]).unwrap());
        let h = bilstm(&mut tape, &store, &p, x).unwrap();
        assert_eq!(tape.value(h).shape(), &[1, 6]);
        assert!(tape.value(h).is_finite());
    }

    #[test]
    fn reversing_input_swaps_directions() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LstmParams::init(&mut store, "shared", 3, 4, &mut rng);
        let x = uniform(&mut rng, &[6, 3], 1.0);
        let rows = x.to_rows();
        let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();

        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let fwd = lstm_direction(&mut tape, &store, &p, xv, false).unwrap();
        let xr = tape.constant(Tensor::matrix(&reversed).unwrap());
        let bwd = lstm_direction(&mut tape, &store, &p, xr, true).unwrap();
        let n = rows.len();
        for i in 0..n {
            assert_eq!(tape.value(fwd).row(i), tape.value(bwd).row(n - 1 - i));
        }
    }
}
