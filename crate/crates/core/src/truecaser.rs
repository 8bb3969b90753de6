//! Character-level truecaser: a BiLSTM over the characters of a sentence
//! whose per-character hidden state is projected to a two-way distribution
//! over upper/lower case.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{self, PrfScore};
use crate::nn::container::{Container, Section};
use crate::nn::{
    clip_grad_norm, Adam, AdamConfig, BiLstm, Dropout, Embedding, Graph, Linear, ParamSet,
    SetHandle, Var,
};
use crate::text::{has_upper_form, lower_char, lowercase, upper_char};

pub const SECTION: &str = "truecaser";

/// Gold label of one character. Index 0 is upper, 1 is lower, matching the
/// order of [`CaseDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    Upper,
    Lower,
}

impl CaseLabel {
    pub fn of(c: char) -> Self {
        if c.is_uppercase() {
            CaseLabel::Upper
        } else {
            CaseLabel::Lower
        }
    }

    pub fn index(self) -> usize {
        match self {
            CaseLabel::Upper => 0,
            CaseLabel::Lower => 1,
        }
    }

    /// One-hot `(p_U, p_L)`.
    pub fn one_hot(self) -> CaseDistribution {
        match self {
            CaseLabel::Upper => CaseDistribution::new(1.0, 0.0),
            CaseLabel::Lower => CaseDistribution::new(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseDistribution {
    pub p_upper: f64,
    pub p_lower: f64,
}

impl CaseDistribution {
    pub fn new(p_upper: f64, p_lower: f64) -> Self {
        CaseDistribution { p_upper, p_lower }
    }

    /// `U` only when strictly more likely than `L`.
    pub fn argmax(&self) -> CaseLabel {
        if self.p_upper > self.p_lower {
            CaseLabel::Upper
        } else {
            CaseLabel::Lower
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p_upper, self.p_lower]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruecaserExample {
    pub chars: Vec<char>,
    pub labels: Vec<CaseLabel>,
}

/// Builds a training instance from cased text: with probability
/// `pass_through_prob` the input keeps its casing, otherwise it is
/// lowercased. Labels always follow the original text. Returns `None` for an
/// empty sentence.
pub fn make_training_example(
    sentence: &str,
    pass_through_prob: f64,
    rng: &mut impl Rng,
) -> Option<TruecaserExample> {
    let pass_through = rng.gen::<f64>() < pass_through_prob;
    if sentence.is_empty() {
        return None;
    }
    let labels = sentence.chars().map(CaseLabel::of).collect();
    let chars = if pass_through {
        sentence.chars().collect()
    } else {
        sentence.chars().map(lower_char).collect()
    };
    Some(TruecaserExample { chars, labels })
}

/// Character inventory. Id 0 is reserved for unknown characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const UNK: usize = 0;

    /// Keeps characters seen at least `min_count` times, ordered by code
    /// point.
    pub fn from_counts(counts: &BTreeMap<char, u64>, min_count: u64) -> Self {
        Self::from_chars(counts.iter().filter(|(_, &n)| n >= min_count).map(|(&c, _)| c))
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = CharVocab::default();
        for c in chars {
            if !v.index.contains_key(&c) {
                v.chars.push(c);
                v.index.insert(c, v.chars.len());
            }
        }
        v
    }

    /// Counts characters of each sentence and of its lowercased form.
    pub fn count_corpus<S: AsRef<str>>(corpus: &[S]) -> BTreeMap<char, u64> {
        let mut counts = BTreeMap::new();
        for s in corpus {
            for c in s.as_ref().chars() {
                *counts.entry(c).or_insert(0) += 1;
                let l = lower_char(c);
                if l != c {
                    *counts.entry(l).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    /// Number of ids including the unknown id.
    pub fn size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub(crate) fn write_meta(&self, section: &mut Section, key: &str) {
        for (i, c) in self.chars.iter().enumerate() {
            section.push_meta(key, format!("{} U+{:04X}", i + 1, *c as u32));
        }
    }

    pub(crate) fn read_meta(section: &Section, key: &str) -> Result<Self> {
        let mut chars = Vec::new();
        for (expected, line) in section.meta_all(key).enumerate() {
            let bad = || Error::Format(format!("bad {key} entry {line:?}"));
            let (id, cp) = line.split_once(' ').ok_or_else(bad)?;
            let id: usize = id.parse().map_err(|_| bad())?;
            let cp = cp.strip_prefix("U+").ok_or_else(bad)?;
            let c = u32::from_str_radix(cp, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(bad)?;
            if id != expected + 1 {
                return Err(Error::Format(format!("{key} ids out of order at {line:?}")));
            }
            chars.push(c);
        }
        Ok(Self::from_chars(chars))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruecaserDims {
    pub char_dim: usize,
    /// Per direction.
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for TruecaserDims {
    fn default() -> Self {
        TruecaserDims {
            char_dim: 50,
            hidden: 100,
            dropout: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruecaserModel {
    pub vocab: CharVocab,
    pub dims: TruecaserDims,
    pub params: ParamSet,
    embed: Embedding,
    encoder: BiLstm,
    output: Linear,
    dropout: Dropout,
}

impl TruecaserModel {
    pub fn new(vocab: CharVocab, dims: TruecaserDims, rng: &mut impl Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let embed = Embedding::new(&mut params, "char_embedding", vocab.size(), dims.char_dim, rng)?;
        let encoder = BiLstm::new(&mut params, "encoder", dims.char_dim, dims.hidden, rng)?;
        let output = Linear::new(&mut params, "output", 2 * dims.hidden, 2, rng)?;
        Ok(TruecaserModel {
            vocab,
            dims,
            params,
            embed,
            encoder,
            output,
            dropout: Dropout::new(dims.dropout)?,
        })
    }

    /// Rebinds layers to an existing parameter set (e.g. one loaded from a
    /// container).
    pub fn from_params(vocab: CharVocab, dropout: f64, params: ParamSet) -> Result<Self> {
        let embed = Embedding::bind(&params, "char_embedding")?;
        let encoder = BiLstm::bind(&params, "encoder")?;
        let output = Linear::bind(&params, "output")?;
        if embed.rows != vocab.size() {
            return Err(Error::Format(format!(
                "embedding has {} rows for a vocabulary of {}",
                embed.rows,
                vocab.size()
            )));
        }
        if encoder.forward.input != embed.dim || output.in_dim != encoder.output_dim() || output.out_dim != 2 {
            return Err(Error::Format("inconsistent truecaser layer shapes".into()));
        }
        let dims = TruecaserDims {
            char_dim: embed.dim,
            hidden: encoder.forward.hidden,
            dropout,
        };
        Ok(TruecaserModel {
            vocab,
            dims,
            params,
            embed,
            encoder,
            output,
            dropout: Dropout::new(dropout)?,
        })
    }

    /// Per-character logits `[upper, lower]`. Dropout is applied when `rng`
    /// is given.
    pub fn forward_logits<R: Rng>(
        &self,
        g: &mut Graph,
        h: SetHandle,
        chars: &[char],
        mut rng: Option<&mut R>,
    ) -> Result<Vec<Var>> {
        let mut inputs = Vec::with_capacity(chars.len());
        for &c in chars {
            let e = self.embed.forward(g, h, self.vocab.id(c))?;
            inputs.push(self.dropout.apply(g, e, rng.as_deref_mut())?);
        }
        let hidden = self.encoder.forward(g, h, &inputs)?;
        hidden
            .into_iter()
            .map(|hc| {
                let hc = self.dropout.apply(g, hc, rng.as_deref_mut())?;
                self.output.forward(g, h, hc)
            })
            .collect()
    }

    /// Mean per-character cross-entropy of `example`.
    pub fn loss<R: Rng>(
        &self,
        g: &mut Graph,
        h: SetHandle,
        example: &TruecaserExample,
        rng: Option<&mut R>,
    ) -> Result<Var> {
        let logits = self.forward_logits(g, h, &example.chars, rng)?;
        let terms = logits
            .iter()
            .zip(&example.labels)
            .map(|(&l, lab)| g.cross_entropy(l, lab.index()))
            .collect::<Result<Vec<_>>>()?;
        let total = g.add_n(&terms)?;
        Ok(g.scale(total, 1.0 / terms.len() as f64))
    }

    /// One distribution per input character (evaluation mode).
    pub fn distributions(&self, chars: &[char]) -> Result<Vec<CaseDistribution>> {
        if chars.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new();
        let h = g.register(&self.params);
        let logits = self.forward_logits::<ChaCha8Rng>(&mut g, h, chars, None)?;
        logits
            .into_iter()
            .map(|l| {
                let p = g.softmax(l)?;
                let v = g.value(p);
                Ok(CaseDistribution::new(v[0], v[1]))
            })
            .collect()
    }

    pub fn predict(&self, text: &str) -> Result<Vec<CaseDistribution>> {
        self.distributions(&text.chars().collect::<Vec<_>>())
    }

    pub fn to_section(&self) -> Section {
        let mut s = Section::new(SECTION);
        s.push_meta("char_dim", self.dims.char_dim);
        s.push_meta("hidden", self.dims.hidden);
        s.push_meta("dropout", self.dims.dropout);
        self.vocab.write_meta(&mut s, "vocab");
        s.push_params(&self.params);
        s
    }

    pub fn from_section(section: &Section) -> Result<Self> {
        let vocab = CharVocab::read_meta(section, "vocab")?;
        let dropout: f64 = section.require("dropout")?;
        let model = Self::from_params(vocab, dropout, section.to_params()?)?;
        let (cd, hd): (usize, usize) = (section.require("char_dim")?, section.require("hidden")?);
        if cd != model.dims.char_dim || hd != model.dims.hidden {
            return Err(Error::Format("truecaser header disagrees with tensor shapes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Container {
            sections: vec![self.to_section()],
        }
        .save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::load(path)?;
        let s = c
            .section(SECTION)
            .ok_or_else(|| Error::Format("container has no truecaser section".into()))?;
        Self::from_section(s)
    }
}

/// Uppercases each character predicted `U` that has an uppercase form; every
/// other character is copied unchanged.
pub fn apply_truecaser(model: &TruecaserModel, sentence: &str) -> Result<String> {
    let chars: Vec<char> = sentence.chars().collect();
    let dists = model.distributions(&chars)?;
    Ok(chars
        .iter()
        .zip(&dists)
        .map(|(&c, d)| {
            if d.argmax() == CaseLabel::Upper && has_upper_form(c) {
                upper_char(c)
            } else {
                c
            }
        })
        .collect())
}

/// Runs the truecaser once over the lowercased tokens joined by single
/// spaces and returns, per token, the distributions of its characters.
pub fn case_distributions_for_tokens<S: AsRef<str>>(
    model: &TruecaserModel,
    tokens: &[S],
) -> Result<Vec<Vec<CaseDistribution>>> {
    let (chars, lens) = joined_lowercase(tokens);
    let dists = model.distributions(&chars)?;
    Ok(split_by_tokens(&dists, &lens))
}

/// Lowercased tokens joined with single spaces, plus each token's length in
/// characters.
pub(crate) fn joined_lowercase<S: AsRef<str>>(tokens: &[S]) -> (Vec<char>, Vec<usize>) {
    let mut chars = Vec::new();
    let mut lens = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            chars.push(' ');
        }
        let before = chars.len();
        chars.extend(t.as_ref().chars().map(lower_char));
        lens.push(chars.len() - before);
    }
    (chars, lens)
}

pub(crate) fn split_by_tokens<T: Clone>(items: &[T], lens: &[usize]) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(lens.len());
    let mut pos = 0;
    for (i, &n) in lens.iter().enumerate() {
        if i > 0 {
            pos += 1;
        }
        out.push(items[pos..pos + n].to_vec());
        pos += n;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruecaserConfig {
    pub dims: TruecaserDims,
    pub min_char_count: u64,
    pub max_chars: usize,
    pub epochs: usize,
    pub seed: u64,
    pub pass_through_prob: f64,
    pub adam: AdamConfig,
    pub clip_norm: f64,
}

impl Default for TruecaserConfig {
    fn default() -> Self {
        TruecaserConfig {
            dims: TruecaserDims::default(),
            min_char_count: 5,
            max_chars: 1000,
            epochs: 20,
            seed: 1,
            pass_through_prob: 0.2,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub epochs: Vec<EpochReport>,
    pub skipped_empty: usize,
    pub truncated: usize,
    pub unmappable_chars: usize,
}

fn truncate_chars(s: &str, max: usize) -> (&str, bool) {
    match s.char_indices().nth(max) {
        Some((byte, _)) => (&s[..byte], true),
        None => (s, false),
    }
}

/// Mean per-sentence loss on lowercased inputs, evaluation mode.
pub fn heldout_loss<S: AsRef<str>>(model: &TruecaserModel, corpus: &[S]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for s in corpus {
        let Some(ex) = make_training_example(s.as_ref(), 0.0, &mut rng) else {
            continue;
        };
        let mut g = Graph::new();
        let h = g.register(&model.params);
        let loss = model.loss::<ChaCha8Rng>(&mut g, h, &ex, None)?;
        total += g.scalar(loss);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Trains a truecaser on cased sentences. The loss on `heldout` is reported
/// after every epoch. Deterministic given `config.seed`.
pub fn train_truecaser<S: AsRef<str>>(
    corpus: &[S],
    heldout: &[S],
    config: &TruecaserConfig,
) -> Result<(TruecaserModel, TrainStats)> {
    let mut stats = TrainStats::default();
    let mut sentences: Vec<&str> = Vec::with_capacity(corpus.len());
    for s in corpus {
        let s = s.as_ref();
        if s.is_empty() {
            stats.skipped_empty += 1;
            continue;
        }
        let (s, cut) = truncate_chars(s, config.max_chars);
        stats.truncated += cut as usize;
        stats.unmappable_chars += crate::text::count_unmappable(s);
        sentences.push(s);
    }
    if sentences.is_empty() {
        return Err(Error::Config("truecaser training corpus is empty".into()));
    }
    if stats.skipped_empty > 0 {
        warn!("skipped {} empty sentences", stats.skipped_empty);
    }
    if stats.truncated > 0 {
        warn!("truncated {} sentences to {} characters", stats.truncated, config.max_chars);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = CharVocab::from_counts(&CharVocab::count_corpus(&sentences), config.min_char_count);
    let mut model = TruecaserModel::new(vocab, config.dims, &mut rng)?;
    let mut adam = Adam::new(config.adam, &model.params);
    let mut order: Vec<usize> = (0..sentences.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = make_training_example(sentences[i], config.pass_through_prob, &mut rng)
                .expect("non-empty");
            let grads = {
                let mut g = Graph::new();
                let h = g.register(&model.params);
                let loss = model.loss(&mut g, h, &ex, Some(&mut rng))?;
                total += g.scalar(loss);
                let grads = g.backward(loss)?;
                (grads, h)
            };
            grads.0.accumulate_into(grads.1, &mut model.params)?;
            clip_grad_norm(&mut [&mut model.params], config.clip_norm);
            adam.step(&mut model.params)?;
        }
        let train_loss = total / order.len() as f64;
        let heldout_loss = if heldout.is_empty() {
            None
        } else {
            Some(heldout_loss(&model, heldout)?)
        };
        info!(
            "truecaser epoch {epoch}: train loss {train_loss:.5}{}",
            heldout_loss.map_or(String::new(), |l| format!(", held-out loss {l:.5}"))
        );
        stats.epochs.push(EpochReport {
            epoch,
            train_loss,
            heldout_loss,
        });
    }
    Ok((model, stats))
}

/// Character F1 of the model's output on the lowercased `corpus` against the
/// cased `corpus`.
pub fn eval_truecaser<S: AsRef<str>>(model: &TruecaserModel, corpus: &[S]) -> Result<PrfScore> {
    let preds = corpus
        .iter()
        .map(|s| apply_truecaser(model, &lowercase(s.as_ref())))
        .collect::<Result<Vec<_>>>()?;
    metrics::char_f1(corpus, &preds)
}
