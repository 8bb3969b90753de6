//! BiLSTM-CRF tagger whose character inputs can carry per-character case
//! distributions.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::data::{EmbeddingTable, NerExample};
use crate::crf::{self, CrfParams, Emissions};
use crate::error::{Error, Result};
use crate::metrics::{bio_decode, Span};
use crate::nn::container::{Container, Section};
use crate::nn::{BiLstm, CharCnn, Dropout, Embedding, Graph, Linear, ParamId, ParamSet, SetHandle, Tensor, Var};
use crate::text::{has_uppercase, lowercase};
use crate::truecaser::{self, CaseDistribution, CaseLabel, CharVocab, TruecaserModel};

pub const SECTION: &str = "ner";

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $kw:literal),+ $(,)? }) => {
        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($kw => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?}; expected one of: ", $($kw, " "),+),
                        s
                    ))),
                }
            }
        }
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $kw,)+ })
            }
        }
    };
}

/// Extra per-character input to the character encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseVectorMode {
    None,
    /// Truecaser predictions on the lowercased sentence.
    Predicted,
    /// One-hot casing of the original text.
    Gold,
}
keyword_enum!(CaseVectorMode { None => "none", Predicted => "predicted", Gold => "gold" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruecaserRegime {
    FixedPretrained,
    FineTunedPretrained,
    JointFromScratch,
}
keyword_enum!(TruecaserRegime {
    FixedPretrained => "fixed",
    FineTunedPretrained => "fine-tuned",
    JointFromScratch => "joint",
});

impl TruecaserRegime {
    pub fn trains_truecaser(self) -> bool {
        !matches!(self, TruecaserRegime::FixedPretrained)
    }
}

/// Casing of the text the tagger sees. Under `Uncased` every token is
/// lowercased before lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Cased,
    Uncased,
}
keyword_enum!(Scenario { Cased => "cased", Uncased => "uncased" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NerDims {
    pub word_dim: usize,
    pub char_dim: usize,
    pub cnn_filters: usize,
    pub cnn_width: usize,
    /// Per direction.
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for NerDims {
    fn default() -> Self {
        NerDims {
            word_dim: 100,
            char_dim: 16,
            cnn_filters: 128,
            cnn_width: 3,
            hidden: 256,
            dropout: 0.25,
        }
    }
}

/// Word inventory; row 0 is the unknown word.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        let mut v = WordVocab::default();
        for w in words {
            let w = lowercase(&w);
            if !v.index.contains_key(&w) {
                v.words.push(w.clone());
                v.index.insert(w, v.words.len());
            }
        }
        v
    }

    /// Lowercased training words seen at least `min_count` times, sorted.
    pub fn from_examples(data: &[NerExample], min_count: usize) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for ex in data {
            for t in &ex.tokens {
                *counts.entry(lowercase(t)).or_insert(0usize) += 1;
            }
        }
        Self::new(counts.into_iter().filter(|(_, n)| *n >= min_count).map(|(w, _)| w))
    }

    pub fn row(&self, word: &str) -> usize {
        self.index.get(&lowercase(word)).copied().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        self.words.len() + 1
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Debug, Clone)]
struct Layers {
    word_embed: Embedding,
    char_embed: Embedding,
    cnn: CharCnn,
    encoder: BiLstm,
    emission: Linear,
    transitions: ParamId,
    start: ParamId,
    end: ParamId,
}

impl Layers {
    fn bind(params: &ParamSet, cnn_width: usize) -> Result<Self> {
        let id = |n: &str| {
            params
                .id(n)
                .ok_or_else(|| Error::Format(format!("missing parameter {n}")))
        };
        Ok(Layers {
            word_embed: Embedding::bind(params, "word_embedding")?,
            char_embed: Embedding::bind(params, "char_embedding")?,
            cnn: CharCnn::bind(params, "char_cnn", cnn_width)?,
            encoder: BiLstm::bind(params, "encoder")?,
            emission: Linear::bind(params, "emission")?,
            transitions: id("crf.transitions")?,
            start: id("crf.start")?,
            end: id("crf.end")?,
        })
    }
}

/// Per-token case vectors fed alongside character embeddings.
pub type CaseVectors = Vec<Vec<CaseDistribution>>;

#[derive(Debug, Clone)]
pub struct NerModel {
    pub tags: Vec<String>,
    tag_index: HashMap<String, usize>,
    pub words: WordVocab,
    pub chars: CharVocab,
    pub dims: NerDims,
    pub mode: CaseVectorMode,
    pub scenario: Scenario,
    pub params: ParamSet,
    pub truecaser: Option<TruecaserModel>,
    layers: Layers,
    dropout: Dropout,
}

/// Tag inventory of a dataset: `O` first, then the others sorted.
pub fn tag_inventory(data: &[NerExample]) -> Vec<String> {
    let mut set: std::collections::BTreeSet<&str> = data.iter().flat_map(|e| e.tags.iter().map(String::as_str)).collect();
    set.remove("O");
    std::iter::once("O").chain(set).map(str::to_string).collect()
}

impl NerModel {
    /// Fresh model. Word rows come from `embeddings` when given (their
    /// vocabulary replaces `words`), otherwise they are drawn at random.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tags: Vec<String>,
        words: WordVocab,
        chars: CharVocab,
        dims: NerDims,
        mode: CaseVectorMode,
        scenario: Scenario,
        embeddings: Option<&EmbeddingTable>,
        truecaser: Option<TruecaserModel>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::Config("empty tag inventory".into()));
        }
        if mode == CaseVectorMode::Predicted && truecaser.is_none() {
            return Err(Error::Config("predicted case vectors need a truecaser".into()));
        }
        let mut params = ParamSet::new();
        let words = match embeddings {
            Some(e) => {
                if e.dim() != dims.word_dim {
                    return Err(Error::Config(format!(
                        "embedding dimension {} differs from word_dim {}",
                        e.dim(),
                        dims.word_dim
                    )));
                }
                Embedding::from_values(&mut params, "word_embedding", e.len(), e.dim(), e.values().to_vec())?;
                WordVocab::new(e.words().iter().cloned())
            }
            None => {
                Embedding::new(&mut params, "word_embedding", words.size(), dims.word_dim, rng)?;
                words
            }
        };
        let case_dim = if mode == CaseVectorMode::None { 0 } else { 2 };
        Embedding::new(&mut params, "char_embedding", chars.size(), dims.char_dim, rng)?;
        CharCnn::new(&mut params, "char_cnn", dims.char_dim + case_dim, dims.cnn_filters, dims.cnn_width, rng)?;
        BiLstm::new(&mut params, "encoder", dims.word_dim + dims.cnn_filters, dims.hidden, rng)?;
        Linear::new(&mut params, "emission", 2 * dims.hidden, tags.len(), rng)?;
        let t = tags.len();
        params.add("crf.transitions", Tensor::zeros(vec![t, t]))?;
        params.add("crf.start", Tensor::zeros(vec![t]))?;
        params.add("crf.end", Tensor::zeros(vec![t]))?;
        Self::assemble(tags, words, chars, dims, mode, scenario, params, truecaser)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        tags: Vec<String>,
        words: WordVocab,
        chars: CharVocab,
        dims: NerDims,
        mode: CaseVectorMode,
        scenario: Scenario,
        params: ParamSet,
        truecaser: Option<TruecaserModel>,
    ) -> Result<Self> {
        let layers = Layers::bind(&params, dims.cnn_width)?;
        let case_dim = if mode == CaseVectorMode::None { 0 } else { 2 };
        if layers.cnn.in_dim != layers.char_embed.dim + case_dim
            || layers.word_embed.rows != words.size()
            || layers.char_embed.rows != chars.size()
            || layers.emission.out_dim != tags.len()
        {
            return Err(Error::Format("NER parameters do not match vocabularies and mode".into()));
        }
        let tag_index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(NerModel {
            tags,
            tag_index,
            words,
            chars,
            dims,
            mode,
            scenario,
            params,
            truecaser,
            layers,
            dropout: Dropout::new(dims.dropout)?,
        })
    }

    /// Width of the per-token vector fed to the sentence encoder.
    pub fn token_dim(&self) -> usize {
        self.layers.word_embed.dim + self.layers.cnn.filters
    }

    /// Width of each per-character vector fed to the character encoder.
    pub fn char_input_dim(&self) -> usize {
        self.layers.cnn.in_dim
    }

    pub fn tag_id(&self, tag: &str) -> Result<usize> {
        self.tag_index
            .get(tag)
            .copied()
            .ok_or_else(|| Error::Input(format!("tag {tag:?} is not in the model's inventory")))
    }

    /// Token as the tagger sees it under the model's scenario.
    pub fn surface(&self, token: &str) -> String {
        match self.scenario {
            Scenario::Cased => token.to_string(),
            Scenario::Uncased => lowercase(token),
        }
    }

    /// Case vectors for a sentence under the model's mode, computed outside
    /// any graph. `None` in `None` mode.
    pub fn case_vectors<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Option<CaseVectors>> {
        match self.mode {
            CaseVectorMode::None => Ok(None),
            CaseVectorMode::Gold => Ok(Some(gold_case_vectors(tokens))),
            CaseVectorMode::Predicted => {
                let tc = self.truecaser.as_ref().expect("checked at construction");
                Ok(Some(truecaser::case_distributions_for_tokens(tc, tokens)?))
            }
        }
    }

    /// Builds `x_t` for one token.
    pub fn token_representation<R: Rng>(
        &self,
        g: &mut Graph,
        h: SetHandle,
        token: &str,
        case: Option<&[Var]>,
        mut rng: Option<&mut R>,
    ) -> Result<Var> {
        let surface = self.surface(token);
        let chars: Vec<char> = surface.chars().collect();
        if chars.is_empty() {
            return Err(Error::Input("empty token".into()));
        }
        if let Some(c) = case {
            if c.len() != chars.len() {
                return Err(Error::Alignment(format!(
                    "token {token:?} has {} characters but {} case vectors",
                    chars.len(),
                    c.len()
                )));
            }
        }
        let w = self.layers.word_embed.forward(g, h, self.words.row(&surface))?;
        let w = self.dropout.apply(g, w, rng.as_deref_mut())?;
        let mut vs = Vec::with_capacity(chars.len());
        for (i, &ch) in chars.iter().enumerate() {
            let c = self.layers.char_embed.forward(g, h, self.chars.id(ch))?;
            vs.push(match case {
                Some(d) => g.concat(&[c, d[i]]),
                None => c,
            });
        }
        let f = self.layers.cnn.forward(g, h, &vs)?;
        let f = self.dropout.apply(g, f, rng)?;
        Ok(g.concat(&[w, f]))
    }

    /// Emission vectors, one per token. `case` holds graph values already
    /// detached from any truecaser.
    pub fn emissions<R: Rng, S: AsRef<str>>(
        &self,
        g: &mut Graph,
        h: SetHandle,
        tokens: &[S],
        case: Option<&[Vec<Var>]>,
        mut rng: Option<&mut R>,
    ) -> Result<Vec<Var>> {
        if tokens.is_empty() {
            return Err(Error::Input("empty sentence".into()));
        }
        if (self.mode == CaseVectorMode::None) != case.is_none() {
            return Err(Error::Usage(format!("case vectors do not fit mode {}", self.mode)));
        }
        if let Some(c) = case {
            if c.len() != tokens.len() {
                return Err(Error::Alignment(format!(
                    "{} tokens but case vectors for {}",
                    tokens.len(),
                    c.len()
                )));
            }
        }
        let mut xs = Vec::with_capacity(tokens.len());
        for (k, t) in tokens.iter().enumerate() {
            let ck = case.map(|c| c[k].as_slice());
            xs.push(self.token_representation(g, h, t.as_ref(), ck, rng.as_deref_mut())?);
        }
        let hs = self.layers.encoder.forward(g, h, &xs)?;
        hs.into_iter()
            .map(|x| {
                let x = self.dropout.apply(g, x, rng.as_deref_mut())?;
                self.layers.emission.forward(g, h, x)
            })
            .collect()
    }

    pub fn crf_nll(&self, g: &mut Graph, h: SetHandle, emissions: &[Var], gold: &[usize]) -> Result<Var> {
        g.crf_nll(
            emissions,
            gold,
            h.param(self.layers.transitions),
            h.param(self.layers.start),
            h.param(self.layers.end),
        )
    }

    pub fn crf_params(&self) -> Result<CrfParams> {
        CrfParams::new(
            self.tags.len(),
            self.params.get(self.layers.transitions).values().to_vec(),
            self.params.get(self.layers.start).values().to_vec(),
            self.params.get(self.layers.end).values().to_vec(),
        )
    }

    /// Evaluation-mode emission matrix given explicit case vectors.
    pub fn emission_matrix<S: AsRef<str>>(&self, tokens: &[S], case: Option<&CaseVectors>) -> Result<Emissions> {
        let mut g = Graph::new();
        let h = g.register(&self.params);
        let case_vars = case.map(|c| constant_case_vars(&mut g, c));
        let em = self.emissions::<ChaCha8Rng, S>(&mut g, h, tokens, case_vars.as_deref(), None)?;
        let rows: Vec<Vec<f64>> = em.iter().map(|&v| g.value(v).to_vec()).collect();
        Emissions::from_rows(&rows)
    }

    /// Most likely tag sequence.
    pub fn predict_tags<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<String>> {
        let case = self.case_vectors(tokens)?;
        self.predict_tags_with(tokens, case.as_ref())
    }

    pub fn predict_tags_with<S: AsRef<str>>(&self, tokens: &[S], case: Option<&CaseVectors>) -> Result<Vec<String>> {
        let em = self.emission_matrix(tokens, case)?;
        let path = crf::viterbi_decode(&em, &self.crf_params()?)?;
        Ok(path.into_iter().map(|i| self.tags[i].clone()).collect())
    }

    /// Typed spans of the most likely tag sequence.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Span>> {
        bio_decode(&self.predict_tags(tokens)?)
    }

    pub fn to_container(&self) -> Container {
        let mut s = Section::new(SECTION);
        s.push_meta("mode", self.mode);
        s.push_meta("scenario", self.scenario);
        s.push_meta("dropout", self.dims.dropout);
        s.push_meta("cnn_width", self.dims.cnn_width);
        for (i, t) in self.tags.iter().enumerate() {
            s.push_meta("tag", format!("{i} {t}"));
        }
        for (i, w) in self.words.words().iter().enumerate() {
            s.push_meta("word", format!("{} {w}", i + 1));
        }
        self.chars.write_meta(&mut s, "char");
        s.push_params(&self.params);
        let mut sections = vec![s];
        if let Some(tc) = &self.truecaser {
            sections.push(tc.to_section());
        }
        Container { sections }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let s = c
            .section(SECTION)
            .ok_or_else(|| Error::Format("container has no ner section".into()))?;
        let mode: CaseVectorMode = s.require("mode")?;
        let scenario: Scenario = s.require("scenario")?;
        let dropout: f64 = s.require("dropout")?;
        let cnn_width: usize = s.require("cnn_width")?;
        let tags = indexed_listing(s, "tag", 0)?;
        let words = WordVocab::new(indexed_listing(s, "word", 1)?);
        let chars = CharVocab::read_meta(s, "char")?;
        let params = s.to_params()?;
        let layers = Layers::bind(&params, cnn_width)?;
        let dims = NerDims {
            word_dim: layers.word_embed.dim,
            char_dim: layers.char_embed.dim,
            cnn_filters: layers.cnn.filters,
            cnn_width,
            hidden: layers.encoder.forward.hidden,
            dropout,
        };
        let truecaser = c.section(truecaser::SECTION).map(TruecaserModel::from_section).transpose()?;
        if mode == CaseVectorMode::Predicted && truecaser.is_none() {
            return Err(Error::Format("predicted-mode model without a truecaser section".into()));
        }
        Self::assemble(tags, words, chars, dims, mode, scenario, params, truecaser)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

fn indexed_listing(s: &Section, key: &str, first: usize) -> Result<Vec<String>> {
    s.meta_all(key)
        .enumerate()
        .map(|(i, line)| {
            let (id, value) = line
                .split_once(' ')
                .ok_or_else(|| Error::Format(format!("bad {key} entry {line:?}")))?;
            if id.parse::<usize>().ok() != Some(i + first) {
                return Err(Error::Format(format!("{key} ids out of order at {line:?}")));
            }
            Ok(value.to_string())
        })
        .collect()
}

/// One-hot `(p_U, p_L)` per character of each original token.
pub fn gold_case_vectors<S: AsRef<str>>(tokens: &[S]) -> CaseVectors {
    tokens
        .iter()
        .map(|t| t.as_ref().chars().map(|c| CaseLabel::of(c).one_hot()).collect())
        .collect()
}

pub(crate) fn constant_case_vars(g: &mut Graph, case: &CaseVectors) -> Vec<Vec<Var>> {
    case.iter()
        .map(|tok| tok.iter().map(|d| g.constant(d.as_array().to_vec())).collect())
        .collect()
}

/// True when any token of the dataset contains an uppercase character.
pub fn has_cased_text(data: &[NerExample]) -> bool {
    data.iter().any(|e| e.tokens.iter().any(|t| has_uppercase(t)))
}

/// Characters of the tokens as the tagger sees them, sorted.
pub fn char_vocab_for(data: &[NerExample], scenario: Scenario) -> CharVocab {
    let mut set = std::collections::BTreeSet::new();
    for e in data {
        for t in &e.tokens {
            match scenario {
                Scenario::Cased => set.extend(t.chars()),
                Scenario::Uncased => set.extend(lowercase(t).chars()),
            }
        }
    }
    CharVocab::from_chars(set)
}
