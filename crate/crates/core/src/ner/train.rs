//! NER training loop covering every case-vector mode and truecaser regime.

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{EmbeddingTable, NerExample};
use super::model::{
    char_vocab_for, constant_case_vars, has_cased_text, tag_inventory, CaseVectorMode, CaseVectors, NerDims,
    NerModel, Scenario, TruecaserRegime, WordVocab,
};
use crate::error::{Error, Result};
use crate::metrics::{bio_decode, span_f1, PrfScore};
use crate::nn::{clip_grad_norm, Adam, AdamConfig, Graph};
use crate::truecaser::{self, make_training_example, CharVocab, TruecaserDims, TruecaserModel};

#[derive(Debug, Clone, PartialEq)]
pub struct NerTrainConfig {
    pub dims: NerDims,
    pub mode: CaseVectorMode,
    pub scenario: Scenario,
    pub regime: TruecaserRegime,
    /// Weight of the auxiliary truecasing loss when the regime trains the
    /// truecaser.
    pub aux_weight: f64,
    pub pass_through_prob: f64,
    /// Truecaser shape under `JointFromScratch`.
    pub truecaser_dims: TruecaserDims,
    pub min_word_count: usize,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
}

impl Default for NerTrainConfig {
    fn default() -> Self {
        NerTrainConfig {
            dims: NerDims::default(),
            mode: CaseVectorMode::None,
            scenario: Scenario::Cased,
            regime: TruecaserRegime::FixedPretrained,
            aux_weight: 1.0,
            pass_through_prob: 0.2,
            truecaser_dims: TruecaserDims::default(),
            min_word_count: 1,
            seed: 1,
            max_epochs: 50,
            patience: 5,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NerEpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NerTrainStats {
    pub epochs: Vec<NerEpochReport>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Span P/R/F1 of the model's predictions against `data`.
pub fn evaluate(model: &NerModel, data: &[NerExample]) -> Result<PrfScore> {
    let mut gold = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    for ex in data {
        gold.push(bio_decode(&ex.tags)?);
        pred.push(model.predict(&ex.tokens)?);
    }
    span_f1(&gold, &pred)
}

fn evaluate_cached(model: &NerModel, data: &[NerExample], cache: &[Option<CaseVectors>]) -> Result<PrfScore> {
    let mut gold = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    for (ex, case) in data.iter().zip(cache) {
        gold.push(bio_decode(&ex.tags)?);
        pred.push(bio_decode(&model.predict_tags_with(&ex.tokens, case.as_ref())?)?);
    }
    span_f1(&gold, &pred)
}

fn validate(train: &[NerExample], config: &NerTrainConfig) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Config("NER training set is empty".into()));
    }
    if let Some(ex) = train.iter().find(|e| e.is_empty() || e.tokens.len() != e.tags.len()) {
        return Err(Error::Input(format!("malformed training sentence {:?}", ex.tokens)));
    }
    if config.mode == CaseVectorMode::Gold && !has_cased_text(train) {
        return Err(Error::Config(
            "gold case vectors need cased training text, but the training set has no uppercase characters".into(),
        ));
    }
    if config.patience == 0 || config.max_epochs == 0 {
        return Err(Error::Config("max_epochs and patience must be positive".into()));
    }
    Ok(())
}

/// The untrained truecaser of the joint regime, over every character of the
/// training sentences. `train_ner` builds it with the first draws from a
/// generator seeded with `config.seed`.
pub fn fresh_truecaser(train: &[NerExample], dims: TruecaserDims, rng: &mut impl Rng) -> Result<TruecaserModel> {
    let counts = CharVocab::count_corpus(&joined_sentences(train));
    TruecaserModel::new(CharVocab::from_counts(&counts, 1), dims, rng)
}

/// Trains a tagger. `truecaser` supplies the pretrained model for the
/// fixed and fine-tuned regimes; the joint regime starts from a fresh one.
/// The parameters of the epoch with the best dev span F1 are returned (the
/// last epoch when `dev` is empty).
pub fn train_ner(
    train: &[NerExample],
    dev: &[NerExample],
    config: &NerTrainConfig,
    embeddings: Option<&EmbeddingTable>,
    truecaser: Option<TruecaserModel>,
) -> Result<(NerModel, NerTrainStats)> {
    validate(train, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let truecaser = match (config.mode, config.regime) {
        (CaseVectorMode::Predicted, TruecaserRegime::JointFromScratch) => {
            Some(fresh_truecaser(train, config.truecaser_dims, &mut rng)?)
        }
        (CaseVectorMode::Predicted, _) => Some(truecaser.ok_or_else(|| {
            Error::Config(format!("regime {} needs a pretrained truecaser", config.regime))
        })?),
        _ => None,
    };
    let mut model = NerModel::new(
        tag_inventory(train),
        WordVocab::from_examples(train, config.min_word_count),
        char_vocab_for(train, config.scenario),
        config.dims,
        config.mode,
        config.scenario,
        embeddings,
        truecaser,
        &mut rng,
    )?;
    let gold: Vec<Vec<usize>> = train
        .iter()
        .map(|e| e.tags.iter().map(|t| model.tag_id(t)).collect())
        .collect::<Result<_>>()?;

    let joint = config.mode == CaseVectorMode::Predicted && config.regime.trains_truecaser();
    let train_sentences = joined_sentences(train);
    let precompute = |m: &NerModel, data: &[NerExample]| -> Result<Vec<Option<CaseVectors>>> {
        data.iter().map(|e| m.case_vectors(&e.tokens)).collect()
    };
    let train_cache = if joint { Vec::new() } else { precompute(&model, train)? };

    let mut adam = Adam::new(config.adam, &model.params);
    let mut tc_adam = model.truecaser.as_ref().map(|tc| Adam::new(config.adam, &tc.params));
    let mut best: Option<(f64, NerModel)> = None;
    let mut stats = NerTrainStats::default();
    let mut since_best = 0;
    let mut dev_cache: Option<Vec<Option<CaseVectors>>> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &train[i];
            let (grads, h, th) = {
                let mut g = Graph::new();
                let h = g.register(&model.params);
                let (loss, th) = if joint {
                    let tc = model.truecaser.as_ref().expect("joint regime has a truecaser");
                    let th = g.register(&tc.params);
                    let aux_example = make_training_example(&train_sentences[i], config.pass_through_prob, &mut rng)
                        .ok_or_else(|| Error::Input("empty training sentence".into()))?;
                    let (chars, lens) = truecaser::joined_lowercase(&ex.tokens);
                    let logits = tc.forward_logits::<ChaCha8Rng>(&mut g, th, &chars, None)?;
                    let mut probs = Vec::with_capacity(logits.len());
                    for l in logits {
                        let p = g.softmax(l)?;
                        probs.push(g.detach(p));
                    }
                    let case = truecaser::split_by_tokens(&probs, &lens);
                    let em = model.emissions(&mut g, h, &ex.tokens, Some(&case), Some(&mut rng))?;
                    let nll = model.crf_nll(&mut g, h, &em, &gold[i])?;
                    let aux = tc.loss(&mut g, th, &aux_example, Some(&mut rng))?;
                    let aux = g.scale(aux, config.aux_weight);
                    (g.add(nll, aux)?, Some(th))
                } else {
                    let case = train_cache[i].as_ref().map(|c| constant_case_vars(&mut g, c));
                    let em = model.emissions(&mut g, h, &ex.tokens, case.as_deref(), Some(&mut rng))?;
                    (model.crf_nll(&mut g, h, &em, &gold[i])?, None)
                };
                total += g.scalar(loss);
                (g.backward(loss)?, h, th)
            };
            grads.accumulate_into(h, &mut model.params)?;
            match (th, model.truecaser.as_mut(), tc_adam.as_mut()) {
                (Some(th), Some(tc), Some(tc_adam)) => {
                    grads.accumulate_into(th, &mut tc.params)?;
                    clip_grad_norm(&mut [&mut model.params, &mut tc.params], config.clip_norm);
                    tc_adam.step(&mut tc.params)?;
                }
                _ => {
                    clip_grad_norm(&mut [&mut model.params], config.clip_norm);
                }
            }
            adam.step(&mut model.params)?;
        }
        let train_loss = total / train.len() as f64;
        let dev_f1 = if dev.is_empty() {
            None
        } else if joint {
            Some(evaluate(&model, dev)?.f1())
        } else {
            if dev_cache.is_none() {
                dev_cache = Some(precompute(&model, dev)?);
            }
            Some(evaluate_cached(&model, dev, dev_cache.as_deref().expect("filled above"))?.f1())
        };
        info!(
            "ner epoch {epoch}: train loss {train_loss:.4}{}",
            dev_f1.map_or(String::new(), |f| format!(", dev span F1 {:.1}", 100.0 * f))
        );
        stats.epochs.push(NerEpochReport {
            epoch,
            train_loss,
            dev_f1,
        });
        match dev_f1 {
            None => stats.best_epoch = epoch,
            Some(f) => {
                if best.as_ref().is_none_or(|(b, _)| f > *b) {
                    best = Some((f, model.clone()));
                    stats.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= config.patience {
                        break;
                    }
                }
            }
        }
    }
    let model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok((model, stats))
}

fn joined_sentences(data: &[NerExample]) -> Vec<String> {
    data.iter().map(|e| e.tokens.join(" ")).collect()
}
