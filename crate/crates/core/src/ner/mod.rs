//! Named entity recognition: data handling, the tagger and its training.

pub mod data;
pub mod model;
pub mod train;

pub use data::{
    augment_lowercase, lowercase_dataset, read_conll, read_embeddings, write_conll, EmbeddingTable, NerExample,
};
pub use model::{CaseVectorMode, CaseVectors, NerDims, NerModel, Scenario, TruecaserRegime, WordVocab};
pub use train::{evaluate, fresh_truecaser, train_ner, NerEpochReport, NerTrainConfig, NerTrainStats};
