//! Representation models fitted on a dataset and the featurizer that turns
//! a cell into a wide vector plus embedding inputs.

pub mod embedding;
pub mod empirical;
pub mod format;
pub mod pipeline;

pub use embedding::{cosine, tokenize, EmbeddingConfig, EmbeddingModel, Granularity};
pub use empirical::{CooccurrenceModel, EmpiricalValueModel, ValueDictionary};
pub use format::{symbol_class, Alphabet, NGramFormatModel, SymbolClass};
pub use pipeline::{
    layout_hash, FeatureConfig, FeatureGroup, FeatureLayout, FeaturePipeline, FeatureVector, Featurizer, Scale,
    DEEP_INPUTS,
};
