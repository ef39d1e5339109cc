//! Skip-gram embeddings with negative sampling and hashed character
//! n-gram subwords.
//!
//! A token's input representation is the mean of its own vector and the
//! vectors of its `min_n..=max_n` character n-grams (taken over
//! `<token>`). Tokens outside the vocabulary are represented by their
//! n-grams alone, so every string can be embedded.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dims: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f32,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dims: 50,
            epochs: 5,
            window: 5,
            negatives: 5,
            learning_rate: 0.05,
            min_n: 3,
            max_n: 5,
            buckets: 2048,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    /// Characters of a cell value.
    Character,
    /// Tokens within a cell value.
    CellToken,
    /// Union of the tokens of all values in a tuple.
    TupleBag,
    /// Whole attribute values, with the rest of the tuple as context.
    DatasetNeighbor,
}

/// How context is formed around a center token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Up to this many positions on each side.
    Window(usize),
    /// Every other token of the sentence, regardless of order.
    Bag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    granularity: Granularity,
    dims: usize,
    min_n: usize,
    max_n: usize,
    buckets: usize,
    vocab: Vec<String>,
    words: Vec<f32>,
    subwords: Vec<f32>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// FNV-1a, the hash fastText uses for n-gram buckets.
fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(16_777_619);
    }
    h
}

fn subword_ids(token: &str, min_n: usize, max_n: usize, buckets: usize) -> Vec<usize> {
    if buckets == 0 || min_n == 0 {
        return Vec::new();
    }
    let padded: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    let mut buf = String::new();
    for n in min_n..=max_n {
        if n > padded.len() {
            break;
        }
        for w in padded.windows(n) {
            buf.clear();
            buf.extend(w);
            out.push(fnv1a(buf.as_bytes()) as usize % buckets);
        }
    }
    out
}

fn add_scaled(dst: &mut [f32], src: &[f32], scale: f32) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl EmbeddingModel {
    /// Trains on `sentences` (each a list of tokens).
    pub fn train(
        granularity: Granularity,
        sentences: &[Vec<String>],
        context: Context,
        config: &EmbeddingConfig,
    ) -> Result<Self> {
        let d = config.dims;
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut vocab: Vec<String> = Vec::new();
        for tok in sentences.iter().flatten() {
            let c = counts.entry(tok.as_str()).or_insert(0);
            if *c == 0 {
                vocab.push(tok.clone());
            }
            *c += 1;
        }
        if vocab.is_empty() {
            return Err(Error::Empty(format!("{granularity:?} corpus has no tokens")));
        }
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / d as f32;
        let mut words: Vec<f32> = (0..vocab.len() * d).map(|_| rng.gen_range(-bound..bound)).collect();
        let mut subwords: Vec<f32> = (0..config.buckets * d).map(|_| rng.gen_range(-bound..bound)).collect();
        let mut output = vec![0f32; vocab.len() * d];

        let subs: Vec<Vec<usize>> = vocab
            .iter()
            .map(|w| subword_ids(w, config.min_n, config.max_n, config.buckets))
            .collect();

        // unigram^0.75 for negatives
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut acc = 0.0f64;
        for w in &vocab {
            acc += (counts[w.as_str()] as f64).powf(0.75);
            cumulative.push(acc);
        }
        let draw_negative = |rng: &mut ChaCha8Rng| -> usize {
            let u = rng.gen::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
        };

        let encoded: Vec<Vec<usize>> = sentences
            .iter()
            .map(|s| s.iter().map(|t| index[t.as_str()]).collect())
            .collect();
        let total_tokens: usize = encoded.iter().map(Vec::len).sum::<usize>() * config.epochs.max(1);
        let mut processed = 0usize;
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut hidden = vec![0f32; d];
        let mut grad = vec![0f32; d];

        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &s in &order {
                let sentence = &encoded[s];
                for (pos, &center) in sentence.iter().enumerate() {
                    let progress = processed as f32 / total_tokens.max(1) as f32;
                    let lr = config.learning_rate * (1.0 - progress).max(1e-4);
                    processed += 1;

                    let contexts: Vec<usize> = match context {
                        Context::Window(w) => {
                            let reach = rng.gen_range(1..=w.max(1));
                            let lo = pos.saturating_sub(reach);
                            let hi = (pos + reach + 1).min(sentence.len());
                            (lo..hi).filter(|&p| p != pos).map(|p| sentence[p]).collect()
                        }
                        Context::Bag => sentence
                            .iter()
                            .enumerate()
                            .filter(|&(p, _)| p != pos)
                            .map(|(_, &t)| t)
                            .collect(),
                    };
                    if contexts.is_empty() {
                        continue;
                    }

                    let parts = &subs[center];
                    let scale = 1.0 / (1 + parts.len()) as f32;
                    hidden.copy_from_slice(&words[center * d..(center + 1) * d]);
                    for &b in parts {
                        add_scaled(&mut hidden, &subwords[b * d..(b + 1) * d], 1.0);
                    }
                    hidden.iter_mut().for_each(|h| *h *= scale);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for target in contexts {
                        for k in 0..=config.negatives {
                            let (out_id, label) = if k == 0 {
                                (target, 1.0)
                            } else {
                                let n = draw_negative(&mut rng);
                                if n == target {
                                    continue;
                                }
                                (n, 0.0)
                            };
                            let out = &mut output[out_id * d..(out_id + 1) * d];
                            let g = lr * (label - sigmoid(dot(&hidden, out)));
                            add_scaled(&mut grad, out, g);
                            add_scaled(out, &hidden, g);
                        }
                    }
                    add_scaled(&mut words[center * d..(center + 1) * d], &grad, 1.0);
                    for &b in parts {
                        add_scaled(&mut subwords[b * d..(b + 1) * d], &grad, 1.0);
                    }
                }
            }
        }

        Ok(EmbeddingModel {
            granularity,
            dims: d,
            min_n: config.min_n,
            max_n: config.max_n,
            buckets: config.buckets,
            vocab,
            words,
            subwords,
            index,
        })
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Vector for any token; out-of-vocabulary tokens use their subwords.
    pub fn vector(&self, token: &str) -> Vec<f32> {
        let d = self.dims;
        let mut v = vec![0f32; d];
        let parts = subword_ids(token, self.min_n, self.max_n, self.buckets);
        let mut n = 0usize;
        if let Some(&w) = self.index.get(token) {
            add_scaled(&mut v, &self.words[w * d..(w + 1) * d], 1.0);
            n += 1;
        }
        for &b in &parts {
            add_scaled(&mut v, &self.subwords[b * d..(b + 1) * d], 1.0);
        }
        n += parts.len();
        if n > 0 {
            let s = 1.0 / n as f32;
            v.iter_mut().for_each(|x| *x *= s);
        }
        v
    }

    /// Mean vector of several tokens; zeros for none.
    pub fn mean_vector<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f32> {
        let mut acc = vec![0f32; self.dims];
        let mut n = 0usize;
        for t in tokens {
            add_scaled(&mut acc, &self.vector(t), 1.0);
            n += 1;
        }
        if n > 0 {
            let s = 1.0 / n as f32;
            acc.iter_mut().for_each(|x| *x *= s);
        }
        acc
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Splits a cell value into alphanumeric tokens.
pub fn tokenize(value: &str) -> impl Iterator<Item = &str> {
    value.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> EmbeddingConfig {
        EmbeddingConfig {
            epochs: 10,
            ..EmbeddingConfig::default()
        }
    }

    /// 200 tuples; "60612" and "60613" appear with identical contexts,
    /// "zebra" with a disjoint one.
    fn corpus() -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for i in 0..200 {
            let row: Vec<&str> = match i % 4 {
                0 => vec!["60612", "chicago", "illinois", "cook"],
                1 => vec!["60613", "chicago", "illinois", "cook"],
                2 => vec!["zebra", "savanna", "kenya", "herd"],
                _ => vec!["lion", "savanna", "kenya", "pride"],
            };
            out.push(row.into_iter().map(String::from).collect());
        }
        out
    }

    #[test]
    fn shared_context_means_similar_vectors() {
        let m = EmbeddingModel::train(Granularity::DatasetNeighbor, &corpus(), Context::Bag, &small_config()).unwrap();
        let a = m.vector("60612");
        let b = m.vector("60613");
        let z = m.vector("zebra");
        assert!(
            cosine(&a, &b) > cosine(&a, &z),
            "{} vs {}",
            cosine(&a, &b),
            cosine(&a, &z)
        );
    }

    #[test]
    fn self_similarity_and_coverage() {
        let sentences = vec![vec!["only".to_string()], vec!["only".to_string()]];
        let m = EmbeddingModel::train(Granularity::CellToken, &sentences, Context::Window(5), &small_config()).unwrap();
        assert!(m.contains("only"));
        let v = m.vector("only");
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_vocabulary_uses_subwords() {
        let m = EmbeddingModel::train(Granularity::DatasetNeighbor, &corpus(), Context::Bag, &small_config()).unwrap();
        assert!(!m.contains("6061x2"));
        let v = m.vector("6061x2");
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(v.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(EmbeddingModel::train(Granularity::Character, &[], Context::Window(2), &small_config()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = EmbeddingModel::train(Granularity::TupleBag, &corpus(), Context::Bag, &small_config()).unwrap();
        let b = EmbeddingModel::train(Granularity::TupleBag, &corpus(), Context::Bag, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tokenizer_splits_on_punctuation() {
        assert_eq!(tokenize("scip-inf-4").collect::<Vec<_>>(), ["scip", "inf", "4"]);
        assert_eq!(tokenize("").count(), 0);
    }
}
