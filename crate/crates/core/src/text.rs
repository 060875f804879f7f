//! Tokenization and the three input encodings: sparse n-gram counts for the
//! ridge baseline, bag-of-vectors means, and padded id sequences.

use std::collections::HashMap;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Joins the tokens of an n-gram. Tokenization never emits it.
pub const NGRAM_SEPARATOR: char = '\u{1f}';

pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '„' | '…' | '–' | '—' | '¡' | '¿'
        )
}

/// Lowercases, splits on whitespace and peels punctuation off both ends of
/// each chunk as single-character tokens. A leading `#` or `@` stays
/// attached to the word it introduces.
pub fn tokenize(text: &str) -> TokenSeq {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lower.split(|c: char| c.is_whitespace() || c.is_control()) {
        if chunk.is_empty() {
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        let mut leading = Vec::new();
        while start < end && is_punct(chars[start]) {
            let c = chars[start];
            let rest_has_word = chars[start + 1..end].iter().any(|&c| !is_punct(c));
            if (c == '#' || c == '@') && rest_has_word {
                break;
            }
            leading.push(c.to_string());
            start += 1;
        }
        let mut trailing = Vec::new();
        while end > start && is_punct(chars[end - 1]) {
            trailing.push(chars[end - 1].to_string());
            end -= 1;
        }
        tokens.extend(leading);
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    TokenSeq { tokens }
}

fn ngrams(tokens: &[String]) -> impl Iterator<Item = String> + '_ {
    (1..=3).flat_map(move |n| {
        tokens.windows(n).map(|w| {
            let mut s = String::new();
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    s.push(NGRAM_SEPARATOR);
                }
                s.push_str(t);
            }
            s
        })
    })
}

/// Column index for every uni-, bi- and trigram of a training corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NgramVocab {
    index: HashMap<String, usize>,
    ngrams: Vec<String>,
}

impl NgramVocab {
    pub fn n_features(&self) -> usize {
        self.ngrams.len()
    }

    pub fn get(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// N-grams in column order.
    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }
}

/// Builds the n-gram vocabulary; columns follow first occurrence.
pub fn fit_ngram_vocab(corpus: &[TokenSeq]) -> Result<NgramVocab> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot fit an n-gram vocabulary on an empty corpus"));
    }
    let mut vocab = NgramVocab::default();
    for doc in corpus {
        for g in ngrams(&doc.tokens) {
            if !vocab.index.contains_key(&g) {
                vocab.index.insert(g.clone(), vocab.ngrams.len());
                vocab.ngrams.push(g);
            }
        }
    }
    Ok(vocab)
}

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * w[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Raw n-gram counts over `vocab`, L2-normalized per document.
pub fn ngram_features(tokens: &TokenSeq, vocab: &NgramVocab) -> SparseVec {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for g in ngrams(&tokens.tokens) {
        if let Some(i) = vocab.get(&g) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        entries.iter_mut().for_each(|(_, v)| *v /= norm);
    }
    SparseVec { entries }
}

/// Mean embedding of the in-vocabulary tokens; the zero vector when none
/// are known.
pub fn bag_of_vectors(tokens: &TokenSeq, table: &EmbeddingTable) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0usize;
    for id in tokens.iter().filter_map(|t| table.id(t)) {
        for (a, &x) in acc.iter_mut().zip(table.row(id)) {
            *a += x;
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSeq {
    /// Exactly `max_len` row ids; OOV and padding share row 0.
    pub ids: Vec<usize>,
    /// Number of leading frames that belong to the text, at least 1.
    pub valid_len: usize,
}

impl EncodedSeq {
    pub fn valid_ids(&self) -> &[usize] {
        &self.ids[..self.valid_len]
    }
}

pub fn encode_sequence(tokens: &TokenSeq, table: &EmbeddingTable, max_len: usize) -> EncodedSeq {
    let max_len = max_len.max(1);
    let mut ids: Vec<usize> = tokens
        .iter()
        .take(max_len)
        .map(|t| table.id(t).unwrap_or(EmbeddingTable::PAD))
        .collect();
    let valid_len = ids.len().max(1);
    ids.resize(max_len, EmbeddingTable::PAD);
    EncodedSeq { ids, valid_len }
}
