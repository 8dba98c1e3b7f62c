use std::collections::{HashMap, HashSet};

use super::{Corpus, Document};

/// Vocabulary row reserved for out-of-vocabulary tokens.
pub const UNK: usize = 0;
const UNK_TOKEN: &str = "<unk>";

/// Sparse emission feature templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Word,
    Lower,
    Prefix3,
    Suffix3,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::Word,
        Template::Lower,
        Template::Prefix3,
        Template::Suffix3,
    ];

    pub fn key(self, token: &str) -> String {
        match self {
            Template::Word => format!("word={token}"),
            Template::Lower => format!("lower={}", token.to_lowercase()),
            Template::Prefix3 => format!("pre3={}", token.chars().take(3).collect::<String>()),
            Template::Suffix3 => {
                let n = token.chars().count();
                format!(
                    "suf3={}",
                    token.chars().skip(n.saturating_sub(3)).collect::<String>()
                )
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Template::Word => 0,
            Template::Lower => 1,
            Template::Prefix3 => 2,
            Template::Suffix3 => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Template> {
        Template::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

/// Features of one token: its embedding row and the indices of the sparse
/// features that fire on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFeatures {
    pub embedding_row: usize,
    pub sparse: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturizedDoc {
    pub tokens: Vec<TokenFeatures>,
}

impl FeaturizedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Maps token context to sparse feature indices and dense embedding rows.
///
/// Indices are assigned in first-occurrence order over the training
/// corpus, so two builds over the same corpus agree, and a deserialized
/// space is identical to the one that was saved.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    vocab: Vec<String>,
    vocab_index: HashMap<String, usize>,
    features: Vec<String>,
    feature_index: HashMap<String, usize>,
    templates: Vec<Template>,
    embedding_dim: usize,
}

impl PartialEq for FeatureSpace {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.features == other.features
            && self.templates == other.templates
            && self.embedding_dim == other.embedding_dim
    }
}

impl FeatureSpace {
    /// Build from a training corpus. Tokens seen fewer than `min_count`
    /// times share the UNK embedding row; every sparse feature seen at
    /// least once gets an index.
    pub fn build(corpus: &Corpus, embedding_dim: usize, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in corpus.documents() {
            for tok in &doc.tokens {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut vocab = vec![UNK_TOKEN.to_string()];
        let mut features = Vec::new();
        let mut seen_vocab: HashSet<&str> = HashSet::new();
        let mut seen_features: HashSet<String> = HashSet::new();
        for doc in corpus.documents() {
            for tok in &doc.tokens {
                if counts[tok.as_str()] >= min_count && seen_vocab.insert(tok) {
                    vocab.push(tok.clone());
                }
                for t in Template::ALL {
                    let key = t.key(tok);
                    if seen_features.insert(key.clone()) {
                        features.push(key);
                    }
                }
            }
        }
        Self::from_parts(vocab, features, Template::ALL.to_vec(), embedding_dim)
    }

    /// Reassemble a space from its ordered vocabulary and feature names.
    /// `vocab[0]` is the UNK row.
    pub fn from_parts(
        vocab: Vec<String>,
        features: Vec<String>,
        templates: Vec<Template>,
        embedding_dim: usize,
    ) -> Self {
        let vocab_index = vocab
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let feature_index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        FeatureSpace {
            vocab,
            vocab_index,
            features,
            feature_index,
            templates,
            embedding_dim,
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn feature_names(&self) -> &[String] {
        &self.features
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// K, the number of base (unconditioned) sparse features.
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn feature_id(&self, name: &str) -> Option<usize> {
        self.feature_index.get(name).copied()
    }

    pub fn embedding_row(&self, token: &str) -> usize {
        self.vocab_index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_features(&self, token: &str) -> TokenFeatures {
        let sparse = self
            .templates
            .iter()
            .filter_map(|t| self.feature_index.get(&t.key(token)).copied())
            .collect();
        TokenFeatures {
            embedding_row: self.embedding_row(token),
            sparse,
        }
    }

    pub fn featurize(&self, doc: &Document) -> FeaturizedDoc {
        FeaturizedDoc {
            tokens: doc.tokens.iter().map(|t| self.token_features(t)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn corpus(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), tokenize(t)))
            .collect();
        Corpus::new(docs, 2).unwrap()
    }

    fn names(fs: &FeatureSpace, tf: &TokenFeatures) -> Vec<String> {
        tf.sparse
            .iter()
            .map(|&i| fs.feature_names()[i].clone())
            .collect()
    }

    #[test]
    fn known_token_fires_all_templates() {
        let fs = FeatureSpace::build(&corpus(&["a brilliant film", "brilliant"]), 4, 2);
        let tf = fs.token_features("brilliant");
        assert_ne!(tf.embedding_row, UNK);
        assert_eq!(
            names(&fs, &tf),
            ["word=brilliant", "lower=brilliant", "pre3=bri", "suf3=ant"]
        );
    }

    #[test]
    fn unseen_token_keeps_affix_features() {
        let fs = FeatureSpace::build(&corpus(&["zxqa axqv zxqa axqv"]), 4, 2);
        let tf = fs.token_features("zxqv");
        assert_eq!(tf.embedding_row, UNK);
        assert_eq!(names(&fs, &tf), ["pre3=zxq", "suf3=xqv"]);
    }

    #[test]
    fn rare_tokens_map_to_unk() {
        let fs = FeatureSpace::build(&corpus(&["good good once"]), 4, 2);
        assert_eq!(fs.embedding_row("once"), UNK);
        assert_eq!(fs.vocab(), ["<unk>", "good"]);
    }

    #[test]
    fn featurize_length_and_purity() {
        let c = corpus(&["a horror movie that lacks cohesion .", "a movie"]);
        let fs = FeatureSpace::build(&c, 4, 1);
        let doc = &c.documents()[0];
        let a = fs.featurize(doc);
        assert_eq!(a.len(), doc.len());
        assert_eq!(a, fs.featurize(doc));
    }

    #[test]
    fn build_is_deterministic_and_from_parts_matches() {
        let c = corpus(&[
            "the cast is wonderful",
            "the plot is thin , the cast wooden",
        ]);
        let a = FeatureSpace::build(&c, 8, 1);
        let b = FeatureSpace::build(&c, 8, 1);
        assert_eq!(a, b);
        let c2 = FeatureSpace::from_parts(
            a.vocab().to_vec(),
            a.feature_names().to_vec(),
            a.templates().to_vec(),
            8,
        );
        assert_eq!(a.token_features("cast"), c2.token_features("cast"));
    }
}
