//! Seeded synthetic corpora with known evidence.
//!
//! Every document draws a class, then fills its tokens from four pools:
//! background filler, phrases from its own class lexicon (the gold
//! evidence), phrases from another class's lexicon (present but not
//! evidence), and confounders. Confounders lean towards one class, so they
//! carry classification signal, yet they are never marked as evidence.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of documents; all are labeled.
    pub n: usize,
    /// The first `m` documents carry evidence masks.
    pub m: usize,
    pub num_classes: usize,
    pub background_size: usize,
    /// Evidence words per class.
    pub lexicon_size: usize,
    /// Confounder words per class.
    pub confounder_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_phrase: usize,
    /// Per-position probability of starting an own-class evidence phrase.
    pub evidence_rate: f64,
    /// Per-position probability of starting a phrase from another class's lexicon.
    pub cross_rate: f64,
    /// Per-position probability of a confounder token.
    pub noise_rate: f64,
    /// Probability that an injected confounder belongs to the document's class.
    pub confounder_purity: f64,
    /// Probability of replacing the label of an unannotated document with a
    /// different class.
    pub label_noise: f64,
    /// Seed for the word lists; share it between train/dev/test splits.
    pub lexicon_seed: u64,
    /// Seed for document sampling.
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 2000,
            m: 200,
            num_classes: 2,
            background_size: 400,
            lexicon_size: 300,
            confounder_size: 40,
            min_len: 15,
            max_len: 45,
            max_phrase: 3,
            evidence_rate: 0.1,
            cross_rate: 0.03,
            noise_rate: 0.1,
            confounder_purity: 0.6,
            label_noise: 0.0,
            lexicon_seed: 17,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        for (name, rate) in [
            ("evidence_rate", self.evidence_rate),
            ("cross_rate", self.cross_rate),
            ("noise_rate", self.noise_rate),
            ("confounder_purity", self.confounder_purity),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {rate} outside [0, 1]"
                )));
            }
        }
        if self.evidence_rate + self.cross_rate + self.noise_rate > 1.0 {
            return bad("evidence_rate + cross_rate + noise_rate exceeds 1");
        }
        if self.m > self.n {
            return bad("m exceeds n");
        }
        if self.num_classes == 0 {
            return bad("num_classes must be positive");
        }
        if self.num_classes == 1 && (self.cross_rate > 0.0 || self.confounder_purity < 1.0) {
            return bad("a single class admits no cross-class tokens");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if self.max_phrase == 0 || self.background_size == 0 || self.lexicon_size == 0 {
            return bad("phrase length and word-list sizes must be positive");
        }
        if self.confounder_size == 0 && self.noise_rate > 0.0 {
            return bad("noise_rate > 0 needs confounder words");
        }
        Ok(())
    }
}

/// Role of a synthetic word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Background,
    Evidence(usize),
    Confounder(usize),
}

/// The word lists behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub background: Vec<String>,
    pub evidence: Vec<Vec<String>>,
    pub confounders: Vec<Vec<String>>,
    kinds: HashMap<String, TokenKind>,
}

impl Lexicon {
    /// Build the word lists from `config.lexicon_seed` alone.
    pub fn new(config: &SyntheticConfig) -> Lexicon {
        let mut rng = ChaCha8Rng::seed_from_u64(config.lexicon_seed);
        let mut used = HashSet::new();
        let mut words = |count: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let len = rng.gen_range(4..=8);
                let w: String = (0..len)
                    .map(|_| rng.gen_range(b'a'..=b'z') as char)
                    .collect();
                if used.insert(w.clone()) {
                    out.push(w);
                }
            }
            out
        };
        let background = words(config.background_size, &mut rng);
        let evidence: Vec<_> = (0..config.num_classes)
            .map(|_| words(config.lexicon_size, &mut rng))
            .collect();
        let confounders: Vec<_> = (0..config.num_classes)
            .map(|_| words(config.confounder_size, &mut rng))
            .collect();

        let mut kinds = HashMap::new();
        for w in &background {
            kinds.insert(w.clone(), TokenKind::Background);
        }
        for (c, ws) in evidence.iter().enumerate() {
            for w in ws {
                kinds.insert(w.clone(), TokenKind::Evidence(c));
            }
        }
        for (c, ws) in confounders.iter().enumerate() {
            for w in ws {
                kinds.insert(w.clone(), TokenKind::Confounder(c));
            }
        }
        Lexicon {
            background,
            evidence,
            confounders,
            kinds,
        }
    }

    pub fn kind(&self, token: &str) -> Option<TokenKind> {
        self.kinds.get(token).copied()
    }

    pub fn is_evidence_of(&self, token: &str, class: usize) -> bool {
        self.kind(token) == Some(TokenKind::Evidence(class))
    }
}

fn other_class(rng: &mut ChaCha8Rng, num_classes: usize, class: usize) -> usize {
    let k = rng.gen_range(0..num_classes - 1);
    if k >= class {
        k + 1
    } else {
        k
    }
}

/// Generate a corpus and the lexicon it was drawn from.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(Corpus, Lexicon)> {
    config.validate()?;
    let lexicon = Lexicon::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c_count = config.num_classes;

    let mut documents = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let class = rng.gen_range(0..c_count);
        let len = rng.gen_range(config.min_len..=config.max_len);
        let mut tokens = Vec::with_capacity(len + config.max_phrase);
        let mut mask = Vec::with_capacity(len + config.max_phrase);
        while tokens.len() < len {
            let u: f64 = rng.gen();
            if u < config.evidence_rate {
                let phrase = rng.gen_range(1..=config.max_phrase).min(len - tokens.len());
                for _ in 0..phrase {
                    tokens.push(lexicon.evidence[class].choose(&mut rng).unwrap().clone());
                    mask.push(true);
                }
            } else if u < config.evidence_rate + config.cross_rate {
                let other = other_class(&mut rng, c_count, class);
                let phrase = rng.gen_range(1..=config.max_phrase).min(len - tokens.len());
                for _ in 0..phrase {
                    tokens.push(lexicon.evidence[other].choose(&mut rng).unwrap().clone());
                    mask.push(false);
                }
            } else if u < config.evidence_rate + config.cross_rate + config.noise_rate {
                let owner = if rng.gen_bool(config.confounder_purity) {
                    class
                } else {
                    other_class(&mut rng, c_count, class)
                };
                tokens.push(lexicon.confounders[owner].choose(&mut rng).unwrap().clone());
                mask.push(false);
            } else {
                tokens.push(lexicon.background.choose(&mut rng).unwrap().clone());
                mask.push(false);
            }
        }

        let annotated = i < config.m;
        let label = if !annotated && c_count > 1 && rng.gen_bool(config.label_noise) {
            other_class(&mut rng, c_count, class)
        } else {
            class
        };
        let mut doc = Document::new(format!("syn-{i}"), tokens).with_label(label);
        if annotated {
            doc = doc.with_evidence(mask);
        }
        documents.push(doc);
    }
    Ok((Corpus::new(documents, c_count)?, lexicon))
}
