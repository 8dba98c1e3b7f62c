use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crf::EmissionMode;
use crate::error::{Error, Result};

/// Which label the CRF is conditioned on while training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Conditioning {
    /// One shared emission block; the label is ignored.
    None,
    /// One emission block per class, selected by the gold label.
    GoldLabel,
}

/// Which label selects the emission block at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelSource {
    Predicted,
    /// The document's gold label when present, else the prediction.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExtractorKind {
    None,
    Crf,
    /// Top-k tokens by classifier salience, k matched to the dev evidence rate.
    TopKSalience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the extraction loss.
    pub lambda_extract: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub emission_mode: EmissionMode,
    pub conditioning: Conditioning,
    pub class_condition_transitions: bool,
    /// Include the classification loss.
    pub train_classifier: bool,
    pub extractor: ExtractorKind,
    pub label_source: LabelSource,
    pub embedding_dim: usize,
    /// Tokens seen fewer times than this share the UNK embedding.
    pub min_count: usize,
    /// Annotated documents whose mask is all zero still enter the
    /// extraction loss.
    pub include_empty_masks: bool,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_extract: 1.0,
            learning_rate: 0.5,
            epochs: 15,
            batch_size: 16,
            seed: 0,
            patience: 4,
            emission_mode: EmissionMode::SalienceFeature,
            conditioning: Conditioning::GoldLabel,
            class_condition_transitions: false,
            train_classifier: true,
            extractor: ExtractorKind::Crf,
            label_source: LabelSource::Predicted,
            embedding_dim: 16,
            min_count: 2,
            include_empty_masks: true,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lambda_extract >= 0.0 && self.lambda_extract.is_finite()) {
            return bad("lambda_extract must be a finite non-negative number");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }

    pub fn extracts(&self) -> bool {
        self.extractor != ExtractorKind::None
    }
}

/// The rows of the ablation table, as training presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    ClassifyOnly,
    ExtractOnly,
    /// Joint training with shared embeddings, unconditioned CRF.
    ClassifyExtract,
    /// Joint training, CRF conditioned on the label; decode with the predicted label.
    ClassifyExtractPredicted,
    /// As above, decoding with the gold label.
    ClassifyExtractOracle,
    TopkSalience,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::ClassifyOnly,
        Variant::ExtractOnly,
        Variant::ClassifyExtract,
        Variant::ClassifyExtractPredicted,
        Variant::ClassifyExtractOracle,
        Variant::TopkSalience,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ClassifyOnly => "CLASSIFY_ONLY",
            Variant::ExtractOnly => "EXTRACT_ONLY",
            Variant::ClassifyExtract => "CLASSIFY_EXTRACT",
            Variant::ClassifyExtractPredicted => "CLASSIFY_EXTRACT_PREDICTED",
            Variant::ClassifyExtractOracle => "CLASSIFY_EXTRACT_ORACLE",
            Variant::TopkSalience => "TOPK_SALIENCE",
        }
    }

    pub fn classifies(self) -> bool {
        self != Variant::ExtractOnly
    }

    pub fn extracts(self) -> bool {
        self != Variant::ClassifyOnly
    }

    /// Apply this preset on top of `base`. Optimizer settings, seed and
    /// emission mode come from `base`.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            Variant::ClassifyOnly => {
                c.train_classifier = true;
                c.lambda_extract = 0.0;
                c.extractor = ExtractorKind::None;
                c.conditioning = Conditioning::None;
                c.label_source = LabelSource::Predicted;
            }
            Variant::ExtractOnly => {
                c.train_classifier = false;
                c.extractor = ExtractorKind::Crf;
                c.conditioning = Conditioning::None;
                c.label_source = LabelSource::Predicted;
            }
            Variant::ClassifyExtract => {
                c.train_classifier = true;
                c.extractor = ExtractorKind::Crf;
                c.conditioning = Conditioning::None;
                c.label_source = LabelSource::Predicted;
            }
            Variant::ClassifyExtractPredicted => {
                c.train_classifier = true;
                c.extractor = ExtractorKind::Crf;
                c.conditioning = Conditioning::GoldLabel;
                c.label_source = LabelSource::Predicted;
            }
            Variant::ClassifyExtractOracle => {
                c.train_classifier = true;
                c.extractor = ExtractorKind::Crf;
                c.conditioning = Conditioning::GoldLabel;
                c.label_source = LabelSource::Oracle;
            }
            Variant::TopkSalience => {
                c.train_classifier = true;
                c.lambda_extract = 0.0;
                c.extractor = ExtractorKind::TopKSalience;
                c.conditioning = Conditioning::None;
                c.label_source = LabelSource::Predicted;
            }
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {s:?}")))
    }
}
