use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LabelSource, TrainConfig, Variant};
use crate::classifier::ClassifierParams;
use crate::corpus::{Document, FeatureSpace, FeaturizedDoc};
use crate::crf::CrfParams;
use crate::error::{Error, Result};

/// How a model turns a document into an evidence mask.
#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
    None,
    Crf(CrfParams),
    TopK { evidence_fraction: f64 },
}

/// Size of the corpus a model was trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub labeled: usize,
    pub annotated: usize,
}

/// A trained classifier plus extractor over one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: Option<Variant>,
    pub config: TrainConfig,
    pub features: FeatureSpace,
    pub classifier: ClassifierParams,
    pub extractor: Extractor,
    pub label_source: LabelSource,
    pub trained_on: CorpusStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub class_probs: Vec<f64>,
    /// `None` for models that only classify.
    pub evidence: Option<Vec<bool>>,
}

/// `round(fraction * len)` with halves rounded up, clamped to `[1, len]`.
pub fn top_k_count(fraction: f64, len: usize) -> usize {
    ((fraction * len as f64 + 0.5).floor() as usize).clamp(1, len.max(1))
}

/// Mask of the `k` highest scores; equal scores prefer the earlier token.
pub fn top_k_mask(scores: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut mask = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        mask[i] = true;
    }
    mask
}

impl Model {
    pub fn num_classes(&self) -> usize {
        self.classifier.num_classes()
    }

    pub fn supports_extraction(&self) -> bool {
        !matches!(self.extractor, Extractor::None)
    }

    /// Same parameters, different inference-time label source.
    pub fn with_label_source(mut self, source: LabelSource) -> Self {
        self.label_source = source;
        self
    }

    pub fn featurize(&self, doc: &Document) -> FeaturizedDoc {
        self.features.featurize(doc)
    }

    fn variant_name(&self) -> String {
        self.variant
            .map(|v| v.name().to_string())
            .unwrap_or_else(|| "a classifier-only configuration".into())
    }

    /// Evidence mask under an explicit class.
    pub fn extract_featurized(&self, doc: &FeaturizedDoc, class: usize) -> Result<Vec<bool>> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        match &self.extractor {
            Extractor::None => Err(Error::ExtractionUnsupported {
                variant: self.variant_name(),
            }),
            Extractor::Crf(crf) => crf.decode(doc, class, &self.classifier),
            Extractor::TopK { evidence_fraction } => {
                let scores = self.classifier.salience(doc, class)?;
                Ok(top_k_mask(
                    &scores,
                    top_k_count(*evidence_fraction, doc.len()),
                ))
            }
        }
    }

    /// Classify, then extract under the label chosen by `label_source`.
    /// `gold` is only consulted for oracle decoding.
    pub fn predict_featurized(
        &self,
        doc: &FeaturizedDoc,
        gold: Option<usize>,
    ) -> Result<Prediction> {
        let class_probs = self.classifier.predict_proba(doc)?;
        let label = self.classifier.predict(doc)?;
        let evidence = if self.supports_extraction() {
            let class = match (self.label_source, gold) {
                (LabelSource::Oracle, Some(y)) => y,
                _ => label,
            };
            Some(self.extract_featurized(doc, class)?)
        } else {
            None
        };
        Ok(Prediction {
            label,
            class_probs,
            evidence,
        })
    }

    pub fn predict(&self, doc: &Document) -> Result<Prediction> {
        self.predict_featurized(&self.featurize(doc), doc.label)
    }

    /// Predictions for many documents, in input order.
    pub fn predict_all(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        docs.par_iter().map(|d| self.predict(d)).collect()
    }

    /// Evidence mask of `doc` conditioned on the model's prediction (or
    /// the gold label for oracle models).
    pub fn extract(&self, doc: &Document) -> Result<Vec<bool>> {
        if !self.supports_extraction() {
            return Err(Error::ExtractionUnsupported {
                variant: self.variant_name(),
            });
        }
        Ok(self.predict(doc)?.evidence.expect("extraction supported"))
    }

    /// One evidence mask per class, each decoded under that class.
    pub fn extract_per_class(&self, doc: &Document) -> Result<Vec<Vec<bool>>> {
        let feats = self.featurize(doc);
        (0..self.num_classes())
            .map(|c| self.extract_featurized(&feats, c))
            .collect()
    }
}
