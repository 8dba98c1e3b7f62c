//! Joint training of the classifier and the label-conditioned CRF.
//!
//! The objective over a batch is
//! `sum_labeled -log p(y|x) + lambda * sum_annotated -log p(e|y,x)`,
//! with the CRF conditioned on the gold label. Both terms reach the shared
//! embedding table. Updates are plain mini-batch SGD on the batch-mean
//! gradient, clipped to a global norm.

mod config;
mod io;
mod model;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::ClassifierParams;
use crate::corpus::{Corpus, FeatureSpace, FeaturizedDoc};
use crate::crf::{CrfLayout, CrfParams};
use crate::error::{Error, Result};
use crate::eval::{accuracy, token_f1};

pub use config::{Conditioning, ExtractorKind, LabelSource, TrainConfig, Variant};
pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use model::{top_k_count, top_k_mask, CorpusStats, Extractor, Model, Prediction};

/// A featurized training document.
#[derive(Debug, Clone)]
pub struct Example {
    pub doc: FeaturizedDoc,
    pub label: Option<usize>,
    pub evidence: Option<Vec<bool>>,
}

impl Example {
    pub fn from_corpus(corpus: &Corpus, fs: &FeatureSpace) -> Vec<Example> {
        corpus
            .documents()
            .iter()
            .filter(|d| !d.is_empty())
            .map(|d| Example {
                doc: fs.featurize(d),
                label: d.label,
                evidence: d.evidence.clone(),
            })
            .collect()
    }
}

/// Classifier and CRF parameters trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct JointParams {
    pub classifier: ClassifierParams,
    pub crf: CrfParams,
}

impl JointParams {
    pub fn zeros_like(&self) -> JointParams {
        let c = &self.classifier;
        JointParams {
            classifier: ClassifierParams::zeros(
                c.num_classes(),
                c.vocab_size(),
                c.dim(),
                c.num_features(),
            ),
            crf: CrfParams::zeros(self.crf.layout(), self.crf.num_features(), self.crf.dim()),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.classifier
            .tensors()
            .into_iter()
            .chain(self.crf.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.classifier
            .tensors_mut()
            .into_iter()
            .chain(self.crf.tensors_mut())
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &JointParams) {
        for (dst, src) in self.tensors_mut().zip(other.tensors()) {
            crate::math::axpy(alpha, src, dst);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.classifier.is_finite() && self.crf.is_finite()
    }
}

/// Loss of one batch, split by term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossParts {
    pub classification: f64,
    /// Unweighted CRF negative log-likelihood.
    pub extraction: f64,
    pub lambda: f64,
    /// Batch positions that contributed an extraction term.
    pub extraction_members: Vec<usize>,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.classification + self.lambda * self.extraction
    }
}

fn contributes_extraction(ex: &Example, config: &TrainConfig) -> bool {
    config.extractor == ExtractorKind::Crf
        && config.lambda_extract > 0.0
        && ex.label.is_some()
        && ex
            .evidence
            .as_ref()
            .is_some_and(|m| config.include_empty_masks || m.iter().any(|&e| e))
}

/// Summed joint loss over `batch` and its gradient.
pub fn joint_loss_grad(
    batch: &[&Example],
    params: &JointParams,
    config: &TrainConfig,
) -> Result<(LossParts, JointParams)> {
    let mut cls_grad = params.zeros_like();
    let mut ext_grad = params.zeros_like();
    let mut parts = LossParts {
        lambda: config.lambda_extract,
        ..LossParts::default()
    };
    for (i, ex) in batch.iter().enumerate() {
        if config.train_classifier {
            if let Some(y) = ex.label {
                parts.classification +=
                    params
                        .classifier
                        .accumulate_nll_grad(&ex.doc, y, &mut cls_grad.classifier)?;
            }
        }
        if contributes_extraction(ex, config) {
            let ext = &mut ext_grad;
            parts.extraction += params.crf.accumulate_nll_grad(
                &ex.doc,
                ex.evidence.as_deref().expect("checked"),
                ex.label.expect("checked"),
                &params.classifier,
                &mut ext.crf,
                &mut ext.classifier,
            )?;
            parts.extraction_members.push(i);
        }
    }
    if !parts.extraction_members.is_empty() {
        cls_grad.add_scaled(config.lambda_extract, &ext_grad);
    }
    Ok((parts, cls_grad))
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean joint loss per training document over the epoch.
    pub train_loss: f64,
    /// Dev token F1 (or accuracy), when a dev corpus was given.
    pub dev_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Training-example indices that contributed an extraction term.
    pub extraction_examples: BTreeSet<usize>,
}

fn init_params(
    fs: &FeatureSpace,
    num_classes: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> JointParams {
    let mut classifier = ClassifierParams::for_space(fs, num_classes);
    for x in classifier.embeddings.iter_mut() {
        *x = rng.gen_range(-0.1..=0.1);
    }
    let layout = CrfLayout {
        num_classes,
        class_conditioned: config.conditioning == Conditioning::GoldLabel,
        class_condition_transitions: config.class_condition_transitions,
        emission_mode: config.emission_mode,
    };
    JointParams {
        classifier,
        crf: CrfParams::for_space(layout, fs),
    }
}

fn assemble(
    variant: Option<Variant>,
    config: &TrainConfig,
    fs: &FeatureSpace,
    params: JointParams,
    evidence_fraction: f64,
    trained_on: CorpusStats,
) -> Model {
    let extractor = match config.extractor {
        ExtractorKind::None => Extractor::None,
        ExtractorKind::Crf => Extractor::Crf(params.crf),
        ExtractorKind::TopKSalience => Extractor::TopK { evidence_fraction },
    };
    Model {
        variant,
        config: config.clone(),
        features: fs.clone(),
        classifier: params.classifier,
        extractor,
        label_source: config.label_source,
        trained_on,
    }
}

/// Evidence tokens over all tokens of the annotated documents.
pub fn evidence_fraction(corpus: &Corpus) -> Option<f64> {
    let (ev, total) = corpus
        .documents()
        .iter()
        .filter_map(|d| d.evidence.as_ref())
        .fold((0usize, 0usize), |(e, t), m| {
            (e + m.iter().filter(|&&x| x).count(), t + m.len())
        });
    (total > 0).then(|| ev as f64 / total as f64)
}

/// Dev score used for model selection: token F1 when the model extracts and
/// the dev set has annotations, accuracy otherwise.
pub fn dev_score(model: &Model, dev: &Corpus) -> Result<Option<f64>> {
    let docs: Vec<_> = dev
        .documents()
        .iter()
        .filter(|d| !d.is_empty())
        .cloned()
        .collect();
    let preds = model.predict_all(&docs)?;
    if model.supports_extraction() && docs.iter().any(|d| d.evidence.is_some()) {
        let (pred, gold): (Vec<_>, Vec<_>) = docs
            .iter()
            .zip(&preds)
            .filter_map(|(d, p)| Some((p.evidence.clone()?, d.evidence.clone()?)))
            .unzip();
        return Ok(Some(token_f1(&pred, &gold)?.f1));
    }
    let (pred, gold): (Vec<_>, Vec<_>) = docs
        .iter()
        .zip(&preds)
        .filter_map(|(d, p)| Some((p.label, d.label?)))
        .unzip();
    if gold.is_empty() {
        return Ok(None);
    }
    Ok(Some(accuracy(&pred, &gold)?))
}

/// Train a model with an explicit configuration.
pub fn train(corpus: &Corpus, dev: Option<&Corpus>, config: &TrainConfig) -> Result<Model> {
    Ok(train_with_report(corpus, dev, config, None)?.0)
}

/// Train, also returning per-epoch statistics.
pub fn train_with_report(
    corpus: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
    variant: Option<Variant>,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("training corpus is empty".into()));
    }
    if let Some(dev) = dev {
        if dev.num_classes() != corpus.num_classes() {
            return Err(Error::InvalidConfig(
                "dev and train corpora disagree on the number of classes".into(),
            ));
        }
    }
    let fs = FeatureSpace::build(corpus, config.embedding_dim, config.min_count);
    let examples = Example::from_corpus(corpus, &fs);
    let stats = CorpusStats {
        documents: corpus.len(),
        labeled: corpus.num_labeled(),
        annotated: corpus.num_annotated(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(&fs, corpus.num_classes(), config, &mut rng);

    let evidence_fraction = match config.extractor {
        ExtractorKind::TopKSalience => dev
            .and_then(evidence_fraction)
            .or_else(|| evidence_fraction(corpus))
            .ok_or_else(|| {
                Error::InvalidConfig("top-k salience needs annotated dev or train documents".into())
            })?,
        _ => 0.0,
    };

    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        extraction_examples: BTreeSet::new(),
    };
    let mut best: Option<(f64, JointParams)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let (parts, mut grad) =
                joint_loss_grad(&batch, &params, config).map_err(|e| match e {
                    Error::NonFinitePotential => Error::Diverged { epoch },
                    e => e,
                })?;
            let loss = parts.total();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss;
            report
                .extraction_examples
                .extend(parts.extraction_members.iter().map(|&i| chunk[i]));

            let scale = 1.0 / chunk.len() as f64;
            let norm = grad.norm() * scale;
            let clip = if norm > config.clip_norm {
                config.clip_norm / norm
            } else {
                1.0
            };
            for t in grad.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= scale * clip);
            }
            params.add_scaled(-config.learning_rate, &grad);
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let dev_metric = match dev {
            Some(dev) => {
                let model = assemble(
                    variant,
                    config,
                    &fs,
                    params.clone(),
                    evidence_fraction,
                    stats,
                );
                dev_score(&model, dev)?
            }
            None => None,
        };
        report.epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss / examples.len().max(1) as f64,
            dev_metric,
        });

        if let Some(score) = dev_metric {
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, params.clone()));
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if config.patience > 0 && since_best >= config.patience {
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }

    let final_params = match best {
        Some((_, p)) => p,
        None => params,
    };
    let model = assemble(variant, config, &fs, final_params, evidence_fraction, stats);
    Ok((model, report))
}

/// Train one row of the ablation table. `base` supplies the optimizer
/// settings, seed and emission mode.
pub fn train_variant(
    corpus: &Corpus,
    dev: Option<&Corpus>,
    variant: Variant,
    base: &TrainConfig,
) -> Result<Model> {
    Ok(train_variant_with_report(corpus, dev, variant, base)?.0)
}

pub fn train_variant_with_report(
    corpus: &Corpus,
    dev: Option<&Corpus>,
    variant: Variant,
    base: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    if variant == Variant::ExtractOnly && corpus.num_annotated() == 0 {
        return Err(Error::InvalidConfig(
            "EXTRACT_ONLY needs at least one evidence-annotated document".into(),
        ));
    }
    let config = variant.configure(base);
    train_with_report(corpus, dev, &config, Some(variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticConfig};

    fn tiny(seed: u64) -> (Corpus, Corpus) {
        let cfg = SyntheticConfig {
            n: 120,
            m: 40,
            lexicon_size: 30,
            background_size: 60,
            seed,
            ..SyntheticConfig::default()
        };
        let train = generate_synthetic(&cfg).unwrap().0;
        let dev = generate_synthetic(&SyntheticConfig {
            n: 40,
            m: 40,
            seed: seed + 1000,
            ..cfg
        })
        .unwrap()
        .0;
        (train, dev)
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            embedding_dim: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (train_c, _) = tiny(1);
        let config = TrainConfig {
            epochs: 0,
            ..quick()
        };
        let model = train(&train_c, None, &config).unwrap();
        assert!(model.classifier.class_weights.iter().all(|&w| w == 0.0));
        let Extractor::Crf(crf) = &model.extractor else {
            panic!()
        };
        assert!(crf.tensors().iter().all(|t| t.iter().all(|&w| w == 0.0)));
        assert!(model
            .classifier
            .embeddings
            .iter()
            .all(|&e| (-0.1..=0.1).contains(&e)));
        assert!(model.classifier.embeddings.iter().any(|&e| e != 0.0));
    }

    #[test]
    fn zero_lambda_leaves_sparse_crf_weights_untouched() {
        let (train_c, dev) = tiny(2);
        let config = TrainConfig {
            lambda_extract: 0.0,
            emission_mode: crate::crf::EmissionMode::SparseOnly,
            ..quick()
        };
        let (model, report) = train_with_report(&train_c, Some(&dev), &config, None).unwrap();
        let Extractor::Crf(crf) = &model.extractor else {
            panic!()
        };
        assert!(crf.emission.iter().all(|&w| w == 0.0));
        assert!(report.extraction_examples.is_empty());
        assert!(model.classifier.class_weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn extract_only_requires_annotations() {
        let (train_c, _) = tiny(3);
        let unannotated = train_c.retain_evidence(&[]);
        let err = train_variant(&unannotated, None, Variant::ExtractOnly, &quick()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn classify_only_refuses_extraction() {
        let (train_c, _) = tiny(4);
        let model = train_variant(&train_c, None, Variant::ClassifyOnly, &quick()).unwrap();
        let doc = &train_c.documents()[0];
        assert!(model.predict(doc).unwrap().evidence.is_none());
        let err = model.extract(doc).unwrap_err();
        assert!(
            err.to_string().contains("does not support extraction"),
            "{err}"
        );
        assert!(model.extract_per_class(doc).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence_epoch() {
        let (train_c, _) = tiny(5);
        let config = TrainConfig {
            learning_rate: 1e300,
            clip_norm: 1e300,
            ..quick()
        };
        match train(&train_c, None, &config) {
            Err(Error::Diverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_masks_can_be_excluded() {
        let (train_c, _) = tiny(6);
        let fs = FeatureSpace::build(&train_c, 4, 2);
        let examples = Example::from_corpus(&train_c, &fs);
        let empty = examples
            .iter()
            .position(|e| e.evidence.as_ref().is_some_and(|m| m.iter().all(|&x| !x)));
        if let Some(i) = empty {
            let on = TrainConfig::default();
            let off = TrainConfig {
                include_empty_masks: false,
                ..on.clone()
            };
            assert!(contributes_extraction(&examples[i], &on));
            assert!(!contributes_extraction(&examples[i], &off));
        }
    }
}
