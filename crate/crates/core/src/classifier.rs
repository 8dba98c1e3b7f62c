//! Linear document classifier over mean-pooled token embeddings and summed
//! sparse feature counts.
//!
//! The class score decomposes exactly into per-token contributions,
//! `score_c = b_c + sum_t (W_c . E[x_t] / T + sum_{k in f(t)} V[c, k])`,
//! and those per-token terms are the salience scores the CRF and the top-k
//! baseline consume.

use crate::corpus::{FeatureSpace, FeaturizedDoc};
use crate::error::{Error, Result};
use crate::math::{argmax, axpy, dot, log_sum_exp, softmax};

/// Classifier parameters. The embedding table is shared with the CRF.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    num_classes: usize,
    vocab_size: usize,
    dim: usize,
    num_features: usize,
    /// `vocab_size x dim`, row-major.
    pub embeddings: Vec<f64>,
    /// `num_classes x dim`.
    pub class_weights: Vec<f64>,
    /// `num_classes x num_features`.
    pub sparse_weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros(num_classes: usize, vocab_size: usize, dim: usize, num_features: usize) -> Self {
        ClassifierParams {
            num_classes,
            vocab_size,
            dim,
            num_features,
            embeddings: vec![0.0; vocab_size * dim],
            class_weights: vec![0.0; num_classes * dim],
            sparse_weights: vec![0.0; num_classes * num_features],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn for_space(fs: &FeatureSpace, num_classes: usize) -> Self {
        Self::zeros(
            num_classes,
            fs.vocab_size(),
            fs.embedding_dim(),
            fs.num_features(),
        )
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn embedding(&self, row: usize) -> &[f64] {
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    pub fn embedding_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    pub fn class_weight(&self, class: usize) -> &[f64] {
        &self.class_weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn class_weight_mut(&mut self, class: usize) -> &mut [f64] {
        &mut self.class_weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn sparse_weight(&self, class: usize, feature: usize) -> f64 {
        self.sparse_weights[class * self.num_features + feature]
    }

    pub fn sparse_weight_mut(&mut self, class: usize, feature: usize) -> &mut f64 {
        &mut self.sparse_weights[class * self.num_features + feature]
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            &self.embeddings,
            &self.class_weights,
            &self.sparse_weights,
            &self.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.embeddings,
            &mut self.class_weights,
            &mut self.sparse_weights,
            &mut self.bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn mean_embedding(&self, doc: &FeaturizedDoc) -> Vec<f64> {
        let mut pooled = vec![0.0; self.dim];
        for tok in &doc.tokens {
            axpy(1.0, self.embedding(tok.embedding_row), &mut pooled);
        }
        let inv = 1.0 / doc.len() as f64;
        pooled.iter_mut().for_each(|x| *x *= inv);
        pooled
    }

    /// Unnormalized class scores.
    pub fn class_scores(&self, doc: &FeaturizedDoc) -> Result<Vec<f64>> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let pooled = self.mean_embedding(doc);
        Ok((0..self.num_classes)
            .map(|c| {
                let sparse: f64 = doc
                    .tokens
                    .iter()
                    .flat_map(|t| &t.sparse)
                    .map(|&k| self.sparse_weight(c, k))
                    .sum();
                dot(self.class_weight(c), &pooled) + sparse + self.bias[c]
            })
            .collect())
    }

    pub fn predict_proba(&self, doc: &FeaturizedDoc) -> Result<Vec<f64>> {
        Ok(softmax(&self.class_scores(doc)?))
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn predict(&self, doc: &FeaturizedDoc) -> Result<usize> {
        Ok(argmax(&self.class_scores(doc)?))
    }

    /// Each token's additive contribution to the score of `class`.
    pub fn salience(&self, doc: &FeaturizedDoc, class: usize) -> Result<Vec<f64>> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        if class >= self.num_classes {
            return Err(Error::ClassOutOfRange {
                class,
                num_classes: self.num_classes,
            });
        }
        let inv = 1.0 / doc.len() as f64;
        let w = self.class_weight(class);
        Ok(doc
            .tokens
            .iter()
            .map(|t| {
                dot(w, self.embedding(t.embedding_row)) * inv
                    + t.sparse
                        .iter()
                        .map(|&k| self.sparse_weight(class, k))
                        .sum::<f64>()
            })
            .collect())
    }

    /// Add the gradient of `-log p(label | doc)` into `grad` and return the
    /// loss.
    pub fn accumulate_nll_grad(
        &self,
        doc: &FeaturizedDoc,
        label: usize,
        grad: &mut ClassifierParams,
    ) -> Result<f64> {
        if label >= self.num_classes {
            return Err(Error::ClassOutOfRange {
                class: label,
                num_classes: self.num_classes,
            });
        }
        let scores = self.class_scores(doc)?;
        let loss = log_sum_exp(&scores) - scores[label];
        let mut dscore = softmax(&scores);
        dscore[label] -= 1.0;

        let pooled = self.mean_embedding(doc);
        let inv = 1.0 / doc.len() as f64;
        // d loss / d pooled, shared by every token's embedding row.
        let mut dpooled = vec![0.0; self.dim];
        for (c, &g) in dscore.iter().enumerate() {
            axpy(g, &pooled, grad.class_weight_mut(c));
            axpy(g, self.class_weight(c), &mut dpooled);
            grad.bias[c] += g;
            for tok in &doc.tokens {
                for &k in &tok.sparse {
                    *grad.sparse_weight_mut(c, k) += g;
                }
            }
        }
        for tok in &doc.tokens {
            axpy(inv, &dpooled, grad.embedding_mut(tok.embedding_row));
        }
        Ok(loss)
    }
}

/// Summed negative log-likelihood `-sum_i log p(y_i | x_i)` of a labeled
/// batch and its gradient.
pub fn classification_nll_grad(
    batch: &[(&FeaturizedDoc, Option<usize>)],
    params: &ClassifierParams,
) -> Result<(f64, ClassifierParams)> {
    let mut grad = ClassifierParams::zeros(
        params.num_classes,
        params.vocab_size,
        params.dim,
        params.num_features,
    );
    let mut loss = 0.0;
    for (i, (doc, label)) in batch.iter().enumerate() {
        let label = label.ok_or_else(|| Error::MissingLabel {
            id: format!("batch[{i}]"),
        })?;
        loss += params.accumulate_nll_grad(doc, label, &mut grad)?;
    }
    Ok((loss, grad))
}
