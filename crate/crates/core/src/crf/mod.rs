//! Label-conditioned linear-chain CRF over binary evidence tags.
//!
//! Sparse emission weights are laid out in one block of `K` base features
//! per class: base feature `k` seen under class `y` reads weight row
//! `y * K + k`, so a document conditioned on `y` never touches another
//! class's block. For two classes this is the even/odd split of the
//! doubled feature set with the interleaving replaced by contiguous blocks.

mod inference;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierParams;
use crate::corpus::{FeatureSpace, FeaturizedDoc};
use crate::error::{Error, Result};
use crate::math::{axpy, dot};

pub use inference::{Marginals, PotentialTable, NUM_TAGS, TAG_E, TAG_O};

/// Which dense signal, if any, augments the sparse emission features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EmissionMode {
    SparseOnly,
    /// Per-class tag projections of the classifier's token embeddings.
    SharedEmbeddings,
    /// Embedding projections plus per-class tag weights on the classifier's
    /// salience score of the token.
    SalienceFeature,
}

/// Shape of a CRF parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrfLayout {
    pub num_classes: usize,
    /// One emission block per class when true, a single shared block otherwise.
    pub class_conditioned: bool,
    pub class_condition_transitions: bool,
    pub emission_mode: EmissionMode,
}

impl CrfLayout {
    fn emission_blocks(&self) -> usize {
        if self.class_conditioned {
            self.num_classes
        } else {
            1
        }
    }

    fn transition_blocks(&self) -> usize {
        if self.class_conditioned && self.class_condition_transitions {
            self.num_classes
        } else {
            1
        }
    }
}

/// Map base sparse features of a token to their class-conditioned indices
/// `class * base_features + k`.
pub fn condition_features(
    sparse: &[usize],
    class: usize,
    num_classes: usize,
    base_features: usize,
) -> Result<Vec<usize>> {
    if class >= num_classes {
        return Err(Error::ClassOutOfRange { class, num_classes });
    }
    Ok(sparse.iter().map(|&k| class * base_features + k).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    layout: CrfLayout,
    num_features: usize,
    dim: usize,
    /// `(block * K + k) * NUM_TAGS + tag`.
    pub emission: Vec<f64>,
    /// `(block * NUM_TAGS + from) * NUM_TAGS + to`.
    pub transitions: Vec<f64>,
    /// `block * NUM_TAGS + tag`.
    pub start: Vec<f64>,
    /// `(block * NUM_TAGS + tag) * dim + d`.
    pub projection: Vec<f64>,
    /// `block * NUM_TAGS + tag`.
    pub salience_weights: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(layout: CrfLayout, num_features: usize, dim: usize) -> Self {
        let eb = layout.emission_blocks();
        let tb = layout.transition_blocks();
        CrfParams {
            layout,
            num_features,
            dim,
            emission: vec![0.0; eb * num_features * NUM_TAGS],
            transitions: vec![0.0; tb * NUM_TAGS * NUM_TAGS],
            start: vec![0.0; tb * NUM_TAGS],
            projection: vec![0.0; eb * NUM_TAGS * dim],
            salience_weights: vec![0.0; eb * NUM_TAGS],
        }
    }

    pub fn for_space(layout: CrfLayout, fs: &FeatureSpace) -> Self {
        Self::zeros(layout, fs.num_features(), fs.embedding_dim())
    }

    pub fn layout(&self) -> CrfLayout {
        self.layout
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.emission,
            &self.transitions,
            &self.start,
            &self.projection,
            &self.salience_weights,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.emission,
            &mut self.transitions,
            &mut self.start,
            &mut self.projection,
            &mut self.salience_weights,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.layout.num_classes {
            return Err(Error::ClassOutOfRange {
                class,
                num_classes: self.layout.num_classes,
            });
        }
        Ok(())
    }

    fn emission_block(&self, class: usize) -> usize {
        if self.layout.class_conditioned {
            class
        } else {
            0
        }
    }

    fn transition_block(&self, class: usize) -> usize {
        if self.layout.transition_blocks() > 1 {
            class
        } else {
            0
        }
    }

    /// Row range of the sparse emission weights read under `class`.
    pub fn emission_block_range(&self, class: usize) -> std::ops::Range<usize> {
        let b = self.emission_block(class);
        let width = self.num_features * NUM_TAGS;
        b * width..(b + 1) * width
    }

    /// Sparse emission weight of (conditioned) feature row `row` and `tag`.
    pub fn emission_weight(&self, row: usize, tag: usize) -> f64 {
        self.emission[row * NUM_TAGS + tag]
    }

    pub fn emission_weight_mut(&mut self, row: usize, tag: usize) -> &mut f64 {
        &mut self.emission[row * NUM_TAGS + tag]
    }

    pub fn transition_mut(&mut self, class: usize, from: usize, to: usize) -> &mut f64 {
        let b = self.transition_block(class);
        &mut self.transitions[(b * NUM_TAGS + from) * NUM_TAGS + to]
    }

    fn projection_row(&self, block: usize, tag: usize) -> &[f64] {
        let off = (block * NUM_TAGS + tag) * self.dim;
        &self.projection[off..off + self.dim]
    }

    fn projection_row_mut(&mut self, block: usize, tag: usize) -> &mut [f64] {
        let off = (block * NUM_TAGS + tag) * self.dim;
        &mut self.projection[off..off + self.dim]
    }

    /// Log potentials of `doc` with the CRF conditioned on `class`. The
    /// classifier supplies the shared embeddings and salience scores.
    pub fn build_potentials(
        &self,
        doc: &FeaturizedDoc,
        class: usize,
        shared: &ClassifierParams,
    ) -> Result<PotentialTable> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        self.check_class(class)?;
        let block = self.emission_block(class);
        let base = block * self.num_features;
        let salience = match self.layout.emission_mode {
            EmissionMode::SalienceFeature => Some(shared.salience(doc, class)?),
            _ => None,
        };
        let emissions = doc
            .tokens
            .iter()
            .enumerate()
            .map(|(t, tok)| {
                std::array::from_fn(|s| {
                    let mut e: f64 = tok
                        .sparse
                        .iter()
                        .map(|&k| self.emission_weight(base + k, s))
                        .sum();
                    if self.layout.emission_mode != EmissionMode::SparseOnly {
                        e += dot(
                            self.projection_row(block, s),
                            shared.embedding(tok.embedding_row),
                        );
                    }
                    if let Some(sal) = &salience {
                        e += self.salience_weights[block * NUM_TAGS + s] * sal[t];
                    }
                    e
                })
            })
            .collect();
        let tb = self.transition_block(class);
        let transitions = std::array::from_fn(|a| {
            std::array::from_fn(|b| self.transitions[(tb * NUM_TAGS + a) * NUM_TAGS + b])
        });
        let start = std::array::from_fn(|s| self.start[tb * NUM_TAGS + s]);
        PotentialTable::new(emissions, transitions, start)
    }

    /// Viterbi evidence mask of `doc` conditioned on `class`.
    pub fn decode(
        &self,
        doc: &FeaturizedDoc,
        class: usize,
        shared: &ClassifierParams,
    ) -> Result<Vec<bool>> {
        Ok(self.build_potentials(doc, class, shared)?.decode_mask())
    }

    /// Add the gradient of `-log p(mask | class, doc)` into `grad` (CRF
    /// weights) and `shared_grad` (classifier weights reached through
    /// shared embeddings or salience), returning the loss.
    pub fn accumulate_nll_grad(
        &self,
        doc: &FeaturizedDoc,
        mask: &[bool],
        class: usize,
        shared: &ClassifierParams,
        grad: &mut CrfParams,
        shared_grad: &mut ClassifierParams,
    ) -> Result<f64> {
        if mask.len() != doc.len() {
            return Err(Error::MaskLength {
                id: "<featurized>".into(),
                mask: mask.len(),
                tokens: doc.len(),
            });
        }
        let pt = self.build_potentials(doc, class, shared)?;
        let gold: Vec<usize> = mask.iter().map(|&e| usize::from(e)).collect();
        let marg = pt.marginals();
        let loss = marg.log_partition - pt.sequence_score(&gold);

        let block = self.emission_block(class);
        let base = block * self.num_features;
        let tb = self.transition_block(class);

        grad.start[tb * NUM_TAGS..(tb + 1) * NUM_TAGS]
            .iter_mut()
            .enumerate()
            .for_each(|(s, g)| *g += marg.node[0][s]);
        grad.start[tb * NUM_TAGS + gold[0]] -= 1.0;
        for (t, edge) in marg.edge.iter().enumerate() {
            for a in 0..NUM_TAGS {
                for b in 0..NUM_TAGS {
                    grad.transitions[(tb * NUM_TAGS + a) * NUM_TAGS + b] += edge[a][b];
                }
            }
            grad.transitions[(tb * NUM_TAGS + gold[t]) * NUM_TAGS + gold[t + 1]] -= 1.0;
        }

        let inv_len = 1.0 / doc.len() as f64;
        let salience = match self.layout.emission_mode {
            EmissionMode::SalienceFeature => Some(shared.salience(doc, class)?),
            _ => None,
        };
        for (t, tok) in doc.tokens.iter().enumerate() {
            // d loss / d emission(t, s): expected minus observed.
            let dem: [f64; NUM_TAGS] =
                std::array::from_fn(|s| marg.node[t][s] - if gold[t] == s { 1.0 } else { 0.0 });
            for &k in &tok.sparse {
                for (s, &g) in dem.iter().enumerate() {
                    *grad.emission_weight_mut(base + k, s) += g;
                }
            }
            if self.layout.emission_mode != EmissionMode::SparseOnly {
                let emb = shared.embedding(tok.embedding_row);
                for (s, &g) in dem.iter().enumerate() {
                    axpy(g, emb, grad.projection_row_mut(block, s));
                    axpy(
                        g,
                        self.projection_row(block, s),
                        shared_grad.embedding_mut(tok.embedding_row),
                    );
                }
            }
            if let Some(sal) = &salience {
                let mut dsal = 0.0;
                for (s, &g) in dem.iter().enumerate() {
                    grad.salience_weights[block * NUM_TAGS + s] += g * sal[t];
                    dsal += g * self.salience_weights[block * NUM_TAGS + s];
                }
                if dsal != 0.0 {
                    let emb = shared.embedding(tok.embedding_row).to_vec();
                    axpy(dsal * inv_len, &emb, shared_grad.class_weight_mut(class));
                    let w = shared.class_weight(class).to_vec();
                    axpy(
                        dsal * inv_len,
                        &w,
                        shared_grad.embedding_mut(tok.embedding_row),
                    );
                    for &k in &tok.sparse {
                        *shared_grad.sparse_weight_mut(class, k) += dsal;
                    }
                }
            }
        }
        Ok(loss)
    }
}

/// `-log p(mask | class, doc)` and its gradients with respect to the CRF
/// and the shared classifier parameters.
pub fn crf_nll_grad(
    doc: &FeaturizedDoc,
    mask: Option<&[bool]>,
    class: Option<usize>,
    crf: &CrfParams,
    shared: &ClassifierParams,
) -> Result<(f64, CrfParams, ClassifierParams)> {
    let mask = mask.ok_or_else(|| Error::MissingEvidence {
        id: "<featurized>".into(),
    })?;
    let class = class.ok_or_else(|| Error::MissingLabel {
        id: "<featurized>".into(),
    })?;
    let mut grad = CrfParams::zeros(crf.layout, crf.num_features, crf.dim);
    let mut shared_grad = ClassifierParams::zeros(
        shared.num_classes(),
        shared.vocab_size(),
        shared.dim(),
        shared.num_features(),
    );
    let loss = crf.accumulate_nll_grad(doc, mask, class, shared, &mut grad, &mut shared_grad)?;
    Ok((loss, grad, shared_grad))
}
