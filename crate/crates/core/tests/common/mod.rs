#![allow(dead_code, clippy::needless_range_loop)]

use evidex::classifier::ClassifierParams;
use evidex::corpus::{
    generate_synthetic, Corpus, FeaturizedDoc, Lexicon, SyntheticConfig, TokenFeatures,
};
use evidex::crf::{CrfLayout, CrfParams, EmissionMode, PotentialTable, NUM_TAGS};
use evidex::math::log_sum_exp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_table(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> PotentialTable {
    let mut u = || rng.gen_range(-scale..scale);
    let emissions = (0..len).map(|_| [u(), u()]).collect();
    let transitions = [[u(), u()], [u(), u()]];
    let start = [u(), u()];
    PotentialTable::new(emissions, transitions, start).unwrap()
}

/// Score of a tag sequence read straight off the table's accessors.
pub fn path_score(pt: &PotentialTable, tags: &[usize]) -> f64 {
    let mut s = pt.start(tags[0]) + pt.emission(0, tags[0]);
    for t in 1..tags.len() {
        s += pt.transition(tags[t - 1], tags[t]) + pt.emission(t, tags[t]);
    }
    s
}

pub fn all_paths(len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1usize << len).map(move |bits| (0..len).map(|t| (bits >> t) & 1).collect())
}

/// Exhaustive log-partition, node marginals, edge marginals and best score.
pub struct Enumerated {
    pub log_partition: f64,
    pub node: Vec<[f64; NUM_TAGS]>,
    pub edge: Vec<[[f64; NUM_TAGS]; NUM_TAGS]>,
    pub max_score: f64,
}

pub fn enumerate(pt: &PotentialTable) -> Enumerated {
    let len = pt.len();
    let paths: Vec<Vec<usize>> = all_paths(len).collect();
    let scores: Vec<f64> = paths.iter().map(|p| path_score(pt, p)).collect();
    let log_partition = log_sum_exp(&scores);
    let mut node = vec![[0.0; NUM_TAGS]; len];
    let mut edge = vec![[[0.0; NUM_TAGS]; NUM_TAGS]; len.saturating_sub(1)];
    for (p, &s) in paths.iter().zip(&scores) {
        let w = (s - log_partition).exp();
        for t in 0..len {
            node[t][p[t]] += w;
            if t + 1 < len {
                edge[t][p[t]][p[t + 1]] += w;
            }
        }
    }
    let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Enumerated {
        log_partition,
        node,
        edge,
        max_score,
    }
}

pub fn random_doc(
    rng: &mut ChaCha8Rng,
    len: usize,
    vocab: usize,
    features: usize,
) -> FeaturizedDoc {
    FeaturizedDoc {
        tokens: (0..len)
            .map(|_| {
                let n = rng.gen_range(1..=3);
                let mut sparse: Vec<usize> = (0..n).map(|_| rng.gen_range(0..features)).collect();
                sparse.sort_unstable();
                sparse.dedup();
                TokenFeatures {
                    embedding_row: rng.gen_range(0..vocab),
                    sparse,
                }
            })
            .collect(),
    }
}

pub fn random_mask(rng: &mut ChaCha8Rng, len: usize) -> Vec<bool> {
    (0..len).map(|_| rng.gen_bool(0.4)).collect()
}

pub fn fill_uniform(rng: &mut ChaCha8Rng, xs: &mut [f64], scale: f64) {
    xs.iter_mut()
        .for_each(|x| *x = rng.gen_range(-scale..scale));
}

pub fn random_classifier(
    rng: &mut ChaCha8Rng,
    classes: usize,
    vocab: usize,
    dim: usize,
    features: usize,
) -> ClassifierParams {
    let mut p = ClassifierParams::zeros(classes, vocab, dim, features);
    for t in p.tensors_mut() {
        fill_uniform(rng, t, 1.0);
    }
    p
}

pub fn layout(
    classes: usize,
    conditioned: bool,
    per_class_transitions: bool,
    mode: EmissionMode,
) -> CrfLayout {
    CrfLayout {
        num_classes: classes,
        class_conditioned: conditioned,
        class_condition_transitions: per_class_transitions,
        emission_mode: mode,
    }
}

pub fn random_crf(
    rng: &mut ChaCha8Rng,
    layout: CrfLayout,
    features: usize,
    dim: usize,
) -> CrfParams {
    let mut p = CrfParams::zeros(layout, features, dim);
    for t in p.tensors_mut() {
        fill_uniform(rng, t, 1.0);
    }
    p
}

pub const MODES: [EmissionMode; 3] = [
    EmissionMode::SparseOnly,
    EmissionMode::SharedEmbeddings,
    EmissionMode::SalienceFeature,
];

/// Largest entrywise relative error between an analytic gradient and
/// central differences of `loss`, perturbing every entry of every tensor.
pub fn max_fd_error<P: Clone>(
    params: &P,
    analytic: &[Vec<f64>],
    tensors_mut: impl Fn(&mut P) -> Vec<&mut Vec<f64>>,
    loss: impl Fn(&P) -> f64,
    eps: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let shapes: Vec<usize> = tensors_mut(&mut probe).iter().map(|t| t.len()).collect();
    assert_eq!(shapes, analytic.iter().map(Vec::len).collect::<Vec<_>>());
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = tensors_mut(&mut probe)[ti][i];
            tensors_mut(&mut probe)[ti][i] = orig + eps;
            let up = loss(&probe);
            tensors_mut(&mut probe)[ti][i] = orig - eps;
            let down = loss(&probe);
            tensors_mut(&mut probe)[ti][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti][i];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

pub const DEV_SEED: u64 = 1001;
pub const TEST_SEED: u64 = 2002;

/// Train, dev and test corpora drawn from one lexicon; dev and test are
/// fully annotated and free of label noise.
pub struct Splits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub lexicon: Lexicon,
}

pub fn splits(train: SyntheticConfig, held_out: usize) -> Splits {
    let clean = SyntheticConfig {
        n: held_out,
        m: held_out,
        label_noise: 0.0,
        ..train.clone()
    };
    let (dev, _) = generate_synthetic(&SyntheticConfig {
        seed: DEV_SEED,
        ..clean.clone()
    })
    .unwrap();
    let (test, _) = generate_synthetic(&SyntheticConfig {
        seed: TEST_SEED,
        ..clean
    })
    .unwrap();
    let (train, lexicon) = generate_synthetic(&train).unwrap();
    Splits {
        train,
        dev,
        test,
        lexicon,
    }
}
