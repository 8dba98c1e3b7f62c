//! Exact inference on a binary-tag linear chain, entirely in log space.

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};

/// Not-evidence tag.
pub const TAG_O: usize = 0;
/// Evidence tag.
pub const TAG_E: usize = 1;
pub const NUM_TAGS: usize = 2;

/// Log-domain potentials of one document: `emissions[t][s]`,
/// `transitions[from][to]` and `start[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    len: usize,
    emissions: Vec<f64>,
    transitions: [[f64; NUM_TAGS]; NUM_TAGS],
    start: [f64; NUM_TAGS],
}

/// Posterior marginals. `edge[t][a][b]` is the probability of tags `a` at
/// `t` and `b` at `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub node: Vec<[f64; NUM_TAGS]>,
    pub edge: Vec<[[f64; NUM_TAGS]; NUM_TAGS]>,
    pub log_partition: f64,
}

impl PotentialTable {
    pub fn new(
        emissions: Vec<[f64; NUM_TAGS]>,
        transitions: [[f64; NUM_TAGS]; NUM_TAGS],
        start: [f64; NUM_TAGS],
    ) -> Result<Self> {
        if emissions.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let finite = emissions.iter().flatten().all(|x| x.is_finite())
            && transitions.iter().flatten().all(|x| x.is_finite())
            && start.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinitePotential);
        }
        Ok(PotentialTable {
            len: emissions.len(),
            emissions: emissions.into_iter().flatten().collect(),
            transitions,
            start,
        })
    }

    /// All-zero potentials over `len` tokens.
    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(
            vec![[0.0; NUM_TAGS]; len],
            [[0.0; NUM_TAGS]; NUM_TAGS],
            [0.0; NUM_TAGS],
        )
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn emission(&self, t: usize, s: usize) -> f64 {
        self.emissions[t * NUM_TAGS + s]
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from][to]
    }

    pub fn start(&self, s: usize) -> f64 {
        self.start[s]
    }

    /// Unnormalized log score of a tag sequence.
    pub fn sequence_score(&self, tags: &[usize]) -> f64 {
        assert_eq!(tags.len(), self.len, "tag sequence length");
        let mut score = self.start[tags[0]];
        for (t, &s) in tags.iter().enumerate() {
            score += self.emission(t, s);
            if t > 0 {
                score += self.transitions[tags[t - 1]][s];
            }
        }
        score
    }

    fn forward(&self) -> Vec<[f64; NUM_TAGS]> {
        let mut alpha = vec![[0.0; NUM_TAGS]; self.len];
        for s in 0..NUM_TAGS {
            alpha[0][s] = self.start[s] + self.emission(0, s);
        }
        for t in 1..self.len {
            for s in 0..NUM_TAGS {
                let incoming: [f64; NUM_TAGS] =
                    std::array::from_fn(|p| alpha[t - 1][p] + self.transitions[p][s]);
                alpha[t][s] = log_sum_exp(&incoming) + self.emission(t, s);
            }
        }
        alpha
    }

    fn backward(&self) -> Vec<[f64; NUM_TAGS]> {
        let mut beta = vec![[0.0; NUM_TAGS]; self.len];
        for t in (0..self.len - 1).rev() {
            for s in 0..NUM_TAGS {
                let outgoing: [f64; NUM_TAGS] = std::array::from_fn(|n| {
                    self.transitions[s][n] + self.emission(t + 1, n) + beta[t + 1][n]
                });
                beta[t][s] = log_sum_exp(&outgoing);
            }
        }
        beta
    }

    /// `log Z`, the log-sum of exponentiated scores over all tag sequences.
    pub fn log_partition(&self) -> f64 {
        let alpha = self.forward();
        alpha[self.len - 1]
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &a| log_add_exp(acc, a))
    }

    /// Forward-backward node and edge marginals.
    pub fn marginals(&self) -> Marginals {
        let alpha = self.forward();
        let beta = self.backward();
        let log_z = log_sum_exp(&alpha[self.len - 1]);
        let node = (0..self.len)
            .map(|t| std::array::from_fn(|s| (alpha[t][s] + beta[t][s] - log_z).exp()))
            .collect();
        let edge = (0..self.len - 1)
            .map(|t| {
                std::array::from_fn(|a| {
                    std::array::from_fn(|b| {
                        (alpha[t][a]
                            + self.transitions[a][b]
                            + self.emission(t + 1, b)
                            + beta[t + 1][b]
                            - log_z)
                            .exp()
                    })
                })
            })
            .collect();
        Marginals {
            node,
            edge,
            log_partition: log_z,
        }
    }

    /// Highest-scoring tag sequence. Exact score ties resolve to the lower
    /// tag index, i.e. towards `O`.
    pub fn viterbi(&self) -> Vec<usize> {
        let mut delta = [0.0; NUM_TAGS];
        for (s, d) in delta.iter_mut().enumerate() {
            *d = self.start[s] + self.emission(0, s);
        }
        let mut back = vec![[0usize; NUM_TAGS]; self.len];
        for t in 1..self.len {
            let mut next = [0.0; NUM_TAGS];
            for s in 0..NUM_TAGS {
                let mut best = 0;
                let mut best_score = delta[0] + self.transitions[0][s];
                for p in 1..NUM_TAGS {
                    let score = delta[p] + self.transitions[p][s];
                    if score > best_score {
                        best = p;
                        best_score = score;
                    }
                }
                back[t][s] = best;
                next[s] = best_score + self.emission(t, s);
            }
            delta = next;
        }
        let mut last = 0;
        for s in 1..NUM_TAGS {
            if delta[s] > delta[last] {
                last = s;
            }
        }
        let mut tags = vec![0; self.len];
        tags[self.len - 1] = last;
        for t in (1..self.len).rev() {
            tags[t - 1] = back[t][tags[t]];
        }
        tags
    }

    /// Viterbi decoding as an evidence mask.
    pub fn decode_mask(&self) -> Vec<bool> {
        self.viterbi().into_iter().map(|s| s == TAG_E).collect()
    }
}
