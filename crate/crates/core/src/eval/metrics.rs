use serde::Serialize;

use crate::error::{Error, Result};

/// Token-level extraction scores with evidence as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub precision: f64,
    pub recall: f64,
    /// Micro-averaged over every token of every document.
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Mean of per-document F1; reported, never used for selection.
    pub macro_doc_f1: f64,
    /// Micro F1 restricted to documents of each gold class; empty when
    /// labels were not supplied.
    pub per_class_f1: Vec<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean with `0/0 = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, pred: &[bool], gold: &[bool]) {
        for (&p, &g) in pred.iter().zip(gold) {
            match (p, g) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => {}
            }
        }
    }

    fn f1(&self) -> f64 {
        f1_score(
            ratio(self.tp, self.tp + self.fp),
            ratio(self.tp, self.tp + self.fn_),
        )
    }
}

fn check_lengths(pred: &[Vec<bool>], gold: &[Vec<bool>]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            index: pred.len().min(gold.len()),
            predicted: pred.len(),
            gold: gold.len(),
        });
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::LengthMismatch {
                index: i,
                predicted: p.len(),
                gold: g.len(),
            });
        }
    }
    Ok(())
}

/// Micro-averaged token F1 over aligned predicted and gold masks.
pub fn token_f1(pred: &[Vec<bool>], gold: &[Vec<bool>]) -> Result<ExtractionReport> {
    check_lengths(pred, gold)?;
    let mut total = Counts::default();
    let mut doc_f1 = 0.0;
    for (p, g) in pred.iter().zip(gold) {
        let mut c = Counts::default();
        c.add(p, g);
        doc_f1 += c.f1();
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn_ += c.fn_;
    }
    let precision = ratio(total.tp, total.tp + total.fp);
    let recall = ratio(total.tp, total.tp + total.fn_);
    Ok(ExtractionReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        tp: total.tp,
        fp: total.fp,
        fn_: total.fn_,
        macro_doc_f1: if pred.is_empty() {
            0.0
        } else {
            doc_f1 / pred.len() as f64
        },
        per_class_f1: Vec::new(),
    })
}

/// [`token_f1`] plus micro F1 per gold class.
pub fn token_f1_by_class(
    pred: &[Vec<bool>],
    gold: &[Vec<bool>],
    labels: &[usize],
    num_classes: usize,
) -> Result<ExtractionReport> {
    let mut report = token_f1(pred, gold)?;
    let mut per = vec![Counts::default(); num_classes];
    for ((p, g), &y) in pred.iter().zip(gold).zip(labels) {
        if y < num_classes {
            per[y].add(p, g);
        }
    }
    report.per_class_f1 = per.iter().map(Counts::f1).collect();
    Ok(report)
}

/// Fraction of exactly matching labels.
pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            index: pred.len().min(gold.len()),
            predicted: pred.len(),
            gold: gold.len(),
        });
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(ratio(hits, pred.len()))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over `sqrt(n)`),
/// zero for fewer than two values.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties). `NaN` when either
/// side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
