//! Variant x seed x annotation-budget experiment grids.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{accuracy, mean, std_error, token_f1_by_class, ExtractionReport};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::trainer::{train_variant, Model, TrainConfig, Variant};

/// Derive an independent seed for `stream` from a global seed
/// (FNV-1a over the stream name, mixed by splitmix64).
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Training seed shared by every variant of a grid cell row, so variants
/// are compared under common random numbers.
pub fn training_seed(seed: u64) -> u64 {
    derive_seed(seed, "train")
}

/// Scores of one trained model on one test corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub variant: Variant,
    pub seed: u64,
    /// Annotated training documents used.
    pub m: usize,
    /// `None` for models that do not classify.
    pub accuracy: Option<f64>,
    /// `None` for models that do not extract or tests without masks.
    pub extraction: Option<ExtractionReport>,
}

/// Evaluate a model on a test corpus.
pub fn evaluate_model(
    model: &Model,
    test: &Corpus,
) -> Result<(Option<f64>, Option<ExtractionReport>)> {
    let docs: Vec<_> = test
        .documents()
        .iter()
        .filter(|d| !d.is_empty())
        .cloned()
        .collect();
    let preds = model.predict_all(&docs)?;
    let classifies = model.variant.is_none_or(Variant::classifies);
    let acc = if classifies {
        let (p, g): (Vec<_>, Vec<_>) = docs
            .iter()
            .zip(&preds)
            .filter_map(|(d, p)| Some((p.label, d.label?)))
            .unzip();
        (!g.is_empty()).then(|| accuracy(&p, &g)).transpose()?
    } else {
        None
    };
    let mut pred_masks = Vec::new();
    let mut gold_masks = Vec::new();
    let mut labels = Vec::new();
    for (d, p) in docs.iter().zip(&preds) {
        if let (Some(pm), Some(gm)) = (&p.evidence, &d.evidence) {
            pred_masks.push(pm.clone());
            gold_masks.push(gm.clone());
            labels.push(d.label.unwrap_or(usize::MAX));
        }
    }
    let ext = if gold_masks.is_empty() {
        None
    } else {
        Some(token_f1_by_class(
            &pred_masks,
            &gold_masks,
            &labels,
            model.num_classes(),
        )?)
    };
    Ok((acc, ext))
}

fn run_cell(
    train: &Corpus,
    dev: Option<&Corpus>,
    test: &Corpus,
    variant: Variant,
    seed: u64,
    base: &TrainConfig,
) -> Result<CellResult> {
    let config = TrainConfig {
        seed: training_seed(seed),
        ..base.clone()
    };
    let model = train_variant(train, dev, variant, &config)?;
    let (accuracy, extraction) = evaluate_model(&model, test)?;
    Ok(CellResult {
        variant,
        seed,
        m: train.num_annotated(),
        accuracy,
        extraction,
    })
}

/// Mean scores of one variant across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub variant: Variant,
    pub seeds: usize,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f1_std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub rows: Vec<GridRow>,
}

fn summarize(cells: &[CellResult], variants: &[Variant]) -> Vec<GridRow> {
    variants
        .iter()
        .map(|&v| {
            let mine: Vec<_> = cells.iter().filter(|c| c.variant == v).collect();
            let opt_mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| mean(&xs));
            let acc: Vec<f64> = mine.iter().filter_map(|c| c.accuracy).collect();
            let ext: Vec<&ExtractionReport> =
                mine.iter().filter_map(|c| c.extraction.as_ref()).collect();
            let f1s: Vec<f64> = ext.iter().map(|e| e.f1).collect();
            GridRow {
                variant: v,
                seeds: mine.len(),
                accuracy: opt_mean(acc),
                precision: opt_mean(ext.iter().map(|e| e.precision).collect()),
                recall: opt_mean(ext.iter().map(|e| e.recall).collect()),
                f1_std_error: (!f1s.is_empty()).then(|| std_error(&f1s)),
                f1: opt_mean(f1s),
            }
        })
        .collect()
}

/// Train every variant under every seed and score it on `test`. Cells run
/// in parallel; results come back in (variant, seed) order.
pub fn ablation_grid(
    train: &Corpus,
    dev: Option<&Corpus>,
    test: &Corpus,
    variants: &[Variant],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<GridResult> {
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no variants requested".into()));
    }
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(v, s)| run_cell(train, dev, test, v, s, base))
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize(&cells, variants);
    Ok(GridResult { cells, rows })
}

/// Mean extraction F1 of one variant at one annotation budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub variant: Variant,
    pub m_used: usize,
    pub mean_f1: f64,
    pub std_error: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveResult {
    pub cells: Vec<CellResult>,
    pub points: Vec<CurvePoint>,
}

/// The first `m` entries of a seeded permutation of the annotated
/// documents, so budgets are nested: the subset for a smaller `m` is a
/// prefix of the subset for a larger one.
pub fn nested_subset(train: &Corpus, m: usize, seed: u64) -> Result<Vec<usize>> {
    let mut annotated = train.annotated_indices();
    if m > annotated.len() {
        return Err(Error::InvalidConfig(format!(
            "m = {m} exceeds the {} annotated documents available",
            annotated.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "subsample"));
    annotated.shuffle(&mut rng);
    annotated.truncate(m);
    annotated.sort_unstable();
    Ok(annotated)
}

/// Extraction F1 as the number of annotated training documents grows.
pub fn learning_curve(
    train: &Corpus,
    dev: Option<&Corpus>,
    test: &Corpus,
    m_grid: &[usize],
    variants: &[Variant],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<CurveResult> {
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no variants requested".into()));
    }
    let available = train.num_annotated();
    if let Some(&m) = m_grid.iter().find(|&&m| m > available) {
        return Err(Error::InvalidConfig(format!(
            "m = {m} exceeds the {available} annotated documents available"
        )));
    }
    let subsets: Vec<(u64, usize, Corpus)> = seeds
        .iter()
        .flat_map(|&s| m_grid.iter().map(move |&m| (s, m)))
        .map(|(s, m)| Ok((s, m, train.retain_evidence(&nested_subset(train, m, s)?))))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..subsets.len()).map(move |i| (v, i)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(v, i)| {
            let (s, _, ref corpus) = subsets[i];
            run_cell(corpus, dev, test, v, s, base)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    for &v in variants {
        for &m in m_grid {
            let f1s: Vec<f64> = cells
                .iter()
                .filter(|c| c.variant == v && c.m == m)
                .filter_map(|c| c.extraction.as_ref().map(|e| e.f1))
                .collect();
            if f1s.is_empty() {
                continue;
            }
            points.push(CurvePoint {
                variant: v,
                m_used: m,
                mean_f1: mean(&f1s),
                std_error: std_error(&f1s),
                seeds: f1s.len(),
            });
        }
    }
    Ok(CurveResult { cells, points })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// One CSV row per cell: `variant,seed,m,accuracy,precision,recall,f1`.
pub fn write_cells_csv<W: Write>(writer: W, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record([
        "variant",
        "seed",
        "m",
        "accuracy",
        "precision",
        "recall",
        "f1",
    ])
    .map_err(csv_err)?;
    for c in cells {
        let e = c.extraction.as_ref();
        w.write_record([
            c.variant.name().to_string(),
            c.seed.to_string(),
            c.m.to_string(),
            opt(c.accuracy),
            opt(e.map(|e| e.precision)),
            opt(e.map(|e| e.recall)),
            opt(e.map(|e| e.f1)),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

pub fn write_curve_csv<W: Write>(writer: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(["variant", "m", "mean_f1", "std_error", "seeds"])
        .map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.variant.name().to_string(),
            p.m_used.to_string(),
            format!("{:.6}", p.mean_f1),
            format!("{:.6}", p.std_error),
            p.seeds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

/// Human-readable aligned table of grid means (scores in percent).
pub fn format_table(rows: &[GridRow]) -> String {
    let pct = |x: Option<f64>| {
        x.map(|v| format!("{:.1}", 100.0 * v))
            .unwrap_or_else(|| "---".into())
    };
    let width = rows
        .iter()
        .map(|r| r.variant.name().len())
        .max()
        .unwrap_or(0)
        .max("variant".len());
    let mut out = format!(
        "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}  {:>6}  {:>5}\n",
        "variant", "accuracy", "precision", "recall", "F1", "+/-", "seeds"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}  {:>6}  {:>5}\n",
            r.variant.name(),
            pct(r.accuracy),
            pct(r.precision),
            pct(r.recall),
            pct(r.f1),
            pct(r.f1_std_error),
            r.seeds
        ));
    }
    out
}
