mod common;

use common::*;
use evidex::corpus::{Document, SyntheticConfig, TokenKind};
use evidex::eval::{
    ablation_grid, evaluate_model, learning_curve, mean, nested_subset, training_seed,
};
use evidex::trainer::{
    dev_score, load_model, save_model, train_variant, train_variant_with_report,
};
use evidex::{TrainConfig, Variant};

fn small() -> Splits {
    splits(
        SyntheticConfig {
            n: 800,
            m: 150,
            ..SyntheticConfig::default()
        },
        300,
    )
}

#[test]
fn training_loss_decreases_over_first_epochs() {
    let s = splits(SyntheticConfig::default(), 200);
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let (_, report) =
        train_variant_with_report(&s.train, None, Variant::ClassifyExtractPredicted, &config)
            .unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn untrained_model_predicts_first_class_and_no_evidence() {
    let s = small();
    let config = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let model = train_variant(&s.train, None, Variant::ClassifyExtractPredicted, &config).unwrap();
    for d in s.test.documents().iter().take(50) {
        let p = model.predict(d).unwrap();
        assert_eq!(p.label, 0);
        assert!(p.evidence.unwrap().iter().all(|&e| !e));
    }
}

#[test]
fn planted_lexicon_tokens_are_marked_under_their_class() {
    let s = splits(SyntheticConfig::default(), 300);
    let model = train_variant(
        &s.train,
        Some(&s.dev),
        Variant::ClassifyExtractPredicted,
        &TrainConfig::default(),
    )
    .unwrap();
    let (mut own, mut other, mut first_class) = (0, 0, 0);
    for word in &s.lexicon.evidence[0] {
        let mut tokens: Vec<String> = s.lexicon.background[..12].to_vec();
        tokens.insert(6, word.clone());
        let doc = Document::new("planted", tokens);
        let p = model.predict(&doc).unwrap();
        if p.label == 0 {
            first_class += 1;
            own += usize::from(p.evidence.unwrap()[6]);
        }
        other += usize::from(model.extract_per_class(&doc).unwrap()[1][6]);
    }
    let words = s.lexicon.evidence[0].len();
    assert!(
        first_class * 10 >= words * 9,
        "{first_class} of {words} predicted as class 0"
    );
    assert!(2 * own > first_class, "{own} of {first_class} marked");
    assert!(
        10 * other < words,
        "{other} of {words} marked under the other class"
    );
}

#[test]
fn top_salience_token_is_usually_evidence() {
    let s = splits(SyntheticConfig::default(), 300);
    let model = train_variant(
        &s.train,
        Some(&s.dev),
        Variant::ClassifyOnly,
        &TrainConfig::default(),
    )
    .unwrap();
    let (mut hits, mut total) = (0, 0);
    for d in s.test.documents() {
        let f = model.featurize(d);
        let y = model.classifier.predict(&f).unwrap();
        if Some(y) != d.label || !d.evidence.as_ref().unwrap().iter().any(|&e| e) {
            continue;
        }
        let sal = model.classifier.salience(&f, y).unwrap();
        let top = (0..sal.len()).fold(0, |b, t| if sal[t] > sal[b] { t } else { b });
        total += 1;
        hits += usize::from(d.evidence.as_ref().unwrap()[top]);
    }
    assert!(total > 100);
    assert!(2 * hits > total, "{hits} of {total}");
}

#[test]
fn more_annotations_never_shrink_extraction_data() {
    let s = small();
    let mut previous = None;
    for m in [10, 40, 80, 150] {
        let corpus = s
            .train
            .retain_evidence(&nested_subset(&s.train, m, 3).unwrap());
        let config = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let (_, report) =
            train_variant_with_report(&corpus, None, Variant::ClassifyExtractPredicted, &config)
                .unwrap();
        assert_eq!(report.extraction_examples.len(), m);
        if let Some(prev) = previous {
            assert!(report.extraction_examples.is_superset(&prev));
        }
        previous = Some(report.extraction_examples);
    }
}

#[test]
fn single_cell_grid_matches_direct_run() {
    let s = small();
    let base = TrainConfig::default();
    let grid = ablation_grid(
        &s.train,
        Some(&s.dev),
        &s.test,
        &[Variant::ClassifyExtract],
        &[5],
        &base,
    )
    .unwrap();
    assert_eq!(grid.rows.len(), 1);
    let direct = train_variant(
        &s.train,
        Some(&s.dev),
        Variant::ClassifyExtract,
        &TrainConfig {
            seed: training_seed(5),
            ..base
        },
    )
    .unwrap();
    let (acc, ext) = evaluate_model(&direct, &s.test).unwrap();
    assert_eq!(grid.rows[0].accuracy, acc);
    assert_eq!(grid.rows[0].f1, ext.map(|e| e.f1));
}

#[test]
fn full_budget_curve_point_matches_grid() {
    let s = small();
    let base = TrainConfig::default();
    let variants = [Variant::ExtractOnly, Variant::ClassifyExtractPredicted];
    let seeds = [0, 1];
    let grid = ablation_grid(&s.train, Some(&s.dev), &s.test, &variants, &seeds, &base).unwrap();
    let curve = learning_curve(
        &s.train,
        Some(&s.dev),
        &s.test,
        &[150],
        &variants,
        &seeds,
        &base,
    )
    .unwrap();
    for v in variants {
        let g = grid
            .rows
            .iter()
            .find(|r| r.variant == v)
            .unwrap()
            .f1
            .unwrap();
        let c = curve.points.iter().find(|p| p.variant == v).unwrap();
        assert_eq!(c.m_used, 150);
        assert!((g - c.mean_f1).abs() < 1e-12);
    }
    assert!(learning_curve(&s.train, None, &s.test, &[151], &variants, &seeds, &base).is_err());
}

#[test]
fn joint_training_beats_extract_only_on_dev_at_100_annotations() {
    let s = splits(
        SyntheticConfig {
            m: 100,
            ..SyntheticConfig::default()
        },
        500,
    );
    let score = |v: Variant| {
        let f: Vec<f64> = (0..5)
            .map(|seed| {
                let config = TrainConfig {
                    seed: training_seed(seed),
                    ..TrainConfig::default()
                };
                let model = train_variant(&s.train, Some(&s.dev), v, &config).unwrap();
                dev_score(&model, &s.dev).unwrap().unwrap()
            })
            .collect();
        mean(&f)
    };
    let joint = score(Variant::ClassifyExtract);
    let alone = score(Variant::ExtractOnly);
    assert!(joint >= alone, "{joint} < {alone}");
}

#[test]
fn saved_model_predicts_identically() {
    let s = small();
    let model = train_variant(
        &s.train,
        Some(&s.dev),
        Variant::ClassifyExtractOracle,
        &TrainConfig::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.evdx");
    save_model(&path, &model).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(
        model.predict_all(s.test.documents()).unwrap(),
        loaded.predict_all(s.test.documents()).unwrap()
    );
}

#[test]
fn per_class_masks_follow_each_class_lexicon() {
    let s = small();
    let model = train_variant(
        &s.train,
        Some(&s.dev),
        Variant::ClassifyExtractPredicted,
        &TrainConfig::default(),
    )
    .unwrap();
    let mut own = [0usize; 2];
    let mut other = [0usize; 2];
    for d in s.test.documents() {
        let masks = model.extract_per_class(d).unwrap();
        for (c, mask) in masks.iter().enumerate() {
            for (t, _) in d.tokens.iter().zip(mask).filter(|(_, &m)| m) {
                match s.lexicon.kind(t) {
                    Some(TokenKind::Evidence(k)) if k == c => own[c] += 1,
                    _ => other[c] += 1,
                }
            }
        }
    }
    for c in 0..2 {
        assert!(
            own[c] > 4 * other[c],
            "class {c}: {} own vs {} other",
            own[c],
            other[c]
        );
    }
}
