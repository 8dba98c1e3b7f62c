mod common;

use common::*;
use evidex::classifier::classification_nll_grad;
use evidex::crf::{crf_nll_grad, EmissionMode};
use evidex::trainer::{joint_loss_grad, Example, JointParams};
use evidex::{ClassifierParams, TrainConfig};
use proptest::prelude::*;
use rand::Rng;

const VOCAB: usize = 8;
const DIM: usize = 3;
const FEATS: usize = 10;

fn mixed_batch(seed: u64, classes: usize) -> Vec<Example> {
    let mut r = rng(seed);
    (0..6)
        .map(|i| {
            let len = r.gen_range(1..9);
            let doc = random_doc(&mut r, len, VOCAB, FEATS);
            let label = (i % 3 != 2).then(|| r.gen_range(0..classes));
            let evidence = (label.is_some() && i % 2 == 0).then(|| random_mask(&mut r, len));
            Example {
                doc,
                label,
                evidence,
            }
        })
        .collect()
}

fn random_joint(seed: u64, classes: usize, mode: EmissionMode, conditioned: bool) -> JointParams {
    let mut r = rng(seed);
    JointParams {
        classifier: random_classifier(&mut r, classes, VOCAB, DIM, FEATS),
        crf: random_crf(
            &mut r,
            layout(classes, conditioned, false, mode),
            FEATS,
            DIM,
        ),
    }
}

#[test]
fn joint_gradient_is_sum_of_component_gradients() {
    for seed in 0..10 {
        for mode in MODES {
            for conditioned in [false, true] {
                let classes = 2 + seed as usize % 2;
                let params = random_joint(seed, classes, mode, conditioned);
                let batch = mixed_batch(seed + 50, classes);
                let refs: Vec<&Example> = batch.iter().collect();
                let config = TrainConfig {
                    lambda_extract: 0.7,
                    emission_mode: mode,
                    ..TrainConfig::default()
                };
                let (parts, joint) = joint_loss_grad(&refs, &params, &config).unwrap();

                let labeled: Vec<_> = batch
                    .iter()
                    .filter(|e| e.label.is_some())
                    .map(|e| (&e.doc, e.label))
                    .collect();
                let (cls_loss, cls_grad) =
                    classification_nll_grad(&labeled, &params.classifier).unwrap();
                let mut expected = JointParams {
                    classifier: cls_grad,
                    crf: params.crf.clone(),
                };
                for t in expected.crf.tensors_mut() {
                    t.iter_mut().for_each(|x| *x = 0.0);
                }
                let mut ext_loss = 0.0;
                for e in batch.iter().filter(|e| e.evidence.is_some()) {
                    let (l, gc, gs) = crf_nll_grad(
                        &e.doc,
                        e.evidence.as_deref(),
                        e.label,
                        &params.crf,
                        &params.classifier,
                    )
                    .unwrap();
                    ext_loss += l;
                    expected.add_scaled(
                        0.7,
                        &JointParams {
                            classifier: gs,
                            crf: gc,
                        },
                    );
                }
                assert!((parts.classification - cls_loss).abs() < 1e-10);
                assert!((parts.extraction - ext_loss).abs() < 1e-10);
                assert!((parts.total() - (cls_loss + 0.7 * ext_loss)).abs() < 1e-10);
                for (a, b) in joint.tensors().zip(expected.tensors()) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
                    }
                }
            }
        }
    }
}

#[test]
fn zero_lambda_and_unannotated_batches_reduce_to_classification() {
    let params = random_joint(3, 2, EmissionMode::SalienceFeature, true);
    let batch = mixed_batch(4, 2);
    let refs: Vec<&Example> = batch.iter().collect();
    let labeled: Vec<_> = batch
        .iter()
        .filter(|e| e.label.is_some())
        .map(|e| (&e.doc, e.label))
        .collect();
    let (cls_loss, _) = classification_nll_grad(&labeled, &params.classifier).unwrap();

    let zero = TrainConfig {
        lambda_extract: 0.0,
        ..TrainConfig::default()
    };
    let (parts, _) = joint_loss_grad(&refs, &params, &zero).unwrap();
    assert_eq!(parts.total(), cls_loss);

    let plain: Vec<Example> = batch
        .iter()
        .map(|e| Example {
            evidence: None,
            ..e.clone()
        })
        .collect();
    let refs: Vec<&Example> = plain.iter().collect();
    let (parts, grad) = joint_loss_grad(&refs, &params, &TrainConfig::default()).unwrap();
    assert_eq!(parts.total(), cls_loss);
    assert!(grad
        .crf
        .tensors()
        .iter()
        .all(|t| t.iter().all(|&g| g == 0.0)));
}

#[test]
fn classes_absent_from_batch_receive_no_emission_gradient() {
    for mode in MODES {
        let params = random_joint(8, 3, mode, true);
        let batch: Vec<Example> = mixed_batch(9, 3)
            .into_iter()
            .filter(|e| e.label.is_some())
            .map(|e| Example {
                label: Some(1),
                ..e
            })
            .collect();
        let refs: Vec<&Example> = batch.iter().collect();
        let config = TrainConfig {
            emission_mode: mode,
            ..TrainConfig::default()
        };
        let (_, grad) = joint_loss_grad(&refs, &params, &config).unwrap();
        let emission = grad.crf.tensors()[0];
        for c in [0, 2] {
            let block = &emission[grad.crf.emission_block_range(c)];
            assert!(block.iter().all(|g| g.to_bits() == 0), "{mode:?} class {c}");
        }
        assert!(emission[grad.crf.emission_block_range(1)]
            .iter()
            .any(|&g| g != 0.0));
    }
}

#[test]
fn identical_documents_add_up() {
    let mut r = rng(21);
    let params = random_classifier(&mut r, 3, VOCAB, DIM, FEATS);
    let doc = random_doc(&mut r, 6, VOCAB, FEATS);
    let (one, _) = classification_nll_grad(&[(&doc, Some(2))], &params).unwrap();
    let batch = vec![(&doc, Some(2)); 5];
    let (five, _) = classification_nll_grad(&batch, &params).unwrap();
    assert!((five - 5.0 * one).abs() < 1e-12);
}

proptest! {
    #[test]
    fn probabilities_form_a_distribution(seed in 0u64..10_000, classes in 2usize..6, len in 1usize..12) {
        let mut r = rng(seed);
        let mut params = random_classifier(&mut r, classes, VOCAB, DIM, FEATS);
        for t in params.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= 20.0);
        }
        let doc = random_doc(&mut r, len, VOCAB, FEATS);
        let p = params.predict_proba(&doc).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(params.predict(&doc).unwrap(), params.predict(&doc).unwrap());
    }

    #[test]
    fn nll_ignores_a_uniform_score_shift(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let mut r = rng(seed);
        let params = random_classifier(&mut r, 3, VOCAB, DIM, FEATS);
        let doc = random_doc(&mut r, 5, VOCAB, FEATS);
        let mut shifted: ClassifierParams = params.clone();
        shifted.tensors_mut()[3].iter_mut().for_each(|b| *b += shift);
        for y in 0..3 {
            let (a, _) = classification_nll_grad(&[(&doc, Some(y))], &params).unwrap();
            let (b, _) = classification_nll_grad(&[(&doc, Some(y))], &shifted).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(a >= 0.0);
        }
    }

    #[test]
    fn crf_nll_is_nonnegative(seed in 0u64..10_000, conditioned in any::<bool>()) {
        let mut r = rng(seed);
        let mode = MODES[seed as usize % 3];
        let crf = random_crf(&mut r, layout(2, conditioned, false, mode), FEATS, DIM);
        let shared = random_classifier(&mut r, 2, VOCAB, DIM, FEATS);
        let len = r.gen_range(1..10);
        let doc = random_doc(&mut r, len, VOCAB, FEATS);
        let mask = random_mask(&mut r, len);
        let (loss, _, _) = crf_nll_grad(&doc, Some(&mask), Some(seed as usize % 2), &crf, &shared).unwrap();
        prop_assert!(loss >= -1e-12);
    }
}
