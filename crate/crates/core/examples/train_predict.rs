//! Train the label-conditioned model, save it, reload it and predict.

use evidex::corpus::{generate_synthetic, mask_to_spans, SyntheticConfig};
use evidex::eval::evaluate_model;
use evidex::trainer::{load_model, save_model, train_variant_with_report};
use evidex::{TrainConfig, Variant};

fn main() -> anyhow::Result<()> {
    let (train, _) = generate_synthetic(&SyntheticConfig {
        n: 600,
        m: 100,
        ..SyntheticConfig::default()
    })?;
    let (test, _) = generate_synthetic(&SyntheticConfig {
        n: 200,
        m: 200,
        seed: 2002,
        ..SyntheticConfig::default()
    })?;

    let config = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let (model, report) =
        train_variant_with_report(&train, None, Variant::ClassifyExtractPredicted, &config)?;
    for e in &report.epochs {
        println!("epoch {:>2}  loss {:.4}", e.epoch, e.train_loss);
    }

    let path = std::env::temp_dir().join("evidex-example.evdx");
    save_model(&path, &model)?;
    let model = load_model(&path)?;
    std::fs::remove_file(&path)?;

    let (accuracy, extraction) = evaluate_model(&model, &test)?;
    let extraction = extraction.expect("test set is annotated");
    println!(
        "accuracy {:.3}  precision {:.3}  recall {:.3}  F1 {:.3}",
        accuracy.unwrap(),
        extraction.precision,
        extraction.recall,
        extraction.f1
    );

    let doc = &test.documents()[0];
    let p = model.predict(doc)?;
    println!(
        "\n{}\npredicted {} (gold {:?}), p = {:.3?}",
        doc.tokens.join(" "),
        p.label,
        doc.label,
        p.class_probs
    );
    for [s, e] in mask_to_spans(&p.evidence.unwrap()) {
        println!("  evidence: {}", doc.tokens[s..e].join(" "));
    }
    Ok(())
}
