//! Write a standalone HTML page highlighting evidence under every class.

use evidex::cli::render::{html, Rendering};
use evidex::corpus::{generate_synthetic, SyntheticConfig};
use evidex::trainer::train_variant;
use evidex::{TrainConfig, Variant};

fn main() -> anyhow::Result<()> {
    let (train, _) = generate_synthetic(&SyntheticConfig {
        n: 500,
        m: 100,
        ..SyntheticConfig::default()
    })?;
    let (test, _) = generate_synthetic(&SyntheticConfig {
        n: 10,
        m: 10,
        seed: 2002,
        ..SyntheticConfig::default()
    })?;
    let config = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let model = train_variant(&train, None, Variant::ClassifyExtractPredicted, &config)?;

    let mut preds = Vec::new();
    for doc in test.documents() {
        preds.push((model.predict(doc)?, model.extract_per_class(doc)?));
    }
    let renderings: Vec<Rendering> = test
        .documents()
        .iter()
        .zip(&preds)
        .map(|(doc, (p, masks))| Rendering {
            doc,
            predicted: p.label,
            class_probs: &p.class_probs,
            masks,
        })
        .collect();

    let path = std::env::temp_dir().join("evidex-report.html");
    std::fs::write(&path, html(&renderings))?;
    println!("wrote {}", path.display());
    Ok(())
}
