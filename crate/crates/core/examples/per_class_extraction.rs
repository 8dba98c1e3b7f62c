//! Decode the same document under each class and compare what gets marked.

use evidex::corpus::{generate_synthetic, SyntheticConfig, TokenKind};
use evidex::trainer::train_variant;
use evidex::{TrainConfig, Variant};

fn main() -> anyhow::Result<()> {
    let (train, lexicon) = generate_synthetic(&SyntheticConfig {
        n: 600,
        m: 150,
        ..SyntheticConfig::default()
    })?;
    let (test, _) = generate_synthetic(&SyntheticConfig {
        n: 20,
        m: 20,
        seed: 2002,
        ..SyntheticConfig::default()
    })?;
    let config = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let model = train_variant(&train, None, Variant::ClassifyExtractPredicted, &config)?;

    for doc in test.documents().iter().take(3) {
        let p = model.predict(doc)?;
        println!("{}  predicted {}  gold {:?}", doc.id, p.label, doc.label);
        for (c, mask) in model.extract_per_class(doc)?.iter().enumerate() {
            let words: Vec<String> = doc
                .tokens
                .iter()
                .zip(mask)
                .filter(|(_, &e)| e)
                .map(|(t, _)| match lexicon.kind(t) {
                    Some(TokenKind::Evidence(k)) => format!("{t}[{k}]"),
                    _ => format!("{t}[-]"),
                })
                .collect();
            println!("  as class {c}: {}", words.join(" "));
        }
    }
    Ok(())
}
