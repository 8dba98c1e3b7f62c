//! Extraction F1 as the number of annotated documents grows.

use evidex::corpus::{generate_synthetic, SyntheticConfig};
use evidex::eval::learning_curve;
use evidex::{TrainConfig, Variant};

fn main() -> anyhow::Result<()> {
    let (train, _) = generate_synthetic(&SyntheticConfig {
        n: 500,
        m: 160,
        ..SyntheticConfig::default()
    })?;
    let (test, _) = generate_synthetic(&SyntheticConfig {
        n: 200,
        m: 200,
        seed: 2002,
        ..SyntheticConfig::default()
    })?;
    let variants = [Variant::ExtractOnly, Variant::ClassifyExtractPredicted];
    let config = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let curve = learning_curve(
        &train,
        None,
        &test,
        &[10, 40, 160],
        &variants,
        &[0, 1],
        &config,
    )?;

    println!(
        "{:>5}  {:>14}  {:>14}",
        "m",
        variants[0].name(),
        variants[1].name()
    );
    for m in [10, 40, 160] {
        let f1 = |v| {
            let p = curve
                .points
                .iter()
                .find(|p| p.variant == v && p.m_used == m)
                .unwrap();
            format!("{:.3} ± {:.3}", p.mean_f1, p.std_error)
        };
        println!("{m:>5}  {:>14}  {:>14}", f1(variants[0]), f1(variants[1]));
    }
    Ok(())
}
