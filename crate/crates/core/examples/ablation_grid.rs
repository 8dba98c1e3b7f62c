//! Compare training variants over a few seeds on one corpus.

use evidex::corpus::{generate_synthetic, SyntheticConfig};
use evidex::eval::{ablation_grid, format_table, write_cells_csv};
use evidex::{TrainConfig, Variant};

fn main() -> anyhow::Result<()> {
    let (train, _) = generate_synthetic(&SyntheticConfig {
        n: 500,
        m: 80,
        ..SyntheticConfig::default()
    })?;
    let held_out = |n, seed| {
        generate_synthetic(&SyntheticConfig {
            n,
            m: n,
            seed,
            ..SyntheticConfig::default()
        })
    };
    let (dev, _) = held_out(150, 1001)?;
    let (test, _) = held_out(200, 2002)?;

    let variants = [
        Variant::ExtractOnly,
        Variant::ClassifyExtract,
        Variant::ClassifyExtractPredicted,
        Variant::TopkSalience,
    ];
    let config = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let grid = ablation_grid(&train, Some(&dev), &test, &variants, &[0, 1], &config)?;
    print!("{}", format_table(&grid.rows));
    println!();
    write_cells_csv(std::io::stdout().lock(), &grid.cells)?;
    Ok(())
}
