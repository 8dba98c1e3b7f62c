//! Metrics and experiment drivers.

mod grid;
mod metrics;

pub use grid::{
    ablation_grid, derive_seed, evaluate_model, format_table, learning_curve, nested_subset,
    training_seed, write_cells_csv, write_curve_csv, CellResult, CurvePoint, CurveResult,
    GridResult, GridRow,
};
pub use metrics::{
    accuracy, f1_score, mean, spearman, std_error, token_f1, token_f1_by_class, ExtractionReport,
};
