//! The `evidex` command line: train, predict, evaluate, curve, inspect and
//! synth.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. All flags are
//! parsed and validated before any file is opened.

pub mod render;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{self, mask_to_spans, Corpus, SyntheticConfig};
use crate::crf::EmissionMode;
use crate::eval;
use crate::trainer::{self, TrainConfig, Variant};

pub use render::Rendering;

#[derive(Debug, Parser)]
#[command(
    name = "evidex",
    version,
    about = "Classify, then extract supporting evidence"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to --model-out.
    Train(TrainCmd),
    /// Predict labels and evidence spans as JSON lines.
    Predict(PredictCmd),
    /// Score a model on a test corpus, or drive the variant x seed grid.
    Evaluate(EvaluateCmd),
    /// Extraction F1 against the number of annotated training documents.
    Curve(CurveCmd),
    /// Render evidence highlighted under every class.
    Inspect(InspectCmd),
    /// Write a synthetic corpus with known evidence.
    Synth(SynthCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmissionArg {
    Sparse,
    Shared,
    Salience,
}

impl From<EmissionArg> for EmissionMode {
    fn from(e: EmissionArg) -> Self {
        match e {
            EmissionArg::Sparse => EmissionMode::SparseOnly,
            EmissionArg::Shared => EmissionMode::SharedEmbeddings,
            EmissionArg::Salience => EmissionMode::SalienceFeature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ansi,
    Html,
    Json,
}

/// Optimizer and model flags shared by every training subcommand.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Weight of the extraction loss.
    #[arg(long = "lambda")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Random seed; falls back to EVIDEX_SEED, then 0.
    #[arg(long, env = "EVIDEX_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub emission: Option<EmissionArg>,
    /// Give every class its own transition weights.
    #[arg(long)]
    pub class_transitions: bool,
    /// Leave annotated documents with empty masks out of the extraction loss.
    #[arg(long)]
    pub skip_empty_masks: bool,
    /// Number of classes in the corpora.
    #[arg(long, default_value_t = 2)]
    pub num_classes: usize,
}

impl TrainFlags {
    pub fn config(&self) -> anyhow::Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Some(v) = self.lambda {
            c.lambda_extract = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch {
            c.batch_size = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.patience {
            c.patience = v;
        }
        if let Some(v) = self.dim {
            c.embedding_dim = v;
        }
        if let Some(v) = self.emission {
            c.emission_mode = v.into();
        }
        c.class_condition_transitions = self.class_transitions;
        c.include_empty_masks = !self.skip_empty_masks;
        if self.num_classes == 0 {
            bail!("--num-classes must be positive");
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long, required = true)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, required = true)]
    pub model_out: PathBuf,
    #[arg(long, default_value = "CLASSIFY_EXTRACT_PREDICTED")]
    pub variant: Variant,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[arg(long, required = true)]
    pub model_in: PathBuf,
    #[arg(long, required = true)]
    pub test: PathBuf,
    /// Also emit one span list per class.
    #[arg(long)]
    pub per_class: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    /// Model to score. Without it, --train drives the variant x seed grid.
    #[arg(long, conflicts_with = "train", required_unless_present = "train")]
    pub model_in: Option<PathBuf>,
    #[arg(long, required = true)]
    pub test: PathBuf,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Fail unless the test corpus carries evidence annotations.
    #[arg(long)]
    pub extraction: bool,
    #[arg(long, value_delimiter = ',')]
    pub variant: Vec<Variant>,
    /// Number of seeds for the grid, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// CSV output, one row per (variant, seed).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct CurveCmd {
    #[arg(long, required = true)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, required = true)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m_grid: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "EXTRACT_ONLY,CLASSIFY_EXTRACT_PREDICTED"
    )]
    pub variant: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// CSV of curve points.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct InspectCmd {
    #[arg(long, required = true)]
    pub model_in: PathBuf,
    #[arg(long, required = true)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value = "ansi")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long, required = true)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, env = "EVIDEX_SEED", default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 17)]
    pub lexicon_seed: u64,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub label_noise: Option<f64>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = validate(&cli.command) {
        eprintln!("error: {e:#}");
        return 2;
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn validate(cmd: &Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train(c) => {
            c.flags.config()?;
        }
        Command::Evaluate(c) => {
            c.flags.config()?;
            if c.train.is_some() && c.seeds == 0 {
                bail!("--seeds must be positive");
            }
        }
        Command::Curve(c) => {
            c.flags.config()?;
            if c.seeds == 0 {
                bail!("--seeds must be positive");
            }
            if c.variant.is_empty() {
                bail!("--variant needs at least one variant");
            }
        }
        Command::Synth(c) => {
            synth_config(c).validate()?;
        }
        Command::Predict(_) | Command::Inspect(_) => {}
    }
    Ok(())
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train(c) => cmd_train(c),
        Command::Predict(c) => cmd_predict(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::Curve(c) => cmd_curve(c),
        Command::Inspect(c) => cmd_inspect(c),
        Command::Synth(c) => cmd_synth(c),
    }
}

fn load(path: &Path, num_classes: usize) -> anyhow::Result<Corpus> {
    corpus::load_jsonl(path, num_classes).with_context(|| format!("loading {}", path.display()))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_train(c: TrainCmd) -> anyhow::Result<()> {
    let config = c.flags.config()?;
    let train = load(&c.train, c.flags.num_classes)?;
    let dev = c
        .dev
        .as_deref()
        .map(|p| load(p, c.flags.num_classes))
        .transpose()?;
    let (model, report) =
        trainer::train_variant_with_report(&train, dev.as_ref(), c.variant, &config)?;
    for e in &report.epochs {
        match e.dev_metric {
            Some(m) => println!(
                "epoch {:>3}  loss {:.4}  dev {:.4}",
                e.epoch, e.train_loss, m
            ),
            None => println!("epoch {:>3}  loss {:.4}", e.epoch, e.train_loss),
        }
    }
    println!("best epoch {}", report.best_epoch);
    trainer::save_model(&c.model_out, &model)?;
    println!("wrote {}", c.model_out.display());
    Ok(())
}

#[derive(Serialize)]
struct PredictLine<'a> {
    id: &'a str,
    text: String,
    label: usize,
    predicted_label: usize,
    class_probs: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence: Option<Vec<[usize; 2]>>,
    evidence_spans: Option<Vec<[usize; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_class_spans: Option<Vec<Vec<[usize; 2]>>>,
}

fn cmd_predict(c: PredictCmd) -> anyhow::Result<()> {
    let model = trainer::load_model(&c.model_in)?;
    if c.per_class && !model.supports_extraction() {
        bail!("--per-class needs a model that extracts evidence");
    }
    let test = load(&c.test, model.num_classes())?;
    let docs: Vec<_> = test
        .documents()
        .iter()
        .filter(|d| !d.is_empty())
        .cloned()
        .collect();
    let preds = model.predict_all(&docs)?;
    let mut out = output(c.out.as_deref())?;
    for (doc, p) in docs.iter().zip(&preds) {
        let spans = p.evidence.as_deref().map(mask_to_spans);
        let per_class = if c.per_class {
            Some(
                model
                    .extract_per_class(doc)?
                    .iter()
                    .map(|m| mask_to_spans(m))
                    .collect(),
            )
        } else {
            None
        };
        let line = PredictLine {
            id: &doc.id,
            text: doc.tokens.join(" "),
            label: p.label,
            predicted_label: p.label,
            class_probs: &p.class_probs,
            evidence: spans.clone(),
            evidence_spans: spans,
            per_class_spans: per_class,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn print_report(acc: Option<f64>, ext: Option<&eval::ExtractionReport>) {
    match acc {
        Some(a) => println!("accuracy   {a:.4}"),
        None => println!("accuracy   ---"),
    }
    if let Some(r) = ext {
        println!("precision  {:.4}", r.precision);
        println!("recall     {:.4}", r.recall);
        println!("F1         {:.4}", r.f1);
        println!("TP {}  FP {}  FN {}", r.tp, r.fp, r.fn_);
        println!("macro doc F1 {:.4}", r.macro_doc_f1);
        for (c, f) in r.per_class_f1.iter().enumerate() {
            println!("class {c} F1 {f:.4}");
        }
    }
}

fn cmd_evaluate(c: EvaluateCmd) -> anyhow::Result<()> {
    let base = c.flags.config()?;
    if let Some(model_path) = &c.model_in {
        let model = trainer::load_model(model_path)?;
        let test = load(&c.test, model.num_classes())?;
        if c.extraction && test.num_annotated() == 0 {
            bail!(
                "--extraction requested but {} has no evidence annotations",
                c.test.display()
            );
        }
        let (acc, ext) = eval::evaluate_model(&model, &test)?;
        print_report(acc, ext.as_ref());
        if let Some(out) = &c.out {
            let cell = eval::CellResult {
                variant: model.variant.unwrap_or(Variant::ClassifyExtractPredicted),
                seed: model.config.seed,
                m: model.trained_on.annotated,
                accuracy: acc,
                extraction: ext,
            };
            eval::write_cells_csv(output(Some(out))?, &[cell])?;
        }
        return Ok(());
    }

    let train_path = c
        .train
        .as_deref()
        .expect("clap requires --train without --model-in");
    let train = load(train_path, c.flags.num_classes)?;
    let dev = c
        .dev
        .as_deref()
        .map(|p| load(p, c.flags.num_classes))
        .transpose()?;
    let test = load(&c.test, c.flags.num_classes)?;
    if c.extraction && test.num_annotated() == 0 {
        bail!(
            "--extraction requested but {} has no evidence annotations",
            c.test.display()
        );
    }
    let variants = if c.variant.is_empty() {
        Variant::ALL.to_vec()
    } else {
        c.variant.clone()
    };
    let seeds: Vec<u64> = (0..c.seeds).map(|i| base.seed + i).collect();
    let grid = eval::ablation_grid(&train, dev.as_ref(), &test, &variants, &seeds, &base)?;
    print!("{}", eval::format_table(&grid.rows));
    if let Some(out) = &c.out {
        eval::write_cells_csv(output(Some(out))?, &grid.cells)?;
    }
    Ok(())
}

fn cmd_curve(c: CurveCmd) -> anyhow::Result<()> {
    let base = c.flags.config()?;
    let train = load(&c.train, c.flags.num_classes)?;
    let dev = c
        .dev
        .as_deref()
        .map(|p| load(p, c.flags.num_classes))
        .transpose()?;
    let test = load(&c.test, c.flags.num_classes)?;
    let seeds: Vec<u64> = (0..c.seeds).map(|i| base.seed + i).collect();
    let curve = eval::learning_curve(
        &train,
        dev.as_ref(),
        &test,
        &c.m_grid,
        &c.variant,
        &seeds,
        &base,
    )?;
    let mut out = output(c.out.as_deref())?;
    eval::write_curve_csv(&mut out, &curve.points)?;
    Ok(())
}

fn cmd_inspect(c: InspectCmd) -> anyhow::Result<()> {
    let model = trainer::load_model(&c.model_in)?;
    if !model.supports_extraction() {
        bail!("inspect needs a model that extracts evidence");
    }
    let test = load(&c.test, model.num_classes())?;
    let docs: Vec<_> = test.documents().iter().filter(|d| !d.is_empty()).collect();
    let mut results = Vec::with_capacity(docs.len());
    for d in &docs {
        let pred = model.predict(d)?;
        results.push((pred, model.extract_per_class(d)?));
    }
    let renderings: Vec<Rendering<'_>> = docs
        .iter()
        .zip(&results)
        .map(|(d, (p, masks))| Rendering {
            doc: d,
            predicted: p.label,
            class_probs: &p.class_probs,
            masks,
        })
        .collect();
    let mut out = output(c.out.as_deref())?;
    match c.format {
        Format::Ansi => {
            for r in &renderings {
                out.write_all(render::ansi(r).as_bytes())?;
            }
        }
        Format::Html => out.write_all(render::html(&renderings).as_bytes())?,
        Format::Json => {
            for r in &renderings {
                writeln!(out, "{}", render::json(r))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn synth_config(c: &SynthCmd) -> SyntheticConfig {
    let mut cfg = SyntheticConfig {
        n: c.n,
        m: c.m,
        seed: c.seed,
        lexicon_seed: c.lexicon_seed,
        ..SyntheticConfig::default()
    };
    if let Some(v) = c.noise {
        cfg.noise_rate = v;
    }
    if let Some(v) = c.label_noise {
        cfg.label_noise = v;
    }
    cfg
}

fn cmd_synth(c: SynthCmd) -> anyhow::Result<()> {
    let (corpus, _) = corpus::generate_synthetic(&synth_config(&c))?;
    corpus::save_jsonl(&c.out, &corpus)?;
    println!(
        "wrote {} documents ({} annotated) to {}",
        corpus.len(),
        corpus.num_annotated(),
        c.out.display()
    );
    Ok(())
}
