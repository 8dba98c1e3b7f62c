use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("document {id}: evidence without label")]
    EvidenceWithoutLabel { id: String },

    #[error("document {id}: evidence span [{start}, {end}) exceeds token count {len}")]
    SpanOutOfRange {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("document {id}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        id: String,
        label: usize,
        num_classes: usize,
    },

    #[error("document {id}: evidence mask has {mask} entries but {tokens} tokens")]
    MaskLength {
        id: String,
        mask: usize,
        tokens: usize,
    },

    #[error("empty document")]
    EmptyDocument,

    #[error("document {id} has no label")]
    MissingLabel { id: String },

    #[error("document {id} has no evidence mask")]
    MissingEvidence { id: String },

    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite potential")]
    NonFinitePotential,

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("model does not support extraction (trained as {variant})")]
    ExtractionUnsupported { variant: String },

    #[error("length mismatch at document {index}: predicted {predicted}, gold {gold}")]
    LengthMismatch {
        index: usize,
        predicted: usize,
        gold: usize,
    },

    #[error("bad model file: {0}")]
    ModelFormat(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
