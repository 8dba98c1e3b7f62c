//! Documents, corpora, JSONL ingestion, feature extraction and the
//! synthetic corpus generator.

mod features;
mod synthetic;
mod tokenize;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{FeatureSpace, FeaturizedDoc, Template, TokenFeatures, UNK};
pub use synthetic::{generate_synthetic, Lexicon, SyntheticConfig, TokenKind};
pub use tokenize::tokenize;

/// A tokenized document with an optional class label and an optional
/// token-level evidence mask (`true` = evidence token).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
    pub evidence: Option<Vec<bool>>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            tokens,
            label: None,
            evidence: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_evidence(mut self, mask: Vec<bool>) -> Self {
        self.evidence = Some(mask);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn validate(&self, num_classes: usize) -> Result<()> {
        if let Some(label) = self.label {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    id: self.id.clone(),
                    label,
                    num_classes,
                });
            }
        }
        if let Some(mask) = &self.evidence {
            if mask.len() != self.tokens.len() {
                return Err(Error::MaskLength {
                    id: self.id.clone(),
                    mask: mask.len(),
                    tokens: self.tokens.len(),
                });
            }
            if self.label.is_none() {
                return Err(Error::EvidenceWithoutLabel {
                    id: self.id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// An ordered collection of documents over `num_classes` classes.
///
/// `n` counts labeled documents, `m` counts evidence-annotated ones;
/// every annotated document is labeled, so `m <= n <= len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    num_classes: usize,
    n: usize,
    m: usize,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be positive".into()));
        }
        for doc in &documents {
            doc.validate(num_classes)?;
        }
        let n = documents.iter().filter(|d| d.label.is_some()).count();
        let m = documents.iter().filter(|d| d.evidence.is_some()).count();
        Ok(Corpus {
            documents,
            num_classes,
            n,
            m,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of labeled documents.
    pub fn num_labeled(&self) -> usize {
        self.n
    }

    /// Number of evidence-annotated documents.
    pub fn num_annotated(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Indices of documents carrying an evidence mask, in corpus order.
    pub fn annotated_indices(&self) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.evidence.is_some())
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the corpus keeping evidence masks only on the documents at
    /// `keep` (indices into the corpus). Labels are untouched.
    pub fn retain_evidence(&self, keep: &[usize]) -> Corpus {
        let mut keep_flags = vec![false; self.documents.len()];
        for &i in keep {
            if i < keep_flags.len() {
                keep_flags[i] = true;
            }
        }
        let documents = self
            .documents
            .iter()
            .zip(&keep_flags)
            .map(|(d, &k)| {
                let mut d = d.clone();
                if !k {
                    d.evidence = None;
                }
                d
            })
            .collect();
        Corpus::new(documents, self.num_classes).expect("subset of a valid corpus is valid")
    }
}

/// Maximal runs of `true` as half-open `[start, end)` token spans.
pub fn mask_to_spans(mask: &[bool]) -> Vec<[usize; 2]> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &on) in mask.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push([s, i]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push([s, mask.len()]);
    }
    spans
}

fn spans_to_mask(id: &str, spans: &[[usize; 2]], len: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; len];
    for &[start, end] in spans {
        if start > end || end > len {
            return Err(Error::SpanOutOfRange {
                id: id.to_string(),
                start,
                end,
                len,
            });
        }
        mask[start..end].iter_mut().for_each(|m| *m = true);
    }
    Ok(mask)
}

#[derive(Deserialize)]
struct RawLine {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    evidence: Option<Vec<[usize; 2]>>,
}

#[derive(Serialize)]
struct OutLine<'a> {
    id: &'a str,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence: Option<Vec<[usize; 2]>>,
}

/// Parse JSONL corpus text from a reader. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_jsonl<R: Read>(reader: R, num_classes: usize) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLine = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: lineno,
            message: e.to_string(),
        })?;
        let id = raw.id.unwrap_or_else(|| format!("doc-{lineno}"));
        let tokens = tokenize(&raw.text);
        let evidence = match raw.evidence {
            Some(spans) => {
                if raw.label.is_none() {
                    return Err(Error::EvidenceWithoutLabel { id });
                }
                Some(spans_to_mask(&id, &spans, tokens.len())?)
            }
            None => None,
        };
        documents.push(Document {
            id,
            tokens,
            label: raw.label,
            evidence,
        });
    }
    Corpus::new(documents, num_classes)
}

pub fn load_jsonl(path: impl AsRef<Path>, num_classes: usize) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(file, num_classes)
}

/// Write a corpus as JSONL. Tokens are joined with single spaces, which
/// the tokenizer maps back to the same token sequence.
pub fn write_jsonl<W: Write>(mut writer: W, corpus: &Corpus) -> std::io::Result<()> {
    for doc in corpus.documents() {
        let line = OutLine {
            id: &doc.id,
            text: doc.tokens.join(" "),
            label: doc.label,
            evidence: doc.evidence.as_deref().map(mask_to_spans),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_jsonl(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(BufWriter::new(file), corpus).map_err(|e| Error::io(path, e))
}
