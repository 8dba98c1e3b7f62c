//! Versioned binary model container.
//!
//! Layout (little-endian): magic `EVDX`, `u32` format version, then the
//! JSON config snapshot, the feature space, the classifier tensors and the
//! extractor. Strings are `u32` length + UTF-8; tensors are `u64` length +
//! raw `f64` bits, so parameters round-trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{LabelSource, TrainConfig, Variant};
use super::model::{CorpusStats, Extractor, Model};
use crate::classifier::ClassifierParams;
use crate::corpus::{FeatureSpace, Template};
use crate::crf::{CrfLayout, CrfParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVDX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Option<Variant>,
    config: TrainConfig,
    label_source: LabelSource,
    num_classes: usize,
    trained_on: CorpusStats,
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }

    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(std::io::Error::other)?;
        self.bytes(&v.to_le_bytes())
    }

    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn tensor(&mut self, t: &[f64]) -> std::io::Result<()> {
        self.bytes(&(t.len() as u64).to_le_bytes())?;
        for x in t {
            self.bytes(&x.to_le_bytes())?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    inner: R,
}

fn truncated(e: std::io::Error) -> Error {
    Error::ModelFormat(format!("truncated or unreadable: {e}"))
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()?;
        let mut buf = Vec::new();
        (&mut self.inner)
            .take(len as u64)
            .read_to_end(&mut buf)
            .map_err(truncated)?;
        if buf.len() != len {
            return Err(Error::ModelFormat("truncated string".into()));
        }
        String::from_utf8(buf).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    fn tensor(&mut self, expected: usize, name: &str) -> Result<Vec<f64>> {
        let len = u64::from_le_bytes(self.array()?) as usize;
        if len != expected {
            return Err(Error::ModelFormat(format!(
                "tensor {name} has {len} entries, expected {expected}"
            )));
        }
        (0..len)
            .map(|_| Ok(f64::from_le_bytes(self.array()?)))
            .collect()
    }
}

pub fn write_model<W: Write>(inner: W, model: &Model) -> std::io::Result<()> {
    let mut w = Writer { inner };
    w.bytes(MAGIC)?;
    w.bytes(&FORMAT_VERSION.to_le_bytes())?;
    let header = Header {
        variant: model.variant,
        config: model.config.clone(),
        label_source: model.label_source,
        num_classes: model.num_classes(),
        trained_on: model.trained_on,
    };
    w.str(&serde_json::to_string(&header)?)?;

    let fs = &model.features;
    w.u32(fs.embedding_dim())?;
    w.u32(fs.templates().len())?;
    for t in fs.templates() {
        w.u8(t.tag())?;
    }
    w.u32(fs.vocab_size())?;
    for v in fs.vocab() {
        w.str(v)?;
    }
    w.u32(fs.num_features())?;
    for f in fs.feature_names() {
        w.str(f)?;
    }

    for t in model.classifier.tensors() {
        w.tensor(t)?;
    }

    match &model.extractor {
        Extractor::None => w.u8(0)?,
        Extractor::Crf(crf) => {
            w.u8(1)?;
            w.str(&serde_json::to_string(&crf.layout())?)?;
            for t in crf.tensors() {
                w.tensor(t)?;
            }
        }
        Extractor::TopK { evidence_fraction } => {
            w.u8(2)?;
            w.bytes(&evidence_fraction.to_le_bytes())?;
        }
    }
    w.inner.flush()
}

pub fn read_model<R: Read>(inner: R) -> Result<Model> {
    let mut r = Reader { inner };
    if &r.array::<4>()? != MAGIC {
        return Err(Error::ModelFormat("missing EVDX magic header".into()));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header: Header =
        serde_json::from_str(&r.str()?).map_err(|e| Error::ModelFormat(e.to_string()))?;

    let dim = r.u32()?;
    let n_templates = r.u32()?;
    let templates = (0..n_templates)
        .map(|_| {
            let tag = r.u8()?;
            Template::from_tag(tag)
                .ok_or_else(|| Error::ModelFormat(format!("unknown template {tag}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_vocab = r.u32()?;
    let vocab = (0..n_vocab).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let n_features = r.u32()?;
    let features = (0..n_features)
        .map(|_| r.str())
        .collect::<Result<Vec<_>>>()?;
    if vocab.is_empty() {
        return Err(Error::ModelFormat("vocabulary lacks the UNK row".into()));
    }
    let fs = FeatureSpace::from_parts(vocab, features, templates, dim);

    let c = header.num_classes;
    let mut classifier = ClassifierParams::for_space(&fs, c);
    let names = ["embeddings", "class_weights", "sparse_weights", "bias"];
    for (t, name) in classifier.tensors_mut().into_iter().zip(names) {
        *t = r.tensor(t.len(), name)?;
    }

    let extractor = match r.u8()? {
        0 => Extractor::None,
        1 => {
            let layout: CrfLayout =
                serde_json::from_str(&r.str()?).map_err(|e| Error::ModelFormat(e.to_string()))?;
            if layout.num_classes != c {
                return Err(Error::ModelFormat(
                    "CRF and classifier disagree on classes".into(),
                ));
            }
            let mut crf = CrfParams::for_space(layout, &fs);
            let names = [
                "emission",
                "transitions",
                "start",
                "projection",
                "salience_weights",
            ];
            for (t, name) in crf.tensors_mut().into_iter().zip(names) {
                *t = r.tensor(t.len(), name)?;
            }
            Extractor::Crf(crf)
        }
        2 => Extractor::TopK {
            evidence_fraction: f64::from_le_bytes(r.array()?),
        },
        tag => return Err(Error::ModelFormat(format!("unknown extractor tag {tag}"))),
    };
    Ok(Model {
        variant: header.variant,
        config: header.config,
        features: fs,
        classifier,
        extractor,
        label_source: header.label_source,
        trained_on: header.trained_on,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(BufWriter::new(file), model).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes_of(model: &Model) -> Vec<u8> {
        let mut out = Vec::new();
        write_model(&mut out, model).unwrap();
        out
    }

    fn sample(extractor: Extractor) -> Model {
        let fs = FeatureSpace::from_parts(
            vec!["<unk>".into(), "good".into()],
            vec!["word=good".into(), "pre3=goo".into()],
            Template::ALL.to_vec(),
            3,
        );
        let mut classifier = ClassifierParams::for_space(&fs, 2);
        classifier.embeddings = vec![0.1, -0.2, 0.3, f64::MIN_POSITIVE, 1e-300, -7.5];
        classifier.bias = vec![0.25, -0.25];
        Model {
            variant: Some(Variant::ClassifyExtractPredicted),
            config: TrainConfig::default(),
            features: fs,
            classifier,
            extractor,
            label_source: LabelSource::Predicted,
            trained_on: CorpusStats {
                documents: 3,
                labeled: 2,
                annotated: 1,
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let fs_layout = CrfLayout {
            num_classes: 2,
            class_conditioned: true,
            class_condition_transitions: true,
            emission_mode: crate::crf::EmissionMode::SharedEmbeddings,
        };
        let mut crf = CrfParams::zeros(fs_layout, 2, 3);
        crf.transitions[3] = 0.1 + 0.2;
        for model in [
            sample(Extractor::None),
            sample(Extractor::Crf(crf)),
            sample(Extractor::TopK {
                evidence_fraction: 1.0 / 3.0,
            }),
        ] {
            let bytes = bytes_of(&model);
            assert_eq!(&bytes[..4], b"EVDX");
            let back = read_model(bytes.as_slice()).unwrap();
            assert_eq!(back, model);
            assert_eq!(bytes_of(&back), bytes);
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = bytes_of(&sample(Extractor::None));
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            read_model(bytes.as_slice()),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn bad_magic_and_truncation_rejected() {
        let bytes = bytes_of(&sample(Extractor::None));
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(
            read_model(wrong.as_slice()),
            Err(Error::ModelFormat(_))
        ));
        assert!(matches!(
            read_model(&bytes[..bytes.len() - 3]),
            Err(Error::ModelFormat(_))
        ));
    }
}
