//! JSON model files.
//!
//! Two schemas share a `version`/`type` header: plain unigram tokenizers
//! (`"unigram"`, a sorted piece/logprob list) and paired models
//! (`"paired-unigram"`, embedding the training configuration, both
//! vocabularies, the source tokenizer's pieces, and the sparse count
//! cells sorted by target then source id). Saving is canonical, so
//! save → load → save reproduces files byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooc::{CoocBuilder, NULL_TOKEN};
use crate::paired::PairedModel;
use crate::trainer::{source_vocab_for, TrainConfig};
use crate::unigram::UnigramModel;
use crate::vocab::Vocab;

pub const FILE_VERSION: u32 = 1;
pub const UNIGRAM_TYPE: &str = "unigram";
pub const PAIRED_TYPE: &str = "paired-unigram";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("could not access model file")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown model type {0:?}")]
    UnknownType(String),
    #[error("invalid model file: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PieceEntry {
    pub piece: String,
    pub logprob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnigramFile {
    version: u32,
    #[serde(rename = "type")]
    kind: String,
    pieces: Vec<PieceEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairedFile {
    version: u32,
    #[serde(rename = "type")]
    kind: String,
    config: TrainConfig,
    source_vocab: Vec<String>,
    source_pieces: Vec<PieceEntry>,
    target_vocab: Vec<String>,
    counts: Vec<(u32, u32, f64)>,
}

#[derive(Debug, Deserialize)]
struct Header {
    version: u32,
    #[serde(rename = "type")]
    kind: String,
}

/// A loaded model of either kind.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // loaded once per run; boxing buys nothing
pub enum ModelFile {
    Unigram(UnigramModel),
    Paired(PairedModel),
}

impl ModelFile {
    pub fn type_name(&self) -> &'static str {
        match self {
            ModelFile::Unigram(_) => UNIGRAM_TYPE,
            ModelFile::Paired(_) => PAIRED_TYPE,
        }
    }
}

fn unigram_to_file(model: &UnigramModel) -> UnigramFile {
    UnigramFile {
        version: FILE_VERSION,
        kind: UNIGRAM_TYPE.to_string(),
        pieces: model
            .pieces()
            .iter()
            .map(|(piece, logprob)| PieceEntry {
                piece: piece.clone(),
                logprob: *logprob,
            })
            .collect(),
    }
}

fn paired_to_file(model: &PairedModel) -> PairedFile {
    PairedFile {
        version: FILE_VERSION,
        kind: PAIRED_TYPE.to_string(),
        config: model.config().clone(),
        source_vocab: model.table().src_vocab().items().to_vec(),
        source_pieces: unigram_to_file(model.src_model()).pieces,
        target_vocab: model.table().tgt_vocab().items().to_vec(),
        counts: model.table().cells().collect(),
    }
}

/// Serialize a model to its canonical JSON document (newline-terminated).
pub fn model_to_json(model: &ModelFile) -> Result<String, ModelIoError> {
    let mut json = match model {
        ModelFile::Unigram(m) => serde_json::to_string(&unigram_to_file(m))?,
        ModelFile::Paired(m) => serde_json::to_string(&paired_to_file(m))?,
    };
    json.push('\n');
    Ok(json)
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<(), ModelIoError> {
    let json = model_to_json(model)?;
    let mut file = fs::File::create(path)?;
    file.write_all(json.as_bytes())?;
    Ok(())
}

fn check_header(header: &Header, expected_kind: &str) -> Result<(), ModelIoError> {
    if header.version != FILE_VERSION {
        return Err(ModelIoError::UnsupportedVersion(header.version));
    }
    if header.kind != expected_kind {
        return Err(ModelIoError::UnknownType(header.kind.clone()));
    }
    Ok(())
}

fn unique_vocab(items: &[String], side: &str) -> Result<Vocab, ModelIoError> {
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(ModelIoError::Invalid(format!(
                "duplicate {side} vocabulary entry {item:?}"
            )));
        }
    }
    Ok(Vocab::from_items(items.iter().map(String::as_str)))
}

fn unigram_from_file(file: UnigramFile) -> Result<UnigramModel, ModelIoError> {
    check_header(
        &Header {
            version: file.version,
            kind: file.kind.clone(),
        },
        UNIGRAM_TYPE,
    )?;
    for entry in &file.pieces {
        if !entry.logprob.is_finite() {
            return Err(ModelIoError::Invalid(format!(
                "piece {:?} has a non-finite logprob",
                entry.piece
            )));
        }
    }
    UnigramModel::from_pieces(
        file.pieces
            .into_iter()
            .map(|e| (e.piece, e.logprob))
            .collect(),
    )
    .map_err(|e| ModelIoError::Invalid(e.to_string()))
}

fn paired_from_file(file: PairedFile) -> Result<PairedModel, ModelIoError> {
    check_header(
        &Header {
            version: file.version,
            kind: file.kind.clone(),
        },
        PAIRED_TYPE,
    )?;
    if file.source_vocab.first().map(String::as_str) != Some(NULL_TOKEN) {
        return Err(ModelIoError::Invalid(format!(
            "source vocabulary must start with {NULL_TOKEN:?}"
        )));
    }
    let src_model = UnigramModel::from_pieces(
        file.source_pieces
            .into_iter()
            .map(|e| (e.piece, e.logprob))
            .collect(),
    )
    .map_err(|e| ModelIoError::Invalid(format!("source pieces: {e}")))?;
    let src_vocab = unique_vocab(&file.source_vocab, "source")?;
    if source_vocab_for(&src_model).items() != src_vocab.items() {
        return Err(ModelIoError::Invalid(
            "source vocabulary does not match the source pieces".to_string(),
        ));
    }
    let tgt_vocab = unique_vocab(&file.target_vocab, "target")?;
    let mut builder = CoocBuilder::new(tgt_vocab, src_vocab);
    let mut last: Option<(u32, u32)> = None;
    for &(t, s, c) in &file.counts {
        if t as usize >= file.target_vocab.len() || s as usize >= file.source_vocab.len() {
            return Err(ModelIoError::Invalid(format!(
                "count cell ({t},{s}) is out of vocabulary range"
            )));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(ModelIoError::Invalid(format!(
                "count cell ({t},{s}) has invalid value {c}"
            )));
        }
        if last == Some((t, s)) {
            return Err(ModelIoError::Invalid(format!(
                "duplicate count cell ({t},{s})"
            )));
        }
        last = Some((t, s));
        builder.add(t, s, c);
    }
    Ok(PairedModel::new(src_model, builder.freeze(), file.config))
}

/// Load a model file of either kind, validating structure and ranges.
pub fn load_model(path: &Path) -> Result<ModelFile, ModelIoError> {
    let text = fs::read_to_string(path)?;
    let header: Header = serde_json::from_str(&text)?;
    if header.version != FILE_VERSION {
        return Err(ModelIoError::UnsupportedVersion(header.version));
    }
    match header.kind.as_str() {
        UNIGRAM_TYPE => Ok(ModelFile::Unigram(unigram_from_file(
            serde_json::from_str(&text)?,
        )?)),
        PAIRED_TYPE => Ok(ModelFile::Paired(paired_from_file(serde_json::from_str(
            &text,
        )?)?)),
        other => Err(ModelIoError::UnknownType(other.to_string())),
    }
}
