//! Parallel corpus ingestion: paired line files or a single TSV.
//!
//! All text must be valid UTF-8; invalid bytes are hard errors reported
//! with a line number, never silently replaced. Windows line endings are
//! tolerated by stripping one trailing carriage return per line.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("could not read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8 (line {line})")]
    InvalidUtf8 { path: String, line: usize },
    #[error("line counts differ: {source_lines} source lines vs {target_lines} target lines")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("{path}:{line}: expected exactly one tab separator")]
    MalformedTsv { path: String, line: usize },
}

fn split_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    if lines.last().is_some_and(String::is_empty) {
        lines.pop();
    }
    lines
}

/// Read one sentence per line, strictly UTF-8.
pub fn load_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|err| {
        let upto = err.utf8_error().valid_up_to();
        CorpusError::InvalidUtf8 {
            path: display,
            line: 1 + err.as_bytes()[..upto].iter().filter(|&&b| b == b'\n').count(),
        }
    })?;
    Ok(split_lines(&text))
}

/// Read two parallel line files into (source, target) sentence pairs.
pub fn load_pair(
    source_path: &Path,
    target_path: &Path,
) -> Result<Vec<(String, String)>, CorpusError> {
    let source = load_lines(source_path)?;
    let target = load_lines(target_path)?;
    if source.len() != target.len() {
        return Err(CorpusError::LineCountMismatch {
            source_lines: source.len(),
            target_lines: target.len(),
        });
    }
    Ok(source.into_iter().zip(target).collect())
}

/// Read a `source<TAB>target` file. Every line must contain exactly one
/// tab; embedded tabs in either field are rejected.
pub fn load_tsv(path: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let display = path.display().to_string();
    load_lines(path)?
        .into_iter()
        .enumerate()
        .map(|(i, line)| {
            match line.split_once('\t') {
                Some((source, target)) if !target.contains('\t') => {
                    Ok((source.to_string(), target.to_string()))
                }
                _ => Err(CorpusError::MalformedTsv {
                    path: display.clone(),
                    line: i + 1,
                }),
            }
        })
        .collect()
}
