//! Intrinsic tokenization quality metrics and alignment quality rates.
//!
//! Ratios aggregate at corpus level (sum over sum) rather than averaging
//! per-sentence ratios. Reports serialize to canonical JSON: keys sorted,
//! values fixed to six decimals, absent metrics omitted — byte-stable
//! across runs for identical inputs.

use std::collections::HashSet;

use thiserror::Error;

use crate::textnorm::MARKER;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metric inputs must be parallel (got {left} and {right} entries)")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot compute {metric}: the denominator is zero")]
    ZeroDenominator { metric: &'static str },
    #[error("cannot compute token statistics over an empty corpus")]
    EmptyCorpus,
}

/// A metric value together with the number of items it aggregates
/// (sentence pairs, words, tokens, or vocabulary entries as appropriate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub count: u64,
}

impl MetricValue {
    fn new(value: f64, count: usize) -> Self {
        MetricValue {
            value,
            count: count as u64,
        }
    }
}

/// Every metric is optional: a report carries only what was computable
/// from the inputs at hand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub parity: Option<MetricValue>,
    pub fertility: Option<MetricValue>,
    pub single_char: Option<MetricValue>,
    pub vocab_usage: Option<MetricValue>,
    pub vocab_overlap: Option<MetricValue>,
    pub length_ratio: Option<MetricValue>,
    pub renyi_ratio: Option<MetricValue>,
    pub begin_of_word: Option<MetricValue>,
    pub one_to_one: Option<MetricValue>,
    pub unaligned: Option<MetricValue>,
}

impl MetricsReport {
    /// Canonical JSON: lexicographically sorted keys, six-decimal values,
    /// `None` fields omitted.
    pub fn to_canonical_json(&self) -> String {
        let fields: [(&str, &Option<MetricValue>); 10] = [
            ("begin_of_word", &self.begin_of_word),
            ("fertility", &self.fertility),
            ("length_ratio", &self.length_ratio),
            ("one_to_one", &self.one_to_one),
            ("parity", &self.parity),
            ("renyi_ratio", &self.renyi_ratio),
            ("single_char", &self.single_char),
            ("unaligned", &self.unaligned),
            ("vocab_overlap", &self.vocab_overlap),
            ("vocab_usage", &self.vocab_usage),
        ];
        let body: Vec<String> = fields
            .iter()
            .filter_map(|(key, slot)| {
                slot.as_ref().map(|m| {
                    format!(
                        "\"{key}\":{{\"count\":{},\"value\":{:.6}}}",
                        m.count, m.value
                    )
                })
            })
            .collect();
        format!("{{{}}}", body.join(","))
    }
}

/// Corpus-level target-to-source token-count ratio over parallel
/// sentences. Counts sentence pairs.
pub fn parity(
    tgt_token_counts: &[usize],
    src_token_counts: &[usize],
) -> Result<MetricValue, MetricsError> {
    if tgt_token_counts.len() != src_token_counts.len() {
        return Err(MetricsError::LengthMismatch {
            left: tgt_token_counts.len(),
            right: src_token_counts.len(),
        });
    }
    let tgt: usize = tgt_token_counts.iter().sum();
    let src: usize = src_token_counts.iter().sum();
    if src == 0 {
        return Err(MetricsError::ZeroDenominator { metric: "parity" });
    }
    Ok(MetricValue::new(
        tgt as f64 / src as f64,
        tgt_token_counts.len(),
    ))
}

/// Average tokens per word over the corpus. Counts words.
pub fn fertility(
    token_counts: &[usize],
    word_counts: &[usize],
) -> Result<MetricValue, MetricsError> {
    if token_counts.len() != word_counts.len() {
        return Err(MetricsError::LengthMismatch {
            left: token_counts.len(),
            right: word_counts.len(),
        });
    }
    let tokens: usize = token_counts.iter().sum();
    let words: usize = word_counts.iter().sum();
    if words == 0 {
        return Err(MetricsError::ZeroDenominator { metric: "fertility" });
    }
    Ok(MetricValue::new(tokens as f64 / words as f64, words))
}

/// Source-side alignment quality over token-level links: the fraction of
/// source tokens linked to exactly one target token that is itself linked
/// only back to them, and the fraction of source tokens with no link at
/// all. Counts source tokens.
pub fn alignment_metrics(
    links: &[Vec<(u32, u32)>],
    src_lengths: &[usize],
) -> Result<(MetricValue, MetricValue), MetricsError> {
    if links.len() != src_lengths.len() {
        return Err(MetricsError::LengthMismatch {
            left: links.len(),
            right: src_lengths.len(),
        });
    }
    let total: usize = src_lengths.iter().sum();
    if total == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "alignment rates",
        });
    }
    let mut one_to_one = 0usize;
    let mut unaligned = 0usize;
    for (pair_links, &src_len) in links.iter().zip(src_lengths) {
        let mut src_degree = vec![0usize; src_len];
        let mut tgt_degree: Vec<usize> = Vec::new();
        for &(i, j) in pair_links {
            src_degree[i as usize] += 1;
            let j = j as usize;
            if j >= tgt_degree.len() {
                tgt_degree.resize(j + 1, 0);
            }
            tgt_degree[j] += 1;
        }
        for (i, &degree) in src_degree.iter().enumerate() {
            match degree {
                0 => unaligned += 1,
                1 => {
                    let &(_, j) = pair_links
                        .iter()
                        .find(|&&(s, _)| s as usize == i)
                        .expect("degree-one source has a link");
                    if tgt_degree[j as usize] == 1 {
                        one_to_one += 1;
                    }
                }
                _ => {}
            }
        }
    }
    Ok((
        MetricValue::new(one_to_one as f64 / total as f64, total),
        MetricValue::new(unaligned as f64 / total as f64, total),
    ))
}

fn is_single_char_token(token: &str) -> bool {
    let stripped = token.strip_prefix(MARKER).unwrap_or(token);
    stripped.chars().count() <= 1
}

/// Fraction of corpus tokens that carry at most one character beyond the
/// word-boundary marker. Counts tokens.
pub fn single_char_ratio(tokenized: &[Vec<String>]) -> Result<MetricValue, MetricsError> {
    let total: usize = tokenized.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    let single = tokenized
        .iter()
        .flatten()
        .filter(|t| is_single_char_token(t))
        .count();
    Ok(MetricValue::new(single as f64 / total as f64, total))
}

/// Fraction of the vocabulary observed in the tokenized corpus.
/// Counts vocabulary entries.
pub fn vocab_usage(
    tokenized: &[Vec<String>],
    vocab: &[String],
) -> Result<MetricValue, MetricsError> {
    if vocab.is_empty() {
        return Err(MetricsError::ZeroDenominator {
            metric: "vocab_usage",
        });
    }
    let entries: HashSet<&str> = vocab.iter().map(String::as_str).collect();
    let used: HashSet<&str> = tokenized
        .iter()
        .flatten()
        .map(String::as_str)
        .filter(|t| entries.contains(t))
        .collect();
    Ok(MetricValue::new(
        used.len() as f64 / vocab.len() as f64,
        vocab.len(),
    ))
}

/// |V_ours ∩ V_other| / |V_ours|. Counts our vocabulary entries.
pub fn vocab_overlap(ours: &[String], other: &[String]) -> Result<MetricValue, MetricsError> {
    if ours.is_empty() {
        return Err(MetricsError::ZeroDenominator {
            metric: "vocab_overlap",
        });
    }
    let theirs: HashSet<&str> = other.iter().map(String::as_str).collect();
    let shared = ours
        .iter()
        .map(String::as_str)
        .collect::<HashSet<_>>()
        .intersection(&theirs)
        .count();
    Ok(MetricValue::new(
        shared as f64 / ours.len() as f64,
        ours.len(),
    ))
}

/// Our total token count over the reference tokenizer's total on the same
/// text. Counts sentences.
pub fn length_ratio(
    ours: &[Vec<String>],
    reference: &[Vec<String>],
) -> Result<MetricValue, MetricsError> {
    if ours.len() != reference.len() {
        return Err(MetricsError::LengthMismatch {
            left: ours.len(),
            right: reference.len(),
        });
    }
    let our_total: usize = ours.iter().map(Vec::len).sum();
    let ref_total: usize = reference.iter().map(Vec::len).sum();
    if ref_total == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "length_ratio",
        });
    }
    Ok(MetricValue::new(
        our_total as f64 / ref_total as f64,
        ours.len(),
    ))
}

/// Fraction of the vocabulary whose entries start with the word-boundary
/// marker. Counts vocabulary entries.
pub fn begin_of_word_ratio(vocab: &[String]) -> Result<MetricValue, MetricsError> {
    if vocab.is_empty() {
        return Err(MetricsError::ZeroDenominator {
            metric: "begin_of_word",
        });
    }
    let starters = vocab.iter().filter(|p| p.starts_with(MARKER)).count();
    Ok(MetricValue::new(
        starters as f64 / vocab.len() as f64,
        vocab.len(),
    ))
}

/// Order-α Rényi entropy in nats; α = 1 is the Shannon limit. Zero
/// probabilities contribute nothing.
pub fn renyi_entropy(probs: &[f64], alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        return -probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();
    }
    let power_sum: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p.powf(alpha))
        .sum();
    power_sum.ln() / (1.0 - alpha)
}

/// Rényi entropy of the corpus token frequency distribution divided by
/// the log vocabulary size.
pub fn renyi_efficiency(
    tokenized: &[Vec<String>],
    vocab_size: usize,
    alpha: f64,
) -> Result<f64, MetricsError> {
    let total: usize = tokenized.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    if vocab_size < 2 {
        return Err(MetricsError::ZeroDenominator {
            metric: "renyi efficiency",
        });
    }
    // sorted keys give a fixed summation order, so equal inputs produce
    // bit-identical entropies (and self-comparison ratios of exactly 1.0)
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for token in tokenized.iter().flatten() {
        *counts.entry(token).or_insert(0) += 1;
    }
    let probs: Vec<f64> = counts
        .values()
        .map(|&c| c as f64 / total as f64)
        .collect();
    Ok(renyi_entropy(&probs, alpha) / (vocab_size as f64).ln())
}

/// The vocabulary- and distribution-level metrics: single-character rate,
/// vocabulary usage, and marker-initial rate always; overlap, length
/// ratio, and Rényi-efficiency ratio when a reference tokenization of the
/// same text (and its vocabulary) is supplied.
pub fn aux_metrics(
    tokenized: &[Vec<String>],
    vocab: &[String],
    reference: Option<(&[Vec<String>], &[String])>,
    alpha: f64,
) -> Result<MetricsReport, MetricsError> {
    let mut report = MetricsReport {
        single_char: Some(single_char_ratio(tokenized)?),
        vocab_usage: Some(vocab_usage(tokenized, vocab)?),
        begin_of_word: Some(begin_of_word_ratio(vocab)?),
        ..MetricsReport::default()
    };
    if let Some((ref_tokenized, ref_vocab)) = reference {
        report.vocab_overlap = Some(vocab_overlap(vocab, ref_vocab)?);
        report.length_ratio = Some(length_ratio(tokenized, ref_tokenized)?);
        let ours = renyi_efficiency(tokenized, vocab.len(), alpha)?;
        let theirs = renyi_efficiency(ref_tokenized, ref_vocab.len(), alpha)?;
        if theirs == 0.0 {
            return Err(MetricsError::ZeroDenominator {
                metric: "renyi_ratio",
            });
        }
        let total: usize = tokenized.iter().map(Vec::len).sum();
        report.renyi_ratio = Some(MetricValue::new(ours / theirs, total));
    }
    Ok(report)
}
