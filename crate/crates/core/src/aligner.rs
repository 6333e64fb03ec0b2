//! IBM Model 1 word aligner with a distinguished NULL source word, plus
//! Pharaoh-format alignment I/O.
//!
//! Training runs plain EM over word-level sentence pairs; decoding picks,
//! per target word, the source word with the highest translation
//! probability. Links to NULL are omitted from alignments, and word-pair
//! extraction re-introduces NULL for unlinked target words.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::cooc::NULL_TOKEN;
use crate::vocab::Vocab;

#[derive(Debug, Error, PartialEq)]
pub enum PharaohError {
    #[error("malformed alignment link {token:?} (expected \"src-tgt\" with 0-based indices)")]
    Malformed { token: String },
}

/// Word-level sentence pair: (source words, target words).
pub type WordPair = (Vec<String>, Vec<String>);

/// Translation probabilities t(target word | source word); source id 0 is
/// the NULL word.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    rows: Vec<HashMap<u32, f64>>,
}

impl TranslationTable {
    pub fn src_vocab(&self) -> &Vocab {
        &self.src_vocab
    }

    pub fn tgt_vocab(&self) -> &Vocab {
        &self.tgt_vocab
    }

    pub fn prob(&self, tgt: &str, src: &str) -> f64 {
        match (self.tgt_vocab.id(tgt), self.src_vocab.id(src)) {
            (Some(t), Some(s)) => self.prob_ids(t, s),
            _ => 0.0,
        }
    }

    fn prob_ids(&self, t: u32, s: u32) -> f64 {
        self.rows[s as usize].get(&t).copied().unwrap_or(0.0)
    }

    /// Σ_t t(t|s) per source word; 1 for every trained row.
    pub fn row_sum(&self, src: &str) -> f64 {
        match self.src_vocab.id(src) {
            Some(s) => self.rows[s as usize].values().sum(),
            None => 0.0,
        }
    }
}

struct IdPairs {
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    /// Source ids exclude NULL; the E-step adds it.
    sentences: Vec<(Vec<u32>, Vec<u32>)>,
}

fn intern_pairs(pairs: &[WordPair]) -> IdPairs {
    let mut src_vocab = Vocab::new();
    src_vocab.intern(NULL_TOKEN);
    let mut tgt_vocab = Vocab::new();
    let sentences = pairs
        .iter()
        .map(|(src, tgt)| {
            (
                src.iter().map(|w| src_vocab.intern(w)).collect(),
                tgt.iter().map(|w| tgt_vocab.intern(w)).collect(),
            )
        })
        .collect();
    IdPairs {
        src_vocab,
        tgt_vocab,
        sentences,
    }
}

/// Train Model 1 by EM. Probabilities start uniform over each source
/// word's co-occurring target words; every target position also considers
/// the NULL source word.
pub fn train_ibm1(pairs: &[WordPair], n_iterations: usize) -> TranslationTable {
    let ids = intern_pairs(pairs);
    let n_src = ids.src_vocab.len();

    let mut support: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_src];
    for (src, tgt) in &ids.sentences {
        for &t in tgt {
            support[0].insert(t); // NULL
            for &s in src {
                support[s as usize].insert(t);
            }
        }
    }
    let mut rows: Vec<HashMap<u32, f64>> = support
        .iter()
        .map(|ts| {
            let p = 1.0 / ts.len().max(1) as f64;
            ts.iter().map(|&t| (t, p)).collect()
        })
        .collect();

    for _ in 0..n_iterations {
        // expectation: fractional counts, accumulated deterministically by
        // merging fixed-order chunks
        let chunks: Vec<HashMap<(u32, u32), f64>> = ids
            .sentences
            .par_chunks(512)
            .map(|chunk| {
                let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
                for (src, tgt) in chunk {
                    for &t in tgt {
                        let mut denom = rows[0].get(&t).copied().unwrap_or(0.0);
                        for &s in src {
                            denom += rows[s as usize].get(&t).copied().unwrap_or(0.0);
                        }
                        if denom == 0.0 {
                            continue;
                        }
                        let null_p = rows[0].get(&t).copied().unwrap_or(0.0);
                        if null_p > 0.0 {
                            *counts.entry((0, t)).or_insert(0.0) += null_p / denom;
                        }
                        for &s in src {
                            let p = rows[s as usize].get(&t).copied().unwrap_or(0.0);
                            if p > 0.0 {
                                *counts.entry((s, t)).or_insert(0.0) += p / denom;
                            }
                        }
                    }
                }
                counts
            })
            .collect();
        let mut count_rows: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n_src];
        for chunk in chunks {
            for ((s, t), v) in chunk {
                *count_rows[s as usize].entry(t).or_insert(0.0) += v;
            }
        }
        // maximization: renormalize each source row
        for (row, counts) in rows.iter_mut().zip(&count_rows) {
            let total: f64 = counts.values().sum();
            if total > 0.0 {
                *row = counts.iter().map(|(&t, &v)| (t, v / total)).collect();
            }
        }
    }

    TranslationTable {
        src_vocab: ids.src_vocab,
        tgt_vocab: ids.tgt_vocab,
        rows,
    }
}

/// Corpus log-likelihood under the table (Model 1 with uniform alignment
/// prior, NULL included).
pub fn log_likelihood(table: &TranslationTable, pairs: &[WordPair]) -> f64 {
    let mut ll = 0.0;
    for (src, tgt) in pairs {
        let len_term = ((src.len() + 1) as f64).ln();
        for t in tgt {
            let mut sum = table.prob(t, NULL_TOKEN);
            for s in src {
                sum += table.prob(t, s);
            }
            ll += sum.ln() - len_term;
        }
    }
    ll
}

/// Greedy alignment: each target word links to its most probable source
/// word. Ties keep the lowest source index; NULL (checked first) produces
/// no link, as do target words with all-zero probabilities.
pub fn align_sentence(
    table: &TranslationTable,
    src_words: &[String],
    tgt_words: &[String],
) -> Vec<(u32, u32)> {
    let mut links = Vec::new();
    for (j, t) in tgt_words.iter().enumerate() {
        let mut best: Option<usize> = None;
        let mut best_p = table.prob(t, NULL_TOKEN);
        for (i, s) in src_words.iter().enumerate() {
            let p = table.prob(t, s);
            if p > best_p {
                best_p = p;
                best = Some(i);
            }
        }
        if let Some(i) = best {
            links.push((i as u32, j as u32));
        }
    }
    links
}

/// One (source word, target word) pair per link, ordered by target then
/// source index; unlinked target words pair with [`NULL_TOKEN`] once.
pub fn extract_word_pairs(
    links: &[(u32, u32)],
    src_words: &[String],
    tgt_words: &[String],
) -> Vec<(String, String)> {
    let mut by_target: Vec<Vec<u32>> = vec![Vec::new(); tgt_words.len()];
    for &(i, j) in links {
        by_target[j as usize].push(i);
    }
    let mut pairs = Vec::new();
    for (j, tgt) in tgt_words.iter().enumerate() {
        let srcs = &mut by_target[j];
        if srcs.is_empty() {
            pairs.push((NULL_TOKEN.to_string(), tgt.clone()));
        } else {
            srcs.sort_unstable();
            for &i in srcs.iter() {
                pairs.push((src_words[i as usize].clone(), tgt.clone()));
            }
        }
    }
    pairs
}

/// One Pharaoh line: links as `src-tgt` (0-based), sorted by (src, tgt).
pub fn format_pharaoh(links: &[(u32, u32)]) -> String {
    let mut sorted = links.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse one Pharaoh line; an empty line carries no links.
pub fn parse_pharaoh(line: &str) -> Result<Vec<(u32, u32)>, PharaohError> {
    line.split_whitespace()
        .map(|token| {
            token
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or_else(|| PharaohError::Malformed {
                    token: token.to_string(),
                })
        })
        .collect()
}
