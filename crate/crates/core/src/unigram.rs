//! Baseline unigram language-model tokenizer.
//!
//! Training seeds the vocabulary with frequent substrings of the corpus
//! words, re-estimates piece probabilities by EM on the segmentation
//! lattice, and prunes low-value pieces by their likelihood loss until the
//! target vocabulary size is reached. Single characters are never pruned;
//! characters outside the vocabulary tokenize to the reserved UNK id 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::Lattice;
use crate::textnorm::{pretokenize, NormalizedText};

/// Reserved id for the unknown-character token.
pub const UNK_ID: u32 = 0;

/// Log-probability penalty below the smallest piece score used for unknown
/// characters at tokenization time.
pub const UNK_LOG_PENALTY: f64 = 10.0;

/// Constant floor (log domain) that keeps every single character usable
/// during EM, so no training word ever becomes unsegmentable.
const EM_CHAR_FLOOR_LOG: f64 = -100.0;

#[derive(Debug, Error, PartialEq)]
pub enum UnigramError {
    #[error("training corpus contains no words")]
    EmptyCorpus,
    #[error("vocab_size {requested} cannot cover the {required} distinct characters")]
    VocabTooSmall { required: usize, requested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model must contain at least one piece")]
    EmptyModel,
}

#[derive(Debug, Clone)]
pub struct UnigramTrainConfig {
    /// Final vocabulary size, single characters included.
    pub vocab_size: usize,
    /// Longest candidate piece, in characters.
    pub max_piece_len: usize,
    /// Fraction of prunable pieces kept per pruning round.
    pub shrink_factor: f64,
    /// EM steps between pruning rounds.
    pub n_sub_iterations: usize,
    /// Seed vocabulary cap as a multiple of `vocab_size`.
    pub seed_size_factor: usize,
}

impl Default for UnigramTrainConfig {
    fn default() -> Self {
        UnigramTrainConfig {
            vocab_size: 8000,
            max_piece_len: 16,
            shrink_factor: 0.75,
            n_sub_iterations: 2,
            seed_size_factor: 20,
        }
    }
}

/// A trained unigram model: pieces with log probabilities, sorted by
/// descending log probability (ties lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    pieces: Vec<(String, f64)>,
    index: HashMap<String, u32>,
    max_piece_chars: usize,
    min_logprob: f64,
}

impl UnigramModel {
    pub fn from_pieces(mut pieces: Vec<(String, f64)>) -> Result<Self, UnigramError> {
        if pieces.is_empty() {
            return Err(UnigramError::EmptyModel);
        }
        pieces.sort_by(|(pa, la), (pb, lb)| {
            lb.partial_cmp(la)
                .expect("finite logprobs")
                .then_with(|| pa.cmp(pb))
        });
        let index = pieces
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (p.clone(), i as u32))
            .collect();
        let max_piece_chars = pieces
            .iter()
            .map(|(p, _)| p.chars().count())
            .max()
            .unwrap_or(1);
        let min_logprob = pieces
            .iter()
            .map(|&(_, l)| l)
            .fold(f64::INFINITY, f64::min);
        Ok(UnigramModel {
            pieces,
            index,
            max_piece_chars,
            min_logprob,
        })
    }

    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.index.contains_key(piece)
    }

    pub fn logprob(&self, piece: &str) -> Option<f64> {
        self.index.get(piece).map(|&i| self.pieces[i as usize].1)
    }

    /// Piece id; 0 is reserved for UNK, known pieces start at 1.
    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).map(|&i| i + 1)
    }

    pub fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }

    /// Log score granted to an unknown character.
    pub fn unk_log_score(&self) -> f64 {
        self.min_logprob - UNK_LOG_PENALTY
    }

    fn score_prob(&self, piece: &str) -> f64 {
        let lp = match self.logprob(piece) {
            Some(lp) => lp,
            None if is_single_char(piece) => self.unk_log_score(),
            None => return 0.0,
        };
        let p = lp.exp();
        // exp() underflows to zero somewhere below -745; characters must
        // keep a positive score so every word stays coverable
        if p == 0.0 && is_single_char(piece) {
            f64::MIN_POSITIVE
        } else {
            p
        }
    }

    /// Best segmentation of one word (leading marker included). Unknown
    /// characters come out as their own tokens (UNK).
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let lattice = Lattice::new(word, |p| self.score_prob(p), self.max_piece_chars);
        lattice
            .viterbi()
            .expect("unknown-character floor keeps every word coverable")
            .into_iter()
            .map(String::from)
            .collect()
    }

    /// Tokenize canonical text word by word; concatenating the output
    /// reproduces the text exactly.
    pub fn tokenize(&self, text: &NormalizedText) -> Vec<String> {
        let words = pretokenize(text);
        if words.is_empty() {
            if text.as_str().is_empty() {
                return Vec::new();
            }
            // blank sentence: tokenize the lone marker itself
            return self.tokenize_word(text.as_str());
        }
        words
            .iter()
            .flat_map(|w| self.tokenize_word(w))
            .collect()
    }

    /// Token ids for canonical text; unknown characters map to [`UNK_ID`].
    pub fn tokenize_ids(&self, text: &NormalizedText) -> Vec<u32> {
        self.tokenize(text)
            .iter()
            .map(|t| self.piece_id(t).unwrap_or(UNK_ID))
            .collect()
    }
}

fn is_single_char(piece: &str) -> bool {
    let mut it = piece.chars();
    it.next().is_some() && it.next().is_none()
}

/// Mutable model state during training.
struct TrainState {
    /// (piece, logprob, is_char); order fixed between steps.
    pieces: Vec<(String, f64, bool)>,
    index: HashMap<String, usize>,
    max_piece_chars: usize,
}

impl TrainState {
    fn new(pieces: Vec<(String, f64, bool)>, max_piece_chars: usize) -> Self {
        let index = pieces
            .iter()
            .enumerate()
            .map(|(i, (p, _, _))| (p.clone(), i))
            .collect();
        TrainState {
            pieces,
            index,
            max_piece_chars,
        }
    }

    fn multi_count(&self) -> usize {
        self.pieces.iter().filter(|(_, _, is_char)| !is_char).count()
    }

    fn score_prob(&self, piece: &str) -> f64 {
        match self.index.get(piece) {
            Some(&i) => {
                let (lp, is_char) = (self.pieces[i].1, self.pieces[i].2);
                // characters never drop out of the lattice entirely
                let lp = if is_char { lp.max(EM_CHAR_FLOOR_LOG) } else { lp };
                lp.exp()
            }
            None => 0.0,
        }
    }
}

/// One EM expectation pass: expected piece counts and the corpus
/// log-likelihood under the current state.
fn e_step(words: &[(String, f64)], state: &TrainState) -> (Vec<f64>, f64) {
    let chunks: Vec<(Vec<f64>, f64)> = words
        .par_chunks(256)
        .map(|chunk| {
            let mut expected = vec![0.0; state.pieces.len()];
            let mut loglik = 0.0;
            for (word, count) in chunk {
                let lattice =
                    Lattice::new(word, |p| state.score_prob(p), state.max_piece_chars);
                let m = lattice
                    .forward_backward()
                    .expect("character floor keeps words coverable");
                let log_z = m.log_total();
                loglik += count * log_z;
                let n = lattice.num_chars();
                for start in 0..n {
                    for end in start + 1..=(start + state.max_piece_chars).min(n) {
                        let ls = lattice.log_score(start, end);
                        if ls == f64::NEG_INFINITY {
                            continue;
                        }
                        let piece = lattice.piece(start, end);
                        let Some(&idx) = state.index.get(piece) else {
                            continue;
                        };
                        let post =
                            (ls + m.log_alpha[start] + m.log_beta[end] - log_z).exp();
                        expected[idx] += count * post;
                    }
                }
            }
            (expected, loglik)
        })
        .collect();
    // fixed chunk order keeps float accumulation deterministic
    let mut expected = vec![0.0; state.pieces.len()];
    let mut loglik = 0.0;
    for (part, ll) in chunks {
        for (e, p) in expected.iter_mut().zip(part) {
            *e += p;
        }
        loglik += ll;
    }
    (expected, loglik)
}

/// Maximization: piece probabilities proportional to expected counts.
fn m_step(state: &mut TrainState, expected: &[f64]) {
    let total: f64 = expected.iter().sum();
    for (piece, e) in state.pieces.iter_mut().zip(expected) {
        piece.1 = if *e > 0.0 && total > 0.0 {
            (e / total).ln()
        } else {
            f64::NEG_INFINITY
        };
    }
}

/// Drop the lowest-value multi-character pieces, ranked by the likelihood
/// lost if the piece had to be re-segmented with the rest of the
/// vocabulary. Single characters always survive.
fn prune(state: TrainState, expected: &[f64], budget: usize, shrink_factor: f64) -> TrainState {
    let pool: Vec<usize> = (0..state.pieces.len())
        .filter(|&i| !state.pieces[i].2)
        .collect();
    let mut keep_n = budget.max((shrink_factor * pool.len() as f64).ceil() as usize);
    if keep_n >= pool.len() && pool.len() > budget {
        // ceil stalls for pools of ≤3 pieces; force progress
        keep_n = budget.max(pool.len() - 1);
    }
    let mut ranked: Vec<(f64, usize)> = pool
        .iter()
        .map(|&i| {
            let (piece, logprob, _) = &state.pieces[i];
            if *logprob == f64::NEG_INFINITY {
                return (f64::NEG_INFINITY, i);
            }
            // best segmentation of the piece without using itself
            let lattice = Lattice::new(
                piece,
                |p| if p == piece { 0.0 } else { state.score_prob(p) },
                state.max_piece_chars,
            );
            let alt = lattice
                .viterbi_log_score()
                .expect("character floor keeps pieces coverable");
            (expected[i] * (logprob - alt), i)
        })
        .collect();
    ranked.sort_by(|(la, ia), (lb, ib)| {
        lb.partial_cmp(la)
            .expect("losses are never NaN")
            .then_with(|| state.pieces[*ia].0.cmp(&state.pieces[*ib].0))
    });
    let kept: BTreeSet<usize> = ranked.iter().take(keep_n).map(|&(_, i)| i).collect();
    let pieces: Vec<(String, f64, bool)> = state
        .pieces
        .iter()
        .enumerate()
        .filter(|(i, (_, _, is_char))| *is_char || kept.contains(i))
        .map(|(_, p)| p.clone())
        .collect();
    TrainState::new(pieces, state.max_piece_chars)
}

/// Words of the corpus with their frequencies, lexicographically sorted.
fn word_counts(corpus: &[NormalizedText]) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for line in corpus {
        for word in pretokenize(line) {
            *counts.entry(word).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Seed vocabulary: every character, plus the highest-scoring substrings
/// (frequency × length) up to the seed cap.
fn seed_pieces(
    words: &[(String, f64)],
    config: &UnigramTrainConfig,
) -> Result<Vec<(String, f64, bool)>, UnigramError> {
    let mut char_counts: BTreeMap<char, f64> = BTreeMap::new();
    let mut sub_counts: HashMap<String, f64> = HashMap::new();
    for (word, count) in words {
        let chars: Vec<char> = word.chars().collect();
        for &c in &chars {
            *char_counts.entry(c).or_insert(0.0) += count;
        }
        for start in 0..chars.len() {
            for len in 2..=config.max_piece_len.min(chars.len() - start) {
                let sub: String = chars[start..start + len].iter().collect();
                *sub_counts.entry(sub).or_insert(0.0) += count;
            }
        }
    }
    if config.vocab_size < char_counts.len() {
        return Err(UnigramError::VocabTooSmall {
            required: char_counts.len(),
            requested: config.vocab_size,
        });
    }
    let cap = (config.seed_size_factor * config.vocab_size).saturating_sub(char_counts.len());
    let mut multis: Vec<(String, f64)> = sub_counts
        .into_iter()
        .map(|(s, freq)| {
            let len = s.chars().count() as f64;
            (s, freq * len)
        })
        .collect();
    multis.sort_by(|(sa, fa), (sb, fb)| {
        fb.partial_cmp(fa)
            .expect("scores are finite")
            .then_with(|| sa.cmp(sb))
    });
    multis.truncate(cap);

    let mut seeds: Vec<(String, f64, bool)> = char_counts
        .into_iter()
        .map(|(c, freq)| (c.to_string(), freq, true))
        .collect();
    seeds.extend(multis.into_iter().map(|(s, score)| (s, score, false)));
    let total: f64 = seeds.iter().map(|(_, s, _)| s).sum();
    for seed in &mut seeds {
        seed.1 = (seed.1 / total).ln();
    }
    Ok(seeds)
}

/// Train a unigram model: seed, EM-re-estimate, prune until `vocab_size`.
pub fn train_unigram(
    corpus: &[NormalizedText],
    config: &UnigramTrainConfig,
) -> Result<UnigramModel, UnigramError> {
    if config.n_sub_iterations == 0 {
        return Err(UnigramError::InvalidConfig(
            "n_sub_iterations must be at least 1".into(),
        ));
    }
    if !(config.shrink_factor > 0.0 && config.shrink_factor < 1.0) {
        return Err(UnigramError::InvalidConfig(
            "shrink_factor must lie in (0, 1)".into(),
        ));
    }
    let words = word_counts(corpus);
    if words.is_empty() {
        return Err(UnigramError::EmptyCorpus);
    }
    let seeds = seed_pieces(&words, config)?;
    let n_chars = seeds.iter().filter(|(_, _, c)| *c).count();
    let budget = config.vocab_size - n_chars;
    let max_chars = config
        .max_piece_len
        .min(words.iter().map(|(w, _)| w.chars().count()).max().unwrap_or(1));
    let mut state = TrainState::new(seeds, max_chars.max(1));
    loop {
        let mut last_expected = Vec::new();
        for _ in 0..config.n_sub_iterations {
            let (expected, _loglik) = e_step(&words, &state);
            m_step(&mut state, &expected);
            last_expected = expected;
        }
        if state.multi_count() <= budget {
            break;
        }
        state = prune(state, &last_expected, budget, config.shrink_factor);
    }
    finalize(state)
}

/// Drop dead multi-char pieces, floor dead characters, renormalize, sort.
fn finalize(state: TrainState) -> Result<UnigramModel, UnigramError> {
    let min_live = state
        .pieces
        .iter()
        .map(|&(_, lp, _)| lp)
        .filter(|lp| lp.is_finite())
        .fold(f64::INFINITY, f64::min);
    let floor = if min_live.is_finite() {
        min_live - UNK_LOG_PENALTY
    } else {
        CHAR_FALLBACK_LOG
    };
    let mut pieces: Vec<(String, f64)> = state
        .pieces
        .into_iter()
        .filter_map(|(piece, lp, is_char)| {
            if lp.is_finite() {
                Some((piece, lp))
            } else if is_char {
                Some((piece, floor))
            } else {
                None
            }
        })
        .collect();
    let log_total = {
        let total: f64 = pieces.iter().map(|&(_, lp)| lp.exp()).sum();
        total.ln()
    };
    for p in &mut pieces {
        p.1 -= log_total;
    }
    UnigramModel::from_pieces(pieces)
}

/// Log probability used when a corpus somehow yields no live piece at all
/// (single-word corpora where everything collapses to characters).
const CHAR_FALLBACK_LOG: f64 = -20.0;
