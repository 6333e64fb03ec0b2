//! Training loop for the paired co-occurrence model.
//!
//! The table is seeded with every target span co-occurring with every
//! source token of its example, re-estimated by expected counts (or hard
//! Viterbi counts), and pruned by mutual information with the source
//! vocabulary until the target vocabulary reaches its budget. Single
//! characters are never pruned.

use std::collections::{BTreeMap, BTreeSet};
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooc::{char_floor, CondScorer, CoocBuilder, CoocTable, NULL_TOKEN};
use crate::lattice::Lattice;
use crate::paired::PairedModel;
use crate::unigram::UnigramModel;
use crate::vocab::Vocab;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("no word-pair examples to train on")]
    EmptyCorpus,
    #[error("vocab_size {requested} cannot cover the {required} distinct target characters")]
    VocabTooSmall { required: usize, requested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Count re-estimation style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Fractional counts from forward–backward span posteriors.
    Expected,
    /// Integer counts from the single best segmentation.
    HardEm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Final target vocabulary size, single characters included.
    pub vocab_size: usize,
    /// Longest target token, in characters.
    pub max_piece_len: usize,
    /// Minimum number of count steps.
    pub n_iterations: usize,
    /// Count steps between pruning rounds.
    pub n_subiterations: usize,
    /// Fraction of prunable tokens kept per pruning round.
    pub shrink_factor: f64,
    pub variant: Variant,
    /// Divide span contributions by the sentence marginal (off by default:
    /// counts are the literal span-probability products).
    pub normalize_posterior: bool,
    /// Renormalize conditional probabilities over vocabulary tokens that
    /// are substrings of the current target instead of the full vocabulary.
    pub restrict_cond_denominator: bool,
    /// Recorded for reproducibility audits. Count merging always follows a
    /// fixed chunk order, so results are bit-identical either way.
    pub deterministic_reduction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            vocab_size: 8000,
            max_piece_len: 16,
            n_iterations: 8,
            n_subiterations: 2,
            shrink_factor: 0.75,
            variant: Variant::Expected,
            normalize_posterior: false,
            restrict_cond_denominator: false,
            deterministic_reduction: false,
        }
    }
}

/// One aligned word pair, ready for counting: the target word (marker
/// included) and the bag of source-token ids it is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct WordPairExample {
    pub source: Vec<u32>,
    pub target: String,
}

/// Reported after every count step.
#[derive(Debug, Clone)]
pub struct TrainProgress {
    pub iteration: usize,
    pub vocab_size: usize,
    pub log_likelihood: f64,
}

/// Source-side vocabulary of the table: NULL first, then the source
/// tokenizer's pieces in model order.
pub fn source_vocab_for(src_model: &UnigramModel) -> Vocab {
    let mut v = Vocab::new();
    v.intern(NULL_TOKEN);
    for (piece, _) in src_model.pieces() {
        if piece != NULL_TOKEN {
            v.intern(piece);
        }
    }
    v
}

/// Turn aligned word pairs into examples: the source word is tokenized by
/// the source model and mapped into `src_vocab`; NULL-aligned words (and
/// words whose every token is unknown) condition on the NULL id alone.
pub fn build_examples(
    word_pairs: &[(String, String)],
    src_model: &UnigramModel,
    src_vocab: &Vocab,
) -> Vec<WordPairExample> {
    let null_id = src_vocab.id(NULL_TOKEN).expect("NULL is always present");
    word_pairs
        .iter()
        .map(|(src_word, tgt_word)| {
            let source = if src_word == NULL_TOKEN {
                vec![null_id]
            } else {
                let ids: Vec<u32> = src_model
                    .tokenize_word(src_word)
                    .iter()
                    .filter_map(|p| src_vocab.id(p))
                    .collect();
                if ids.is_empty() {
                    vec![null_id]
                } else {
                    ids
                }
            };
            WordPairExample {
                source,
                target: tgt_word.clone(),
            }
        })
        .collect()
}

fn is_single_char(piece: &str) -> bool {
    let mut it = piece.chars();
    it.next().is_some() && it.next().is_none()
}

/// Seed table: every span of every example target (up to `max_piece_len`
/// characters) counts once per occurrence with every source token of its
/// bag, duplicates included.
pub fn init_table(
    examples: &[WordPairExample],
    src_vocab: Vocab,
    max_piece_len: usize,
) -> CoocTable {
    let mut spans: BTreeSet<String> = BTreeSet::new();
    for ex in examples {
        let chars: Vec<char> = ex.target.chars().collect();
        for start in 0..chars.len() {
            for len in 1..=max_piece_len.min(chars.len() - start) {
                spans.insert(chars[start..start + len].iter().collect());
            }
        }
    }
    let tgt_vocab = Vocab::from_items(spans);
    let mut builder = CoocBuilder::new(tgt_vocab, src_vocab);
    for ex in examples {
        let chars: Vec<char> = ex.target.chars().collect();
        for start in 0..chars.len() {
            for len in 1..=max_piece_len.min(chars.len() - start) {
                let span: String = chars[start..start + len].iter().collect();
                let t_id = builder.tgt_vocab().id(&span).expect("span interned above");
                for &s in &ex.source {
                    builder.add(t_id, s, 1.0);
                }
            }
        }
    }
    builder.freeze()
}

enum StepKind {
    Expected,
    Hard,
}

/// Per-chunk partial result: cell increments keyed by (target id, source id),
/// plus the chunk's log-likelihood contribution.
type ChunkCounts = (HashMap<(u32, u32), f64>, f64);

/// Deduplicate examples into (target, sorted bag, weight) groups in a
/// deterministic order.
fn grouped(examples: &[WordPairExample]) -> Vec<(&str, Vec<u32>, f64)> {
    let mut map: BTreeMap<(&str, Vec<u32>), f64> = BTreeMap::new();
    for ex in examples {
        let mut bag = ex.source.clone();
        bag.sort_unstable();
        *map.entry((ex.target.as_str(), bag)).or_insert(0.0) += 1.0;
    }
    map.into_iter().map(|((t, bag), w)| (t, bag, w)).collect()
}

fn count_step(
    table: &CoocTable,
    examples: &[WordPairExample],
    config: &TrainConfig,
    kind: StepKind,
) -> (CoocTable, f64) {
    let groups = grouped(examples);
    let chunks: Vec<ChunkCounts> = groups
        .par_chunks(64)
        .map(|chunk| {
            let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
            let mut loglik = 0.0;
            for (target, bag, weight) in chunk {
                if bag.is_empty() {
                    continue;
                }
                let restrict = config.restrict_cond_denominator.then_some(*target);
                let scorer = CondScorer::new(table, bag, restrict, char_floor());
                let lattice =
                    Lattice::new(target, |p| scorer.score(p), config.max_piece_len);
                let share = weight / bag.len() as f64;
                match kind {
                    StepKind::Expected => {
                        let m = lattice
                            .forward_backward()
                            .expect("character floor keeps targets coverable");
                        let log_z = m.log_total();
                        loglik += weight * log_z;
                        let n = lattice.num_chars();
                        for start in 0..n {
                            for end in
                                start + 1..=(start + config.max_piece_len).min(n)
                            {
                                let ls = lattice.log_score(start, end);
                                if ls == f64::NEG_INFINITY {
                                    continue;
                                }
                                let Some(t_id) = table.tgt_id(lattice.piece(start, end))
                                else {
                                    continue;
                                };
                                let mut log_c =
                                    ls + m.log_alpha[start] + m.log_beta[end];
                                if config.normalize_posterior {
                                    log_c -= log_z;
                                }
                                let contribution = log_c.exp() * share;
                                for &s in bag.iter() {
                                    *acc.entry((t_id, s)).or_insert(0.0) += contribution;
                                }
                            }
                        }
                    }
                    StepKind::Hard => {
                        let tokens = lattice
                            .viterbi()
                            .expect("character floor keeps targets coverable");
                        let mut pos = 0usize;
                        for token in tokens {
                            let len = token.chars().count();
                            loglik += weight * lattice.log_score(pos, pos + len);
                            pos += len;
                            let Some(t_id) = table.tgt_id(token) else {
                                continue;
                            };
                            for &s in bag.iter() {
                                *acc.entry((t_id, s)).or_insert(0.0) += share;
                            }
                        }
                    }
                }
            }
            (acc, loglik)
        })
        .collect();
    // merging fixed-order chunks keeps float accumulation deterministic
    let mut builder = CoocBuilder::new(table.tgt_vocab().clone(), table.src_vocab().clone());
    let mut loglik = 0.0;
    for (acc, ll) in chunks {
        for ((t, s), v) in acc {
            builder.add(t, s, v);
        }
        loglik += ll;
    }
    (builder.freeze(), loglik)
}

/// Re-estimate counts from forward–backward span posteriors: each span of
/// each example contributes p(span|S)·α·β / |S| to every source token of
/// the bag. Returns the new table and the corpus log marginal likelihood.
pub fn expected_count_step(
    table: &CoocTable,
    examples: &[WordPairExample],
    config: &TrainConfig,
) -> (CoocTable, f64) {
    count_step(table, examples, config, StepKind::Expected)
}

/// Re-estimate counts from the single best segmentation: each emitted
/// token contributes 1/|S| per source token. Returns the new table and the
/// total best-path log score.
pub fn hard_em_step(
    table: &CoocTable,
    examples: &[WordPairExample],
    config: &TrainConfig,
) -> (CoocTable, f64) {
    count_step(table, examples, config, StepKind::Hard)
}

/// Drop the weakest multi-character tokens: all-zero rows always go;
/// the rest are ranked by mutual information with the source vocabulary
/// and the top `max(target_size, ceil(shrink_factor · pool))` survive.
/// Single characters are kept unconditionally.
pub fn prune_vocab(table: &CoocTable, target_size: usize, shrink_factor: f64) -> CoocTable {
    let pool: Vec<u32> = table
        .tgt_vocab()
        .iter()
        .filter(|(_, piece)| !is_single_char(piece))
        .map(|(id, _)| id)
        .collect();
    let has_zero_rows = pool.iter().any(|&id| table.row_sum(id) == 0.0);
    if pool.len() <= target_size && !has_zero_rows {
        return table.clone();
    }
    let mut live: Vec<(f64, u32)> = pool
        .iter()
        .filter(|&&id| table.row_sum(id) > 0.0)
        .map(|&id| (table.mutual_information(id), id))
        .collect();
    live.sort_by(|(ma, ia), (mb, ib)| {
        mb.partial_cmp(ma)
            .expect("mutual information is finite")
            .then_with(|| table.tgt_vocab().get(*ia).cmp(table.tgt_vocab().get(*ib)))
    });
    let mut keep_n = target_size.max((shrink_factor * pool.len() as f64).ceil() as usize);
    if keep_n >= pool.len() && pool.len() > target_size {
        // ceil stalls for pools of ≤3 tokens; force progress
        keep_n = target_size.max(pool.len() - 1);
    }
    let mut retained: BTreeSet<&str> = table
        .tgt_vocab()
        .iter()
        .filter(|(_, piece)| is_single_char(piece))
        .map(|(_, piece)| piece)
        .collect();
    retained.extend(
        live.iter()
            .take(keep_n)
            .map(|&(_, id)| table.tgt_vocab().get(id)),
    );
    let new_vocab = Vocab::from_items(retained.iter().copied());
    let mut builder = CoocBuilder::new(new_vocab, table.src_vocab().clone());
    for piece in retained {
        let old_id = table.tgt_id(piece).expect("retained pieces come from the table");
        let new_id = builder.tgt_vocab().id(piece).expect("interned above");
        for &(s, v) in table.row(old_id) {
            builder.add(new_id, s, v);
        }
    }
    builder.freeze()
}

fn multi_count(table: &CoocTable) -> usize {
    table
        .tgt_vocab()
        .iter()
        .filter(|(_, piece)| !is_single_char(piece))
        .count()
}

fn validate(examples: &[WordPairExample], config: &TrainConfig) -> Result<usize, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if config.n_subiterations == 0 {
        return Err(TrainError::InvalidConfig(
            "n_subiterations must be at least 1".into(),
        ));
    }
    if !(config.shrink_factor > 0.0 && config.shrink_factor < 1.0) {
        return Err(TrainError::InvalidConfig(
            "shrink_factor must lie in (0, 1)".into(),
        ));
    }
    if config.max_piece_len == 0 {
        return Err(TrainError::InvalidConfig(
            "max_piece_len must be at least 1".into(),
        ));
    }
    let chars: BTreeSet<char> = examples
        .iter()
        .flat_map(|ex| ex.target.chars())
        .collect();
    if config.vocab_size < chars.len() {
        return Err(TrainError::VocabTooSmall {
            required: chars.len(),
            requested: config.vocab_size,
        });
    }
    Ok(config.vocab_size - chars.len())
}

/// Train the paired model. Examples' source ids must come from
/// [`source_vocab_for`] on the same source model (as [`build_examples`]
/// produces).
pub fn train_paired(
    examples: &[WordPairExample],
    src_model: UnigramModel,
    config: &TrainConfig,
) -> Result<PairedModel, TrainError> {
    train_paired_with_progress(examples, src_model, config, |_| {})
}

/// [`train_paired`] with a per-count-step progress callback.
pub fn train_paired_with_progress(
    examples: &[WordPairExample],
    src_model: UnigramModel,
    config: &TrainConfig,
    mut progress: impl FnMut(&TrainProgress),
) -> Result<PairedModel, TrainError> {
    let budget = validate(examples, config)?;
    let src_vocab = source_vocab_for(&src_model);
    let mut table = init_table(examples, src_vocab, config.max_piece_len);
    if config.n_iterations == 0 {
        return Ok(PairedModel::new(src_model, table, config.clone()));
    }
    let step = |table: &CoocTable| match config.variant {
        Variant::Expected => expected_count_step(table, examples, config),
        Variant::HardEm => hard_em_step(table, examples, config),
    };
    let mut i = 0;
    loop {
        i += 1;
        let (new_table, loglik) = step(&table);
        table = new_table;
        if i % config.n_subiterations == 0 {
            table = prune_vocab(&table, budget, config.shrink_factor);
        }
        progress(&TrainProgress {
            iteration: i,
            vocab_size: table.tgt_vocab().len(),
            log_likelihood: loglik,
        });
        if i >= config.n_iterations && multi_count(&table) <= budget {
            break;
        }
    }
    // one final count step with the final vocabulary
    let (final_table, _) = step(&table);
    Ok(PairedModel::new(src_model, final_table, config.clone()))
}
