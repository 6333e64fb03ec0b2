//! pairtok — training and evaluation toolkit for subword tokenizers whose
//! token probabilities are conditioned on the tokens of a parallel source
//! sentence.
//!
//! The toolkit covers the full pipeline:
//!
//! * [`textnorm`] — canonical text form shared by every tokenizer (NFKC,
//!   whitespace markers, punctuation isolation).
//! * [`lattice`] — segmentation lattice with Viterbi and forward–backward
//!   passes, shared by all trainers and tokenizers.
//! * [`unigram`] — baseline unigram language-model tokenizer (seed
//!   substrings, EM re-estimation, likelihood-loss pruning).
//! * [`aligner`] — IBM Model 1 word aligner with a NULL source word and
//!   Pharaoh-format I/O.
//! * [`cooc`] — sparse target×source co-occurrence table with the
//!   conditional, marginal, and alignment probability views.
//! * [`trainer`] — the paired training loop: span-count initialization,
//!   expected-count or hard-EM re-estimation, mutual-information pruning.
//! * [`paired`] — the paired tokenizer built on a trained table.
//! * [`metrics`] — intrinsic evaluation metrics and the canonical report.
//! * [`model_io`] — versioned JSON model files for both tokenizer types.
//! * [`corpus`] — parallel-corpus loading (paired files or TSV).

pub mod aligner;
pub mod cooc;
pub mod corpus;
pub mod lattice;
pub mod metrics;
pub mod model_io;
pub mod paired;
pub mod textnorm;
pub mod trainer;
pub mod unigram;
mod vocab;

pub use vocab::Vocab;
