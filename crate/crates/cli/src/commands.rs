//! Subcommand implementations. Every command reads its inputs fully,
//! computes in memory, and emits one output artifact (file or stdout);
//! progress and warnings go to standard error.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;

use pairtok::aligner::{self, WordPair};
use pairtok::corpus::{self, CorpusError};
use pairtok::metrics;
use pairtok::model_io::{self, ModelFile};
use pairtok::paired::PairedModel;
use pairtok::textnorm::{self, normalize, pretokenize, NormalizedText};
use pairtok::trainer::{self, TrainConfig, Variant};
use pairtok::unigram::{train_unigram, UnigramModel, UnigramTrainConfig};

use crate::config::{resolve, FileConfig};
use crate::{
    AlignArgs, CliError, CorpusArgs, DetokenizeArgs, EvalArgs, ExportProbsArgs, InspectArgs,
    ModelTypeArg, TokenizeArgs, TokenizeMode, TrainArgs, VariantArg,
};

impl From<VariantArg> for Variant {
    fn from(arg: VariantArg) -> Self {
        match arg {
            VariantArg::Expected => Variant::Expected,
            VariantArg::HardEm => Variant::HardEm,
        }
    }
}

fn to_other<E: Into<anyhow::Error>>(err: E) -> CliError {
    CliError::Other(err.into())
}

fn corpus_error(err: CorpusError) -> CliError {
    match err {
        CorpusError::LineCountMismatch { .. } => CliError::Contract(err.to_string()),
        other => to_other(other),
    }
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::Output(format!("cannot write to standard output: {e}")))
        }
    }
}

fn load_parallel(args: &CorpusArgs) -> Result<Vec<(String, String)>, CliError> {
    match (&args.tsv, &args.source, &args.target) {
        (Some(tsv), _, _) => corpus::load_tsv(tsv).map_err(corpus_error),
        (None, Some(src), Some(tgt)) => corpus::load_pair(src, tgt).map_err(corpus_error),
        _ => Err(to_other(anyhow!(
            "provide --source and --target, or a single --tsv file"
        ))),
    }
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    model_io::load_model(path).map_err(|e| {
        to_other(anyhow::Error::from(e).context(format!("cannot load model {}", path.display())))
    })
}

fn save_model(path: &Path, model: &ModelFile) -> Result<(), CliError> {
    model_io::save_model(path, model).map_err(|e| match e {
        model_io::ModelIoError::Io(io) => {
            CliError::Output(format!("cannot write model {}: {io}", path.display()))
        }
        other => to_other(other),
    })
}

fn require_paired(model: ModelFile, what: &str) -> Result<PairedModel, CliError> {
    match model {
        ModelFile::Paired(m) => Ok(m),
        ModelFile::Unigram(_) => Err(CliError::Contract(format!(
            "{what} requires a paired-unigram model file (got type \"unigram\")"
        ))),
    }
}

fn require_unigram(model: ModelFile, what: &str) -> Result<UnigramModel, CliError> {
    match model {
        ModelFile::Unigram(m) => Ok(m),
        ModelFile::Paired(_) => Err(CliError::Contract(format!(
            "{what} requires a unigram model file (got type \"paired-unigram\")"
        ))),
    }
}

fn vocab_of(model: &ModelFile) -> Vec<String> {
    match model {
        ModelFile::Paired(m) => m.table().tgt_vocab().items().to_vec(),
        ModelFile::Unigram(m) => m.pieces().iter().map(|(p, _)| p.clone()).collect(),
    }
}

pub fn train(args: TrainArgs, deterministic: bool) -> Result<(), CliError> {
    let file_cfg = FileConfig::load(args.config.as_deref())?;
    match args.model_type {
        ModelTypeArg::Unigram => train_unigram_cmd(&args, &file_cfg),
        ModelTypeArg::Paired => train_paired_cmd(&args, &file_cfg, deterministic),
    }
}

fn unigram_config(
    args: &TrainArgs,
    file_cfg: &FileConfig,
    vocab_size: usize,
) -> Result<UnigramTrainConfig, CliError> {
    Ok(UnigramTrainConfig {
        vocab_size,
        max_piece_len: resolve(args.max_piece_len, file_cfg.usize("max_piece_len")?, 16),
        shrink_factor: resolve(args.shrink_factor, file_cfg.f64("shrink_factor")?, 0.75),
        n_sub_iterations: resolve(args.sub_iterations, file_cfg.usize("sub_iterations")?, 2),
        ..UnigramTrainConfig::default()
    })
}

fn train_unigram_cmd(args: &TrainArgs, file_cfg: &FileConfig) -> Result<(), CliError> {
    let lines: Vec<String> = match (&args.corpus.tsv, &args.corpus.target) {
        (Some(tsv), _) => corpus::load_tsv(tsv)
            .map_err(corpus_error)?
            .into_iter()
            .map(|(_, target)| target)
            .collect(),
        (None, Some(target)) => corpus::load_lines(target).map_err(corpus_error)?,
        _ => {
            return Err(to_other(anyhow!(
                "unigram training needs --target (or --tsv, whose target column is used)"
            )))
        }
    };
    let normalized: Vec<NormalizedText> = lines.iter().map(|l| normalize(l)).collect();
    let vocab_size = resolve(args.vocab_size, file_cfg.usize("vocab_size")?, 8000);
    let config = unigram_config(args, file_cfg, vocab_size)?;
    let model = train_unigram(&normalized, &config).map_err(to_other)?;
    eprintln!(
        "trained unigram model: {} pieces from {} lines",
        model.vocab_size(),
        lines.len()
    );
    save_model(&args.output, &ModelFile::Unigram(model))?;
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

fn train_paired_cmd(
    args: &TrainArgs,
    file_cfg: &FileConfig,
    deterministic: bool,
) -> Result<(), CliError> {
    let pairs = load_parallel(&args.corpus)?;
    if pairs.is_empty() {
        return Err(to_other(anyhow!("the corpus is empty")));
    }
    let src_norm: Vec<NormalizedText> = pairs.iter().map(|(s, _)| normalize(s)).collect();
    let tgt_norm: Vec<NormalizedText> = pairs.iter().map(|(_, t)| normalize(t)).collect();
    let src_words: Vec<Vec<String>> = src_norm.iter().map(pretokenize).collect();
    let tgt_words: Vec<Vec<String>> = tgt_norm.iter().map(pretokenize).collect();

    let src_model: UnigramModel = if let Some(path) = &args.source_model {
        require_unigram(load_model(path)?, "--source-model")?
    } else if args.train_source {
        let vocab_size = resolve(
            args.source_vocab_size,
            file_cfg.usize("source_vocab_size")?,
            resolve(args.vocab_size, file_cfg.usize("vocab_size")?, 8000),
        );
        let config = unigram_config(args, file_cfg, vocab_size)?;
        let model = train_unigram(&src_norm, &config).map_err(to_other)?;
        eprintln!("trained source model: {} pieces", model.vocab_size());
        model
    } else {
        return Err(to_other(anyhow!(
            "provide --source-model FILE or --train-source"
        )));
    };
    if let Some(path) = &args.save_source_model {
        save_model(path, &ModelFile::Unigram(src_model.clone()))?;
        eprintln!("wrote {}", path.display());
    }

    let links: Vec<Vec<(u32, u32)>> = if let Some(path) = &args.alignments {
        let lines = corpus::load_lines(path).map_err(corpus_error)?;
        if lines.len() != pairs.len() {
            return Err(CliError::Contract(format!(
                "line counts differ: {} alignment lines vs {} sentence pairs",
                lines.len(),
                pairs.len()
            )));
        }
        lines
            .iter()
            .enumerate()
            .map(|(idx, line)| {
                let links = aligner::parse_pharaoh(line)
                    .map_err(|e| to_other(anyhow!("{}:{}: {e}", path.display(), idx + 1)))?;
                for &(i, j) in &links {
                    if i as usize >= src_words[idx].len() || j as usize >= tgt_words[idx].len() {
                        return Err(to_other(anyhow!(
                            "{}:{}: link {i}-{j} is out of range",
                            path.display(),
                            idx + 1
                        )));
                    }
                }
                Ok(links)
            })
            .collect::<Result<_, _>>()?
    } else {
        let align_iters = resolve(args.align_iterations, file_cfg.usize("align_iterations")?, 5);
        let word_pairs: Vec<WordPair> = src_words
            .iter()
            .cloned()
            .zip(tgt_words.iter().cloned())
            .collect();
        let table = aligner::train_ibm1(&word_pairs, align_iters);
        eprintln!(
            "aligned {} sentence pairs (IBM Model 1, {align_iters} iterations, log-likelihood {:.4})",
            pairs.len(),
            aligner::log_likelihood(&table, &word_pairs)
        );
        word_pairs
            .iter()
            .map(|(src, tgt)| aligner::align_sentence(&table, src, tgt))
            .collect()
    };

    let mut word_level: Vec<(String, String)> = Vec::new();
    for ((links, src), tgt) in links.iter().zip(&src_words).zip(&tgt_words) {
        word_level.extend(aligner::extract_word_pairs(links, src, tgt));
    }

    let config = TrainConfig {
        vocab_size: resolve(args.vocab_size, file_cfg.usize("vocab_size")?, 8000),
        max_piece_len: resolve(args.max_piece_len, file_cfg.usize("max_piece_len")?, 16),
        n_iterations: resolve(args.iterations, file_cfg.usize("iterations")?, 8),
        n_subiterations: resolve(args.sub_iterations, file_cfg.usize("sub_iterations")?, 2),
        shrink_factor: resolve(args.shrink_factor, file_cfg.f64("shrink_factor")?, 0.75),
        variant: resolve(
            args.variant.map(Variant::from),
            file_cfg.variant()?,
            Variant::Expected,
        ),
        normalize_posterior: args.normalize_posterior
            || file_cfg.bool("normalize_posterior")?.unwrap_or(false),
        restrict_cond_denominator: args.restrict_denominator
            || file_cfg.bool("restrict_denominator")?.unwrap_or(false),
        deterministic_reduction: deterministic,
    };
    let src_vocab = trainer::source_vocab_for(&src_model);
    let examples = trainer::build_examples(&word_level, &src_model, &src_vocab);
    eprintln!("training on {} word-pair examples", examples.len());
    let model = trainer::train_paired_with_progress(&examples, src_model, &config, |p| {
        eprintln!(
            "iteration {}: vocab {}, log-likelihood {:.4}",
            p.iteration, p.vocab_size, p.log_likelihood
        );
    })
    .map_err(to_other)?;
    save_model(&args.output, &ModelFile::Paired(model))?;
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

pub fn tokenize(args: TokenizeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let input = corpus::load_lines(&args.input).map_err(corpus_error)?;
    let mut out = String::new();
    match args.mode {
        TokenizeMode::Unigram => {
            let m = require_unigram(model, "tokenize --mode unigram")?;
            for line in &input {
                writeln!(out, "{}", m.tokenize(&normalize(line)).join(" ")).unwrap();
            }
        }
        TokenizeMode::Marginal => {
            let m = require_paired(model, "tokenize --mode marginal")?;
            for line in &input {
                writeln!(out, "{}", m.tokenize_marginal(&normalize(line)).join(" ")).unwrap();
            }
        }
        TokenizeMode::Paired => {
            let m = require_paired(model, "tokenize --mode paired")?;
            let Some(source) = &args.source else {
                return Err(CliError::Contract(
                    "tokenize --mode paired requires --source".to_string(),
                ));
            };
            let src_lines = corpus::load_lines(source).map_err(corpus_error)?;
            if src_lines.len() != input.len() {
                return Err(CliError::Contract(format!(
                    "line counts differ: {} source lines vs {} target lines",
                    src_lines.len(),
                    input.len()
                )));
            }
            for (idx, (line, src)) in input.iter().zip(&src_lines).enumerate() {
                let result = m.tokenize_paired(&normalize(line), &normalize(src));
                if result.used_marginal_fallback {
                    eprintln!(
                        "warning: line {}: no usable source tokens; marginal tokenization used",
                        idx + 1
                    );
                }
                writeln!(out, "{}", result.tokens.join(" ")).unwrap();
            }
        }
    }
    emit(args.output.as_deref(), &out)
}

pub fn detokenize(args: DetokenizeArgs) -> Result<(), CliError> {
    let input = corpus::load_lines(&args.input).map_err(corpus_error)?;
    let mut out = String::new();
    for line in &input {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        writeln!(out, "{}", textnorm::detokenize(&tokens)).unwrap();
    }
    emit(args.output.as_deref(), &out)
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file_cfg = FileConfig::load(args.config.as_deref())?;
    let alpha = resolve(args.renyi_alpha, file_cfg.f64("renyi_alpha")?, 2.5);
    let model = load_model(&args.model)?;
    let baseline = load_model(&args.baseline)?;
    let pairs = load_parallel(&args.corpus)?;
    let src_norm: Vec<NormalizedText> = pairs.iter().map(|(s, _)| normalize(s)).collect();
    let tgt_norm: Vec<NormalizedText> = pairs.iter().map(|(_, t)| normalize(t)).collect();

    let mut fallbacks = 0usize;
    let ours: Vec<Vec<String>> = match &model {
        ModelFile::Paired(m) => src_norm
            .iter()
            .zip(&tgt_norm)
            .map(|(src, tgt)| {
                let result = m.tokenize_paired(tgt, src);
                if result.used_marginal_fallback {
                    fallbacks += 1;
                }
                result.tokens
            })
            .collect(),
        ModelFile::Unigram(m) => tgt_norm.iter().map(|t| m.tokenize(t)).collect(),
    };
    if fallbacks > 0 {
        eprintln!("warning: {fallbacks} lines fell back to marginal tokenization");
    }

    // the source side is tokenized by the model's own source tokenizer
    let src_tokens: Vec<Vec<String>> = match &model {
        ModelFile::Paired(m) => src_norm.iter().map(|s| m.src_model().tokenize(s)).collect(),
        ModelFile::Unigram(m) => src_norm.iter().map(|s| m.tokenize(s)).collect(),
    };
    let reference: Vec<Vec<String>> = match &baseline {
        ModelFile::Paired(b) => tgt_norm.iter().map(|t| b.tokenize_marginal(t)).collect(),
        ModelFile::Unigram(b) => tgt_norm.iter().map(|t| b.tokenize(t)).collect(),
    };
    let our_vocab = vocab_of(&model);
    let ref_vocab = vocab_of(&baseline);

    let tgt_counts: Vec<usize> = ours.iter().map(Vec::len).collect();
    let src_counts: Vec<usize> = src_tokens.iter().map(Vec::len).collect();
    let word_counts: Vec<usize> = tgt_norm.iter().map(|t| pretokenize(t).len()).collect();

    let mut report = metrics::aux_metrics(&ours, &our_vocab, Some((&reference, &ref_vocab)), alpha)
        .map_err(to_other)?;
    report.parity = Some(metrics::parity(&tgt_counts, &src_counts).map_err(to_other)?);
    report.fertility = Some(metrics::fertility(&tgt_counts, &word_counts).map_err(to_other)?);

    if let Some(path) = &args.alignments {
        let lines = corpus::load_lines(path).map_err(corpus_error)?;
        if lines.len() != pairs.len() {
            return Err(CliError::Contract(format!(
                "line counts differ: {} alignment lines vs {} sentence pairs",
                lines.len(),
                pairs.len()
            )));
        }
        let links: Vec<Vec<(u32, u32)>> = lines
            .iter()
            .enumerate()
            .map(|(idx, line)| {
                let links = aligner::parse_pharaoh(line)
                    .map_err(|e| to_other(anyhow!("{}:{}: {e}", path.display(), idx + 1)))?;
                for &(i, j) in &links {
                    if i as usize >= src_counts[idx] || j as usize >= tgt_counts[idx] {
                        return Err(to_other(anyhow!(
                            "{}:{}: link {i}-{j} is out of range",
                            path.display(),
                            idx + 1
                        )));
                    }
                }
                Ok(links)
            })
            .collect::<Result<_, _>>()?;
        let (one_to_one, unaligned) =
            metrics::alignment_metrics(&links, &src_counts).map_err(to_other)?;
        report.one_to_one = Some(one_to_one);
        report.unaligned = Some(unaligned);
    }

    emit(
        args.output.as_deref(),
        &(report.to_canonical_json() + "\n"),
    )
}

pub fn align(args: AlignArgs) -> Result<(), CliError> {
    let model = require_paired(load_model(&args.model)?, "align")?;
    let pairs = load_parallel(&args.corpus)?;
    let mut out = String::new();
    for (src_raw, tgt_raw) in &pairs {
        let src = normalize(src_raw);
        let tgt = normalize(tgt_raw);
        let src_tokens = model.src_model().tokenize(&src);
        let tgt_tokens = model.tokenize_paired(&tgt, &src).tokens;
        let links: Vec<(u32, u32)> = model
            .extract_alignment(&tgt_tokens, &src_tokens)
            .iter()
            .enumerate()
            .filter_map(|(j, source_pos)| source_pos.map(|i| (i as u32, j as u32)))
            .collect();
        writeln!(out, "{}", aligner::format_pharaoh(&links)).unwrap();
    }
    emit(args.output.as_deref(), &out)
}

pub fn export_probs(args: ExportProbsArgs) -> Result<(), CliError> {
    let model = require_paired(load_model(&args.model)?, "export-probs")?;
    let table = model.table();
    let mut rows: Vec<(&str, &str, f64)> = table
        .cells()
        .map(|(t, s, count)| {
            (
                table.tgt_vocab().get(t),
                table.src_vocab().get(s),
                count / table.col_sum(s),
            )
        })
        .collect();
    rows.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out = String::new();
    for (target, source, prob) in rows {
        // scientific notation: lossless and compact even for the near-zero
        // remnants that expected-count training leaves on floor characters
        writeln!(out, "{target}\t{source}\t{prob:e}").unwrap();
    }
    emit(args.output.as_deref(), &out)
}

pub fn inspect(args: InspectArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let mut out = String::new();
    match &model {
        ModelFile::Unigram(m) => {
            writeln!(out, "type: unigram").unwrap();
            writeln!(out, "pieces: {}", m.vocab_size()).unwrap();
            let single = m
                .pieces()
                .iter()
                .filter(|(p, _)| p.chars().count() == 1)
                .count();
            writeln!(out, "single-character pieces: {single}").unwrap();
            writeln!(out, "top pieces by probability:").unwrap();
            for (piece, logprob) in m.pieces().iter().take(10) {
                writeln!(out, "  {piece:?}\t{logprob:.6}").unwrap();
            }
        }
        ModelFile::Paired(m) => {
            let table = m.table();
            writeln!(out, "type: paired-unigram").unwrap();
            writeln!(out, "config: {}", serde_json::to_string(m.config()).map_err(to_other)?)
                .unwrap();
            writeln!(out, "target vocab: {}", table.tgt_vocab().len()).unwrap();
            let single = table
                .tgt_vocab()
                .iter()
                .filter(|(_, p)| p.chars().count() == 1)
                .count();
            writeln!(out, "single-character tokens: {single}").unwrap();
            writeln!(
                out,
                "source vocab: {} (including the NULL token)",
                table.src_vocab().len()
            )
            .unwrap();
            writeln!(out, "nonzero cells: {}", table.cells().count()).unwrap();
            writeln!(out, "total count: {}", table.total()).unwrap();
            let mut rows: Vec<(f64, &str)> = table
                .tgt_vocab()
                .iter()
                .map(|(id, piece)| (table.row_sum(id), piece))
                .collect();
            rows.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .expect("row sums are finite")
                    .then_with(|| a.1.cmp(b.1))
            });
            writeln!(out, "top tokens by count:").unwrap();
            for (sum, piece) in rows.iter().take(10) {
                writeln!(out, "  {piece:?}\t{sum:.4}").unwrap();
            }
        }
    }
    emit(args.output.as_deref(), &out)
}
