//! End-to-end checks of the command-line interface: argument contracts,
//! exit codes, file formats, and small pipelines over a toy corpus.

mod common;

use std::path::PathBuf;
use std::sync::OnceLock;

use common::*;

const WORD_PAIRS: [(&str, &str); 6] = [
    ("rot", "red"),
    ("blau", "blue"),
    ("gelb", "yellow"),
    ("gruen", "green"),
    ("weiss", "white"),
    ("schwarz", "black"),
];

/// Deterministic toy parallel corpus: word-for-word translations.
fn demo_corpus(n_lines: usize) -> (Vec<String>, Vec<String>) {
    let mut src = Vec::with_capacity(n_lines);
    let mut tgt = Vec::with_capacity(n_lines);
    for i in 0..n_lines {
        let len = 2 + i % 3;
        let mut s = Vec::new();
        let mut t = Vec::new();
        for k in 0..len {
            let (a, b) = WORD_PAIRS[(i * 3 + k * 5) % WORD_PAIRS.len()];
            s.push(a);
            t.push(b);
        }
        src.push(s.join(" "));
        tgt.push(t.join(" "));
    }
    (src, tgt)
}

struct Fixture {
    _dir: tempfile::TempDir,
    src: PathBuf,
    tgt: PathBuf,
    model: PathBuf,
    base: PathBuf,
}

/// Corpus files plus a paired model and a unigram baseline, trained once
/// and shared read-only by all tests.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let (src_lines, tgt_lines) = demo_corpus(60);
        let src = dir.path().join("src.txt");
        let tgt = dir.path().join("tgt.txt");
        write_lines(&src, &src_lines);
        write_lines(&tgt, &tgt_lines);
        let model = dir.path().join("model.json");
        let base = dir.path().join("base.json");
        let out = run(pairtok()
            .args(["train", "--train-source", "--vocab-size", "40", "--iterations", "2"])
            .arg("--source")
            .arg(&src)
            .arg("--target")
            .arg(&tgt)
            .arg("--output")
            .arg(&model));
        assert_success(&out, "fixture paired training");
        let out = run(pairtok()
            .args(["train", "--model-type", "unigram", "--vocab-size", "40"])
            .arg("--target")
            .arg(&tgt)
            .arg("--output")
            .arg(&base));
        assert_success(&out, "fixture unigram training");
        Fixture {
            _dir: dir,
            src,
            tgt,
            model,
            base,
        }
    })
}

#[test]
fn train_rejects_mismatched_line_counts() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.txt");
    write_lines(&short, &["rot blau", "gelb"]);
    let out = run(pairtok()
        .args(["train", "--train-source"])
        .arg("--source")
        .arg(&short)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--output")
        .arg(dir.path().join("m.json")));
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_str(&out));
    assert!(stderr_str(&out).contains("line counts differ"));
}

#[test]
fn tokenize_paired_requires_source() {
    let fx = fixture();
    let out = run(pairtok()
        .args(["tokenize", "--mode", "paired"])
        .arg("--model")
        .arg(&fx.model)
        .arg("--input")
        .arg(&fx.tgt));
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_str(&out).contains("requires --source"));
}

#[test]
fn mode_and_model_type_must_match() {
    let fx = fixture();
    for (model, mode) in [
        (&fx.model, "unigram"),
        (&fx.base, "marginal"),
        (&fx.base, "paired"),
    ] {
        let out = run(pairtok()
            .args(["tokenize", "--mode", mode])
            .arg("--model")
            .arg(model)
            .arg("--input")
            .arg(&fx.tgt)
            .arg("--source")
            .arg(&fx.src));
        assert_eq!(exit_code(&out), 2, "mode {mode}: {}", stderr_str(&out));
    }
}

#[test]
fn unwritable_output_exits_3() {
    let fx = fixture();
    let out = run(pairtok()
        .arg("eval")
        .arg("--model")
        .arg(&fx.model)
        .arg("--baseline")
        .arg(&fx.base)
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .args(["--output", "/nonexistent-dir/report.json"]));
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_str(&out));

    let out = run(pairtok()
        .args(["tokenize", "--mode", "marginal"])
        .arg("--model")
        .arg(&fx.model)
        .arg("--input")
        .arg(&fx.tgt)
        .args(["--output", "/nonexistent-dir/tokens.txt"]));
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn missing_model_exits_1() {
    let fx = fixture();
    let out = run(pairtok()
        .args(["tokenize", "--mode", "marginal", "--model", "/no/such/model.json"])
        .arg("--input")
        .arg(&fx.tgt));
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_str(&out).contains("cannot load model"));
}

#[test]
fn eval_requires_baseline() {
    let fx = fixture();
    let out = run(pairtok()
        .arg("eval")
        .arg("--model")
        .arg(&fx.model)
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt));
    assert_eq!(exit_code(&out), 2); // usage error from the argument parser
}

#[test]
fn config_file_unknown_key_rejected() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"vocab_size": 30, "vocabsize": 40}"#).unwrap();
    let out = run(pairtok()
        .args(["train", "--train-source"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path().join("m.json")));
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_str(&out).contains("vocabsize"), "stderr: {}", stderr_str(&out));
}

#[test]
fn cli_flags_override_config_file() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"vocab_size": 30, "iterations": 1}"#).unwrap();

    let from_file = dir.path().join("file.json");
    let out = run(pairtok()
        .args(["train", "--train-source"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(&from_file));
    assert_success(&out, "training from config file");
    let inspected = stdout_str(&run(pairtok().arg("inspect").arg("--model").arg(&from_file)));
    assert!(inspected.contains("\"vocab_size\":30"), "{inspected}");
    assert!(inspected.contains("\"n_iterations\":1"), "{inspected}");

    let overridden = dir.path().join("cli.json");
    let out = run(pairtok()
        .args(["train", "--train-source", "--vocab-size", "34"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(&overridden));
    assert_success(&out, "training with flag override");
    let inspected = stdout_str(&run(pairtok().arg("inspect").arg("--model").arg(&overridden)));
    assert!(inspected.contains("\"vocab_size\":34"), "{inspected}");
    assert!(inspected.contains("\"n_iterations\":1"), "{inspected}");
}

#[test]
fn marginal_round_trip_restores_input() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.txt");
    let lines = ["red blue", "", "yellow black white"];
    write_lines(&input, &lines);

    let tokens = dir.path().join("tokens.txt");
    let out = run(pairtok()
        .args(["tokenize", "--mode", "marginal"])
        .arg("--model")
        .arg(&fx.model)
        .arg("--input")
        .arg(&input)
        .arg("--output")
        .arg(&tokens));
    assert_success(&out, "tokenize");
    assert_eq!(read_lines(&tokens).len(), lines.len());

    let out = run(pairtok().arg("detokenize").arg("--input").arg(&tokens));
    assert_success(&out, "detokenize");
    assert_eq!(stdout_str(&out), "red blue\n\nyellow black white\n");
}

#[test]
fn tokenize_paired_falls_back_without_usable_source() {
    // a foreign model whose source vocabulary shares nothing with the
    // source text — the bag comes out empty, triggering the fallback
    let src_model = pairtok::unigram::UnigramModel::from_pieces(vec![("x".to_string(), -0.5)])
        .expect("valid source model");
    let src_vocab = pairtok::trainer::source_vocab_for(&src_model);
    let tgt_vocab =
        pairtok::Vocab::from_items(["▁", "b", "d", "e", "l", "r", "u", "▁red"].map(String::from));
    let mut builder = pairtok::cooc::CoocBuilder::new(tgt_vocab, src_vocab);
    let t_red = builder.tgt_vocab().id("▁red").unwrap();
    builder.add(t_red, 1, 2.0);
    let model = pairtok::paired::PairedModel::new(
        src_model,
        builder.freeze(),
        pairtok::trainer::TrainConfig::default(),
    );

    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("foreign.json");
    pairtok::model_io::save_model(&model_path, &pairtok::model_io::ModelFile::Paired(model))
        .expect("model saves");
    let input = dir.path().join("input.txt");
    let source = dir.path().join("source.txt");
    write_lines(&input, &["red blue"]);
    write_lines(&source, &["abc"]);

    let out = run(pairtok()
        .args(["tokenize", "--mode", "paired"])
        .arg("--model")
        .arg(&model_path)
        .arg("--input")
        .arg(&input)
        .arg("--source")
        .arg(&source));
    assert_success(&out, "tokenize with fallback");
    assert!(stderr_str(&out).contains("marginal tokenization used"));
    let text: String = stdout_str(&out).split_whitespace().collect();
    assert_eq!(text, "\u{2581}red\u{2581}blue");
}

#[test]
fn export_probs_rows_are_sorted_probabilities() {
    let fx = fixture();
    let out = run(pairtok().arg("export-probs").arg("--model").arg(&fx.model));
    assert_success(&out, "export-probs");
    let stdout = stdout_str(&out);
    let mut keys: Vec<(String, String)> = Vec::new();
    for line in stdout.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "row {line:?}");
        let p: f64 = fields[2].parse().expect("probability parses");
        assert!(p > 0.0 && p <= 1.0 + 1e-12, "p(t|s) out of range in {line:?}");
        keys.push((fields[0].to_string(), fields[1].to_string()));
    }
    assert!(!keys.is_empty());
    assert!(keys.windows(2).all(|w| w[0] < w[1]), "rows not sorted");
}

#[test]
fn align_then_train_with_alignment_file() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let links = dir.path().join("links.txt");
    let out = run(pairtok()
        .arg("align")
        .arg("--model")
        .arg(&fx.model)
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--output")
        .arg(&links));
    assert_success(&out, "align");
    assert_eq!(read_lines(&links).len(), 60);

    let out = run(pairtok()
        .args(["train", "--train-source", "--vocab-size", "40"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--alignments")
        .arg(&links)
        .arg("--output")
        .arg(dir.path().join("m.json")));
    assert_success(&out, "train with alignment file");

    let truncated = dir.path().join("short-links.txt");
    write_lines(&truncated, &read_lines(&links)[..10]);
    let out = run(pairtok()
        .args(["train", "--train-source"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--alignments")
        .arg(&truncated)
        .arg("--output")
        .arg(dir.path().join("m2.json")));
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn malformed_alignment_line_is_error() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    for bad_line in ["notalink", "9-9"] {
        let links = dir.path().join("links.txt");
        let mut lines = vec!["0-0".to_string(); 60];
        lines[5] = bad_line.to_string();
        write_lines(&links, &lines);
        let out = run(pairtok()
            .args(["train", "--train-source"])
            .arg("--source")
            .arg(&fx.src)
            .arg("--target")
            .arg(&fx.tgt)
            .arg("--alignments")
            .arg(&links)
            .arg("--output")
            .arg(dir.path().join("m.json")));
        assert_eq!(exit_code(&out), 1, "line {bad_line:?}: {}", stderr_str(&out));
        assert!(stderr_str(&out).contains(":6:"), "should name the line");
    }
}

#[test]
fn save_source_model_writes_unigram() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let source_model = dir.path().join("source.json");
    let out = run(pairtok()
        .args(["train", "--train-source", "--vocab-size", "40", "--iterations", "1"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--save-source-model")
        .arg(&source_model)
        .arg("--output")
        .arg(dir.path().join("m.json")));
    assert_success(&out, "train with --save-source-model");
    let inspected = stdout_str(&run(pairtok().arg("inspect").arg("--model").arg(&source_model)));
    assert!(inspected.starts_with("type: unigram"), "{inspected}");

    // and the saved model is reusable as --source-model
    let out = run(pairtok()
        .args(["train", "--vocab-size", "40", "--iterations", "1"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--source-model")
        .arg(&source_model)
        .arg("--output")
        .arg(dir.path().join("m2.json")));
    assert_success(&out, "train with --source-model");
}

/// Every "value" in the report must be printed with exactly six decimals.
fn assert_six_decimal_values(report: &str) {
    let mut rest = report;
    while let Some(at) = rest.find("\"value\":") {
        rest = &rest[at + "\"value\":".len()..];
        let end = rest.find(['}', ',']).expect("value terminates");
        let number = &rest[..end];
        let (_, frac) = number.split_once('.').expect("decimal point in {number:?}");
        assert_eq!(frac.len(), 6, "not six decimals: {number:?}");
    }
}

#[test]
fn eval_writes_canonical_report() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let links = dir.path().join("links.txt");
    let out = run(pairtok()
        .arg("align")
        .arg("--model")
        .arg(&fx.model)
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--output")
        .arg(&links));
    assert_success(&out, "align");

    let eval = |with_links: bool| {
        let mut cmd = pairtok();
        cmd.arg("eval")
            .arg("--model")
            .arg(&fx.model)
            .arg("--baseline")
            .arg(&fx.base)
            .arg("--source")
            .arg(&fx.src)
            .arg("--target")
            .arg(&fx.tgt);
        if with_links {
            cmd.arg("--alignments").arg(&links);
        }
        let out = run(&mut cmd);
        assert_success(&out, "eval");
        stdout_str(&out)
    };

    let plain = eval(false);
    assert!(!plain.contains("one_to_one") && !plain.contains("unaligned"));

    let full = eval(true);
    let parsed: serde_json::Value = serde_json::from_str(&full).expect("valid JSON");
    let obj = parsed.as_object().unwrap();
    for key in [
        "begin_of_word",
        "fertility",
        "length_ratio",
        "one_to_one",
        "parity",
        "renyi_ratio",
        "single_char",
        "unaligned",
        "vocab_overlap",
        "vocab_usage",
    ] {
        assert!(obj.contains_key(key), "missing {key}");
        assert!(obj[key]["count"].is_u64() && obj[key]["value"].is_number());
    }
    // canonical form: keys appear in sorted order in the raw text
    let positions: Vec<usize> = obj.keys().map(|k| full.find(&format!("\"{k}\"")).unwrap()).collect();
    let mut sorted = positions.clone();
    sorted.sort_unstable();
    assert_eq!(positions, sorted, "keys not in lexicographic order");
    assert_six_decimal_values(&full);
}

#[test]
fn tsv_input_equivalent_to_two_files() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (src_lines, tgt_lines) = demo_corpus(60);
    let rows: Vec<String> = src_lines
        .iter()
        .zip(&tgt_lines)
        .map(|(s, t)| format!("{s}\t{t}"))
        .collect();
    let tsv = dir.path().join("corpus.tsv");
    write_lines(&tsv, &rows);
    let from_tsv = dir.path().join("m.json");
    let out = run(pairtok()
        .args(["train", "--train-source", "--vocab-size", "40", "--iterations", "2"])
        .arg("--tsv")
        .arg(&tsv)
        .arg("--output")
        .arg(&from_tsv));
    assert_success(&out, "train from TSV");
    assert_eq!(
        std::fs::read(&from_tsv).unwrap(),
        std::fs::read(&fx.model).unwrap(),
        "TSV corpus should train the identical model"
    );
}

#[test]
fn train_iterations_zero_keeps_all_spans() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.json");
    let out = run(pairtok()
        .args(["train", "--train-source", "--vocab-size", "40", "--iterations", "0"])
        .arg("--source")
        .arg(&fx.src)
        .arg("--target")
        .arg(&fx.tgt)
        .arg("--output")
        .arg(&raw));
    assert_success(&out, "train with zero iterations");
    let inspected = stdout_str(&run(pairtok().arg("inspect").arg("--model").arg(&raw)));
    let vocab_line = inspected
        .lines()
        .find(|l| l.starts_with("target vocab:"))
        .expect("inspect reports vocab size");
    let n: usize = vocab_line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(n > 40, "raw span table should exceed the budget, got {n}");
}
