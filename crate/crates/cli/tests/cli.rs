use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verseforge"))
        .args(args)
        .env_remove("VERSEFORGE_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Runs a failing command and returns its stderr JSON.
fn fails(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(1), "{args:?}");
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn strip_is_deterministic_across_runs_and_threads() {
    let corpus = data("mini_corpus");
    for noise in ["shuffle", "drop"] {
        let args = ["strip", p(&corpus), "--kind", "lyrics", "--noise", noise, "--seed", "9"];
        let first = ok(&[&args[..], &["--threads", "1"]].concat());
        let second = ok(&[&args[..], &["--threads", "8"]].concat());
        assert_eq!(first, second, "{noise}");
        assert_eq!(json_lines(&first).len(), 5);
    }
}

#[test]
fn pair_matches_golden_record() {
    let out = ok(&["pair", p(&data("propane_verse.txt")), "--noise", "shuffle", "--seed", "7"]);
    assert_eq!(out, fs::read_to_string(data("propane_pair_shuffle_seed7.jsonl")).unwrap());
}

#[test]
fn corpus_stats_matches_golden() {
    let got = &json_lines(&ok(&["corpus", "stats", p(&data("mini_corpus"))]))[0];
    let want: Value = serde_json::from_str(&fs::read_to_string(data("mini_corpus_stats.json")).unwrap()).unwrap();
    assert_eq!(got["n_docs"], want["n_docs"]);
    for key in ["sentences_per_doc", "tokens_per_doc", "tokens_per_sentence"] {
        for field in ["mean", "std"] {
            let (g, w) = (got[key][field].as_f64().unwrap(), want[key][field].as_f64().unwrap());
            assert!((g - w).abs() < 1e-9, "{key}.{field}");
        }
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"noise": "drop", "seed": 1, "drop_rate": 0.5}"#).unwrap();
    let corpus = data("mini_corpus");
    let from_file = ok(&["strip", p(&corpus), "--kind", "lyrics", "--config", p(&config)]);
    let explicit =
        ok(&["strip", p(&corpus), "--kind", "lyrics", "--noise", "drop", "--seed", "1", "--drop-rate", "0.5"]);
    assert_eq!(from_file, explicit);

    let overridden = ok(&["strip", p(&corpus), "--kind", "lyrics", "--config", p(&config), "--seed", "2"]);
    let expected =
        ok(&["strip", p(&corpus), "--kind", "lyrics", "--noise", "drop", "--seed", "2", "--drop-rate", "0.5"]);
    assert_eq!(overridden, expected);
    assert!(json_lines(&overridden).iter().all(|r| r["seed"] == 2 && r["noise"] == "drop"));

    let via_env = Command::new(env!("CARGO_BIN_EXE_verseforge"))
        .args(["strip", p(&corpus), "--kind", "lyrics"])
        .env("VERSEFORGE_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(via_env.stdout).unwrap(), from_file);
}

#[test]
fn errors_are_json_with_exit_code_one() {
    let err = fails(&["corpus", "stats", "/nonexistent/corpus"]);
    assert!(err["error"].as_str().unwrap().contains("/nonexistent/corpus"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"seeed": 3}"#).unwrap();
    let err = fails(&["strip", p(&data("mini_corpus")), "--config", p(&config)]);
    assert!(err["error"].as_str().unwrap().contains("seeed"), "{err}");

    fs::write(&config, r#"{"enhance": {"k": "many"}}"#).unwrap();
    let err = fails(&["strip", p(&data("mini_corpus")), "--config", p(&config)]);
    assert!(err["error"].as_str().unwrap().contains("enhance.k"), "{err}");

    let err = fails(&["strip", p(&data("mini_corpus")), "--noise", "drop", "--drop-rate", "1.5"]);
    assert!(err["error"].as_str().unwrap().contains("drop_rate"), "{err}");

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "the of and\n42 !\n").unwrap();
    let err = fails(&["pipeline", p(&empty), "--lexicon", p(&data("toy.dict")), "--no-enhance"]);
    assert_eq!(err["stage"], "strip", "{err}");

    let err = fails(&["pipeline", p(&data("mini_corpus")), "--lexicon", p(&data("toy.dict")), "--predictor", "remote"]);
    assert!(err["error"].as_str().unwrap().contains("endpoint"), "{err}");
}

#[test]
fn analyze_reports_metrics_per_verse() {
    let dir = tempfile::tempdir().unwrap();
    let verses = dir.path().join("verses.txt");
    fs::write(&verses, "a b\na b\n\na b\nb c\n").unwrap();
    let refs = dir.path().join("refs.txt");
    fs::write(&refs, "x y\nz w\n\na b\nb c\n").unwrap();
    let rows = json_lines(&ok(&[
        "analyze",
        p(&verses),
        "--lexicon",
        p(&data("toy.dict")),
        "--sources",
        p(&verses),
        "--references",
        p(&refs),
    ]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["rep"], 1.0);
    assert_eq!(rows[1]["rep"], 0.5);
    assert_eq!(rows[0]["overlap"], 1.0);
    assert_eq!(rows[0]["bleu"], 0.0);
}

#[test]
fn enhance_and_rerank_on_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("lyrics.txt");
    fs::write(&corpus, "eat my food\nwhere is the food\ngrab the food\nfood food food\n").unwrap();
    let verse = dir.path().join("verse.txt");
    fs::write(&verse, "where were you ?\nlast year i was paid in a drought with no beginners\n").unwrap();
    let lex = data("toy.dict");
    let rows = json_lines(&ok(&["enhance", p(&verse), "--lexicon", p(&lex), "--predictor-corpus", p(&corpus)]));
    assert_eq!(rows[0]["text"], "where were you ? <nl> last year i was paid in a drought with no food");
    assert_eq!(rows[0]["replacements"][0]["to"], "food");

    let hyps = dir.path().join("hyps.jsonl");
    fs::write(
        &hyps,
        concat!(
            r#"{"rank": 0, "text": "where were you <nl> in a drought"}"#,
            "\n",
            r#"{"rank": 1, "text": "where were you <nl> with no food"}"#,
            "\n"
        ),
    )
    .unwrap();
    let best = &json_lines(&ok(&["rerank", "--hypotheses", p(&hyps), "--lexicon", p(&lex)]))[0];
    assert_eq!(best["rank"], 1);
}

#[test]
fn index_then_retrieve() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    fs::create_dir(&docs).unwrap();
    let fixture: Vec<Value> = serde_json::from_str(&fs::read_to_string(data("tfidf_docs.json")).unwrap()).unwrap();
    for d in &fixture {
        fs::write(docs.join(d["id"].as_str().unwrap()), d["text"].as_str().unwrap()).unwrap();
    }
    let index_dir = dir.path().join("index");
    let built = &json_lines(&ok(&["index", p(&docs), "--index-dir", p(&index_dir)]))[0];
    assert_eq!(built["documents"], 3);
    let queries = dir.path().join("queries.txt");
    fs::write(&queries, "storm over the river\n\ngold money city\n").unwrap();
    let rows = json_lines(&ok(&["retrieve", "--index-dir", p(&index_dir), "--query", p(&queries), "--k", "2"]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["query"], 1);
    assert_eq!(rows[0]["hits"][0]["id"], "river");
    assert_eq!(rows[1]["query"], 3);
    assert_eq!(rows[1]["hits"][0]["id"], "gold");
    assert_eq!(rows[1]["hits"].as_array().unwrap().len(), 2);
}

#[test]
fn pipeline_output_feeds_summary() {
    let dir = tempfile::tempdir().unwrap();
    let news = dir.path().join("news.txt");
    fs::write(&news, "Storm hits the city. Rain floods the river!\nGold prices climb as markets fall.\n").unwrap();
    let lex = data("toy.dict");
    let corpus = data("propane_verse.txt");
    let args = ["pipeline", p(&news), "--lexicon", p(&lex), "--predictor-corpus", p(&corpus), "--seed", "4"];
    let out = ok(&args);
    assert_eq!(out, ok(&args));
    let rows = json_lines(&out);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let report = &r["report"];
        assert!(report["rd_after"].as_f64().unwrap() >= 0.0);
        let overlap = report["overlap_vs_input"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&overlap));
    }

    let records = dir.path().join("out.jsonl");
    fs::write(&records, &out).unwrap();
    let summary = &json_lines(&ok(&["summary", p(&records), "--json"]))[0];
    assert_eq!(summary["n"], 2);
    let table = ok(&["summary", p(&records), "--label", "news"]);
    assert!(table.lines().next().unwrap().contains("Overlap"));
    assert!(table.contains("news"));
}

#[test]
fn pipeline_reranks_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    let hyps = dir.path().join("hyps.jsonl");
    fs::write(
        &hyps,
        concat!(
            r#"{"rank": 0, "text": "a b <nl> a b"}"#,
            "\n",
            r#"{"rank": 1, "text": "where were you <nl> with no food"}"#,
            "\n"
        ),
    )
    .unwrap();
    let lex = data("toy.dict");
    let row = &json_lines(&ok(&[
        "pipeline",
        p(&data("propane_verse.txt")),
        "--kind",
        "lyrics",
        "--hypotheses",
        p(&hyps),
        "--lexicon",
        p(&lex),
        "--no-enhance",
    ]))[0];
    assert_eq!(row["selected_rank"], 1);
    assert_eq!(row["verse"], "where were you <nl> with no food");
}
