use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use attrib::pipeline::{
    cmd_eval, cmd_ingest, cmd_predict, cmd_prune, cmd_topics, cmd_train, RunConfig,
};
use attrib::Error;

fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

/// The bundled config with absolute input paths, writing to `<dir>/out`.
fn mini_config(dir: &Path) -> RunConfig {
    let mini = mini_dir();
    let mut config = RunConfig::load(mini.join("config.toml")).unwrap();
    config.paths.corpus = mini.join("comments.jsonl");
    config.paths.vectors = mini.join("vectors.txt");
    config.paths.labels = Some(mini.join("labels.tsv"));
    config.output_dir = PathBuf::from("out");
    config.with_base_dir(dir)
}

fn run_all(config: &RunConfig) {
    cmd_ingest(config).unwrap();
    cmd_prune(config).unwrap();
    cmd_topics(config).unwrap();
    cmd_train(config).unwrap();
    cmd_eval(config).unwrap();
}

fn artifacts(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "run_log.json" {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&mini_config(a.path()));
    run_all(&mini_config(b.path()));
    let (fa, fb) = (
        artifacts(&a.path().join("out")),
        artifacts(&b.path().join("out")),
    );
    assert!(fa.len() >= 20, "only {} artifacts", fa.len());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(
            fb[name] == *bytes,
            "{} differs between runs",
            name.display()
        );
    }
    for stage in ["ingest", "prune", "topics", "train", "eval"] {
        assert!(a
            .path()
            .join("out")
            .join(stage)
            .join("run_log.json")
            .exists());
    }
}

#[test]
fn rerunning_ingest_rewrites_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path());
    cmd_ingest(&config).unwrap();
    let first = artifacts(&dir.path().join("out"));
    cmd_ingest(&config).unwrap();
    assert_eq!(first, artifacts(&dir.path().join("out")));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = mini_config(dir.path());
    config.paths.corpus = dir.path().join("nowhere/comments.jsonl");
    let err = cmd_ingest(&config).unwrap_err();
    assert!(err.to_string().contains("nowhere/comments.jsonl"), "{err}");
}

#[test]
fn eval_before_train_reports_missing_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path());
    cmd_ingest(&config).unwrap();
    cmd_prune(&config).unwrap();
    let err = cmd_eval(&config).err().unwrap();
    assert!(
        err.to_string().starts_with("missing artifact: model"),
        "{err}"
    );
    let err = cmd_prune(&mini_config(tempfile::tempdir().unwrap().path())).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact(_)));
}

#[test]
fn changed_upstream_inputs_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("comments.jsonl");
    std::fs::copy(mini_dir().join("comments.jsonl"), &corpus).unwrap();
    let mut config = mini_config(dir.path());
    config.paths.corpus = corpus.clone();
    cmd_ingest(&config).unwrap();

    let mut text = std::fs::read_to_string(&corpus).unwrap();
    text.push_str("{\"id\": \"extra\", \"text\": \"Dams everywhere.\"}\n");
    std::fs::write(&corpus, text).unwrap();
    let err = cmd_prune(&config).unwrap_err();
    assert!(
        matches!(err, Error::StaleArtifact { ref stage, .. } if stage == "ingest"),
        "{err}"
    );

    cmd_ingest(&config).unwrap();
    cmd_prune(&config).unwrap();
    let mut changed = config.clone();
    changed.prune.threshold = 0.5;
    assert!(matches!(
        cmd_topics(&changed).unwrap_err(),
        Error::StaleArtifact { .. }
    ));
}

#[test]
fn predict_resolves_the_reference_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_config(dir.path());
    cmd_ingest(&config).unwrap();
    cmd_prune(&config).unwrap();
    cmd_train(&config).unwrap();
    let out = cmd_predict(&config, "we cut trees to build malls").unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].categories[0].0, "deforestation");
    assert!(out[0].categories.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = mini_config(dir.path());
    config.set_seed(99);
    let manifest = cmd_ingest(&config).unwrap();
    assert_eq!(manifest.seed, 99);
    assert_eq!(manifest.config.train.seed, 99);
    assert_eq!(manifest.config.topics.seed, 99);
}

#[test]
fn binary_exits_nonzero_with_one_line_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "output_dir = \"out\"\n[paths]\ncorpus = \"absent.jsonl\"\nvectors = \"v.txt\"\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_attrib"))
        .args(["--config", config.to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("absent.jsonl"));

    let out = Command::new(env!("CARGO_BIN_EXE_attrib"))
        .args(["--config", config.to_str().unwrap(), "eval"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("missing artifact: model"));
}

#[test]
fn bad_config_is_rejected() {
    let err = RunConfig::parse(
        "output_dir = \"o\"\nbogus = 1\n[paths]\ncorpus = \"c\"\nvectors = \"v\"\n",
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
    let config = RunConfig::parse(
        "seed = 3\noutput_dir = \"o\"\n[paths]\ncorpus = \"c\"\nvectors = \"v\"\n",
    )
    .unwrap();
    assert_eq!(config.train.seed, 3);
    assert_eq!(config.prune.threshold, 0.7);
}
