use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use veracity::commands;
use veracity_core::{GatePolicy, PipelineConfig};
use veracity_testkit as testkit;

const CONFIG: &str = r#"
[pipeline]
parallelism = 5

[providers.text_embedder]
protocol = "openai_embeddings"
model = "msmarco-distilbert-base-tas-b"

[providers.image_embedder]
protocol = "json_adapter"
model = "facebook/dino-vitb8"
"#;

fn veracity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veracity"))
        .current_dir(dir)
        .args(args)
        .env_remove("VERACITY_CONFIG")
        .env_remove("VERACITY_REGISTRY")
        .output()
        .unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("registry.csv"), testkit::REGISTRY_CSV).unwrap();
    std::fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
    dir
}

#[tokio::test]
async fn respond_replays_a_cassette() {
    let dir = workspace();
    let scenario = testkit::scenario("text_refuted").unwrap();
    std::fs::write(dir.path().join("post.json"), scenario.raw_post_json().to_string()).unwrap();
    let cassette = testkit::cassette_path("text_refuted");
    let out = veracity(
        dir.path(),
        &[
            "--config",
            "config.toml",
            "--registry",
            "registry.csv",
            "--cassette",
            cassette.to_str().unwrap(),
            "respond",
            "post.json",
            "--store",
            "runs",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(printed["text"].as_str().unwrap().starts_with("This tweet is"));

    let pipeline = testkit::replay_pipeline("text_refuted", PipelineConfig::default()).unwrap();
    let records = commands::respond(&pipeline, vec![testkit::raw_post(&scenario)], &GatePolicy::PostTime, None)
        .await
        .unwrap();
    let expected: Value = serde_json::from_str(&commands::respond_output(&records, false).unwrap()).unwrap();
    assert_eq!(printed, expected);

    let summary = veracity(dir.path(), &["report", "--runs", "runs"]);
    assert!(summary.status.success());
    let summary: Value = serde_json::from_slice(&summary.stdout).unwrap();
    assert_eq!(summary["runs"], 1);
    assert_eq!(summary["by_status"]["completed"], 1);
}

#[test]
fn retrieve_then_extract() {
    let dir = workspace();
    let scenario = testkit::scenario("text_refuted").unwrap();
    std::fs::write(dir.path().join("post.json"), scenario.raw_post_json().to_string()).unwrap();
    let cassette = testkit::cassette_path("text_refuted");
    let common = [
        "--config",
        "config.toml",
        "--registry",
        "registry.csv",
        "--cassette",
        cassette.to_str().unwrap(),
    ];
    let out = veracity(dir.path(), &[&common[..], &["retrieve", "post.json"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let retrieval: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(retrieval["ranked"].as_array().unwrap().len(), 3);
    std::fs::write(dir.path().join("pages.json"), &out.stdout).unwrap();

    let out = veracity(dir.path(), &[&common[..], &["extract", "post.json", "--pages", "pages.json"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gathered: Value = serde_json::from_slice(&out.stdout).unwrap();
    // Two refuting pages stop extraction before the third.
    assert_eq!(gathered["results"].as_array().unwrap().len(), 2);
}

#[test]
fn live_mode_requires_providers() {
    let dir = workspace();
    std::fs::write(dir.path().join("post.json"), "{}").unwrap();
    let out = veracity(dir.path(), &["--registry", "registry.csv", "respond", "post.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no providers configured"));
}

#[test]
fn eval_helpers() {
    let dir = workspace();
    std::fs::write(dir.path().join("scores.txt"), "0.35 0.2\n0.01").unwrap();
    let out = veracity(dir.path(), &["classify-helpfulness", "scores.txt"]);
    assert!(out.status.success());
    let classes: Value = serde_json::from_slice(&out.stdout).unwrap();
    let classes: Vec<&str> = classes.as_array().unwrap().iter().map(|c| c["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["high", "average", "neither"]);

    let out = veracity(dir.path(), &["hash-token", "abc"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );

    let tasks: String = (0..20).map(|i| format!("task{i}\n")).collect();
    std::fs::write(dir.path().join("tasks.txt"), tasks).unwrap();
    let out = veracity(
        dir.path(),
        &["assign", "tasks.txt", "--pair", "a:b", "--pair", "c:d", "--shared", "3", "--seed", "7"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let assignment: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(assignment["shared_per_pair"], 3);
    assert_eq!(assignment["tasks"].as_array().unwrap().len(), 20);
}
