use std::fs;
use std::process::Command;

use prszz_cli::fixture::{generate, scenarios, Action, Change, CommitSpec, FixtureError, FixtureScript, Integration, MergeSpec, PrSpec};
use prszz_core::{Repository, TrackerSystem};
use tempfile::TempDir;

fn prszz(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_prszz")).args(args).output().unwrap()
}

fn commit(label: &str, changes: Vec<Change>) -> Action {
    Action::Commit(CommitSpec {
        label: Some(label.into()),
        message: format!("commit {label}"),
        changes,
        ..CommitSpec::default()
    })
}

fn write(path: &str, lines: &[&str]) -> Change {
    Change::Write {
        path: path.into(),
        lines: lines.iter().map(|s| s.to_string()).collect(),
    }
}

fn edit(path: &str, at: usize, delete: usize, insert: &[&str]) -> Change {
    Change::Edit {
        path: path.into(),
        at,
        delete,
        insert: insert.iter().map(|s| s.to_string()).collect(),
    }
}

fn script(actions: Vec<Action>) -> FixtureScript {
    serde_json::from_value(serde_json::json!({ "project": "t/t", "actions": [] }))
        .map(|s: FixtureScript| FixtureScript { actions, ..s })
        .unwrap()
}

#[test]
fn generation_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let fa = generate(&scenarios::fig2(), a.path()).unwrap();
    let fb = generate(&scenarios::fig2(), b.path()).unwrap();
    assert_eq!(fa.labels, fb.labels);
    assert_eq!(fa.truth, fb.truth);
    for file in ["truth.json", "oracle.json", "config.toml", "snapshot/manifest.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn squashed_inner_commits_are_unreachable() {
    let dir = TempDir::new().unwrap();
    let fx = generate(&scenarios::fig2(), dir.path()).unwrap();
    let repo = Repository::open(&fx.repo_path).unwrap();
    assert!(repo.contains(fx.id("c3")).unwrap());
    assert!(!repo.contains(fx.id("pr2_sus")).unwrap());
    assert_eq!(repo.head().unwrap(), *fx.id("c7"));
}

#[test]
fn rebase_preserves_authorship_and_labels_copies() {
    let dir = TempDir::new().unwrap();
    let fx = generate(&scenarios::recall_corpus(), dir.path()).unwrap();
    let repo = Repository::open(&fx.repo_path).unwrap();
    let inner = repo.commit(fx.id("inner2")).unwrap();
    let rebased = repo.commit(fx.id("rebased2")).unwrap();
    assert_ne!(inner.id, rebased.id);
    assert_eq!(inner.message, rebased.message);
    assert_eq!(inner.author_time, rebased.author_time);
    assert!(rebased.commit_time > inner.commit_time);
    assert!(!repo.contains(&inner.id).unwrap());
}

#[test]
fn non_empty_output_is_refused() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("keep"), "x").unwrap();
    let err = generate(&scenarios::fig2(), dir.path()).unwrap_err();
    assert!(matches!(err, FixtureError::OutputNotEmpty(_)));
}

#[test]
fn unrealizable_truth_is_refused() {
    let mut s = script(vec![
        commit("a", vec![write("f.txt", &["1", "2"])]),
        commit("b", vec![edit("f.txt", 3, 0, &["3"])]),
        commit("fix", vec![edit("f.txt", 1, 1, &["one"])]),
    ]);
    s.truth.fixing.insert("#1".into(), Some("fix".into()));
    s.truth.inducing.insert("fix".into(), ["b".to_string()].into());
    let dir = TempDir::new().unwrap();
    let err = generate(&s, dir.path()).unwrap_err();
    assert!(matches!(err, FixtureError::Unrealizable(_)), "{err}");
}

#[test]
fn conflicting_merge_is_reported() {
    let s = script(vec![
        commit("a", vec![write("f.txt", &["1", "2"])]),
        Action::OpenPr(PrSpec {
            number: 1,
            commits: vec![CommitSpec {
                pr: Some(1),
                message: "branch".into(),
                changes: vec![edit("f.txt", 1, 1, &["branch"])],
                ..CommitSpec::default()
            }],
            ..PrSpec::default()
        }),
        commit("b", vec![edit("f.txt", 1, 1, &["main"])]),
        Action::MergePr(MergeSpec {
            pr: 1,
            strategy: Integration::Merge,
            label: None,
            rebased_labels: Vec::new(),
            message: None,
            extra_changes: Vec::new(),
        }),
    ]);
    let dir = TempDir::new().unwrap();
    assert!(matches!(generate(&s, dir.path()).unwrap_err(), FixtureError::Conflict(1)));
}

#[test]
fn edits_outside_the_file_are_invalid() {
    let s = script(vec![
        commit("a", vec![write("f.txt", &["1"])]),
        commit("b", vec![edit("f.txt", 3, 1, &[])]),
    ]);
    let dir = TempDir::new().unwrap();
    assert!(matches!(generate(&s, dir.path()).unwrap_err(), FixtureError::Invalid(_)));
}

#[test]
fn pull_request_numbers_resolve_before_issues() {
    let dir = TempDir::new().unwrap();
    let fx = generate(&scenarios::fig2(), dir.path()).unwrap();
    let snapshot = prszz_core::forge::load_snapshot(&dir.path().join("snapshot")).unwrap();
    let pr2 = snapshot.pulls.iter().find(|p| p.number() == 2).unwrap();
    assert_eq!(pr2.integrated_links[0].target.system, TrackerSystem::PullRequest);
    assert_eq!(pr2.inner_commits.len(), 2);
    assert_eq!(pr2.merge_commit.as_ref(), Some(fx.id("c7")));
}

#[test]
fn missing_truth_exits_with_usage_code() {
    let dir = TempDir::new().unwrap();
    generate(&scenarios::cosmetic_contract(), dir.path()).unwrap();
    let config = dir.path().join("config.toml");
    let config = config.to_str().unwrap();
    assert!(prszz(&["match", "--config", config]).status.success());
    let out = prszz(&["evaluate", "--config", config, "--truth", "/nonexistent/truth.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "MissingTruth");
}

#[test]
fn stages_run_separately() {
    let dir = TempDir::new().unwrap();
    generate(&scenarios::selection_contract(), dir.path()).unwrap();
    let config = dir.path().join("config.toml");
    let config = config.to_str().unwrap();
    let out = prszz(&["trace", "--config", config]);
    assert_eq!(out.status.code(), Some(1), "tracing before matching must fail");
    for stage in ["ingest", "match", "trace", "evaluate"] {
        let out = prszz(&[stage, "--config", config, "--variants", "B,L"]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = dir.path().join("out");
    assert!(out.join("datasets/L_method.csv").exists());
    assert!(!out.join("traces/PR.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn bad_configuration_exits_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "project_id = \"x\"\nrepo_path = \"r\"\nsnapshot_dir = \"s\"\ntrackers = []\n").unwrap();
    let out = prszz(&["match", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = prszz(&["fixture", "--scenario", "nope", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
