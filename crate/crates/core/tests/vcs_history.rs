mod common;

use std::collections::BTreeSet;
use std::process::Command;

use common::{lines, TestRepo};
use prszz_core::filter::CosmeticEquivalence;
use prszz_core::lexer::Profiles;
use prszz_core::vcs::{BlameOptions, LineMapping, VcsError};
use prszz_core::{CommitId, Repository};
use proptest::prelude::*;

fn all_lines(n: usize) -> BTreeSet<usize> {
    (1..=n).collect()
}

fn git_cli_available() -> bool {
    Command::new("git").arg("--version").output().is_ok_and(|o| o.status.success())
}

/// Origin commit per line according to `git blame --porcelain`.
fn git_blame(repo: &TestRepo, path: &str) -> Vec<String> {
    let out = Command::new("git")
        .args(["blame", "--porcelain", "HEAD", "--", path])
        .current_dir(repo.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut origins = Vec::new();
    let mut expect_header = true;
    for line in text.lines() {
        if line.starts_with('\t') {
            expect_header = true;
            continue;
        }
        if expect_header {
            let sha = line.split(' ').next().unwrap();
            assert_eq!(sha.len(), 40, "unexpected porcelain line {line:?}");
            origins.push(sha.to_string());
            expect_header = false;
        }
    }
    origins
}

#[derive(Debug, Clone)]
enum Op {
    Insert { file: usize, at: usize, count: usize },
    Delete { file: usize, at: usize, count: usize },
    Replace { file: usize, at: usize, count: usize },
    Rename { file: usize },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..2usize, 0..40usize, 1..4usize).prop_map(|(file, at, count)| Op::Insert { file, at, count }),
        3 => (0..2usize, 0..40usize, 1..3usize).prop_map(|(file, at, count)| Op::Delete { file, at, count }),
        3 => (0..2usize, 0..40usize, 1..3usize).prop_map(|(file, at, count)| Op::Replace { file, at, count }),
        1 => (0..2usize).prop_map(|file| Op::Rename { file }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn blame_agrees_with_git_cli(ops in prop::collection::vec(op(), 1..14)) {
        if !git_cli_available() {
            return Ok(());
        }
        let mut repo = TestRepo::new();
        let mut counter = 0;
        let mut fresh = || { counter += 1; format!("statement_{counter}();") };
        let mut files: Vec<(String, Vec<String>)> = (0..2)
            .map(|i| (format!("src/f{i}.java"), (0..6).map(|_| fresh()).collect()))
            .collect();
        let write = |repo: &mut TestRepo, files: &[(String, Vec<String>)], msg: &str| {
            let owned: Vec<(String, String)> = files.iter().map(|(p, l)| (p.clone(), lines(&l.iter().map(String::as_str).collect::<Vec<_>>()))).collect();
            let refs: Vec<(&str, Option<&str>)> = owned.iter().map(|(p, c)| (p.as_str(), Some(c.as_str()))).collect();
            repo.commit(msg, &refs)
        };
        write(&mut repo, &files, "initial");
        for (i, op) in ops.iter().enumerate() {
            match *op {
                Op::Rename { file } => {
                    let old = files[file].0.clone();
                    let new = format!("src/renamed{i}_{file}.java");
                    repo.rename("rename", &old, &new);
                    files[file].0 = new;
                    continue;
                }
                Op::Insert { file, at, count } => {
                    let body = &mut files[file].1;
                    let at = at.min(body.len());
                    for k in 0..count { body.insert(at + k, fresh()); }
                }
                Op::Delete { file, at, count } => {
                    let body = &mut files[file].1;
                    if body.len() <= count { continue; }
                    let at = at.min(body.len() - count);
                    body.drain(at..at + count);
                }
                Op::Replace { file, at, count } => {
                    let body = &mut files[file].1;
                    let at = at.min(body.len().saturating_sub(count));
                    for k in at..(at + count).min(body.len()) { body[k] = fresh(); }
                }
            }
            write(&mut repo, &files, &format!("edit {i}"));
        }
        let ours = Repository::open(repo.path()).unwrap();
        let head = ours.head().unwrap();
        for (path, body) in &files {
            let expected = git_blame(&repo, path);
            let got = ours.blame_lines(&head, path, &all_lines(body.len())).unwrap();
            let got: Vec<String> = got.into_iter().map(|o| o.origin_commit.to_string()).collect();
            prop_assert_eq!(got, expected, "file {}", path);
        }
    }
}

#[test]
fn rename_keeps_original_origin() {
    let mut repo = TestRepo::new();
    let c1 = repo.commit("add", &[("a.py", Some(&lines(&["x = 1", "y = 2", "z = 3"])))]);
    repo.rename("move", "a.py", "b.py");
    let c3 = repo.commit("edit", &[("b.py", Some(&lines(&["x = 1", "y = 20", "z = 3"])))]);
    let r = Repository::open(repo.path()).unwrap();
    let origins = r.blame_lines(&r.head().unwrap(), "b.py", &all_lines(3)).unwrap();
    assert_eq!(origins[0].origin_commit, c1);
    assert_eq!(origins[0].origin_path, "a.py");
    assert_eq!(origins[1].origin_commit, c3);
    assert_eq!(origins[1].origin_path, "b.py");
}

#[cfg(unix)]
#[test]
fn mode_and_merge_commits_are_meta_changes() {
    let mut repo = TestRepo::new();
    let base = repo.commit("add", &[("run.sh", Some("echo 1\n")), ("lib.c", Some("int a;\n"))]);
    let chmod = repo.chmod("exec bit", "run.sh", 0o755);
    let side_base = chmod.clone();
    let main_edit = repo.commit("main edit", &[("lib.c", Some("int a;\nint b;\n"))]);
    repo.reset_to(&side_base);
    let side = repo.commit("side edit", &[("run.sh", Some("echo 2\n"))]);
    repo.reset_to(&main_edit);
    let merge = repo.merge("merge side", &side);

    let r = Repository::open(repo.path()).unwrap();
    assert!(r.is_meta_change(&chmod).unwrap());
    assert!(r.is_meta_change(&merge).unwrap());
    assert!(!r.is_meta_change(&main_edit).unwrap());
    assert!(!r.is_meta_change(&base).unwrap());

    // Under the meta policy the merge never owns a line; plain blame agrees
    // here because the merge did not change content itself.
    let opts = BlameOptions { skip_meta: true, ..BlameOptions::default() };
    let origins = r.blame_lines_with(&merge, "run.sh", &all_lines(1), opts).unwrap();
    assert_eq!(origins[0].1.as_ref().unwrap().origin_commit, side);
}

#[test]
fn whitespace_commit_is_skipped_by_cosmetic_blame() {
    let mut repo = TestRepo::new();
    let c1 = repo.commit("add", &[("A.java", Some(&lines(&["class A {", "int f() { return 1; }", "}"])))]);
    let c2 = repo.commit("reindent", &[("A.java", Some(&lines(&["class A {", "    int f() {  return 1;  }", "}"])))]);
    let r = Repository::open(repo.path()).unwrap();
    let plain = r.blame_lines(&c2, "A.java", &all_lines(3)).unwrap();
    assert_eq!(plain[1].origin_commit, c2);

    let profiles = Profiles::default();
    let eq = CosmeticEquivalence { profiles: &profiles };
    let opts = BlameOptions { equivalence: Some(&eq), ..BlameOptions::default() };
    let cosmetic = r.blame_lines_with(&c2, "A.java", &all_lines(3), opts).unwrap();
    assert_eq!(cosmetic[1].1.as_ref().unwrap().origin_commit, c1);
    assert_eq!(cosmetic[1].1.as_ref().unwrap().origin_line, 2);
}

#[test]
fn moved_block_keeps_origin_with_move_tracking() {
    let mut repo = TestRepo::new();
    let c1 = repo.commit("add", &[("m.go", Some(&lines(&["func a() {}", "func b() {}", "func c() {}", "func d() {}"])))]);
    let c2 = repo.commit("move a down", &[("m.go", Some(&lines(&["func b() {}", "func c() {}", "func d() {}", "func a() {}"])))]);
    let r = Repository::open(repo.path()).unwrap();
    let plain = r.blame_lines(&c2, "m.go", &all_lines(4)).unwrap();
    assert_eq!(plain[3].origin_commit, c2);
    let opts = BlameOptions { track_moves: true, ..BlameOptions::default() };
    let moved = r.blame_lines_with(&c2, "m.go", &all_lines(4), opts).unwrap();
    let origin = moved[3].1.as_ref().unwrap();
    assert_eq!((origin.origin_commit.clone(), origin.origin_line), (c1, 1));
}

#[test]
fn line_mapping_follows_insertions_and_reports_vanished_lines() {
    let mut repo = TestRepo::new();
    let c1 = repo.commit("add", &[("f.rs", Some(&lines(&["a", "b", "c", "d"])))]);
    repo.commit("insert", &[("f.rs", Some(&lines(&["new0", "new1", "a", "b", "c", "d"])))]);
    repo.rename("move", "f.rs", "g.rs");
    let c4 = repo.commit("drop b", &[("g.rs", Some(&lines(&["new0", "new1", "a", "c", "d"])))]);
    let r = Repository::open(repo.path()).unwrap();
    assert_eq!(
        r.map_line_across(&c4, &c1, "g.rs", 4).unwrap(),
        LineMapping::Mapped { path: "f.rs".into(), line: 3 }
    );
    assert_eq!(r.map_line_across(&c4, &c1, "g.rs", 1).unwrap(), LineMapping::Vanished);
    assert!(matches!(
        r.map_line_across(&c4, &c1, "g.rs", 9),
        Err(VcsError::LineOutOfRange { .. })
    ));
}

#[test]
fn blame_cache_survives_reload_for_same_head() {
    let mut repo = TestRepo::new();
    repo.commit("add", &[("x.txt", Some("1\n2\n"))]);
    let r = Repository::open(repo.path()).unwrap();
    let head = r.head().unwrap();
    let first = r.blame_lines(&head, "x.txt", &all_lines(2)).unwrap();
    let cache = repo.path().join("cache.json");
    r.save_blame_cache(&cache).unwrap();
    let fresh = Repository::open(repo.path()).unwrap();
    assert!(fresh.load_blame_cache(&cache).unwrap());
    assert_eq!(fresh.blame_lines(&head, "x.txt", &all_lines(2)).unwrap(), first);

    repo.commit("more", &[("x.txt", Some("1\n2\n3\n"))]);
    let moved = Repository::open(repo.path()).unwrap();
    assert!(!moved.load_blame_cache(&cache).unwrap());
}

#[test]
fn unknown_commit_is_reported() {
    let mut repo = TestRepo::new();
    repo.commit("add", &[("x.txt", Some("1\n"))]);
    let r = Repository::open(repo.path()).unwrap();
    let missing = CommitId::parse(&"ab".repeat(20)).unwrap();
    assert!(matches!(r.commit(&missing), Err(VcsError::UnknownCommit(_))));
}
