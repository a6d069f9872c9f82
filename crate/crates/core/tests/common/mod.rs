#![allow(dead_code)]

use std::fs;
use std::path::Path;

use git2::{Signature, Time};
use prszz_core::CommitId;
use tempfile::TempDir;

/// Small git repository builder with fixed identities and timestamps.
pub struct TestRepo {
    pub dir: TempDir,
    pub git: git2::Repository,
    time: i64,
}

impl TestRepo {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let git = git2::Repository::init(dir.path()).unwrap();
        TestRepo { dir, git, time: 1_600_000_000 }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    fn signature(&mut self) -> Signature<'static> {
        self.time += 1000;
        Signature::new("Test", "test@example.invalid", &Time::new(self.time, 0)).unwrap()
    }

    /// Writes (`Some`) or deletes (`None`) files and commits on HEAD.
    pub fn commit(&mut self, message: &str, files: &[(&str, Option<&str>)]) -> CommitId {
        for (path, content) in files {
            let full = self.path().join(path);
            match content {
                Some(text) => {
                    if let Some(dir) = full.parent() {
                        fs::create_dir_all(dir).unwrap();
                    }
                    fs::write(&full, text).unwrap();
                }
                None => fs::remove_file(&full).unwrap(),
            }
        }
        self.commit_workdir(message)
    }

    pub fn rename(&mut self, message: &str, from: &str, to: &str) -> CommitId {
        fs::rename(self.path().join(from), self.path().join(to)).unwrap();
        self.commit_workdir(message)
    }

    #[cfg(unix)]
    pub fn chmod(&mut self, message: &str, path: &str, mode: u32) -> CommitId {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(self.path().join(path), fs::Permissions::from_mode(mode)).unwrap();
        self.commit_workdir(message)
    }

    pub fn commit_workdir(&mut self, message: &str) -> CommitId {
        let sig = self.signature();
        let mut index = self.git.index().unwrap();
        index.add_all(["*"], git2::IndexAddOption::DEFAULT, None).unwrap();
        index.update_all(["*"], None).unwrap();
        index.write().unwrap();
        let tree = self.git.find_tree(index.write_tree().unwrap()).unwrap();
        let parents: Vec<git2::Commit> = self.git.head().ok().and_then(|h| h.peel_to_commit().ok()).into_iter().collect();
        let parent_refs: Vec<&git2::Commit> = parents.iter().collect();
        let oid = self.git.commit(Some("HEAD"), &sig, &sig, message, &tree, &parent_refs).unwrap();
        CommitId::parse(&oid.to_string()).unwrap()
    }

    /// Creates a merge commit of HEAD and `other` whose tree is `other`'s
    /// tree merged into HEAD without conflicts.
    pub fn merge(&mut self, message: &str, other: &CommitId) -> CommitId {
        let sig = self.signature();
        let head = self.git.head().unwrap().peel_to_commit().unwrap();
        let theirs = self.git.find_commit(git2::Oid::from_str(other.as_str()).unwrap()).unwrap();
        let mut index = self.git.merge_commits(&head, &theirs, None).unwrap();
        assert!(!index.has_conflicts());
        let tree = self.git.find_tree(index.write_tree_to(&self.git).unwrap()).unwrap();
        let oid = self.git.commit(Some("HEAD"), &sig, &sig, message, &tree, &[&head, &theirs]).unwrap();
        self.git.checkout_head(Some(git2::build::CheckoutBuilder::new().force())).unwrap();
        CommitId::parse(&oid.to_string()).unwrap()
    }

    /// Points HEAD's branch at `commit` and checks it out.
    pub fn reset_to(&mut self, commit: &CommitId) {
        let obj = self.git.find_object(git2::Oid::from_str(commit.as_str()).unwrap(), None).unwrap();
        self.git.reset(&obj, git2::ResetType::Hard, None).unwrap();
    }
}

pub fn lines(items: &[&str]) -> String {
    let mut s = items.join("\n");
    s.push('\n');
    s
}
