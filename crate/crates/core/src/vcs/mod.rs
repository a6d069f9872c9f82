//! Read-only view of a git repository.
//!
//! Everything the tracer needs from version control goes through
//! [`Repository`]: commit metadata, tree diffs with rename detection,
//! annotate (blame) and mapping a physical line across revisions. Diffs are
//! byte-exact; whitespace and comment policy is applied by callers through
//! [`BlameOptions`].

mod align;
mod blame;
mod linemap;

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::LineAlignment;
pub use blame::{BlameOptions, LineEquivalence};
pub use linemap::LineMapping;

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("not a git repository: {0}")]
    NotARepository(PathBuf),
    #[error("corrupt object database: {0}")]
    CorruptObjectDatabase(String),
    #[error("unknown commit: {0}")]
    UnknownCommit(String),
    #[error("path {path} not present at {commit}")]
    PathNotPresent { commit: CommitId, path: String },
    #[error("line {line} out of range for {path} ({len} lines)")]
    LineOutOfRange { path: String, line: usize, len: usize },
    #[error("{to} is not an ancestor of {from}")]
    NotAncestor { from: CommitId, to: CommitId },
    #[error("invalid commit id: {0:?}")]
    InvalidId(String),
    #[error(transparent)]
    Git(#[from] git2::Error),
}

pub type Result<T> = std::result::Result<T, VcsError>;

/// 40-character lowercase hex object name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CommitId(String);

impl CommitId {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() == 40 && s.bytes().all(|b| b.is_ascii_hexdigit()) {
            Ok(CommitId(s.to_ascii_lowercase()))
        } else {
            Err(VcsError::InvalidId(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn short(&self) -> &str {
        &self.0[..10]
    }

    fn oid(&self) -> git2::Oid {
        git2::Oid::from_str(&self.0).expect("validated on construction")
    }
}

impl From<git2::Oid> for CommitId {
    fn from(oid: git2::Oid) -> Self {
        CommitId(oid.to_string())
    }
}

impl TryFrom<String> for CommitId {
    type Error = VcsError;
    fn try_from(s: String) -> Result<Self> {
        CommitId::parse(&s)
    }
}

impl From<CommitId> for String {
    fn from(id: CommitId) -> String {
        id.0
    }
}

impl FromStr for CommitId {
    type Err = VcsError;
    fn from_str(s: &str) -> Result<Self> {
        CommitId::parse(s)
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommitId({})", self.short())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub id: CommitId,
    pub parents: Vec<CommitId>,
    pub author_name: String,
    pub author_email: String,
    pub author_time: i64,
    pub commit_time: i64,
    pub message: String,
}

impl Commit {
    pub fn is_merge(&self) -> bool {
        self.parents.len() >= 2
    }

    pub fn first_parent(&self) -> Option<&CommitId> {
        self.parents.first()
    }

    pub fn summary(&self) -> &str {
        self.message.lines().next().unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeKind {
    Added,
    Deleted,
    Modified,
    Renamed,
    MetaOnly,
}

/// Removed and added lines of one contiguous change. Context lines are never
/// included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub removed: Vec<(usize, String)>,
    pub new_start: usize,
    pub added: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
    pub change_kind: ChangeKind,
}

impl FileDiff {
    /// New path when present, else the old one.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    pub fn touches(&self, path: &str) -> bool {
        self.new_path.as_deref() == Some(path) || self.old_path.as_deref() == Some(path)
    }

    pub fn removed_count(&self) -> usize {
        self.hunks.iter().map(|h| h.removed.len()).sum()
    }

    pub fn added_count(&self) -> usize {
        self.hunks.iter().map(|h| h.added.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineOrigin {
    pub path: String,
    pub line: usize,
    pub origin_commit: CommitId,
    pub origin_path: String,
    pub origin_line: usize,
}

#[derive(Clone)]
pub(crate) struct FileVersion {
    pub blob: git2::Oid,
    pub lines: Rc<Vec<String>>,
}

/// Handle on an opened repository. Never writes to the repository.
///
/// The handle caches commit metadata, blob contents, line alignments and
/// blame results. It is neither `Send` nor `Sync`; workers that need parallel
/// access call [`Repository::reopen`] to get their own handle.
pub struct Repository {
    git: git2::Repository,
    path: PathBuf,
    commits: RefCell<HashMap<CommitId, Rc<Commit>>>,
    reachable: RefCell<Option<Rc<Vec<CommitId>>>>,
    reachable_set: RefCell<Option<Rc<HashSet<CommitId>>>>,
    parent_diffs: RefCell<HashMap<CommitId, Rc<Vec<FileDiff>>>>,
    blobs: RefCell<HashMap<git2::Oid, Rc<Vec<String>>>>,
    alignments: RefCell<HashMap<(git2::Oid, git2::Oid), Rc<LineAlignment>>>,
    renames: RefCell<HashMap<(CommitId, CommitId, String), Option<String>>>,
    blame_cache: RefCell<HashMap<String, Rc<Vec<Option<LineOrigin>>>>>,
}

impl Repository {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(VcsError::NotARepository(path.to_path_buf()));
        }
        let git = git2::Repository::open(path).map_err(|e| match e.code() {
            git2::ErrorCode::NotFound => VcsError::NotARepository(path.to_path_buf()),
            _ if e.class() == git2::ErrorClass::Odb => {
                VcsError::CorruptObjectDatabase(e.message().to_string())
            }
            _ => VcsError::NotARepository(path.to_path_buf()),
        })?;
        // Touch the object database so a broken one fails at open time.
        git.odb()
            .map_err(|e| VcsError::CorruptObjectDatabase(e.message().to_string()))?;
        Ok(Repository {
            git,
            path: path.to_path_buf(),
            commits: RefCell::default(),
            reachable: RefCell::default(),
            reachable_set: RefCell::default(),
            parent_diffs: RefCell::default(),
            blobs: RefCell::default(),
            alignments: RefCell::default(),
            renames: RefCell::default(),
            blame_cache: RefCell::default(),
        })
    }

    /// Opens a fresh handle on the same repository, sharing nothing.
    pub fn reopen(&self) -> Result<Self> {
        Repository::open(&self.path)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn commit(&self, id: &CommitId) -> Result<Commit> {
        self.commit_rc(id).map(|c| (*c).clone())
    }

    pub(crate) fn commit_rc(&self, id: &CommitId) -> Result<Rc<Commit>> {
        if let Some(c) = self.commits.borrow().get(id) {
            return Ok(c.clone());
        }
        let raw = self
            .git
            .find_commit(id.oid())
            .map_err(|_| VcsError::UnknownCommit(id.to_string()))?;
        let author = raw.author();
        let commit = Rc::new(Commit {
            id: id.clone(),
            parents: raw.parent_ids().map(CommitId::from).collect(),
            author_name: author.name().unwrap_or_default().to_string(),
            author_email: author.email().unwrap_or_default().to_string(),
            author_time: author.when().seconds(),
            commit_time: raw.time().seconds(),
            message: String::from_utf8_lossy(raw.message_bytes()).into_owned(),
        });
        self.commits.borrow_mut().insert(id.clone(), commit.clone());
        Ok(commit)
    }

    /// Parses a hex id or revision expression and resolves it to a commit.
    pub fn resolve(&self, spec: &str) -> Result<CommitId> {
        let obj = self
            .git
            .revparse_single(spec)
            .map_err(|_| VcsError::UnknownCommit(spec.to_string()))?;
        let commit = obj
            .peel_to_commit()
            .map_err(|_| VcsError::UnknownCommit(spec.to_string()))?;
        Ok(commit.id().into())
    }

    pub fn head(&self) -> Result<CommitId> {
        let head = self.git.head()?;
        Ok(head.peel_to_commit()?.id().into())
    }

    /// All commits reachable from any reference, newest first in topological
    /// order. Unreferenced objects are not part of history.
    pub fn all_commits(&self) -> Result<Rc<Vec<CommitId>>> {
        if let Some(all) = self.reachable.borrow().as_ref() {
            return Ok(all.clone());
        }
        let mut walk = self.git.revwalk()?;
        walk.set_sorting(git2::Sort::TOPOLOGICAL | git2::Sort::TIME)?;
        let mut names: Vec<String> = Vec::new();
        for r in self.git.references()? {
            let r = r?;
            if let Ok(name) = r.name() {
                names.push(name.to_string());
            }
        }
        names.sort();
        let mut pushed = false;
        for name in &names {
            if let Ok(r) = self.git.find_reference(name) {
                if let Ok(c) = r.peel_to_commit() {
                    walk.push(c.id())?;
                    pushed = true;
                }
            }
        }
        if let Ok(head) = self.git.head() {
            if let Ok(c) = head.peel_to_commit() {
                walk.push(c.id())?;
                pushed = true;
            }
        }
        let ids: Vec<CommitId> = if pushed {
            walk.map(|r| r.map(CommitId::from))
                .collect::<std::result::Result<_, _>>()?
        } else {
            Vec::new()
        };
        let ids = Rc::new(ids);
        *self.reachable.borrow_mut() = Some(ids.clone());
        Ok(ids)
    }

    /// True if the commit is part of the reachable history.
    pub fn contains(&self, id: &CommitId) -> Result<bool> {
        if self.reachable_set.borrow().is_none() {
            let set: HashSet<CommitId> = self.all_commits()?.iter().cloned().collect();
            *self.reachable_set.borrow_mut() = Some(Rc::new(set));
        }
        Ok(self
            .reachable_set
            .borrow()
            .as_ref()
            .map(|s| s.contains(id))
            .unwrap_or(false))
    }

    /// First-parent chain starting at HEAD, newest first.
    pub fn mainline(&self) -> Result<Vec<CommitId>> {
        let mut out = Vec::new();
        let mut cur = Some(self.head()?);
        while let Some(id) = cur {
            let c = self.commit_rc(&id)?;
            cur = c.first_parent().cloned();
            out.push(id);
        }
        Ok(out)
    }

    /// `ancestor` equals `descendant` or is reachable from it through parents.
    pub fn is_ancestor(&self, ancestor: &CommitId, descendant: &CommitId) -> Result<bool> {
        if ancestor == descendant {
            return Ok(true);
        }
        self.commit_rc(ancestor)?;
        self.commit_rc(descendant)?;
        Ok(self
            .git
            .graph_descendant_of(descendant.oid(), ancestor.oid())?)
    }

    pub(crate) fn file_version(&self, commit: &CommitId, path: &str) -> Result<Option<FileVersion>> {
        let raw = self
            .git
            .find_commit(commit.oid())
            .map_err(|_| VcsError::UnknownCommit(commit.to_string()))?;
        let tree = raw.tree()?;
        let entry = match tree.get_path(Path::new(path)) {
            Ok(e) => e,
            Err(e) if e.code() == git2::ErrorCode::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if entry.kind() != Some(git2::ObjectType::Blob) {
            return Ok(None);
        }
        let blob = entry.id();
        let lines = self.blob_lines(blob)?;
        Ok(Some(FileVersion { blob, lines }))
    }

    fn blob_lines(&self, oid: git2::Oid) -> Result<Rc<Vec<String>>> {
        if let Some(l) = self.blobs.borrow().get(&oid) {
            return Ok(l.clone());
        }
        let blob = self.git.find_blob(oid)?;
        let lines = Rc::new(split_lines(blob.content()));
        self.blobs.borrow_mut().insert(oid, lines.clone());
        Ok(lines)
    }

    /// Lines of `path` at `commit`, or `None` when the path is absent.
    pub fn file_lines(&self, commit: &CommitId, path: &str) -> Result<Option<Rc<Vec<String>>>> {
        Ok(self.file_version(commit, path)?.map(|v| v.lines))
    }

    /// Tree diff from `base` to `target` with rename detection at 50%
    /// similarity and no context lines.
    pub fn diff_commits(&self, base: &CommitId, target: &CommitId) -> Result<Vec<FileDiff>> {
        if base == target {
            self.commit_rc(base)?;
            return Ok(Vec::new());
        }
        let old = self
            .git
            .find_commit(base.oid())
            .map_err(|_| VcsError::UnknownCommit(base.to_string()))?
            .tree()?;
        let new = self
            .git
            .find_commit(target.oid())
            .map_err(|_| VcsError::UnknownCommit(target.to_string()))?
            .tree()?;
        self.diff_trees(Some(&old), &new)
    }

    /// Diff of a commit against its first parent (or the empty tree for a
    /// root commit). Cached.
    pub fn diff_to_parent(&self, commit: &CommitId) -> Result<Rc<Vec<FileDiff>>> {
        if let Some(d) = self.parent_diffs.borrow().get(commit) {
            return Ok(d.clone());
        }
        let c = self.commit_rc(commit)?;
        let diffs = match c.first_parent() {
            Some(p) => self.diff_commits(p, commit)?,
            None => {
                let new = self.git.find_commit(commit.oid())?.tree()?;
                self.diff_trees(None, &new)?
            }
        };
        let diffs = Rc::new(diffs);
        self.parent_diffs
            .borrow_mut()
            .insert(commit.clone(), diffs.clone());
        Ok(diffs)
    }

    fn diff_trees(&self, old: Option<&git2::Tree<'_>>, new: &git2::Tree<'_>) -> Result<Vec<FileDiff>> {
        let mut opts = diff_options();
        let mut diff = self
            .git
            .diff_tree_to_tree(old, Some(new), Some(&mut opts))?;
        let mut find = git2::DiffFindOptions::new();
        find.renames(true).rename_threshold(50);
        diff.find_similar(Some(&mut find))?;

        let mut out = Vec::with_capacity(diff.deltas().len());
        for idx in 0..diff.deltas().len() {
            let delta = diff.get_delta(idx).expect("index in range");
            let old_path = delta
                .old_file()
                .path()
                .map(|p| p.to_string_lossy().into_owned());
            let new_path = delta
                .new_file()
                .path()
                .map(|p| p.to_string_lossy().into_owned());
            let status = delta.status();
            let (old_path, new_path) = match status {
                git2::Delta::Added | git2::Delta::Untracked => (None, new_path),
                git2::Delta::Deleted => (old_path, None),
                _ => (old_path, new_path),
            };
            let binary = delta.flags().is_binary();
            let hunks = if binary {
                Vec::new()
            } else {
                match git2::Patch::from_diff(&diff, idx)? {
                    Some(patch) => {
                        if patch.delta().flags().is_binary() {
                            Vec::new()
                        } else {
                            patch_hunks(&patch)?
                        }
                    }
                    None => Vec::new(),
                }
            };
            let mode_changed = delta.old_file().mode() != delta.new_file().mode();
            let change_kind = match status {
                _ if binary => ChangeKind::MetaOnly,
                git2::Delta::Added | git2::Delta::Untracked | git2::Delta::Copied => {
                    ChangeKind::Added
                }
                git2::Delta::Deleted => ChangeKind::Deleted,
                git2::Delta::Renamed => ChangeKind::Renamed,
                _ if hunks.is_empty() && mode_changed => ChangeKind::MetaOnly,
                _ => ChangeKind::Modified,
            };
            let (old_path, new_path) = if status == git2::Delta::Copied {
                (None, new_path)
            } else {
                (old_path, new_path)
            };
            out.push(FileDiff {
                old_path,
                new_path,
                hunks,
                change_kind,
            });
        }
        Ok(out)
    }

    /// Merge commits and commits whose diff consists only of mode/permission
    /// or binary changes.
    pub fn is_meta_change(&self, commit: &CommitId) -> Result<bool> {
        let c = self.commit_rc(commit)?;
        if c.is_merge() {
            return Ok(true);
        }
        if c.parents.is_empty() {
            return Ok(false);
        }
        let diffs = self.diff_to_parent(commit)?;
        Ok(diffs.iter().all(|d| d.change_kind == ChangeKind::MetaOnly))
    }

    /// Changed files plus changed lines of the commit's own first-parent diff.
    pub fn change_size(&self, commit: &CommitId) -> Result<usize> {
        let diffs = self.diff_to_parent(commit)?;
        Ok(diffs.len()
            + diffs
                .iter()
                .map(|d| d.removed_count() + d.added_count())
                .sum::<usize>())
    }

    /// Path of `path@child` in `parent`, following a whole-file rename.
    pub(crate) fn path_in_parent(
        &self,
        child: &CommitId,
        parent: &CommitId,
        path: &str,
    ) -> Result<Option<String>> {
        let key = (child.clone(), parent.clone(), path.to_string());
        if let Some(p) = self.renames.borrow().get(&key) {
            return Ok(p.clone());
        }
        let found = if self.file_version(parent, path)?.is_some() {
            Some(path.to_string())
        } else {
            self.diff_commits(parent, child)?
                .into_iter()
                .find(|d| {
                    d.change_kind == ChangeKind::Renamed && d.new_path.as_deref() == Some(path)
                })
                .and_then(|d| d.old_path)
        };
        self.renames.borrow_mut().insert(key, found.clone());
        Ok(found)
    }

    pub(crate) fn alignment(
        &self,
        old: &FileVersion,
        new: &FileVersion,
    ) -> Result<Rc<LineAlignment>> {
        let key = (old.blob, new.blob);
        if let Some(a) = self.alignments.borrow().get(&key) {
            return Ok(a.clone());
        }
        let a = if old.blob == new.blob {
            LineAlignment::identity(old.lines.len())
        } else {
            let old_blob = self.git.find_blob(old.blob)?;
            let new_blob = self.git.find_blob(new.blob)?;
            let mut opts = diff_options();
            let patch = git2::Patch::from_blobs(
                &old_blob,
                None,
                &new_blob,
                None,
                Some(&mut opts),
            )?;
            let mut removed = BTreeSet::new();
            let mut added = BTreeSet::new();
            for h in 0..patch.num_hunks() {
                for l in 0..patch.num_lines_in_hunk(h)? {
                    let line = patch.line_in_hunk(h, l)?;
                    match line.origin() {
                        '-' => {
                            removed.insert(line.old_lineno().unwrap_or(0) as usize);
                        }
                        '+' => {
                            added.insert(line.new_lineno().unwrap_or(0) as usize);
                        }
                        _ => {}
                    }
                }
            }
            LineAlignment::new(old.lines.len(), new.lines.len(), &removed, &added)
        };
        let a = Rc::new(a);
        self.alignments.borrow_mut().insert(key, a.clone());
        Ok(a)
    }

    /// Blame results computed so far, as plain data that can cross threads.
    pub fn export_blame_cache(&self) -> Vec<(String, Vec<Option<LineOrigin>>)> {
        self.blame_cache
            .borrow()
            .iter()
            .map(|(k, v)| (k.clone(), (**v).clone()))
            .collect()
    }

    /// Adds results exported from another handle on the same repository.
    pub fn import_blame_cache(&self, entries: Vec<(String, Vec<Option<LineOrigin>>)>) {
        let mut cache = self.blame_cache.borrow_mut();
        for (k, v) in entries {
            cache.entry(k).or_insert_with(|| Rc::new(v));
        }
    }

    /// Serializes the blame cache. Entries are only valid for the head they
    /// were computed against; see [`Repository::load_blame_cache`].
    pub fn save_blame_cache(&self, file: &Path) -> Result<()> {
        let head = self.head()?;
        let cache = self.blame_cache.borrow();
        let mut entries: Vec<(&String, &Rc<Vec<Option<LineOrigin>>>)> = cache.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let map: serde_json::Map<String, serde_json::Value> = entries
            .into_iter()
            .map(|(k, v)| (k.clone(), serde_json::to_value(&**v).expect("serializable")))
            .collect();
        let doc = serde_json::json!({ "head": head, "entries": map });
        if let Some(dir) = file.parent() {
            std::fs::create_dir_all(dir).map_err(|e| VcsError::CorruptObjectDatabase(e.to_string()))?;
        }
        std::fs::write(file, serde_json::to_vec(&doc).expect("serializable"))
            .map_err(|e| VcsError::CorruptObjectDatabase(e.to_string()))?;
        Ok(())
    }

    /// Loads a cache written by [`Repository::save_blame_cache`]. Returns
    /// false (and loads nothing) when the file is missing, unreadable or was
    /// written for a different head.
    pub fn load_blame_cache(&self, file: &Path) -> Result<bool> {
        let Ok(bytes) = std::fs::read(file) else {
            return Ok(false);
        };
        let Ok(doc) = serde_json::from_slice::<serde_json::Value>(&bytes) else {
            return Ok(false);
        };
        let head = self.head()?;
        if doc.get("head").and_then(|h| h.as_str()) != Some(head.as_str()) {
            return Ok(false);
        }
        let Some(entries) = doc.get("entries").and_then(|e| e.as_object()) else {
            return Ok(false);
        };
        let mut cache = self.blame_cache.borrow_mut();
        for (k, v) in entries {
            if let Ok(origins) = serde_json::from_value::<Vec<Option<LineOrigin>>>(v.clone()) {
                cache.insert(k.clone(), Rc::new(origins));
            }
        }
        Ok(true)
    }
}

fn diff_options() -> git2::DiffOptions {
    let mut opts = git2::DiffOptions::new();
    opts.context_lines(0).interhunk_lines(0).indent_heuristic(true);
    opts
}

fn patch_hunks(patch: &git2::Patch<'_>) -> Result<Vec<Hunk>> {
    let mut hunks = Vec::with_capacity(patch.num_hunks());
    for h in 0..patch.num_hunks() {
        let (header, n) = patch.hunk(h)?;
        let mut hunk = Hunk {
            old_start: header.old_start() as usize,
            removed: Vec::new(),
            new_start: header.new_start() as usize,
            added: Vec::new(),
        };
        for l in 0..n {
            let line = patch.line_in_hunk(h, l)?;
            let text = line_text(line.content());
            match line.origin() {
                '-' => hunk
                    .removed
                    .push((line.old_lineno().unwrap_or(0) as usize, text)),
                '+' => hunk
                    .added
                    .push((line.new_lineno().unwrap_or(0) as usize, text)),
                _ => {}
            }
        }
        if let Some((first, _)) = hunk.removed.first() {
            hunk.old_start = *first;
        }
        if let Some((first, _)) = hunk.added.first() {
            hunk.new_start = *first;
        }
        hunks.push(hunk);
    }
    Ok(hunks)
}

fn line_text(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes);
    s.strip_suffix('\n').unwrap_or(&s).to_string()
}

pub(crate) fn split_lines(content: &[u8]) -> Vec<String> {
    if content.is_empty() {
        return Vec::new();
    }
    let text = String::from_utf8_lossy(content);
    let mut lines: Vec<String> = text.split('\n').map(str::to_string).collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_id_validation() {
        assert!(CommitId::parse("abc").is_err());
        let id = CommitId::parse(&"A".repeat(40)).unwrap();
        assert_eq!(id.as_str(), "a".repeat(40));
        assert!(CommitId::parse(&"g".repeat(40)).is_err());
    }

    #[test]
    fn split_lines_handles_trailing_newline() {
        assert_eq!(split_lines(b"a\nb\n"), vec!["a", "b"]);
        assert_eq!(split_lines(b"a\nb"), vec!["a", "b"]);
        assert!(split_lines(b"").is_empty());
        assert_eq!(split_lines(b"\n"), vec![""]);
    }

    #[test]
    fn empty_dir_is_not_a_repository() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Repository::open(dir.path()),
            Err(VcsError::NotARepository(_))
        ));
    }
}
