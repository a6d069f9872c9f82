//! Reduction of a fixing commit's diff to the lines worth tracing: diff base
//! and file filters from pull-request data, size thresholds, cosmetic lines
//! and method spans.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixes::{mentions_bug, FixRecord};
use crate::forge::{InnerCommit, PullRequest};
use crate::lexer::{enclosing_method, Profiles, SpanLookup};
use crate::links::{DistinctBug, LinkPatterns};
use crate::reconstruct::InnerCommitMap;
use crate::vcs::{ChangeKind, CommitId, FileDiff, Hunk, LineEquivalence, Repository, VcsError};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("no ancestor of {0} outside the fixing pull request")]
    NoAncestorOutsidePr(CommitId),
    #[error("fix record of {0} has no fixing commit")]
    NoFixingCommit(String),
    #[error(transparent)]
    Vcs(#[from] VcsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    F1,
    F2,
    F3,
    SizeThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_files: usize,
    pub max_lines: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_files: 100,
            max_lines: 10_000,
        }
    }
}

/// Nearest first-parent ancestor of the fixing commit that is not part of
/// the fixing pull request; the plain first parent without one.
pub fn diff_base_f1(repo: &Repository, fix: &CommitId, map: Option<&InnerCommitMap>) -> Result<CommitId, FilterError> {
    let mut cur = repo.commit(fix)?.first_parent().cloned();
    while let Some(id) = cur {
        match map {
            Some(m) if m.contains(&id) => cur = repo.commit(&id)?.first_parent().cloned(),
            _ => return Ok(id),
        }
    }
    Err(FilterError::NoAncestorOutsidePr(fix.clone()))
}

fn inner_file_paths(commits: &[&InnerCommit]) -> Option<BTreeSet<String>> {
    if commits.iter().all(|c| c.files.is_empty()) {
        return None;
    }
    Some(commits.iter().flat_map(|c| c.files.iter().map(|f| f.path.clone())).collect())
}

fn keep_paths(diff: Vec<FileDiff>, paths: &BTreeSet<String>) -> Vec<FileDiff> {
    diff.into_iter()
        .filter(|d| {
            d.new_path.as_ref().is_some_and(|p| paths.contains(p)) || d.old_path.as_ref().is_some_and(|p| paths.contains(p))
        })
        .collect()
}

/// Drops files no inner commit of the pull request touched. `Err` hands the
/// input back when the forge provided no file lists.
pub fn filter_files_f2(diff: Vec<FileDiff>, pr: &PullRequest) -> Result<Vec<FileDiff>, Vec<FileDiff>> {
    let inner: Vec<&InnerCommit> = pr.inner_commits.iter().collect();
    match inner_file_paths(&inner) {
        Some(paths) => Ok(keep_paths(diff, &paths)),
        None => Err(diff),
    }
}

/// Inner commit most likely to be the actual fix, scored like fixing
/// commits: author is the bug assignee, message mentions the bug, most
/// recent before the bug was closed. Ties go to the newest author time.
pub fn select_inner_fix<'p>(pr: &'p PullRequest, bug: &DistinctBug, patterns: &LinkPatterns) -> Option<&'p InnerCommit> {
    let assignee = bug.merged_ticket.assignee.as_deref().map(|a| a.trim().to_lowercase());
    let recent = pr
        .inner_commits
        .iter()
        .filter(|c| bug.closed_at().is_none_or(|t| c.author_time <= t))
        .max_by(|a, b| a.author_time.cmp(&b.author_time).then(b.hash.cmp(&a.hash)))
        .map(|c| c.hash.clone());
    pr.inner_commits
        .iter()
        .map(|c| {
            let mut score = 0u32;
            if let Some(a) = &assignee {
                let local = c.author_email.split('@').next().unwrap_or("").to_lowercase();
                if !a.is_empty() && (*a == c.author_name.trim().to_lowercase() || *a == local) {
                    score += 1;
                }
            }
            if mentions_bug(&c.message, bug, patterns) {
                score += 1;
            }
            if recent.as_ref() == Some(&c.hash) {
                score += 1;
            }
            (c, score)
        })
        .min_by(|(a, sa), (b, sb)| {
            sb.cmp(sa)
                .then(b.author_time.cmp(&a.author_time))
                .then(a.hash.cmp(&b.hash))
        })
        .map(|(c, _)| c)
}

/// For a squashed fixing pull request keeps only the files of the inner
/// commit selected by [`select_inner_fix`]. `Err` returns the input when the
/// filter does not apply.
pub fn filter_files_f3(
    diff: Vec<FileDiff>,
    pr: &PullRequest,
    map: &InnerCommitMap,
    bug: &DistinctBug,
    patterns: &LinkPatterns,
) -> Result<(Vec<FileDiff>, CommitId), Vec<FileDiff>> {
    if !map.is_squashed() {
        return Err(diff);
    }
    let Some(inner) = select_inner_fix(pr, bug, patterns) else {
        return Err(diff);
    };
    match inner_file_paths(&[inner]) {
        Some(paths) => Ok((keep_paths(diff, &paths), inner.hash.clone())),
        None => Err(diff),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SizeCheck {
    Pass(Vec<FileDiff>),
    Rejected(String),
}

/// Rejects fixes with more than `max_files` files or `max_lines` changed
/// lines (both bounds inclusive).
pub fn apply_size_threshold(diff: Vec<FileDiff>, thresholds: Thresholds) -> SizeCheck {
    let lines: usize = diff.iter().map(|d| d.removed_count() + d.added_count()).sum();
    if diff.len() > thresholds.max_files {
        SizeCheck::Rejected(format!("{} files exceed {}", diff.len(), thresholds.max_files))
    } else if lines > thresholds.max_lines {
        SizeCheck::Rejected(format!("{lines} changed lines exceed {}", thresholds.max_lines))
    } else {
        SizeCheck::Pass(diff)
    }
}

/// Cosmetic lines of a hunk: a removed line is cosmetic when it carries no
/// code or an added line of the same hunk normalizes to the same text
/// (matched as multisets), and symmetrically for added lines.
pub fn cosmetic_lines(hunk: &Hunk, profile: Option<&crate::lexer::LanguageProfile>) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let Some(p) = profile else {
        return (BTreeSet::new(), BTreeSet::new());
    };
    let mut removed_c = BTreeSet::new();
    let mut added_c = BTreeSet::new();
    let mut pool: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (n, text) in &hunk.added {
        if p.is_cosmetic_side(text) {
            added_c.insert(*n);
        } else {
            pool.entry(p.normalize(text)).or_default().push(*n);
        }
    }
    for (n, text) in &hunk.removed {
        if p.is_cosmetic_side(text) {
            removed_c.insert(*n);
            continue;
        }
        if let Some(slot) = pool.get_mut(&p.normalize(text)) {
            if !slot.is_empty() {
                let a = slot.remove(0);
                removed_c.insert(*n);
                added_c.insert(a);
            }
        }
    }
    (removed_c, added_c)
}

/// Blame equivalence that looks through whitespace and comment rewrites.
pub struct CosmeticEquivalence<'a> {
    pub profiles: &'a Profiles,
}

impl LineEquivalence for CosmeticEquivalence<'_> {
    fn tag(&self) -> &str {
        "cosmetic"
    }

    fn equivalent(&self, path: &str, old: &str, new: &str) -> bool {
        match self.profiles.for_path(path) {
            Some(p) => {
                let n = p.normalize(new);
                !n.is_empty() && p.normalize(old) == n
            }
            None => false,
        }
    }
}

/// Method around `line` of `path` at `commit`.
pub fn enclosing_method_span(
    repo: &Repository,
    commit: &CommitId,
    path: &str,
    line: usize,
    profiles: &Profiles,
) -> Result<SpanLookup, VcsError> {
    let lines = repo.file_lines(commit, path)?.ok_or_else(|| VcsError::PathNotPresent {
        commit: commit.clone(),
        path: path.to_string(),
    })?;
    if line == 0 || line > lines.len() {
        return Err(VcsError::LineOutOfRange {
            path: path.to_string(),
            line,
            len: lines.len(),
        });
    }
    Ok(match profiles.for_path(path) {
        Some(p) => enclosing_method(&lines, line, p),
        None => SpanLookup::WholeFile,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub size_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredFix {
    pub fix: FixRecord,
    pub fix_commit: CommitId,
    pub base: CommitId,
    pub files: Vec<FileDiff>,
    pub filters_applied: BTreeSet<FilterKind>,
    pub rejected: Option<String>,
    /// Inner commit kept by f3.
    pub inner_fix: Option<CommitId>,
}

pub struct FilterContext<'a> {
    pub repo: &'a Repository,
    pub patterns: &'a LinkPatterns,
    pub thresholds: Thresholds,
}

/// Diff of the fixing commit against its base, reduced by the enabled
/// filters. Binary and mode-only changes never carry traceable lines.
pub fn filter_fix(
    ctx: &FilterContext<'_>,
    fix: &FixRecord,
    bug: &DistinctBug,
    pr: Option<&PullRequest>,
    map: Option<&InnerCommitMap>,
    opts: FilterOptions,
) -> Result<FilteredFix, FilterError> {
    let commit = fix
        .fixing_commit
        .clone()
        .ok_or_else(|| FilterError::NoFixingCommit(fix.bug.to_string()))?;
    let mut applied = BTreeSet::new();
    let base = if opts.f1 && map.is_some() {
        applied.insert(FilterKind::F1);
        diff_base_f1(ctx.repo, &commit, map)?
    } else {
        diff_base_f1(ctx.repo, &commit, None)?
    };
    let mut diff: Vec<FileDiff> = ctx
        .repo
        .diff_commits(&base, &commit)?
        .into_iter()
        .filter(|d| d.change_kind != ChangeKind::MetaOnly)
        .collect();
    let mut inner_fix = None;
    if let (Some(pr), Some(map)) = (pr, map) {
        if opts.f2 {
            diff = match filter_files_f2(diff, pr) {
                Ok(d) => {
                    applied.insert(FilterKind::F2);
                    d
                }
                Err(d) => d,
            };
        }
        if opts.f3 {
            diff = match filter_files_f3(diff, pr, map, bug, ctx.patterns) {
                Ok((d, inner)) => {
                    applied.insert(FilterKind::F3);
                    inner_fix = Some(inner);
                    d
                }
                Err(d) => d,
            };
        }
    }
    let mut rejected = None;
    if opts.size_threshold {
        applied.insert(FilterKind::SizeThreshold);
        diff = match apply_size_threshold(diff, ctx.thresholds) {
            SizeCheck::Pass(d) => d,
            SizeCheck::Rejected(reason) => {
                rejected = Some(reason);
                Vec::new()
            }
        };
    }
    Ok(FilteredFix {
        fix: fix.clone(),
        fix_commit: commit,
        base,
        files: diff,
        filters_applied: applied,
        rejected,
        inner_fix,
    })
}
