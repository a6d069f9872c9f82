//! Merge-strategy detection and the mapping of pull-request inner commits to
//! the commits that actually landed in the repository.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forge::{InnerCommit, IssueRef, PullRequest, Snapshot};
use crate::vcs::{CommitId, Repository, VcsError};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("pull request {0} is not merged")]
    NotMerged(IssueRef),
    #[error("merge strategy of {0} is unknown")]
    StrategyUnknown(IssueRef),
    #[error(transparent)]
    Vcs(#[from] VcsError),
}

pub type Result<T> = std::result::Result<T, ReconstructError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeStrategy {
    MergeCommit,
    Rebase,
    Squash,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerCommitMap {
    pub pr: IssueRef,
    pub strategy: MergeStrategy,
    /// Inner commit hash and the repository commit it landed as.
    pub pairs: Vec<(CommitId, Option<CommitId>)>,
    pub resolving_commit: CommitId,
    pub last_before: Option<CommitId>,
    pub first_after: Option<CommitId>,
}

impl InnerCommitMap {
    /// Repository commits that belong to the pull request, including the
    /// resolving commit.
    pub fn mapped_commits(&self) -> BTreeSet<CommitId> {
        let mut out: BTreeSet<CommitId> = self.pairs.iter().filter_map(|(_, c)| c.clone()).collect();
        out.insert(self.resolving_commit.clone());
        out
    }

    /// Distinct mapped commits in inner-commit order.
    pub fn distinct_mapped(&self) -> Vec<CommitId> {
        let mut seen = BTreeSet::new();
        self.pairs
            .iter()
            .filter_map(|(_, c)| c.clone())
            .filter(|c| seen.insert(c.clone()))
            .collect()
    }

    pub fn contains(&self, commit: &CommitId) -> bool {
        self.resolving_commit == *commit || self.pairs.iter().any(|(_, c)| c.as_ref() == Some(commit))
    }

    /// Inner commits that landed as `commit`.
    pub fn inner_for(&self, commit: &CommitId) -> Vec<&CommitId> {
        self.pairs
            .iter()
            .filter(|(_, c)| c.as_ref() == Some(commit))
            .map(|(h, _)| h)
            .collect()
    }

    /// Several inner commits collapsed into one repository commit.
    pub fn is_squashed(&self) -> bool {
        self.strategy == MergeStrategy::Squash && self.pairs.len() >= 2
    }
}

/// Lookup structure over the reachable history, built once per repository.
pub struct HistoryIndex {
    by_key: HashMap<(String, String), Vec<CommitId>>,
    non_merge: Vec<CommitId>,
}

fn normalize_summary(s: &str) -> String {
    s.lines()
        .next()
        .unwrap_or("")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn rebase_key(email: &str, message: &str) -> (String, String) {
    (email.trim().to_ascii_lowercase(), normalize_summary(message))
}

impl HistoryIndex {
    pub fn build(repo: &Repository) -> std::result::Result<Self, VcsError> {
        let mut by_key: HashMap<(String, String), Vec<CommitId>> = HashMap::new();
        let mut non_merge = Vec::new();
        for id in repo.all_commits()?.iter() {
            let c = repo.commit(id)?;
            if c.is_merge() {
                continue;
            }
            by_key
                .entry(rebase_key(&c.author_email, &c.message))
                .or_default()
                .push(id.clone());
            non_merge.push(id.clone());
        }
        Ok(HistoryIndex { by_key, non_merge })
    }

    fn rebase_candidates(&self, inner: &InnerCommit) -> &[CommitId] {
        self.by_key
            .get(&rebase_key(&inner.author_email, &inner.message))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Squash signature: the summary ends with `(#N)` for the pull request
/// number, or the message contains every inner summary.
fn squash_signature(message: &str, pr: &PullRequest) -> bool {
    let summary = message.lines().next().unwrap_or("").trim_end();
    if summary.ends_with(&format!("(#{})", pr.number())) {
        return true;
    }
    !pr.inner_commits.is_empty()
        && pr
            .inner_commits
            .iter()
            .all(|c| !c.summary().trim().is_empty() && message.contains(c.summary().trim()))
}

pub struct Reconstructor<'r> {
    repo: &'r Repository,
    index: HistoryIndex,
}

impl<'r> Reconstructor<'r> {
    pub fn new(repo: &'r Repository) -> std::result::Result<Self, VcsError> {
        Ok(Reconstructor {
            repo,
            index: HistoryIndex::build(repo)?,
        })
    }

    pub fn detect_strategy(&self, pr: &PullRequest) -> Result<MergeStrategy> {
        if !pr.merged {
            return Err(ReconstructError::NotMerged(pr.reference.clone()));
        }
        if let Some(m) = &pr.merge_commit {
            if self.repo.contains(m)? && self.repo.commit(m)?.is_merge() {
                return Ok(MergeStrategy::MergeCommit);
            }
        }
        if !pr.inner_commits.is_empty() {
            let mut all = true;
            for c in &pr.inner_commits {
                if !self.repo.contains(&c.hash)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(MergeStrategy::MergeCommit);
            }
        }
        if pr.inner_commits.len() >= 2 && self.squash_commit(pr)?.is_some() {
            return Ok(MergeStrategy::Squash);
        }
        if !self.rebase_pairs(pr)?.iter().all(Option::is_none) {
            return Ok(MergeStrategy::Rebase);
        }
        if pr.inner_commits.len() == 1 && self.squash_commit(pr)?.is_some() {
            return Ok(MergeStrategy::Squash);
        }
        Ok(MergeStrategy::Unknown)
    }

    /// The single non-merge commit carrying the squash signature, preferring
    /// the reported merge commit when it carries it.
    fn squash_commit(&self, pr: &PullRequest) -> Result<Option<CommitId>> {
        if let Some(m) = &pr.merge_commit {
            if self.repo.contains(m)? && squash_signature(&self.repo.commit(m)?.message, pr) {
                return Ok(Some(m.clone()));
            }
        }
        let mut found = Vec::new();
        for id in &self.index.non_merge {
            let c = self.repo.commit(id)?;
            if c.commit_time >= pr.created_at && squash_signature(&c.message, pr) {
                found.push(id.clone());
            }
        }
        Ok((found.len() == 1).then(|| found.remove(0)))
    }

    /// Rebase matching by (author email, normalized summary); ties go to the
    /// nearest author time, then the larger changed-path overlap.
    fn rebase_pairs(&self, pr: &PullRequest) -> Result<Vec<Option<CommitId>>> {
        let mut used: HashSet<CommitId> = HashSet::new();
        let mut out = Vec::with_capacity(pr.inner_commits.len());
        for inner in &pr.inner_commits {
            let inner_paths: BTreeSet<&str> = inner.files.iter().map(|f| f.path.as_str()).collect();
            let mut best: Option<(i64, std::cmp::Reverse<usize>, CommitId)> = None;
            for cand in self.index.rebase_candidates(inner) {
                if used.contains(cand) || *cand == inner.hash {
                    continue;
                }
                let c = self.repo.commit(cand)?;
                if c.commit_time < pr.created_at {
                    continue;
                }
                let overlap = self
                    .repo
                    .diff_to_parent(cand)?
                    .iter()
                    .filter(|d| inner_paths.contains(d.path()))
                    .count();
                let key = (
                    (c.author_time - inner.author_time).abs(),
                    std::cmp::Reverse(overlap),
                    cand.clone(),
                );
                if best.as_ref().is_none_or(|b| key < *b) {
                    best = Some(key);
                }
            }
            let chosen = best.map(|(_, _, c)| c);
            if let Some(c) = &chosen {
                used.insert(c.clone());
            }
            out.push(chosen);
        }
        Ok(out)
    }

    pub fn map_inner_commits(&self, pr: &PullRequest, strategy: MergeStrategy) -> Result<InnerCommitMap> {
        let (pairs, resolving) = match strategy {
            MergeStrategy::Unknown => return Err(ReconstructError::StrategyUnknown(pr.reference.clone())),
            MergeStrategy::MergeCommit => {
                let mut pairs = Vec::new();
                for c in &pr.inner_commits {
                    let present = self.repo.contains(&c.hash)?;
                    pairs.push((c.hash.clone(), present.then(|| c.hash.clone())));
                }
                let merge = match &pr.merge_commit {
                    Some(m) if self.repo.contains(m)? => Some(m.clone()),
                    _ => None,
                };
                let resolving = merge
                    .or_else(|| pairs.iter().rev().find_map(|(_, c)| c.clone()))
                    .ok_or_else(|| ReconstructError::StrategyUnknown(pr.reference.clone()))?;
                (pairs, resolving)
            }
            MergeStrategy::Squash => {
                let squash = self
                    .squash_commit(pr)?
                    .ok_or_else(|| ReconstructError::StrategyUnknown(pr.reference.clone()))?;
                let pairs = pr
                    .inner_commits
                    .iter()
                    .map(|c| (c.hash.clone(), Some(squash.clone())))
                    .collect();
                (pairs, squash)
            }
            MergeStrategy::Rebase => {
                let matched = self.rebase_pairs(pr)?;
                let pairs: Vec<_> = pr
                    .inner_commits
                    .iter()
                    .zip(matched)
                    .map(|(c, m)| (c.hash.clone(), m))
                    .collect();
                let resolving = pairs
                    .iter()
                    .rev()
                    .find_map(|(_, c)| c.clone())
                    .ok_or_else(|| ReconstructError::StrategyUnknown(pr.reference.clone()))?;
                (pairs, resolving)
            }
        };
        let mut map = InnerCommitMap {
            pr: pr.reference.clone(),
            strategy,
            pairs,
            resolving_commit: resolving,
            last_before: None,
            first_after: None,
        };
        let (before, after) = self.boundary_commits(&map)?;
        map.last_before = before;
        map.first_after = after;
        Ok(map)
    }

    /// Last commit before the pull request (first-parent walk from its
    /// first mapped commit) and first mainline commit after its resolving
    /// commit.
    pub fn boundary_commits(&self, map: &InnerCommitMap) -> Result<(Option<CommitId>, Option<CommitId>)> {
        let members = map.mapped_commits();
        let first = map
            .pairs
            .iter()
            .find_map(|(_, c)| c.clone())
            .unwrap_or_else(|| map.resolving_commit.clone());
        let mut before = None;
        let mut cur = self.repo.commit(&first)?.first_parent().cloned();
        while let Some(id) = cur {
            if !members.contains(&id) {
                before = Some(id);
                break;
            }
            cur = self.repo.commit(&id)?.first_parent().cloned();
        }

        let mainline = self.repo.mainline()?; // newest first
        let after = match mainline.iter().position(|c| *c == map.resolving_commit) {
            Some(i) => mainline[..i].iter().rev().find(|c| !members.contains(*c)).cloned(),
            None => {
                let mut found = None;
                for c in mainline.iter().rev() {
                    if !members.contains(c) && self.repo.is_ancestor(&map.resolving_commit, c)? {
                        found = Some(c.clone());
                        break;
                    }
                }
                found
            }
        };
        Ok((before, after))
    }

    /// Strategies and maps for every merged pull request of the snapshot.
    pub fn reconstruct_all(&self, snapshot: &Snapshot) -> Result<Reconstruction> {
        let mut out = Reconstruction::default();
        for pr in snapshot.pulls.iter().filter(|p| p.merged) {
            let strategy = self.detect_strategy(pr)?;
            out.strategies.insert(pr.reference.clone(), strategy);
            if strategy != MergeStrategy::Unknown {
                match self.map_inner_commits(pr, strategy) {
                    Ok(map) => {
                        out.maps.insert(pr.reference.clone(), map);
                    }
                    Err(ReconstructError::StrategyUnknown(r)) => {
                        out.strategies.insert(r, MergeStrategy::Unknown);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reconstruction {
    pub strategies: BTreeMap<IssueRef, MergeStrategy>,
    pub maps: BTreeMap<IssueRef, InnerCommitMap>,
}

impl Reconstruction {
    /// Pull requests owning a repository commit.
    pub fn owners(&self) -> HashMap<CommitId, Vec<IssueRef>> {
        let mut out: HashMap<CommitId, Vec<IssueRef>> = HashMap::new();
        for (pr, map) in &self.maps {
            for c in map.mapped_commits() {
                out.entry(c).or_default().push(pr.clone());
            }
        }
        out
    }

    /// Serializable list form (JSON object keys must be strings).
    pub fn to_list(&self) -> Vec<InnerCommitMap> {
        self.maps.values().cloned().collect()
    }

    pub fn from_list(maps: Vec<InnerCommitMap>, snapshot: &Snapshot) -> Self {
        let mut out = Reconstruction::default();
        for p in snapshot.pulls.iter().filter(|p| p.merged) {
            out.strategies.insert(p.reference.clone(), MergeStrategy::Unknown);
        }
        for m in maps {
            out.strategies.insert(m.pr.clone(), m.strategy);
            out.maps.insert(m.pr.clone(), m);
        }
        out
    }
}
