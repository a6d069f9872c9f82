//! Tracing of bug-inducing suspects, their rejection, securing and
//! selection, and the variant configurations built from these steps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::DatasetLevel;
use crate::filter::{
    cosmetic_lines, enclosing_method_span, filter_fix, CosmeticEquivalence, FilterContext, FilterError, FilterKind,
    FilterOptions, FilteredFix, Thresholds,
};
use crate::fixes::FixRecord;
use crate::forge::{IssueRef, PullRequest, Snapshot};
use crate::lexer::{MethodSpan, Profiles, SpanLookup};
use crate::links::{DistinctBug, LinkGraph, LinkPatterns, NodeId};
use crate::reconstruct::{InnerCommitMap, Reconstruction};
use crate::vcs::{BlameOptions, CommitId, LineEquivalence, Repository, VcsError};

/// Lines traced around a pure addition that has no enclosing method.
pub const WHOLE_FILE_WINDOW: usize = 25;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error("unknown variant {0}")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantName {
    B,
    AG,
    MA,
    DJ,
    A,
    PR,
    L,
    R,
    #[serde(rename = "PR_SELECT")]
    PrSelect,
}

impl VariantName {
    pub const ALL: [VariantName; 9] = [
        VariantName::B,
        VariantName::AG,
        VariantName::MA,
        VariantName::DJ,
        VariantName::A,
        VariantName::PR,
        VariantName::L,
        VariantName::R,
        VariantName::PrSelect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::B => "B",
            VariantName::AG => "AG",
            VariantName::MA => "MA",
            VariantName::DJ => "DJ",
            VariantName::A => "A",
            VariantName::PR => "PR",
            VariantName::L => "L",
            VariantName::R => "R",
            VariantName::PrSelect => "PR_SELECT",
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantName {
    type Err = TraceError;
    fn from_str(s: &str) -> Result<Self, TraceError> {
        VariantName::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TraceError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Largest,
    Recent,
    PrSelect,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantOptions {
    pub cosmetic_filter: bool,
    pub meta_filter: bool,
    pub line_mapping: bool,
    pub method_trace: bool,
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub size_threshold: bool,
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
    pub selection: Option<Selection>,
    /// With PrSelect: secured suspects suppress all others instead of only
    /// ranking first.
    pub secured_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantId {
    pub name: VariantName,
    pub options: VariantOptions,
}

impl VariantId {
    pub fn new(name: VariantName) -> Self {
        let ag = VariantOptions {
            cosmetic_filter: true,
            ..VariantOptions::default()
        };
        let ma = VariantOptions { meta_filter: true, ..ag };
        let pr = VariantOptions {
            cosmetic_filter: true,
            meta_filter: true,
            line_mapping: true,
            method_trace: true,
            f1: true,
            f2: true,
            f3: true,
            size_threshold: true,
            s1: true,
            s2: true,
            s3: true,
            selection: None,
            secured_only: false,
        };
        let options = match name {
            VariantName::B => VariantOptions::default(),
            VariantName::AG => ag,
            VariantName::MA => ma,
            VariantName::DJ => VariantOptions { line_mapping: true, ..ag },
            VariantName::A => VariantOptions { method_trace: true, ..ag },
            VariantName::PR => pr,
            VariantName::L => VariantOptions {
                selection: Some(Selection::Largest),
                ..ma
            },
            VariantName::R => VariantOptions {
                selection: Some(Selection::Recent),
                ..ma
            },
            VariantName::PrSelect => VariantOptions {
                selection: Some(Selection::PrSelect),
                ..pr
            },
        };
        VariantId { name, options }
    }

    fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            f1: self.options.f1,
            f2: self.options.f2,
            f3: self.options.f3,
            size_threshold: self.options.size_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MetaChange,
    AfterBugReport,
    AfterPrCreated,
    InsideFixPr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracedLine {
    /// Removed by the fix.
    Removed,
    /// Body line of the method enclosing a pure addition.
    MethodBody,
    /// Window line around a pure addition outside any method.
    Window,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contribution {
    /// Path and line in the suspect commit.
    pub path: String,
    pub origin_line: usize,
    /// Path and line at the fix's diff base.
    pub base_path: String,
    pub base_line: usize,
    pub traced: TracedLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suspect {
    pub commit: CommitId,
    pub commit_time: i64,
    pub contributions: Vec<Contribution>,
    pub secured: bool,
    pub rejected_reason: Option<RejectReason>,
}

impl Suspect {
    pub fn is_rejected(&self) -> bool {
        self.rejected_reason.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FineGrainedEntry {
    pub level: DatasetLevel,
    pub inducing_commit: CommitId,
    pub path: Option<String>,
    pub method: Option<MethodSpan>,
    pub fix_path: Option<String>,
    pub fix_method: Option<MethodSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceResult {
    pub bug: IssueRef,
    pub fix: CommitId,
    pub variant: VariantName,
    pub base: Option<CommitId>,
    pub filters_applied: BTreeSet<FilterKind>,
    pub suspects: Vec<Suspect>,
    pub selected: Option<CommitId>,
    pub fine_grained: Vec<FineGrainedEntry>,
    pub notes: Vec<String>,
}

impl TraceResult {
    /// Suspects a dataset reports: the selected one for selection variants,
    /// every non-rejected suspect otherwise.
    pub fn reported(&self) -> Vec<&Suspect> {
        match &self.selected {
            Some(sel) => self.suspects.iter().filter(|s| s.commit == *sel).collect(),
            None if self.uses_selection() => Vec::new(),
            None => self.suspects.iter().filter(|s| !s.is_rejected()).collect(),
        }
    }

    fn uses_selection(&self) -> bool {
        VariantId::new(self.variant).options.selection.is_some()
    }

    pub fn non_rejected(&self) -> BTreeSet<CommitId> {
        self.suspects.iter().filter(|s| !s.is_rejected()).map(|s| s.commit.clone()).collect()
    }
}

/// Shared, read-only inputs of tracing.
pub struct TraceInputs<'a> {
    pub snapshot: &'a Snapshot,
    pub bugs: &'a BTreeMap<IssueRef, DistinctBug>,
    pub graph: &'a LinkGraph,
    pub reconstruction: &'a Reconstruction,
    pub owners: &'a HashMap<CommitId, Vec<IssueRef>>,
    pub profiles: &'a Profiles,
    pub patterns: &'a LinkPatterns,
    pub thresholds: Thresholds,
}

fn blame_options<'e>(v: &VariantOptions, eq: &'e dyn LineEquivalence) -> BlameOptions<'e> {
    BlameOptions {
        skip_meta: v.meta_filter,
        equivalence: v.cosmetic_filter.then_some(eq),
        track_moves: v.line_mapping,
    }
}

/// Lines to blame at the diff base for one file of the fix.
fn traced_lines(
    repo: &Repository,
    filtered: &FilteredFix,
    file: &crate::vcs::FileDiff,
    old_path: &str,
    v: &VariantOptions,
    profiles: &Profiles,
) -> Result<BTreeMap<usize, TracedLine>, VcsError> {
    let profile = profiles.for_path(old_path);
    let mut lines = BTreeMap::new();
    for hunk in &file.hunks {
        let (cos_r, cos_a) = if v.cosmetic_filter {
            cosmetic_lines(hunk, profile)
        } else {
            Default::default()
        };
        for (n, _) in &hunk.removed {
            if !cos_r.contains(n) {
                lines.insert(*n, TracedLine::Removed);
            }
        }
        let pure_addition = hunk.removed.is_empty() && hunk.added.iter().any(|(n, _)| !cos_a.contains(n));
        if !(v.method_trace && pure_addition) {
            continue;
        }
        let Some(base_lines) = repo.file_lines(&filtered.base, old_path)? else {
            continue;
        };
        let len = base_lines.len();
        if len == 0 {
            continue;
        }
        let k = hunk.old_start;
        let span = if k >= 1 && k < len {
            match enclosing_method_span(repo, &filtered.base, old_path, k, profiles)? {
                SpanLookup::Method(s) if s.start <= k && k < s.end => Some(s),
                _ => None,
            }
        } else {
            None
        };
        let (range, kind) = match span {
            Some(s) => (s.start..=s.end, TracedLine::MethodBody),
            None => {
                let centre = k.clamp(1, len);
                (
                    centre.saturating_sub(WHOLE_FILE_WINDOW).max(1)..=(centre + WHOLE_FILE_WINDOW).min(len),
                    TracedLine::Window,
                )
            }
        };
        for l in range {
            let text = &base_lines[l - 1];
            let cosmetic = v.cosmetic_filter && profile.is_some_and(|p| p.is_cosmetic_side(text));
            if text.trim().is_empty() || cosmetic {
                continue;
            }
            lines.entry(l).or_insert(kind);
        }
    }
    Ok(lines)
}

/// Blames the traced lines of every remaining file at the diff base and
/// groups the origins by commit.
pub fn trace_suspects(
    repo: &Repository,
    filtered: &FilteredFix,
    variant: &VariantId,
    profiles: &Profiles,
    notes: &mut Vec<String>,
) -> Result<Vec<Suspect>, VcsError> {
    let eq = CosmeticEquivalence { profiles };
    let opts = blame_options(&variant.options, &eq);
    let mut by_commit: BTreeMap<CommitId, Vec<Contribution>> = BTreeMap::new();
    for file in &filtered.files {
        let Some(old_path) = file.old_path.as_deref() else {
            continue;
        };
        let step = || -> Result<Vec<(usize, TracedLine, Option<crate::vcs::LineOrigin>)>, VcsError> {
            let lines = traced_lines(repo, filtered, file, old_path, &variant.options, profiles)?;
            if lines.is_empty() {
                return Ok(Vec::new());
            }
            let set: BTreeSet<usize> = lines.keys().copied().collect();
            let origins = repo.blame_lines_with(&filtered.base, old_path, &set, opts)?;
            Ok(origins.into_iter().map(|(l, o)| (l, lines[&l], o)).collect())
        };
        match step() {
            Ok(found) => {
                for (l, kind, origin) in found {
                    if let Some(o) = origin {
                        by_commit.entry(o.origin_commit.clone()).or_default().push(Contribution {
                            path: o.origin_path,
                            origin_line: o.origin_line,
                            base_path: old_path.to_string(),
                            base_line: l,
                            traced: kind,
                        });
                    }
                }
            }
            Err(e @ (VcsError::PathNotPresent { .. } | VcsError::LineOutOfRange { .. })) => {
                notes.push(format!("skipped {old_path}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let mut out = Vec::with_capacity(by_commit.len());
    for (commit, mut contributions) in by_commit {
        contributions.sort();
        out.push(Suspect {
            commit_time: repo.commit(&commit)?.commit_time,
            commit,
            contributions,
            secured: false,
            rejected_reason: None,
        });
    }
    out.sort_by(|a, b| a.commit_time.cmp(&b.commit_time).then(a.commit.cmp(&b.commit)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionRuleSet {
    /// Reject suspects committed after the bug was reported.
    pub temporal: bool,
    /// Reject suspects committed after the fixing pull request was opened or
    /// belonging to it.
    pub pr_temporal: bool,
    /// Reject merge and mode-only commits.
    pub meta: bool,
}

pub fn reject_suspects(
    repo: &Repository,
    suspects: &mut [Suspect],
    bug: &DistinctBug,
    fixing_pr: Option<(&PullRequest, Option<&InnerCommitMap>)>,
    rules: RejectionRuleSet,
) -> Result<(), VcsError> {
    for s in suspects.iter_mut() {
        s.rejected_reason = None;
        if rules.meta && repo.is_meta_change(&s.commit)? {
            s.rejected_reason = Some(RejectReason::MetaChange);
            continue;
        }
        if rules.pr_temporal {
            if let Some((pr, map)) = fixing_pr {
                if map.is_some_and(|m| m.contains(&s.commit)) {
                    s.rejected_reason = Some(RejectReason::InsideFixPr);
                    continue;
                }
                if s.commit_time > pr.created_at {
                    s.rejected_reason = Some(RejectReason::AfterPrCreated);
                    continue;
                }
            }
        }
        if rules.temporal && s.commit_time > bug.created_at() {
            s.rejected_reason = Some(RejectReason::AfterBugReport);
        }
    }
    Ok(())
}

/// Marks suspects owned by a pull request linked to the fixing pull request.
/// A secured suspect rejected only for postdating the bug report is
/// restored; other rejections stand and leave it unsecured.
pub fn mark_secured(
    suspects: &mut [Suspect],
    fixing_pr: &IssueRef,
    graph: &LinkGraph,
    owners: &HashMap<CommitId, Vec<IssueRef>>,
) {
    let fix_node = NodeId::Ticket(fixing_pr.clone());
    for s in suspects.iter_mut() {
        let linked = owners.get(&s.commit).into_iter().flatten().any(|owner| {
            owner != fixing_pr && graph.linked(&NodeId::Ticket(owner.clone()), &fix_node)
        });
        if !linked {
            s.secured = false;
            continue;
        }
        match s.rejected_reason {
            None => s.secured = true,
            Some(RejectReason::AfterBugReport) => {
                s.rejected_reason = None;
                s.secured = true;
            }
            Some(_) => s.secured = false,
        }
    }
}

/// Picks one inducing commit among the non-rejected suspects.
pub fn select_inducing(
    repo: &Repository,
    suspects: &[Suspect],
    strategy: Selection,
    secured_only: bool,
) -> Result<Option<CommitId>, VcsError> {
    let live: Vec<&Suspect> = suspects.iter().filter(|s| !s.is_rejected()).collect();
    let most_recent = |items: &[&Suspect]| {
        items
            .iter()
            .max_by(|a, b| a.commit_time.cmp(&b.commit_time).then(b.commit.cmp(&a.commit)))
            .map(|s| s.commit.clone())
    };
    Ok(match strategy {
        Selection::Recent => most_recent(&live),
        Selection::Largest => {
            let mut best: Option<(usize, i64, &CommitId)> = None;
            for s in &live {
                let size = repo.change_size(&s.commit)?;
                let key = (size, s.commit_time, &s.commit);
                let better = match &best {
                    None => true,
                    Some((bs, bt, bc)) => (size, s.commit_time).cmp(&(*bs, *bt)).then(bc.cmp(&&s.commit)).is_gt(),
                };
                if better {
                    best = Some(key);
                }
            }
            best.map(|(_, _, c)| c.clone())
        }
        Selection::PrSelect => {
            let secured: Vec<&Suspect> = live.iter().copied().filter(|s| s.secured).collect();
            if !secured.is_empty() {
                most_recent(&secured)
            } else if secured_only {
                None
            } else {
                most_recent(&live)
            }
        }
    })
}

struct SquashRestriction {
    paths: BTreeSet<String>,
    texts: BTreeSet<(String, String)>,
}

/// For a suspect that is the squash commit of a pull request with inner file
/// data, the paths and added lines of the inner commits touching the blamed
/// lines.
fn squash_restriction(
    repo: &Repository,
    suspect: &Suspect,
    inputs: &TraceInputs<'_>,
) -> Result<Option<SquashRestriction>, VcsError> {
    let Some(owners) = inputs.owners.get(&suspect.commit) else {
        return Ok(None);
    };
    for owner in owners {
        let (Some(map), Some(pr)) = (inputs.reconstruction.maps.get(owner), inputs.snapshot.pull(owner)) else {
            continue;
        };
        if !map.is_squashed() || pr.inner_commits.iter().all(|c| c.files.is_empty()) {
            continue;
        }
        let mut blamed: BTreeSet<(String, String)> = BTreeSet::new();
        for c in &suspect.contributions {
            if let Some(lines) = repo.file_lines(&suspect.commit, &c.path)? {
                if let Some(t) = lines.get(c.origin_line - 1) {
                    blamed.insert((c.path.clone(), t.trim().to_string()));
                }
            }
        }
        let mut r = SquashRestriction {
            paths: BTreeSet::new(),
            texts: BTreeSet::new(),
        };
        for inner in &pr.inner_commits {
            let mut touches = false;
            let mut added = BTreeSet::new();
            for f in &inner.files {
                match &f.hunks {
                    Some(hunks) => {
                        for h in hunks {
                            for (_, t) in &h.added {
                                let key = (f.path.clone(), t.trim().to_string());
                                touches |= blamed.contains(&key);
                                added.insert(key);
                            }
                        }
                    }
                    None => touches |= blamed.iter().any(|(p, _)| *p == f.path),
                }
            }
            if touches {
                r.paths.extend(inner.files.iter().map(|f| f.path.clone()));
                r.texts.extend(added);
            }
        }
        return Ok(Some(r));
    }
    Ok(None)
}

/// Commit, file and method level entries for one reported suspect.
pub fn refine_fine_grained(
    repo: &Repository,
    suspect: &Suspect,
    filtered: &FilteredFix,
    inputs: &TraceInputs<'_>,
    restrict_squashed: bool,
) -> Result<Vec<FineGrainedEntry>, VcsError> {
    let mut entries = BTreeSet::new();
    entries.insert(FineGrainedEntry {
        level: DatasetLevel::Commit,
        inducing_commit: suspect.commit.clone(),
        path: None,
        method: None,
        fix_path: None,
        fix_method: None,
    });
    let restriction = if restrict_squashed {
        squash_restriction(repo, suspect, inputs)?
    } else {
        None
    };
    let mut seen_methods = BTreeSet::new();
    for c in &suspect.contributions {
        if let Some(r) = &restriction {
            if !r.paths.contains(&c.path) {
                continue;
            }
        }
        entries.insert(FineGrainedEntry {
            level: DatasetLevel::File,
            inducing_commit: suspect.commit.clone(),
            path: Some(c.path.clone()),
            method: None,
            fix_path: Some(c.base_path.clone()),
            fix_method: None,
        });
        if let Some(r) = &restriction {
            if !r.texts.is_empty() {
                let text = repo
                    .file_lines(&suspect.commit, &c.path)?
                    .and_then(|l| l.get(c.origin_line - 1).map(|t| t.trim().to_string()))
                    .unwrap_or_default();
                if !r.texts.contains(&(c.path.clone(), text)) {
                    continue;
                }
            }
        }
        let SpanLookup::Method(inducing) =
            enclosing_method_span(repo, &suspect.commit, &c.path, c.origin_line, inputs.profiles)?
        else {
            continue;
        };
        if !seen_methods.insert((c.path.clone(), inducing.header.clone())) {
            continue;
        }
        let fix_method = match enclosing_method_span(repo, &filtered.base, &c.base_path, c.base_line, inputs.profiles)? {
            SpanLookup::Method(m) => Some(m),
            SpanLookup::WholeFile => None,
        };
        entries.insert(FineGrainedEntry {
            level: DatasetLevel::Method,
            inducing_commit: suspect.commit.clone(),
            path: Some(c.path.clone()),
            method: Some(inducing),
            fix_path: Some(c.base_path.clone()),
            fix_method,
        });
    }
    Ok(entries.into_iter().collect())
}

/// Runs one variant for one fix. Fixes without a fixing commit yield
/// nothing.
pub fn trace_fix(
    repo: &Repository,
    inputs: &TraceInputs<'_>,
    variant: &VariantId,
    fix: &FixRecord,
) -> Result<Option<TraceResult>, TraceError> {
    let Some(fix_commit) = fix.fixing_commit.clone() else {
        return Ok(None);
    };
    let Some(bug) = inputs.bugs.get(&fix.bug) else {
        return Ok(None);
    };
    let v = &variant.options;
    let pr = fix.fixing_pr.as_ref().and_then(|r| inputs.snapshot.pull(r));
    let map = fix.fixing_pr.as_ref().and_then(|r| inputs.reconstruction.maps.get(r));
    let mut result = TraceResult {
        bug: fix.bug.clone(),
        fix: fix_commit,
        variant: variant.name,
        base: None,
        filters_applied: BTreeSet::new(),
        suspects: Vec::new(),
        selected: None,
        fine_grained: Vec::new(),
        notes: Vec::new(),
    };
    let ctx = FilterContext {
        repo,
        patterns: inputs.patterns,
        thresholds: inputs.thresholds,
    };
    let filtered = match filter_fix(&ctx, fix, bug, pr, map, variant.filter_options()) {
        Ok(f) => f,
        Err(FilterError::Vcs(e)) => return Err(e.into()),
        Err(e) => {
            result.notes.push(e.to_string());
            return Ok(Some(result));
        }
    };
    result.base = Some(filtered.base.clone());
    result.filters_applied = filtered.filters_applied.clone();
    if let Some(reason) = &filtered.rejected {
        result.notes.push(format!("fix rejected by size threshold: {reason}"));
    }

    let mut suspects = trace_suspects(repo, &filtered, variant, inputs.profiles, &mut result.notes)?;
    let rules = RejectionRuleSet {
        temporal: true,
        pr_temporal: v.s1,
        meta: v.meta_filter,
    };
    reject_suspects(repo, &mut suspects, bug, pr.map(|p| (p, map)), rules)?;
    if v.s2 {
        if let Some(pr) = pr {
            mark_secured(&mut suspects, &pr.reference, inputs.graph, inputs.owners);
        }
    }
    result.suspects = suspects;
    if let Some(strategy) = v.selection {
        result.selected = select_inducing(repo, &result.suspects, strategy, v.secured_only)?;
    }
    let mut fine = BTreeSet::new();
    for s in result.reported() {
        fine.extend(refine_fine_grained(repo, s, &filtered, inputs, v.s3)?);
    }
    result.fine_grained = fine.into_iter().collect();
    Ok(Some(result))
}

pub fn run_variant(
    repo: &Repository,
    inputs: &TraceInputs<'_>,
    variant: &VariantId,
    fixes: &[FixRecord],
) -> Result<Vec<TraceResult>, TraceError> {
    let mut out = Vec::new();
    for f in fixes {
        if let Some(r) = trace_fix(repo, inputs, variant, f)? {
            out.push(r);
        }
    }
    out.sort_by(|a, b| (&a.bug, &a.fix).cmp(&(&b.bug, &b.fix)));
    Ok(out)
}
