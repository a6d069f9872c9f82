//! Defect dataset CSV output, ground truth and precision/recall metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixes::FixRecord;
use crate::forge::IssueRef;
use crate::trace::{TraceResult, VariantName};
use crate::vcs::CommitId;

pub const DATASET_HEADER: [&str; 9] = [
    "level",
    "bug_system",
    "bug_key",
    "variant",
    "fixing_commit",
    "inducing_commit",
    "path",
    "method_header",
    "secured",
];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth for {0}")]
    MissingTruth(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetLevel {
    Commit,
    File,
    Method,
}

impl DatasetLevel {
    pub const ALL: [DatasetLevel; 3] = [DatasetLevel::Commit, DatasetLevel::File, DatasetLevel::Method];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetLevel::Commit => "commit",
            DatasetLevel::File => "file",
            DatasetLevel::Method => "method",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DatasetRow {
    pub bug: IssueRef,
    pub inducing_commit: CommitId,
    pub path: Option<String>,
    pub method_header: Option<String>,
    pub level: DatasetLevel,
    pub fixing_commit: CommitId,
    pub secured: bool,
    pub variant: VariantName,
}

impl DatasetRow {
    fn record(&self) -> [String; 9] {
        [
            self.level.as_str().to_string(),
            self.bug.system.as_str().to_string(),
            self.bug.key.clone(),
            self.variant.as_str().to_string(),
            self.fixing_commit.to_string(),
            self.inducing_commit.to_string(),
            self.path.clone().unwrap_or_default(),
            self.method_header.clone().unwrap_or_default(),
            self.secured.to_string(),
        ]
    }
}

/// Rows of one level, sorted by bug, inducing commit and path.
pub fn dataset_rows(results: &[TraceResult], level: DatasetLevel) -> Vec<DatasetRow> {
    let mut rows = BTreeSet::new();
    for r in results {
        let reported = r.reported();
        for s in &reported {
            let base = DatasetRow {
                bug: r.bug.clone(),
                inducing_commit: s.commit.clone(),
                path: None,
                method_header: None,
                level,
                fixing_commit: r.fix.clone(),
                secured: s.secured,
                variant: r.variant,
            };
            if level == DatasetLevel::Commit {
                rows.insert(base);
                continue;
            }
            for e in r.fine_grained.iter().filter(|e| e.level == level && e.inducing_commit == s.commit) {
                rows.insert(DatasetRow {
                    path: e.path.clone(),
                    method_header: e.method.as_ref().map(|m| m.header.clone()),
                    ..base.clone()
                });
            }
        }
    }
    rows.into_iter().collect()
}

pub fn write_dataset(results: &[TraceResult], level: DatasetLevel, out: &Path) -> Result<(), EvalError> {
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out)?;
    w.write_record(DATASET_HEADER)?;
    for row in dataset_rows(results, level) {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Validated fixing commits per bug (`null` when none exists) and inducing
/// commits per fixing commit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fixing: BTreeMap<String, Option<CommitId>>,
    pub inducing: BTreeMap<CommitId, BTreeSet<CommitId>>,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path)?;
        let truth: GroundTruth = serde_json::from_str(&text).map_err(|e| EvalError::InvalidTruth(e.to_string()))?;
        truth.validate()?;
        Ok(truth)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for key in self.fixing.keys() {
            key.parse::<IssueRef>()
                .map_err(|_| EvalError::InvalidTruth(format!("bad bug key {key}")))?;
        }
        Ok(())
    }

    pub fn set_fixing(&mut self, bug: &IssueRef, commit: Option<CommitId>) {
        self.fixing.insert(bug.to_string(), commit);
    }

    fn fixing_for(&self, bug: &IssueRef, aliases: &BTreeSet<IssueRef>) -> Option<&Option<CommitId>> {
        std::iter::once(bug)
            .chain(aliases.iter())
            .find_map(|r| self.fixing.get(&r.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); one division keeps the
        // result correctly rounded.
        Metrics {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f_score: ratio(2 * tp, 2 * tp + fp + fn_),
            tp,
            fp,
            fn_,
        }
    }
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// A wrong prediction counts as a false positive and, when a fixing commit
/// exists, also as a false negative.
pub fn eval_fixing(predictions: &[FixRecord], truth: &GroundTruth) -> Result<Metrics, EvalError> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for p in predictions {
        let expected = truth
            .fixing_for(&p.bug, &p.aliases)
            .ok_or_else(|| EvalError::MissingTruth(p.bug.to_string()))?;
        match (&p.fixing_commit, expected) {
            (Some(got), Some(want)) if got == want => tp += 1,
            (Some(_), Some(_)) => {
                fp += 1;
                fn_ += 1;
            }
            (Some(_), None) => fp += 1,
            (None, Some(_)) => fn_ += 1,
            (None, None) => {}
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

fn predicted(r: &TraceResult, use_selected: bool) -> BTreeSet<CommitId> {
    if use_selected {
        r.selected.iter().cloned().collect()
    } else {
        r.non_rejected()
    }
}

fn count_inducing(pred: &BTreeSet<CommitId>, want: &BTreeSet<CommitId>, c: &mut (u64, u64, u64)) {
    c.0 += pred.intersection(want).count() as u64;
    c.1 += pred.difference(want).count() as u64;
    c.2 += want.difference(pred).count() as u64;
}

/// Set-based micro average over fixes. Every fix must have a truth entry.
pub fn eval_inducing(results: &[TraceResult], truth: &GroundTruth, use_selected: bool) -> Result<Metrics, EvalError> {
    let mut c = (0, 0, 0);
    for r in results {
        let want = truth
            .inducing
            .get(&r.fix)
            .ok_or_else(|| EvalError::MissingTruth(r.fix.to_string()))?;
        count_inducing(&predicted(r, use_selected), want, &mut c);
    }
    Ok(Metrics::from_counts(c.0, c.1, c.2))
}

/// Like [`eval_inducing`], but a fix without a truth entry (a wrongly
/// matched fixing commit) has no true inducing commits, so all its
/// predictions are false positives.
pub fn eval_inducing_open(results: &[TraceResult], truth: &GroundTruth, use_selected: bool) -> Metrics {
    let empty = BTreeSet::new();
    let mut c = (0, 0, 0);
    for r in results {
        let want = truth.inducing.get(&r.fix).unwrap_or(&empty);
        count_inducing(&predicted(r, use_selected), want, &mut c);
    }
    Metrics::from_counts(c.0, c.1, c.2)
}

/// Unweighted mean of precision, recall and F-score across projects, with
/// summed counts.
pub fn macro_average(per_project: &[Metrics]) -> Metrics {
    if per_project.is_empty() {
        return Metrics::default();
    }
    let n = per_project.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| per_project.iter().map(f).sum::<f64>() / n;
    Metrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f_score: mean(|m| m.f_score),
        tp: per_project.iter().map(|m| m.tp).sum(),
        fp: per_project.iter().map(|m| m.fp).sum(),
        fn_: per_project.iter().map(|m| m.fn_).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub mapped: usize,
    pub total: usize,
    pub ratio: f64,
}

/// Share of bugs for which a fixing commit was found.
pub fn coverage(fixes: &[FixRecord]) -> Coverage {
    let mapped = fixes.iter().filter(|f| f.fixing_commit.is_some()).count();
    let total = fixes.len();
    Coverage {
        mapped,
        total,
        ratio: if total == 0 { 0.0 } else { mapped as f64 / total as f64 },
    }
}
