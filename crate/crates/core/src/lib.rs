//! Pull-request aware SZZ.
//!
//! The crate maps resolved bug tickets to the commits that fixed them and
//! traces the commits that introduced the fixed lines. Besides the issue
//! tracker and version history used by classic SZZ, it consumes pull-request
//! data (inner commits, integrated links, merge strategy) to pick better diff
//! bases, drop unrelated files and rank suspects.
//!
//! Module map:
//!
//! - [`vcs`]: read-only git access, diffs, blame and line mapping.
//! - [`forge`]: issue/pull-request model, snapshots, GitHub and Jira fetchers.
//! - [`reconstruct`]: merge-strategy detection and inner-commit mapping.
//! - [`links`]: text link extraction, link graph, duplicate bug merging.
//! - [`fixes`]: fixing pull request / fixing commit selection.
//! - [`filter`] and [`lexer`]: diff base, file filters, cosmetic lines, method spans.
//! - [`trace`]: suspect tracing, rejection, securing, selection, variants.
//! - [`eval`]: dataset CSV writer, ground truth, precision/recall.

pub mod eval;
pub mod filter;
pub mod fixes;
pub mod forge;
pub mod lexer;
pub mod links;
pub mod reconstruct;
pub mod trace;
pub mod vcs;

pub use eval::{DatasetLevel, GroundTruth, Metrics};
pub use fixes::{FixRecord, FixVia};
pub use forge::{IssueRef, IssueTicket, PullRequest, Snapshot, TrackerSystem};
pub use links::{DistinctBug, LinkGraph};
pub use reconstruct::{InnerCommitMap, MergeStrategy};
pub use trace::{Suspect, TraceResult, VariantId, VariantName};
pub use vcs::{CommitId, Repository};
