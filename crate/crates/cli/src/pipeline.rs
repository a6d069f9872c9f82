//! The four pipeline stages. Each stage reads its inputs from disk and
//! writes its outputs under the configured output directory, so stages can
//! be run separately.
//!
//! ```text
//! out/
//!   matches.json  matches_bszz.json  bugs.json  links.csv  inner_maps.json
//!   traces/<VARIANT>.json
//!   datasets/<VARIANT>_{commit,file,method}.csv
//!   metrics.json  fixing_metrics.json  coverage.json
//!   manifest.json
//!   cache/blame.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use prszz_core::eval::{coverage, eval_fixing, eval_inducing_open, write_dataset, Coverage};
use prszz_core::fixes::{match_all_fixes, match_all_fixes_bszz, FixInputs, MessageIndex};
use prszz_core::forge::github::{GithubFetcher, DEFAULT_API};
use prszz_core::forge::jira::JiraFetcher;
use prszz_core::forge::transport::{Client, LiveTransport, RecordingTransport, ReplayTransport, ThreadSleeper, Transport};
use prszz_core::forge::{load_snapshot, save_snapshot, select_bug_tickets, to_canonical_json};
use prszz_core::links::{build_graph, merge_duplicate_bugs};
use prszz_core::reconstruct::{Reconstruction, Reconstructor};
use prszz_core::trace::{run_variant, TraceInputs};
use prszz_core::vcs::LineOrigin;
use prszz_core::{
    DatasetLevel, DistinctBug, FixRecord, GroundTruth, InnerCommitMap, IssueRef, LinkGraph, Metrics, Repository,
    Snapshot, TraceResult, VariantName,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ProjectConfig, TrackerKind};
use crate::error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

pub const GITHUB_TOKEN_VAR: &str = "PRSZZ_GITHUB_TOKEN";
pub const JIRA_TOKEN_VAR: &str = "PRSZZ_JIRA_TOKEN";

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads for matching and tracing.
    pub jobs: usize,
    /// Fetch from the live platforms instead of replaying recordings.
    pub live: bool,
    /// Ground truth overriding the configured one.
    pub truth: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            live: false,
            truth: None,
        }
    }
}

/// Per-variant inducing-commit metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    /// Every suspect that survived rejection.
    pub full: Metrics,
    /// Only the selected suspect, for variants that select one.
    pub selected: Option<Metrics>,
    /// `selected` when present, else `full`.
    pub reported: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixingMetrics {
    pub pr_szz: Metrics,
    pub b_szz: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub pr_szz: Coverage,
    pub b_szz: Coverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub inducing: BTreeMap<String, VariantMetrics>,
    pub fixing: FixingMetrics,
    pub coverage: CoverageReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_canonical_json(value))?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingInput(path.display().to_string()),
        _ => CliError::Io(e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn newest_timestamp(s: &Snapshot) -> i64 {
    let issues = s.issues.iter().flat_map(|t| [Some(t.created_at), t.closed_at]);
    let pulls = s.pulls.iter().flat_map(|p| [Some(p.created_at), p.closed_at]);
    issues.chain(pulls).flatten().max().unwrap_or(0)
}

/// Fetches tracker data into the snapshot directory. Trackers with a
/// `replay_dir` replay recorded responses (or record into it when `live`);
/// without any tracker source the existing snapshot is reused.
pub fn ingest(cfg: &ProjectConfig, opts: &RunOptions) -> Result<Snapshot> {
    let sourced: Vec<_> = cfg.trackers.iter().filter(|t| opts.live || t.replay_dir.is_some()).collect();
    if sourced.is_empty() {
        info!("no tracker source to fetch from; using snapshot {}", cfg.snapshot_dir.display());
        return Ok(load_snapshot(&cfg.snapshot_dir)?);
    }
    let window = cfg.window();
    let sleeper = ThreadSleeper;
    let mut live_at = 0;
    let mut snapshot = Snapshot::new(cfg.project_id.clone(), 0);
    for tracker in sourced {
        let transport: Box<dyn Transport> = match (&tracker.replay_dir, opts.live) {
            (Some(dir), true) => Box::new(RecordingTransport::new(LiveTransport::new(), dir.clone())?),
            (None, _) => Box::new(LiveTransport::new()),
            (Some(dir), false) => Box::new(ReplayTransport::from_dir(dir)?),
        };
        let (var, api) = match tracker.system {
            TrackerKind::Github => (GITHUB_TOKEN_VAR, tracker.base_url.clone().unwrap_or_else(|| DEFAULT_API.into())),
            TrackerKind::Jira => (
                JIRA_TOKEN_VAR,
                tracker
                    .base_url
                    .clone()
                    .ok_or_else(|| CliError::Usage("a jira tracker needs base_url to fetch".into()))?,
            ),
        };
        let client = Client::new(transport.as_ref(), std::env::var(var).ok(), &sleeper);
        let now = if opts.live { (client.now)() } else { 0 };
        live_at = live_at.max(now);
        match tracker.system {
            TrackerKind::Github => {
                let project = tracker.project.as_deref().unwrap_or(&cfg.project_id);
                let mut fetcher = GithubFetcher::new(client);
                fetcher.api_base = api;
                info!("fetching {project} from {}", fetcher.api_base);
                snapshot.absorb(fetcher.fetch(project, window, now)?);
            }
            TrackerKind::Jira => {
                for key in &tracker.project_keys {
                    let fetcher = JiraFetcher::new(Client::new(client.transport, client.token.clone(), &sleeper), api.clone());
                    info!("fetching {key} from {api}");
                    snapshot.absorb(fetcher.fetch(key, window, now)?);
                }
            }
        }
    }
    snapshot.project_id = cfg.project_id.clone();
    // Replayed snapshots are stamped from their own content so that
    // replays are reproducible.
    snapshot.fetched_at = if opts.live { live_at } else { newest_timestamp(&snapshot) };
    snapshot.sort();
    save_snapshot(&snapshot, &cfg.snapshot_dir)?;
    Ok(snapshot)
}

fn graph_for(snapshot: &Snapshot, repo: &Repository, recon: &Reconstruction, cfg: &ProjectConfig) -> Result<LinkGraph> {
    let patterns = cfg.link_patterns()?;
    let mut graph = build_graph(snapshot, repo, recon, &patterns)?;
    graph.add_transitive_edges();
    Ok(graph)
}

fn round_robin<T: Clone>(items: &[T], jobs: usize) -> Vec<Vec<T>> {
    let jobs = jobs.max(1).min(items.len().max(1));
    let mut out = vec![Vec::new(); jobs];
    for (i, item) in items.iter().enumerate() {
        out[i % jobs].push(item.clone());
    }
    out
}

/// Distinct bugs, their fixing commits (pull-request path and message-only
/// baseline), the link graph and the inner-commit maps.
pub fn match_stage(cfg: &ProjectConfig, opts: &RunOptions) -> Result<Vec<FixRecord>> {
    let snapshot = load_snapshot(&cfg.snapshot_dir)?;
    let repo = Repository::open(&cfg.repo_path)?;
    let patterns = cfg.link_patterns()?;
    let recon = Reconstructor::new(&repo)?.reconstruct_all(&snapshot)?;
    let graph = graph_for(&snapshot, &repo, &recon, cfg)?;
    let (start, end) = cfg.window();
    let tickets: Vec<_> = select_bug_tickets(&snapshot, &cfg.bug_labels())
        .into_iter()
        .filter(|t| t.created_at >= start && t.created_at < end)
        .collect();
    let bugs = merge_duplicate_bugs(&tickets, &graph);
    let messages = MessageIndex::build(&repo, &patterns)?;
    info!("{} bug tickets, {} distinct bugs", tickets.len(), bugs.len());

    let repo_path = repo.path().to_path_buf();
    let chunks = round_robin(&bugs, opts.jobs);
    let mut fixes = std::thread::scope(|scope| -> Result<Vec<FixRecord>> {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                let (snapshot, graph, recon, patterns, messages, repo_path) =
                    (&snapshot, &graph, &recon, &patterns, &messages, &repo_path);
                scope.spawn(move || -> Result<Vec<FixRecord>> {
                    let repo = Repository::open(repo_path)?;
                    let inputs = FixInputs {
                        snapshot,
                        repo: &repo,
                        graph,
                        reconstruction: recon,
                        patterns,
                        messages,
                    };
                    Ok(match_all_fixes(chunk, &inputs)?)
                })
            })
            .collect();
        let mut all = Vec::new();
        for h in handles {
            all.extend(h.join().expect("matching worker panicked")?);
        }
        Ok(all)
    })?;
    fixes.sort_by(|a, b| a.bug.cmp(&b.bug));
    let bszz = match_all_fixes_bszz(&bugs, &repo, &messages)?;

    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    write_json(&out.join("matches.json"), &fixes)?;
    write_json(&out.join("matches_bszz.json"), &bszz)?;
    write_json(&out.join("bugs.json"), &bugs)?;
    write_json(&out.join("inner_maps.json"), &recon.to_list())?;
    graph.write_csv(&out.join("links.csv"))?;
    Ok(fixes)
}

type BlameEntries = Vec<(String, Vec<Option<LineOrigin>>)>;

/// Traces every configured variant from the matched fixes and writes the
/// traces and datasets.
pub fn trace_stage(cfg: &ProjectConfig, opts: &RunOptions) -> Result<BTreeMap<VariantName, Vec<TraceResult>>> {
    let out = &cfg.out_dir;
    let fixes: Vec<FixRecord> = read_json(&out.join("matches.json"))?;
    let bugs: Vec<DistinctBug> = read_json(&out.join("bugs.json"))?;
    let maps: Vec<InnerCommitMap> = read_json(&out.join("inner_maps.json"))?;
    let snapshot = load_snapshot(&cfg.snapshot_dir)?;
    let repo = Repository::open(&cfg.repo_path)?;
    let recon = Reconstruction::from_list(maps, &snapshot);
    let graph = graph_for(&snapshot, &repo, &recon, cfg)?;
    let bugs: BTreeMap<IssueRef, DistinctBug> = bugs.into_iter().map(|b| (b.canonical.clone(), b)).collect();
    let owners = recon.owners();
    let profiles = cfg.profiles();
    let patterns = cfg.link_patterns()?;
    let inputs = TraceInputs {
        snapshot: &snapshot,
        bugs: &bugs,
        graph: &graph,
        reconstruction: &recon,
        owners: &owners,
        profiles: &profiles,
        patterns: &patterns,
        thresholds: cfg.thresholds(),
    };

    let cache = out.join("cache").join("blame.json");
    if repo.load_blame_cache(&cache)? {
        info!("loaded blame cache {}", cache.display());
    }
    let mut cached: BlameEntries = repo.export_blame_cache();
    let repo_path = repo.path().to_path_buf();
    let chunks = round_robin(&fixes, opts.jobs);
    let mut all = BTreeMap::new();
    for variant in cfg.variant_ids()? {
        let (mut results, caches) = std::thread::scope(|scope| -> Result<(Vec<TraceResult>, Vec<BlameEntries>)> {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    let (inputs, repo_path, variant, cached) = (&inputs, &repo_path, &variant, &cached);
                    scope.spawn(move || -> Result<(Vec<TraceResult>, BlameEntries)> {
                        let repo = Repository::open(repo_path)?;
                        repo.import_blame_cache(cached.clone());
                        let results = run_variant(&repo, inputs, variant, chunk)?;
                        Ok((results, repo.export_blame_cache()))
                    })
                })
                .collect();
            let mut results = Vec::new();
            let mut caches = Vec::new();
            for h in handles {
                let (r, c) = h.join().expect("tracing worker panicked")?;
                results.extend(r);
                caches.push(c);
            }
            Ok((results, caches))
        })?;
        for c in caches {
            repo.import_blame_cache(c);
        }
        cached = repo.export_blame_cache();
        results.sort_by(|a, b| (&a.bug, &a.fix).cmp(&(&b.bug, &b.fix)));
        let name = variant.name.as_str();
        write_json(&out.join("traces").join(format!("{name}.json")), &results)?;
        let datasets = out.join("datasets");
        fs::create_dir_all(&datasets)?;
        for level in DatasetLevel::ALL {
            write_dataset(&results, level, &datasets.join(format!("{name}_{}.csv", level.as_str())))
                .map_err(CliError::from)?;
        }
        info!("{name}: {} traced fixes", results.len());
        all.insert(variant.name, results);
    }
    if let Err(e) = repo.save_blame_cache(&cache) {
        warn!("cannot save blame cache {}: {e}", cache.display());
    }
    Ok(all)
}

fn truth_path(cfg: &ProjectConfig, opts: &RunOptions) -> Result<PathBuf> {
    opts.truth
        .clone()
        .or_else(|| cfg.truth.clone())
        .ok_or_else(|| CliError::MissingTruth("no ground truth configured".into()))
}

fn covered(fix: &FixRecord, truth: &GroundTruth) -> bool {
    std::iter::once(&fix.bug)
        .chain(fix.aliases.iter())
        .any(|r| truth.fixing.contains_key(&r.to_string()))
}

/// Scores fixing commits and every traced variant against the ground truth.
/// Only bugs that have a truth entry are scored; a traced fix whose commit
/// has no inducing truth contributes false positives only.
pub fn evaluate_stage(cfg: &ProjectConfig, opts: &RunOptions) -> Result<Evaluation> {
    let truth_file = truth_path(cfg, opts)?;
    if !truth_file.exists() {
        return Err(CliError::MissingTruth(truth_file.display().to_string()));
    }
    let truth = GroundTruth::load(&truth_file)?;
    let out = &cfg.out_dir;
    let fixes: Vec<FixRecord> = read_json(&out.join("matches.json"))?;
    let bszz: Vec<FixRecord> = read_json(&out.join("matches_bszz.json"))?;
    let scored: Vec<FixRecord> = fixes.iter().filter(|f| covered(f, &truth)).cloned().collect();
    let scored_bszz: Vec<FixRecord> = bszz.iter().filter(|f| covered(f, &truth)).cloned().collect();
    let scored_bugs: BTreeSet<&IssueRef> = scored.iter().map(|f| &f.bug).collect();
    let fixing = FixingMetrics {
        pr_szz: eval_fixing(&scored, &truth)?,
        b_szz: eval_fixing(&scored_bszz, &truth)?,
    };
    let cov = CoverageReport {
        pr_szz: coverage(&fixes),
        b_szz: coverage(&bszz),
    };

    let mut inducing = BTreeMap::new();
    for variant in cfg.variant_ids()? {
        let name = variant.name.as_str();
        let results: Vec<TraceResult> = read_json(&out.join("traces").join(format!("{name}.json")))?;
        let results: Vec<TraceResult> = results.into_iter().filter(|r| scored_bugs.contains(&r.bug)).collect();
        let full = eval_inducing_open(&results, &truth, false);
        let selected = variant
            .options
            .selection
            .map(|_| eval_inducing_open(&results, &truth, true));
        inducing.insert(
            name.to_string(),
            VariantMetrics {
                full,
                selected,
                reported: selected.unwrap_or(full),
            },
        );
    }
    write_json(&out.join("metrics.json"), &inducing)?;
    write_json(&out.join("fixing_metrics.json"), &fixing)?;
    write_json(&out.join("coverage.json"), &cov)?;
    Ok(Evaluation {
        inducing,
        fixing,
        coverage: cov,
    })
}

fn collect_files(dir: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let rel = rel.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            collect_files(&entry.path(), &rel, out)?;
        } else {
            out.push(rel);
        }
    }
    Ok(())
}

/// SHA-256 of every output file except the blame cache and the manifest.
pub fn write_manifest(cfg: &ProjectConfig) -> Result<BTreeMap<String, String>> {
    let out = &cfg.out_dir;
    let mut files = Vec::new();
    collect_files(out, Path::new(""), &mut files)?;
    let mut manifest = BTreeMap::new();
    for rel in files {
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if key.starts_with("cache/") || key == "manifest.json" {
            continue;
        }
        let digest = Sha256::digest(fs::read(out.join(&rel))?);
        manifest.insert(key, hex::encode(digest));
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// All stages in order. Evaluation runs when ground truth is configured.
pub fn run(cfg: &ProjectConfig, opts: &RunOptions) -> Result<Option<Evaluation>> {
    ingest(cfg, opts)?;
    match_stage(cfg, opts)?;
    trace_stage(cfg, opts)?;
    let eval = if opts.truth.is_some() || cfg.truth.is_some() {
        Some(evaluate_stage(cfg, opts)?)
    } else {
        None
    };
    write_manifest(cfg)?;
    Ok(eval)
}
