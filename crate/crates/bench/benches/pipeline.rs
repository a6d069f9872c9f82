use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use prszz_cli::config::ProjectConfig;
use prszz_cli::fixture::{generate, scenarios};
use prszz_cli::pipeline::{self, RunOptions};
use prszz_core::filter::cosmetic_lines;
use prszz_core::lexer::LanguageProfile;
use prszz_core::links::LinkPatterns;
use prszz_core::vcs::{BlameOptions, Hunk};
use prszz_core::Repository;
use tempfile::TempDir;

fn link_extraction(c: &mut Criterion) {
    let keys: BTreeSet<String> = ["KAFKA".to_string(), "HDFS".to_string()].into();
    let patterns = LinkPatterns::new(true, &keys);
    let messages: Vec<String> = (0..1000)
        .map(|i| match i % 4 {
            0 => format!("Fixes #{i}: handle empty input"),
            1 => format!("KAFKA-{i}: tighten retry loop"),
            2 => format!("Refactor module {i} (#{})", i + 1),
            _ => format!("Plain message number {i} without references"),
        })
        .collect();
    c.bench_function("extract links from 1000 messages", |b| {
        b.iter(|| messages.iter().map(|m| patterns.extract(black_box(m)).len()).sum::<usize>())
    });
}

fn cosmetic_filter(c: &mut Criterion) {
    let profile = LanguageProfile::java();
    let hunks: Vec<Hunk> = (0..200)
        .map(|i| Hunk {
            old_start: i * 10 + 1,
            removed: (0..5).map(|k| (i * 10 + 1 + k, format!("    int v{k} = f({i}); // old"))).collect(),
            new_start: i * 10 + 1,
            added: (0..5).map(|k| (i * 10 + 1 + k, format!("\tint v{k} = f({i});"))).collect(),
        })
        .collect();
    c.bench_function("cosmetic filter over 200 hunks", |b| {
        b.iter(|| hunks.iter().map(|h| cosmetic_lines(black_box(h), Some(&profile)).0.len()).sum::<usize>())
    });
}

fn blame(c: &mut Criterion) {
    let tmp = TempDir::new().unwrap();
    let fx = generate(&scenarios::random_history(7), &tmp.path().join("fx")).unwrap();
    let repo = Repository::open(&fx.repo_path).unwrap();
    let head = repo.head().unwrap();
    let diffs = repo.diff_to_parent(&head).unwrap();
    let path = diffs.first().map(|d| d.path().to_string()).unwrap();
    c.bench_function("blame one file of a random history", |b| {
        b.iter_batched(
            || repo.reopen().unwrap(),
            |fresh| fresh.blame_file(&head, &path, BlameOptions::default()).unwrap().len(),
            BatchSize::SmallInput,
        )
    });
}

fn full_pipeline(c: &mut Criterion) {
    let tmp = TempDir::new().unwrap();
    let fx = generate(&scenarios::noise_corpus(), &tmp.path().join("fx")).unwrap();
    let cfg = ProjectConfig::load(&fx.config_path).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("run on the 30-fix noise corpus", |b| {
        b.iter_batched(
            || {
                let _ = std::fs::remove_dir_all(&cfg.out_dir);
            },
            |()| pipeline::run(&cfg, &RunOptions::default()).unwrap(),
            BatchSize::PerIteration,
        )
    });
    group.finish();
}

criterion_group!(benches, link_extraction, cosmetic_filter, blame, full_pipeline);
criterion_main!(benches);
