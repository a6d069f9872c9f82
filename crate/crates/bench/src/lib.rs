//! Criterion benchmarks for the hot paths: link extraction, the cosmetic
//! filter, blame and a full pipeline run. Run with `cargo bench -p prszz-bench`.
