//! Criterion benchmarks for `wpcn-core`; run with `cargo bench -p wpcn-bench`.
