//! Criterion benchmarks for the coregene pipeline stages; see `benches/`.
