//! Criterion benchmarks for most-core live under `benches/`.
