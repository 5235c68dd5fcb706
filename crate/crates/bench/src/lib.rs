//! Criterion benchmarks for the dwell-time pipeline live in `benches/`.
