//! Criterion benchmarks for the puiq pipeline live in `benches/`.
