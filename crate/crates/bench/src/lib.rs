//! Criterion benchmarks for the model crate live in `benches/`.
