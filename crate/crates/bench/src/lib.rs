//! Criterion benchmarks for the imopt solvers live in `benches/`.
