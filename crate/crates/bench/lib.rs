//! Criterion benchmarks for the `expint-core` kernels; see `benches/`.
