//! Criterion benchmarks for the hot kernels of `msa-core`; see `benches/`.
