//! Criterion benchmarks for `cone-exponents`; see `benches/`.
