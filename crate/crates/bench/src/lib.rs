//! Criterion benchmarks for `robust-mpc`; see `benches/`.
