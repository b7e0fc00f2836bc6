//! Benchmarks for `kirchhoff-core`; see `benches/solvers.rs`.
