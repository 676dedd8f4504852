//! Criterion benchmarks for the engine, the chain solver and simulated
//! sessions. Run with `cargo bench -p mrl-bench`.
