//! Criterion benchmarks live in `benches/`; run them with
//! `cargo bench -p cvarcut-bench`. The comparison report is
//! produced by `cvarcut bench`.
