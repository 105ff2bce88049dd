//! Criterion benchmarks for the hot kernels live in `benches/`; run them
//! with `cargo bench -p quadtherm-bench`.
