//! Criterion benchmarks for the geometry kernels, the energy gradient and
//! single flow steps; run with `cargo bench -p willmore-bench`.
