//! Criterion benchmarks for the trust engine, the urn oracle and the ledger.
//! Run with `cargo bench -p laplace-trust-bench`.
