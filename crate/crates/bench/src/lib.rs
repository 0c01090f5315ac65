//! Benchmark-only crate; see `benches/localization.rs`.
