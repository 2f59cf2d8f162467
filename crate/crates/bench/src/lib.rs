//! Criterion benchmarks for the proxlith pipeline stages; see `benches/`.
