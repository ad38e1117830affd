//! Benchmark fixtures shared by the criterion benches.

use lcrip_core::{sample_matrix, DistributionSpec, Kind, Matrix, RandomStream};

/// A seeded `n x big_n` matrix of the given law, scaled by `1/sqrt(n)`.
pub fn fixture(kind: Kind, n: usize, big_n: usize, seed: u64) -> Matrix {
    sample_matrix(&DistributionSpec::new(kind, big_n), n, &RandomStream::new(seed))
        .expect("valid fixture")
        .scaled(1.0 / (n as f64).sqrt())
}
