//! Seeding-based spatial regionalization.
//!
//! The pipeline picks `p` dispersed seed areas by solving max-min dispersion
//! as a sequence of maximum-independent-set models, grows contiguous regions
//! around them, then refines the partition by solving a constrained binary
//! model over candidate border moves each iteration.

pub mod bench;
pub mod baseline;
pub mod error;
pub mod init;
pub mod localopt;
pub mod model;
pub mod seeding;
pub mod spatial;

pub use error::{Error, Result};
pub use spatial::{Area, AreaGraph, Partition, RegionId, RegionStats};

/// `|a − b| ≤ rel_tol · max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
