//! File formats, robustness queries and helpers around `nnverify-core`.
//!
//! * [`format`] reads and writes `.pnet` problems,
//! * [`lp_format`] reads LP text produced by [`nnverify_core::lp::export_lp`],
//! * [`queries`] builds margin, strong-classification and smooth-noise
//!   queries,
//! * [`generate`] produces seeded random networks.

pub mod clock;
pub mod error;
pub mod format;
pub mod generate;
pub mod lp_format;
pub mod queries;
pub mod report;

pub use clock::WallClock;
pub use error::{Error, Result};
pub use format::{parse_problem, parse_vector, write_problem};
pub use generate::{gen_random_network, Layer, Shape};
pub use lp_format::read_lp;

use std::path::Path;

use nnverify_core::VerificationProblem;

/// Reads and parses a `.pnet` file.
pub fn load_problem(path: &Path) -> Result<VerificationProblem> {
    let text = std::fs::read_to_string(path).map_err(|cause| Error::Io { path: path.to_path_buf(), cause })?;
    parse_problem(&text)
}
