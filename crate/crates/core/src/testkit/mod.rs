//! Synthetic assets, brute-force oracles and the redirection benchmark.
//!
//! Oracles deliberately avoid the rasterizer and solver code paths: they
//! share only plain vector math with the code they check.

pub mod bench;
pub mod generate;
pub mod oracles;
