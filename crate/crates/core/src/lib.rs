//! Eye-region morphable model fitting and gaze redirection.
//!
//! The crate is organised the way a frame flows through the system:
//!
//! * [`model`] holds the parameter vector and the generative eye-region
//!   model (PCA shape and texture, eyeballs, posing).
//! * [`raster`] is a deterministic CPU rasterizer that renders posed scenes,
//!   interpolates per-vertex attributes and implements the eyeball shader.
//! * [`energy`] turns a render plus observations into residuals and energy.
//! * [`solver`] minimises the energy with annealed Gauss-Newton.
//! * [`redirect`] re-poses a fitted model, warps the eyelids with a
//!   model-derived flow field and composites re-rendered eyeballs.
//! * [`io`] reads and writes the text and binary formats used on disk.
//! * [`testkit`] generates synthetic assets and hosts brute-force oracles.

pub mod energy;
pub mod error;
pub mod image;
pub mod io;
pub mod model;
pub mod raster;
pub mod redirect;
pub mod solver;
pub mod testkit;

pub use error::{Error, Result};
pub use image::{RgbImage, Texture};
pub use model::{EyeRegionModel, ParameterVector};
pub use raster::{Camera, Raster, Renderer};

/// Three-component double precision vector used for all geometry.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Rotation matrix type used for head and eyeball orientation.
pub type Rot3 = nalgebra::Rotation3<f64>;
