//! Numerical laboratory for harmonic measure, boundary rotation and the
//! multifractal spectra of fractal Jordan domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`], [`spatial`], [`winding`]: planar primitives, a segment
//!   BVH and logarithmic-time argument tracking.
//! * [`domain`]: validated Jordan domains with a basepoint.
//! * [`atlas`]: domains with closed-form Riemann maps.
//! * [`repeller`]: Markov similarity repellers, prefractals and cylinders.
//! * [`harmonic`]: walk-on-spheres harmonic measure.
//! * [`rotation`]: boundary rotation of points, disks and crosscuts.
//! * [`spectra`]: packing, word, crosscut and distortion counts.
//! * [`verifier`]: multiplicativity, propagation and decay scans.
//! * [`report`]: serialisable run records shared with the command line.

pub mod atlas;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod repeller;
pub mod report;
pub mod rng;
pub mod rotation;
pub mod spatial;
pub mod spectra;
pub mod verifier;
pub mod winding;

pub use domain::{JordanDomain, Provenance};
pub use error::{LabError, Result};
pub use geometry::{Disk, Point, PolyPos, Polyline, Tolerance};
