//! Manhattan room layout estimation from equirectangular panoramas.
//!
//! The pipeline mirrors the classical (non-learned) route through cubemap
//! Hough voting:
//!
//! 1. **geometry** – camera model, face rotations, E2P cubemap projection.
//! 2. **hough** – classical Hough sampling and the Manhattan Hough transform
//!    producing the `H`, `V` and `C` vote vectors of a tile.
//! 3. **detect** – Canny edges, standard/probabilistic Hough baselines,
//!    Manhattan filtering and peak extraction.
//! 4. **layout** – layout parameters, projection onto tiles, target smoothing,
//!    initialization and gradient-based refinement.
//! 5. **metrics** – 3D/2D IoU, corner error, pixel error and depth accuracy.
//! 6. **synth** – random Manhattan rooms and a ray-cast panorama renderer.
//! 7. **pipeline** – the end-to-end estimator wired from the stages above.
//! 8. **plot** – confidence heatmaps and layout overlays.

pub mod detect;
pub mod error;
pub mod geometry;
pub mod hough;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod polygon;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
