// SPDX-License-Identifier: Apache-2.0

//! Elevation-map based LiDAR ground segmentation and terrain estimation.
//!
//! The per-frame pipeline over a vehicle-centered 2D grid map:
//!
//! 1. **Recenter** — the map follows the vehicle in whole-cell steps,
//!    keeping its persistent elevation/confidence layers world-anchored.
//! 2. **Outlier filtering** — returns without line of sight to the sensor
//!    (reflections landing below the known terrain) are rejected by marching
//!    the sensor-to-point cell ray against the elevation map.
//! 3. **Rasterization** — per-cell z statistics (count, min, max, mean,
//!    variance) accumulate in a single pass with Welford's recurrence.
//! 4. **Ground classification** — cells whose (distance-scaled) z variance is
//!    low enough hold only ground points; sparse cells borrow their patch's
//!    average variance.
//! 5. **Elevation fusion** — count-weighted minimum heights update the
//!    persistent elevation, blended by confidence; obstacle cells may only
//!    lower it.
//! 6. **Interpolation** — cells without a ground detection blend their
//!    neighborhood spirally outward from the sensor, and their confidence
//!    decays.
//! 7. **Segmentation** — every point is labeled ground/non-ground by its
//!    height above the final map, with separate thresholds over ground and
//!    obstacle cells.
//!
//! The crate also ships the dataset I/O (raw scans, labels, pose chains),
//! the evaluation harness (precision/recall/F1/IoU/accuracy and terrain
//! RMSE), and a synthetic-scene generator with exact ground truth.

pub mod cloud;
pub mod config;
pub mod error;
pub mod eval;
pub mod grid;
pub mod ground;
pub mod interpolate;
pub mod io;
pub mod outlier;
pub mod pipeline;
pub mod raster;
pub mod ray;
pub mod segment;
pub mod synth;

pub use cloud::{Point, PointCloud, PointLabel};
pub use config::Config;
pub use error::{Error, Result};
pub use grid::{CellClass, CellIndex, GridMap};
pub use pipeline::{FrameResult, Pipeline, StageTimings};
