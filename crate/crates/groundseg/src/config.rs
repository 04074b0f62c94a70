// SPDX-License-Identifier: Apache-2.0

//! Runtime parameters.
//!
//! Every tunable of the pipeline lives in [`Config`], loadable from a plain
//! `key = value` text file. Missing keys take the defaults below; unknown keys
//! are rejected so typos do not silently fall back to defaults.

use std::path::Path;

use crate::error::{Error, Result};

/// Pipeline parameters with their default values.
///
/// Distances are meters, angles degrees. `theta` is the per-frame confidence
/// decay divisor, `s` the point count needed for full cell confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Grid cell edge length (key `R`).
    pub resolution: f64,
    /// Variance threshold distance scaling factor (key `d_sf`).
    pub d_sf: f64,
    /// Variance threshold floor (key `t_minv`). Defaults to `5 * d_sf`.
    pub t_minv: f64,
    /// Confidence decay divisor (key `theta`); must be > 1.
    pub theta: f64,
    /// Minimum fraction of the expected point count for a cell to be
    /// classified (key `g_minp`).
    pub g_minp: f64,
    /// Minimum 5x5 confidence sum for a cell to participate in the
    /// occlusion test (key `o_minc`).
    pub o_minc: f64,
    /// Segmentation height threshold over ground-classified cells (key `h_g`).
    pub h_g: f64,
    /// Segmentation height threshold over all other cells (key `h_o`).
    pub h_o: f64,
    /// Patch point count for full confidence (key `s`).
    pub s: f64,
    /// Occlusion tolerance of the outlier test (key `o_t`).
    pub o_t: f64,
    /// Distance at which the patch grows from 3x3 to 5x5 (key `d_ps`).
    pub d_ps: f64,
    /// Angular distance of two sensor returns, degrees (key `d_pv`).
    pub d_pv: f64,
    /// Point count above which a cell's own variance is tested instead of
    /// the patch average (key `v_np`).
    pub v_np: u32,
    /// Sensor mount height above ground, used for map initialization
    /// (key `sensor_height`).
    pub sensor_height: f64,
    /// Cells per map side; must be odd (key `dims`).
    pub dims: usize,
    /// Intra-frame worker threads (key `worker_count`).
    pub worker_count: usize,
    /// Semantic ids evaluated as ground truth ground (key `ground_labels`).
    pub ground_labels: Vec<u16>,
    /// Semantic ids excluded from the metrics (key `ignore_labels`).
    pub ignore_labels: Vec<u16>,
    /// Semantic id written for predicted ground points (key `out_ground`).
    pub out_ground: u16,
    /// Semantic id written for predicted non-ground points (key `out_nonground`).
    pub out_nonground: u16,
    /// Semantic id written for rejected outlier points (key `out_outlier`).
    pub out_outlier: u16,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            resolution: 0.33,
            d_sf: 1e-5,
            t_minv: 5e-5,
            theta: 5.0,
            g_minp: 0.25,
            o_minc: 1.25,
            h_g: 0.3,
            h_o: 0.1,
            s: 20.0,
            o_t: 0.1,
            d_ps: 20.0,
            d_pv: 0.4,
            v_np: 10,
            sensor_height: 1.73,
            dims: 361,
            worker_count: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            ground_labels: vec![40, 44, 48, 49, 60, 72],
            ignore_labels: vec![0, 1, 70],
            out_ground: 40,
            out_nonground: 1,
            out_outlier: 1,
        }
    }
}

impl Config {
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut t_minv_set = false;
        for item in parse_kv_lines(text) {
            let (line, key, value) = item?;
            let fail = |msg: &str| Error::config(key, format!("{msg} (line {line})"));
            match key {
                "R" => cfg.resolution = parse_f64(key, value, line)?,
                "d_sf" => cfg.d_sf = parse_f64(key, value, line)?,
                "t_minv" => {
                    cfg.t_minv = parse_f64(key, value, line)?;
                    t_minv_set = true;
                }
                "theta" => cfg.theta = parse_f64(key, value, line)?,
                "g_minp" => cfg.g_minp = parse_f64(key, value, line)?,
                "o_minc" => cfg.o_minc = parse_f64(key, value, line)?,
                "h_g" => cfg.h_g = parse_f64(key, value, line)?,
                "h_o" => cfg.h_o = parse_f64(key, value, line)?,
                "s" => cfg.s = parse_f64(key, value, line)?,
                "o_t" => cfg.o_t = parse_f64(key, value, line)?,
                "d_ps" => cfg.d_ps = parse_f64(key, value, line)?,
                "d_pv" => cfg.d_pv = parse_f64(key, value, line)?,
                "v_np" => {
                    cfg.v_np = value.parse().map_err(|_| fail("not an unsigned integer"))?
                }
                "sensor_height" => cfg.sensor_height = parse_f64(key, value, line)?,
                "dims" => cfg.dims = value.parse().map_err(|_| fail("not an unsigned integer"))?,
                "worker_count" => {
                    cfg.worker_count =
                        value.parse().map_err(|_| fail("not an unsigned integer"))?
                }
                "ground_labels" => cfg.ground_labels = parse_id_list(key, value, line)?,
                "ignore_labels" => cfg.ignore_labels = parse_id_list(key, value, line)?,
                "out_ground" => {
                    cfg.out_ground = value.parse().map_err(|_| fail("not a label id"))?
                }
                "out_nonground" => {
                    cfg.out_nonground = value.parse().map_err(|_| fail("not a label id"))?
                }
                "out_outlier" => {
                    cfg.out_outlier = value.parse().map_err(|_| fail("not a label id"))?
                }
                _ => {
                    return Err(Error::config(
                        key,
                        format!("unknown key (line {line})"),
                    ))
                }
            }
        }
        // The floor default tracks d_sf unless pinned explicitly.
        if !t_minv_set {
            cfg.t_minv = 5.0 * cfg.d_sf;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R", self.resolution),
            ("d_sf", self.d_sf),
            ("t_minv", self.t_minv),
            ("o_minc", self.o_minc),
            ("h_g", self.h_g),
            ("h_o", self.h_o),
            ("s", self.s),
            ("o_t", self.o_t),
            ("d_ps", self.d_ps),
            ("d_pv", self.d_pv),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.theta > 1.0) {
            return Err(Error::config(
                "theta",
                format!("must be > 1, got {}", self.theta),
            ));
        }
        if !(self.g_minp > 0.0 && self.g_minp <= 1.0) {
            return Err(Error::config(
                "g_minp",
                format!("must be in (0, 1], got {}", self.g_minp),
            ));
        }
        if self.h_o > self.h_g {
            return Err(Error::config(
                "h_o",
                format!("must be <= h_g ({} > {})", self.h_o, self.h_g),
            ));
        }
        if self.v_np == 0 {
            return Err(Error::config("v_np", "must be >= 1"));
        }
        if !self.sensor_height.is_finite() {
            return Err(Error::config("sensor_height", "must be finite"));
        }
        if self.dims == 0 || self.dims % 2 == 0 {
            return Err(Error::config(
                "dims",
                format!("must be odd and positive, got {}", self.dims),
            ));
        }
        if self.worker_count == 0 {
            return Err(Error::config("worker_count", "must be >= 1"));
        }
        Ok(())
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::config(key, format!("not a number: `{value}` (line {line})")))
}

fn parse_id_list(key: &str, value: &str, line: usize) -> Result<Vec<u16>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<u16>()
                .map_err(|_| Error::config(key, format!("not a label id: `{tok}` (line {line})")))
        })
        .collect()
}

/// Scan `key = value` lines, skipping blanks and `#` comments.
///
/// Yields `(line_number, key, value)` with both sides trimmed. Shared by the
/// pipeline config and the synthetic scene description format.
pub(crate) fn parse_kv_lines(
    text: &str,
) -> impl Iterator<Item = Result<(usize, &str, &str)>> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            return None;
        }
        Some(match content.split_once('=') {
            Some((key, value)) => Ok((line, key.trim(), value.trim())),
            None => Err(Error::Format(format!(
                "line {line}: expected `key = value`, got `{content}`"
            ))),
        })
    })
}
