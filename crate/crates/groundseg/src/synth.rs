// SPDX-License-Identifier: Apache-2.0

//! Synthetic scenes: analytic terrain, box obstacles, and a rotating-beam
//! sensor model producing labeled point clouds with exact ground truth.
//!
//! Terrain height is a sum of primitives that are piecewise linear along any
//! ray, so ray-terrain intersections are solved exactly by cutting the ray at
//! the primitives' breakpoints and solving the linear piece that crosses.
//! Scans are deterministic in the scene seed: every ray draws from its own
//! counter-derived RNG stream, independent of threading.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cloud::{Point, PointCloud};
use crate::config::parse_kv_lines;
use crate::error::{Error, Result};
use crate::io::poses::Pose;
use crate::io::{labels, velodyne};

/// Truth semantic id for terrain returns (road).
pub const TRUTH_GROUND: u16 = 40;
/// Truth semantic id for obstacle returns (car).
pub const TRUTH_OBSTACLE: u16 = 10;
/// Truth semantic id for injected reflection outliers.
pub const TRUTH_OUTLIER: u16 = 1;

/// Height-field building block. Each primitive adds to the total height and
/// is piecewise linear along x/y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerrainPrimitive {
    /// `h += offset + grade_x * x + grade_y * y`.
    Plane { grade_x: f64, grade_y: f64, offset: f64 },
    /// Linear rise from 0 at `x0` to `rise` at `x1`, constant outside.
    Ramp { x0: f64, x1: f64, rise: f64 },
    /// Step of `height` on one side of the line `y = line`.
    Curb { line: f64, height: f64, raised_above: bool },
    /// Triangular channel across `y = center`: depth at the center line,
    /// back to 0 at `center ± width / 2`.
    Ditch { center: f64, depth: f64, width: f64 },
}

impl TerrainPrimitive {
    fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            TerrainPrimitive::Plane { grade_x, grade_y, offset } => {
                offset + grade_x * x + grade_y * y
            }
            TerrainPrimitive::Ramp { x0, x1, rise } => {
                if x <= x0 {
                    0.0
                } else if x >= x1 {
                    rise
                } else {
                    rise * (x - x0) / (x1 - x0)
                }
            }
            TerrainPrimitive::Curb { line, height, raised_above } => {
                let on_raised_side = if raised_above { y >= line } else { y <= line };
                if on_raised_side {
                    height
                } else {
                    0.0
                }
            }
            TerrainPrimitive::Ditch { center, depth, width } => {
                let t = (y - center).abs();
                if t < width / 2.0 {
                    -depth * (1.0 - t / (width / 2.0))
                } else {
                    0.0
                }
            }
        }
    }

    /// Ray parameters where this primitive's slope along the ray changes.
    fn breakpoints(&self, o: [f64; 2], d: [f64; 2], t_max: f64, out: &mut Vec<f64>) {
        let mut cut_x = |value: f64| {
            if d[0] != 0.0 {
                let t = (value - o[0]) / d[0];
                if t > 0.0 && t < t_max {
                    out.push(t);
                }
            }
        };
        match *self {
            TerrainPrimitive::Plane { .. } => {}
            TerrainPrimitive::Ramp { x0, x1, .. } => {
                cut_x(x0);
                cut_x(x1);
            }
            TerrainPrimitive::Curb { line, .. } => {
                if d[1] != 0.0 {
                    let t = (line - o[1]) / d[1];
                    if t > 0.0 && t < t_max {
                        out.push(t);
                    }
                }
            }
            TerrainPrimitive::Ditch { center, width, .. } => {
                if d[1] != 0.0 {
                    for value in [center - width / 2.0, center, center + width / 2.0] {
                        let t = (value - o[1]) / d[1];
                        if t > 0.0 && t < t_max {
                            out.push(t);
                        }
                    }
                }
            }
        }
    }
}

/// Total analytic height field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerrainModel {
    pub primitives: Vec<TerrainPrimitive>,
}

impl TerrainModel {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.primitives.iter().map(|p| p.height(x, y)).sum()
    }

    /// First intersection of the ray `origin + t * dir` with the surface,
    /// `t` in `(0, t_max]`. Exact: the height along the ray is piecewise
    /// linear, so each piece is solved in closed form.
    pub fn ray_hit(&self, origin: [f64; 3], dir: [f64; 3], t_max: f64) -> Option<f64> {
        let o_xy = [origin[0], origin[1]];
        let d_xy = [dir[0], dir[1]];
        let mut cuts = vec![0.0, t_max];
        for prim in &self.primitives {
            prim.breakpoints(o_xy, d_xy, t_max, &mut cuts);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let f = |t: f64| {
            origin[2] + dir[2] * t - self.height(origin[0] + dir[0] * t, origin[1] + dir[1] * t)
        };
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 1e-12 {
                continue;
            }
            // Nudge inward so both samples sit on the segment's own linear
            // piece even across height jumps at the boundary.
            let eps = (b - a) * 1e-9;
            let (ta, tb) = (a + eps, b - eps);
            let (fa, fb) = (f(ta), f(tb));
            if fa <= 0.0 {
                // Swallowed right at the segment start (an upward jump).
                return Some(ta);
            }
            if fb <= 0.0 {
                return Some(ta + (tb - ta) * fa / (fa - fb));
            }
        }
        None
    }

    /// Heights sampled at the cell centers of a grid, row-major.
    pub fn sample_grid(&self, resolution: f64, dims: usize, center: [f64; 2]) -> Vec<f64> {
        let half = (dims / 2) as f64;
        let mut out = Vec::with_capacity(dims * dims);
        for i in 0..dims {
            let x = center[0] + (i as f64 - half) * resolution;
            for j in 0..dims {
                let y = center[1] + (j as f64 - half) * resolution;
                out.push(self.height(x, y));
            }
        }
        out
    }
}

/// Axis box (yaw-rotated), resting on the terrain at its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObstacle {
    pub cx: f64,
    pub cy: f64,
    pub yaw: f64,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl BoxObstacle {
    /// Slab test in the box frame; returns the entry parameter.
    fn ray_hit(&self, z_base: f64, origin: [f64; 3], dir: [f64; 3], t_max: f64) -> Option<f64> {
        let (s, c) = (-self.yaw).sin_cos();
        let rel = [origin[0] - self.cx, origin[1] - self.cy, origin[2] - z_base];
        let o = [c * rel[0] - s * rel[1], s * rel[0] + c * rel[1], rel[2]];
        let d = [c * dir[0] - s * dir[1], s * dir[0] + c * dir[1], dir[2]];
        let bounds = [
            (-self.lx / 2.0, self.lx / 2.0),
            (-self.ly / 2.0, self.ly / 2.0),
            (0.0, self.lz),
        ];
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for axis in 0..3 {
            let (lo, hi) = bounds[axis];
            if d[axis].abs() < 1e-12 {
                if o[axis] < lo || o[axis] > hi {
                    return None;
                }
                continue;
            }
            let ta = (lo - o[axis]) / d[axis];
            let tb = (hi - o[axis]) / d[axis];
            let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        (t0 > 0.0).then_some(t0)
    }
}

/// Rotating-beam sensor model.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub beams: usize,
    pub elev_min_deg: f64,
    pub elev_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub mount_height: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        // HDL-64-like: 64 beams from -24.9 to +2 degrees, 1.73 m mount.
        SensorModel {
            beams: 64,
            elev_min_deg: -24.9,
            elev_max_deg: 2.0,
            azimuth_step_deg: 0.4,
            mount_height: 1.73,
            max_range: 120.0,
            noise_sigma: 0.02,
        }
    }
}

impl SensorModel {
    pub fn azimuth_count(&self) -> usize {
        (360.0 / self.azimuth_step_deg).round() as usize
    }

    fn elevation_rad(&self, beam: usize) -> f64 {
        let el = if self.beams <= 1 {
            self.elev_min_deg
        } else {
            self.elev_min_deg
                + beam as f64 * (self.elev_max_deg - self.elev_min_deg) / (self.beams - 1) as f64
        };
        el.to_radians()
    }
}

/// Reflection outlier injection: fraction of terrain returns lowered by a
/// uniform depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierInjection {
    pub rate: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Default for OutlierInjection {
    fn default() -> Self {
        OutlierInjection {
            rate: 0.0,
            depth_min: 1.0,
            depth_max: 2.0,
        }
    }
}

/// Full scene description: terrain, obstacles, sensor, injection, seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneSpec {
    pub terrain: TerrainModel,
    pub obstacles: Vec<BoxObstacle>,
    pub sensor: SensorModel,
    pub outliers: OutlierInjection,
    pub seed: u64,
}

impl SceneSpec {
    /// Parse the plain-text scene description (same `key = value` dialect as
    /// the pipeline config; primitive keys may repeat and append).
    pub fn from_str(text: &str) -> Result<Self> {
        let mut spec = SceneSpec::default();
        for item in parse_kv_lines(text) {
            let (line, key, value) = item?;
            let nums = || -> Result<Vec<f64>> {
                value
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| {
                            Error::config(key, format!("bad number `{tok}` (line {line})"))
                        })
                    })
                    .collect()
            };
            let one = || -> Result<f64> {
                let v = nums()?;
                if v.len() != 1 {
                    return Err(Error::config(key, format!("expected one value (line {line})")));
                }
                Ok(v[0])
            };
            match key {
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| Error::config(key, format!("bad seed (line {line})")))?
                }
                "beams" => spec.sensor.beams = one()? as usize,
                "elev_min_deg" => spec.sensor.elev_min_deg = one()?,
                "elev_max_deg" => spec.sensor.elev_max_deg = one()?,
                "azimuth_step_deg" => spec.sensor.azimuth_step_deg = one()?,
                "mount_height" => spec.sensor.mount_height = one()?,
                "max_range" => spec.sensor.max_range = one()?,
                "noise_sigma" => spec.sensor.noise_sigma = one()?,
                "outlier_rate" => spec.outliers.rate = one()?,
                "outlier_depth_min" => spec.outliers.depth_min = one()?,
                "outlier_depth_max" => spec.outliers.depth_max = one()?,
                "plane" => {
                    let v = nums()?;
                    if v.is_empty() || v.len() > 3 {
                        return Err(Error::config(
                            key,
                            format!("expected `grade_x [grade_y] [offset]` (line {line})"),
                        ));
                    }
                    spec.terrain.primitives.push(TerrainPrimitive::Plane {
                        grade_x: v[0],
                        grade_y: v.get(1).copied().unwrap_or(0.0),
                        offset: v.get(2).copied().unwrap_or(0.0),
                    });
                }
                "ramp" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(Error::config(key, format!("expected `x0 x1 rise` (line {line})")));
                    }
                    spec.terrain.primitives.push(TerrainPrimitive::Ramp {
                        x0: v[0],
                        x1: v[1],
                        rise: v[2],
                    });
                }
                "curb" => {
                    let mut parts = value.split_whitespace();
                    let mut num = |name: &str| -> Result<f64> {
                        parts
                            .next()
                            .and_then(|tok| tok.parse().ok())
                            .ok_or_else(|| {
                                Error::config(key, format!("bad {name} (line {line})"))
                            })
                    };
                    let line_pos = num("line")?;
                    let height = num("height")?;
                    let side = parts.next().unwrap_or("above");
                    let raised_above = match side {
                        "above" => true,
                        "below" => false,
                        other => {
                            return Err(Error::config(
                                key,
                                format!("side must be `above` or `below`, got `{other}` (line {line})"),
                            ))
                        }
                    };
                    spec.terrain.primitives.push(TerrainPrimitive::Curb {
                        line: line_pos,
                        height,
                        raised_above,
                    });
                }
                "ditch" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(Error::config(
                            key,
                            format!("expected `center depth width` (line {line})"),
                        ));
                    }
                    spec.terrain.primitives.push(TerrainPrimitive::Ditch {
                        center: v[0],
                        depth: v[1],
                        width: v[2],
                    });
                }
                "box" => {
                    let v = nums()?;
                    if v.len() != 6 {
                        return Err(Error::config(
                            key,
                            format!("expected `cx cy yaw lx ly lz` (line {line})"),
                        ));
                    }
                    spec.obstacles.push(BoxObstacle {
                        cx: v[0],
                        cy: v[1],
                        yaw: v[2],
                        lx: v[3],
                        ly: v[4],
                        lz: v[5],
                    });
                }
                _ => return Err(Error::config(key, format!("unknown key (line {line})"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if !(s.azimuth_step_deg > 0.0) {
            return Err(Error::config("azimuth_step_deg", "must be > 0"));
        }
        let ratio = 360.0 / s.azimuth_step_deg;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "azimuth_step_deg",
                format!("{} does not divide 360 degrees", s.azimuth_step_deg),
            ));
        }
        if s.elev_min_deg > s.elev_max_deg {
            return Err(Error::config("elev_min_deg", "must be <= elev_max_deg"));
        }
        if !(s.mount_height > 0.0) {
            return Err(Error::config("mount_height", "must be > 0"));
        }
        if !(s.max_range > 0.0) {
            return Err(Error::config("max_range", "must be > 0"));
        }
        if s.noise_sigma < 0.0 {
            return Err(Error::config("noise_sigma", "must be >= 0"));
        }
        let o = &self.outliers;
        if !(0.0..=1.0).contains(&o.rate) {
            return Err(Error::config("outlier_rate", "must be in [0, 1]"));
        }
        if o.rate > 0.0 && !(0.0 < o.depth_min && o.depth_min <= o.depth_max) {
            return Err(Error::config(
                "outlier_depth_min",
                "need 0 < depth_min <= depth_max",
            ));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Cast one scan from `pose` (the sensor pose: its translation is the sensor
/// origin in the world frame). Returns the world-frame cloud and per-point
/// truth semantic ids, aligned by index.
pub fn generate_scan(spec: &SceneSpec, pose: &Pose, frame_id: u64) -> (PointCloud, Vec<u16>) {
    let sensor = &spec.sensor;
    let origin = pose.translation;
    let n_az = if sensor.beams == 0 { 0 } else { sensor.azimuth_count() };
    let base = splitmix64(spec.seed ^ splitmix64(frame_id));

    // Box bases are fixed by the terrain under their centers.
    let boxes: Vec<(BoxObstacle, f64)> = spec
        .obstacles
        .iter()
        .map(|b| (*b, spec.terrain.height(b.cx, b.cy)))
        .collect();

    let columns: Vec<Vec<(Point, u16)>> = (0..n_az)
        .into_par_iter()
        .map(|az_idx| {
            let az = (az_idx as f64 * sensor.azimuth_step_deg).to_radians();
            let (sin_az, cos_az) = az.sin_cos();
            let mut column = Vec::new();
            for beam in 0..sensor.beams {
                let el = sensor.elevation_rad(beam);
                let (sin_el, cos_el) = el.sin_cos();
                let dir = pose.rotate([cos_el * cos_az, cos_el * sin_az, sin_el]);

                let t_terrain = spec.terrain.ray_hit(origin, dir, sensor.max_range);
                let mut hit: Option<(f64, bool)> = t_terrain.map(|t| (t, true));
                for (bx, z_base) in &boxes {
                    let limit = hit.map(|(t, _)| t).unwrap_or(sensor.max_range);
                    if let Some(t) = bx.ray_hit(*z_base, origin, dir, limit) {
                        hit = Some((t, false));
                    }
                }
                let Some((t, is_ground)) = hit else { continue };

                let ray_idx = (az_idx * sensor.beams + beam) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(base ^ splitmix64(ray_idx));
                let noise: f64 = rng.sample(StandardNormal);
                let range = (t + sensor.noise_sigma * noise).max(0.05);
                let mut point = Point {
                    x: origin[0] + dir[0] * range,
                    y: origin[1] + dir[1] * range,
                    z: origin[2] + dir[2] * range,
                    intensity: 0.5,
                };
                let mut truth = if is_ground { TRUTH_GROUND } else { TRUTH_OBSTACLE };
                if is_ground && spec.outliers.rate > 0.0 && rng.gen::<f64>() < spec.outliers.rate {
                    let depth = if spec.outliers.depth_max > spec.outliers.depth_min {
                        rng.gen_range(spec.outliers.depth_min..spec.outliers.depth_max)
                    } else {
                        spec.outliers.depth_min
                    };
                    point.z -= depth;
                    truth = TRUTH_OUTLIER;
                }
                column.push((point, truth));
            }
            column
        })
        .collect();

    let mut points = Vec::new();
    let mut truth = Vec::new();
    for column in columns {
        for (p, t) in column {
            points.push(p);
            truth.push(t);
        }
    }
    (
        PointCloud {
            points,
            sensor_origin: origin,
            frame_id,
        },
        truth,
    )
}

/// Exact terrain heights at the cell centers of a grid (the RMSE reference).
pub fn truth_height_field(
    spec: &SceneSpec,
    resolution: f64,
    dims: usize,
    center: [f64; 2],
) -> Vec<f64> {
    spec.terrain.sample_grid(resolution, dims, center)
}

/// Sensor poses along a straight drive in +x at ground level plus mount.
pub fn straight_trajectory(spec: &SceneSpec, frames: usize, speed: f64, dt: f64) -> Vec<Pose> {
    (0..frames)
        .map(|k| {
            let x = k as f64 * speed * dt;
            let z = spec.terrain.height(x, 0.0) + spec.sensor.mount_height;
            Pose {
                rotation: Pose::IDENTITY.rotation,
                translation: [x, 0.0, z],
            }
        })
        .collect()
}

/// Write a synthetic sequence in the on-disk layout the pipeline consumes:
/// `velodyne/*.bin` (sensor frame), `labels/*.label` (truth ids),
/// `poses.txt`, `calib.txt` (identity `Tr`).
pub fn write_kitti_sequence(spec: &SceneSpec, poses: &[Pose], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let velo_dir = dir.join("velodyne");
    let label_dir = dir.join("labels");
    std::fs::create_dir_all(&velo_dir).map_err(|e| Error::io(&velo_dir, e))?;
    std::fs::create_dir_all(&label_dir).map_err(|e| Error::io(&label_dir, e))?;

    let mut poses_text = String::new();
    for (k, pose) in poses.iter().enumerate() {
        let (world, truth) = generate_scan(spec, pose, k as u64);
        let inv = pose.inverse();
        let sensor_frame = PointCloud {
            points: world
                .points
                .iter()
                .map(|p| {
                    let [x, y, z] = inv.apply([p.x, p.y, p.z]);
                    Point { x, y, z, intensity: p.intensity }
                })
                .collect(),
            sensor_origin: [0.0; 3],
            frame_id: k as u64,
        };
        let bin_path = velo_dir.join(format!("{k:06}.bin"));
        std::fs::write(&bin_path, velodyne::write_velodyne_bin(&sensor_frame))
            .map_err(|e| Error::io(&bin_path, e))?;
        let label_path = label_dir.join(format!("{k:06}.label"));
        std::fs::write(&label_path, labels::write_labels(&truth))
            .map_err(|e| Error::io(&label_path, e))?;

        let r = &pose.rotation;
        let t = &pose.translation;
        let _ = writeln!(
            poses_text,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            r[0][0], r[0][1], r[0][2], t[0],
            r[1][0], r[1][1], r[1][2], t[1],
            r[2][0], r[2][1], r[2][2], t[2],
        );
    }
    let poses_path = dir.join("poses.txt");
    std::fs::write(&poses_path, poses_text).map_err(|e| Error::io(&poses_path, e))?;
    let calib_path = dir.join("calib.txt");
    std::fs::write(&calib_path, "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n")
        .map_err(|e| Error::io(&calib_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_spec(noise: f64) -> SceneSpec {
        SceneSpec {
            sensor: SensorModel {
                noise_sigma: noise,
                ..SensorModel::default()
            },
            ..SceneSpec::default()
        }
    }

    fn origin_pose(spec: &SceneSpec) -> Pose {
        Pose {
            rotation: Pose::IDENTITY.rotation,
            translation: [0.0, 0.0, spec.sensor.mount_height],
        }
    }

    #[test]
    fn flat_scan_radii_match_closed_form() {
        // On flat terrain every downward beam lands at r = h / tan(|el|).
        let spec = flat_spec(0.0);
        let (cloud, truth) = generate_scan(&spec, &origin_pose(&spec), 0);
        assert!(!cloud.is_empty());
        assert!(truth.iter().all(|&t| t == TRUTH_GROUND));
        let h = spec.sensor.mount_height;
        for p in &cloud.points {
            let r = (p.x * p.x + p.y * p.y).sqrt();
            let slant = (r * r + h * h).sqrt();
            let el = (h / r).atan();
            let expected = h / el.tan();
            assert!(
                (r - expected).abs() < 1e-9 * slant.max(1.0),
                "r {r} vs {expected}"
            );
            assert!(p.z.abs() < 1e-9);
        }
    }

    #[test]
    fn box_face_is_hit_at_its_distance() {
        let mut spec = flat_spec(0.0);
        spec.sensor.beams = 5;
        spec.sensor.elev_min_deg = -2.0;
        spec.sensor.elev_max_deg = 2.0;
        // Front face at x = 10, wide enough to catch the level beam.
        spec.obstacles.push(BoxObstacle {
            cx: 10.5,
            cy: 0.0,
            yaw: 0.0,
            lx: 1.0,
            ly: 4.0,
            lz: 3.0,
        });
        let (cloud, truth) = generate_scan(&spec, &origin_pose(&spec), 0);
        let hit = cloud
            .points
            .iter()
            .zip(&truth)
            .find(|(p, _)| p.y.abs() < 1e-9 && p.z > 1.0)
            .expect("level beam should hit the box face");
        assert_eq!(*hit.1, TRUTH_OBSTACLE);
        assert!((hit.0.x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_beams_give_an_empty_cloud() {
        let mut spec = flat_spec(0.0);
        spec.sensor.beams = 0;
        let (cloud, truth) = generate_scan(&spec, &origin_pose(&spec), 0);
        assert!(cloud.is_empty());
        assert!(truth.is_empty());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let spec = flat_spec(0.02);
        let pose = origin_pose(&spec);
        let (a, ta) = generate_scan(&spec, &pose, 3);
        let (b, tb) = generate_scan(&spec, &pose, 3);
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let mut other = spec.clone();
        other.seed = 1;
        let (c, _) = generate_scan(&other, &pose, 3);
        assert_ne!(a, c);
    }

    #[test]
    fn injected_outliers_are_always_lowered() {
        let mut spec = flat_spec(0.02);
        spec.outliers.rate = 0.3;
        let pose = origin_pose(&spec);
        let (cloud, truth) = generate_scan(&spec, &pose, 0);
        let injected = truth.iter().filter(|&&t| t == TRUTH_OUTLIER).count();
        assert!(injected > 0);
        for (p, &t) in cloud.points.iter().zip(&truth) {
            if t == TRUTH_OUTLIER {
                // True terrain is at z = 0; emitted point must sit below it.
                let z_true = spec.terrain.height(p.x, p.y);
                assert!(z_true - p.z > 0.0);
                assert!(z_true - p.z >= spec.outliers.depth_min - 4.0 * spec.sensor.noise_sigma);
            }
        }
    }

    #[test]
    fn terrain_examples() {
        // 9.2 % incline over a 250 m path climbs 23 m.
        let spec = SceneSpec::from_str("plane = 0.092\n").unwrap();
        let rise = spec.terrain.height(250.0, 0.0) - spec.terrain.height(0.0, 0.0);
        assert!((rise - 23.0).abs() < 1e-9);
        // Flat plane samples to zero.
        let flat = SceneSpec::default();
        assert!(truth_height_field(&flat, 0.5, 11, [0.0, 0.0])
            .iter()
            .all(|&h| h == 0.0));
        // Curb: exact step at the line.
        let curbed = SceneSpec::from_str("curb = 3.5 0.15 above\n").unwrap();
        assert_eq!(curbed.terrain.height(0.0, 3.499999), 0.0);
        assert_eq!(curbed.terrain.height(0.0, 3.5), 0.15);
        // Ditch: full depth at the center, zero at the edges.
        let ditched = SceneSpec::from_str("ditch = 6 0.5 2\n").unwrap();
        assert_eq!(ditched.terrain.height(0.0, 6.0), -0.5);
        assert_eq!(ditched.terrain.height(0.0, 7.0), 0.0);
        assert!((ditched.terrain.height(0.0, 6.5) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn ray_hit_matches_fine_march_on_composed_terrain() {
        // Independent oracle: fine marching plus bisection.
        let spec = SceneSpec::from_str(
            "plane = 0.05\nramp = 5 15 1.0\ncurb = 3 0.2 above\nditch = -4 0.5 2.5\n",
        )
        .unwrap();
        let terrain = &spec.terrain;
        let origin = [0.0, 0.0, 1.73];
        let march = |dir: [f64; 3]| -> Option<f64> {
            let f = |t: f64| {
                origin[2] + dir[2] * t - terrain.height(origin[0] + dir[0] * t, origin[1] + dir[1] * t)
            };
            let step = 1e-3;
            let mut t = step;
            while t <= 120.0 {
                if f(t) <= 0.0 {
                    let (mut a, mut b) = (t - step, t);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if f(m) <= 0.0 {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    return Some(0.5 * (a + b));
                }
                t += step;
            }
            None
        };
        let mut checked = 0;
        for az_deg in [0.0, 37.0, 90.0, 141.0, 180.0, 233.0, 270.0, 322.0] {
            for el_deg in [-20.0f64, -8.0, -3.0, -1.0] {
                let az = (az_deg as f64).to_radians();
                let el = el_deg.to_radians();
                let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
                let got = terrain.ray_hit(origin, dir, 120.0);
                let expected = march(dir);
                match (got, expected) {
                    (Some(a), Some(b)) => {
                        assert!((a - b).abs() < 1e-6, "az {az_deg} el {el_deg}: {a} vs {b}");
                        checked += 1;
                    }
                    (None, None) => {}
                    other => panic!("az {az_deg} el {el_deg}: mismatch {other:?}"),
                }
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn scene_parsing_round_trip_and_errors() {
        let text = "seed = 7\nbeams = 32\nazimuth_step_deg = 0.5\nnoise_sigma = 0\n\
                    plane = 0.01 0 0.5\nbox = 12 4 0.3 2 2 1.5\ncurb = -4 0.15 below\n";
        let spec = SceneSpec::from_str(text).unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.sensor.beams, 32);
        assert_eq!(spec.obstacles.len(), 1);
        assert_eq!(spec.terrain.primitives.len(), 2);
        assert!(SceneSpec::from_str("warp_factor = 9\n").is_err());
        // 0.7 does not divide 360.
        assert!(SceneSpec::from_str("azimuth_step_deg = 0.7\n").is_err());
        assert!(SceneSpec::from_str("curb = 1 0.1 sideways\n").is_err());
    }
}
