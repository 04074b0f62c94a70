// SPDX-License-Identifier: Apache-2.0

//! Rigid transforms and the odometry pose chain.
//!
//! `poses.txt` carries one row-major 3x4 matrix per line mapping frame-k
//! camera coordinates into camera frame 0. `calib.txt` provides the `Tr:`
//! line mapping sensor coordinates into the camera frame. The sensor-frame
//! pose chain is the conjugation `Tr^-1 * P_k * Tr`.

use crate::error::{Error, Result};

/// Rigid transform: `apply(p) = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 0.0],
    };

    pub fn from_yaw_translation(yaw: f64, translation: [f64; 3]) -> Pose {
        let (s, c) = yaw.sin_cos();
        Pose {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation,
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    /// Rotate a direction vector (no translation).
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
            r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
            r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
        ]
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Pose) -> Pose {
        let a = &self.rotation;
        let b = &inner.rotation;
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Pose {
            rotation,
            translation: self.apply(inner.translation),
        }
    }

    /// Inverse via the adjugate, exact for any invertible rotation part (the
    /// parsers only hand out near-orthonormal ones).
    pub fn inverse(&self) -> Pose {
        let r = &self.rotation;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        let adj = [
            [
                r[1][1] * r[2][2] - r[1][2] * r[2][1],
                r[0][2] * r[2][1] - r[0][1] * r[2][2],
                r[0][1] * r[1][2] - r[0][2] * r[1][1],
            ],
            [
                r[1][2] * r[2][0] - r[1][0] * r[2][2],
                r[0][0] * r[2][2] - r[0][2] * r[2][0],
                r[0][2] * r[1][0] - r[0][0] * r[1][2],
            ],
            [
                r[1][0] * r[2][1] - r[1][1] * r[2][0],
                r[0][1] * r[2][0] - r[0][0] * r[2][1],
                r[0][0] * r[1][1] - r[0][1] * r[1][0],
            ],
        ];
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i][j] = adj[i][j] / det;
            }
        }
        let t = self.translation;
        let translation = [
            -(rotation[0][0] * t[0] + rotation[0][1] * t[1] + rotation[0][2] * t[2]),
            -(rotation[1][0] * t[0] + rotation[1][1] * t[1] + rotation[1][2] * t[2]),
            -(rotation[2][0] * t[0] + rotation[2][1] * t[1] + rotation[2][2] * t[2]),
        ];
        Pose {
            rotation,
            translation,
        }
    }

    /// Largest deviation of `R Rᵀ` from identity plus the determinant error.
    fn orthonormal_error(&self) -> f64 {
        let r = &self.rotation;
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot = r[i][0] * r[j][0] + r[i][1] * r[j][1] + r[i][2] * r[j][2];
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        err.max((det - 1.0).abs())
    }

    /// Gram-Schmidt re-orthonormalization of the rotation columns.
    fn orthonormalized(&self) -> Pose {
        let r = &self.rotation;
        let col = |j: usize| [r[0][j], r[1][j], r[2][j]];
        let normalize = |v: [f64; 3]| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let cross = |a: [f64; 3], b: [f64; 3]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let c0 = normalize(col(0));
        let c2 = normalize(cross(c0, col(1)));
        let c1 = cross(c2, c0);
        Pose {
            rotation: [
                [c0[0], c1[0], c2[0]],
                [c0[1], c1[1], c2[1]],
                [c0[2], c1[2], c2[2]],
            ],
            translation: self.translation,
        }
    }
}

/// File values are printed with limited precision, so rotations come in
/// slightly off orthonormal; repair quietly below this bound, reject above.
const MAX_INPUT_ROTATION_ERROR: f64 = 1e-3;

fn pose_from_floats(v: &[f64], line: usize) -> Result<Pose> {
    let pose = Pose {
        rotation: [
            [v[0], v[1], v[2]],
            [v[4], v[5], v[6]],
            [v[8], v[9], v[10]],
        ],
        translation: [v[3], v[7], v[11]],
    };
    let err = pose.orthonormal_error();
    if !err.is_finite() || err > MAX_INPUT_ROTATION_ERROR {
        return Err(Error::Pose {
            line,
            msg: format!("rotation is not orthonormal (error {err:.2e})"),
        });
    }
    let pose = if err > 1e-9 { pose.orthonormalized() } else { pose };
    debug_assert!(pose.orthonormal_error() < 1e-6);
    Ok(pose)
}

fn parse_12_floats(text: &str, line: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Pose {
            line,
            msg: format!("bad float: {e}"),
        })?;
    if values.len() != 12 {
        return Err(Error::Pose {
            line,
            msg: format!("expected 12 values, got {}", values.len()),
        });
    }
    Ok(values)
}

/// Parse a pose chain: one 3x4 row-major matrix per non-empty line.
pub fn parse_poses_text(text: &str) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        poses.push(pose_from_floats(&parse_12_floats(raw, line)?, line)?);
    }
    Ok(poses)
}

/// Extract the sensor-to-camera transform from a calibration file (the line
/// prefixed `Tr:`).
pub fn parse_calib_text(text: &str) -> Result<Pose> {
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(rest) = raw.strip_prefix("Tr:") {
            return pose_from_floats(&parse_12_floats(rest, line)?, line);
        }
    }
    Err(Error::Pose {
        line: text.lines().count(),
        msg: "no `Tr:` line found in calibration".into(),
    })
}

/// Sensor-frame pose chain: for every camera pose `P_k`, returns
/// `Tr^-1 * P_k * Tr`, mapping frame-k sensor coordinates into the world
/// (frame-0 sensor) frame.
pub fn read_poses(poses_text: &str, calib_text: &str) -> Result<Vec<Pose>> {
    let tr = parse_calib_text(calib_text)?;
    let tr_inv = tr.inverse();
    Ok(parse_poses_text(poses_text)?
        .iter()
        .map(|p| tr_inv.compose(p).compose(&tr))
        .collect())
}
