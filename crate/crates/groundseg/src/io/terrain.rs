// SPDX-License-Identifier: Apache-2.0

//! Elevation map export and re-import.
//!
//! Two formats: a CSV with full-precision `g`/`c` per cell (lossless round
//! trip, also the snapshot format the CLI converter consumes) and a 16-bit
//! grayscale PGM with a plain-text sidecar holding the quantization range and
//! grid geometry for exact dequantization.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridMap};

/// Persistent-layer snapshot with the grid geometry needed to rebuild it.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSnapshot {
    pub resolution: f64,
    pub dims: usize,
    pub center: [f64; 2],
    pub elevation: Vec<f64>,
    pub confidence: Vec<f64>,
}

impl TerrainSnapshot {
    pub fn from_map(map: &GridMap) -> Self {
        TerrainSnapshot {
            resolution: map.resolution(),
            dims: map.dims(),
            center: map.center(),
            elevation: map.elevation().to_vec(),
            confidence: map.confidence().to_vec(),
        }
    }

    pub fn to_map(&self) -> Result<GridMap> {
        let n = self.dims * self.dims;
        if self.elevation.len() != n || self.confidence.len() != n {
            return Err(Error::Data(format!(
                "snapshot layer length {} does not match dims {}",
                self.elevation.len(),
                self.dims
            )));
        }
        let mut map = GridMap::new(self.resolution, self.dims, self.center, 0.0)?;
        for i in 0..self.dims as i32 {
            for j in 0..self.dims as i32 {
                let idx = i as usize * self.dims + j as usize;
                map.set_elevation(CellIndex::new(i, j), self.elevation[idx])?;
                map.set_confidence(CellIndex::new(i, j), self.confidence[idx])?;
            }
        }
        Ok(map)
    }

    /// Write the CSV form: geometry header comments, then one
    /// `x,y,g,c` row per cell in row-major order. Floats use the shortest
    /// round-trip representation, so re-import is exact.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# resolution = {}", self.resolution)?;
        writeln!(w, "# dims = {}", self.dims)?;
        writeln!(w, "# center_x = {}", self.center[0])?;
        writeln!(w, "# center_y = {}", self.center[1])?;
        writeln!(w, "x,y,g,c")?;
        let half = (self.dims / 2) as f64;
        for i in 0..self.dims {
            let x = self.center[0] + (i as f64 - half) * self.resolution;
            for j in 0..self.dims {
                let y = self.center[1] + (j as f64 - half) * self.resolution;
                let idx = i * self.dims + j;
                writeln!(w, "{x},{y},{},{}", self.elevation[idx], self.confidence[idx])?;
            }
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut resolution = None;
        let mut dims = None;
        let mut center_x = None;
        let mut center_y = None;
        let mut elevation = Vec::new();
        let mut confidence = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once('=') {
                    let value = value.trim();
                    let parse = || -> Result<f64> {
                        value.parse().map_err(|_| {
                            Error::Format(format!("line {line}: bad metadata value `{value}`"))
                        })
                    };
                    match key.trim() {
                        "resolution" => resolution = Some(parse()?),
                        "dims" => {
                            dims = Some(value.parse::<usize>().map_err(|_| {
                                Error::Format(format!("line {line}: bad dims `{value}`"))
                            })?)
                        }
                        "center_x" => center_x = Some(parse()?),
                        "center_y" => center_y = Some(parse()?),
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if trimmed != "x,y,g,c" {
                    return Err(Error::Format(format!(
                        "line {line}: expected header `x,y,g,c`, got `{trimmed}`"
                    )));
                }
                saw_header = true;
                continue;
            }
            let mut fields = trimmed.split(',');
            let mut take = || {
                fields
                    .next()
                    .ok_or_else(|| Error::Format(format!("line {line}: expected 4 fields")))
            };
            let (_, _) = (take()?, take()?);
            let g: f64 = take()?
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: bad elevation")))?;
            let c: f64 = take()?
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: bad confidence")))?;
            elevation.push(g);
            confidence.push(c);
        }
        let missing = |what: &str| Error::Format(format!("missing `# {what} = ...` header"));
        let snapshot = TerrainSnapshot {
            resolution: resolution.ok_or_else(|| missing("resolution"))?,
            dims: dims.ok_or_else(|| missing("dims"))?,
            center: [
                center_x.ok_or_else(|| missing("center_x"))?,
                center_y.ok_or_else(|| missing("center_y"))?,
            ],
            elevation,
            confidence,
        };
        if snapshot.elevation.len() != snapshot.dims * snapshot.dims {
            return Err(Error::Format(format!(
                "expected {} rows, got {}",
                snapshot.dims * snapshot.dims,
                snapshot.elevation.len()
            )));
        }
        Ok(snapshot)
    }

    /// Write a 16-bit big-endian grayscale PGM plus a `<path>.meta` sidecar.
    ///
    /// Rows top to bottom run from +y to -y, columns left to right from -x
    /// to +x. Elevation quantizes linearly between the layer minimum and
    /// maximum; a flat layer degenerates to mid-gray.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (lo, hi) = self
            .elevation
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                (lo.min(g), hi.max(g))
            });
        let mut data = Vec::with_capacity(self.dims * self.dims * 2 + 32);
        data.extend_from_slice(format!("P5\n{} {}\n65535\n", self.dims, self.dims).as_bytes());
        for row in 0..self.dims {
            let j = self.dims - 1 - row;
            for i in 0..self.dims {
                let g = self.elevation[i * self.dims + j];
                let q: u16 = if hi > lo {
                    ((g - lo) / (hi - lo) * 65535.0).round() as u16
                } else {
                    32768
                };
                data.extend_from_slice(&q.to_be_bytes());
            }
        }
        std::fs::write(path, data).map_err(|e| Error::io(path, e))?;

        let meta_path = format!("{}.meta", path.display());
        let mut meta = String::new();
        meta.push_str("# rows top to bottom: +y to -y; columns left to right: -x to +x\n");
        meta.push_str(&format!("min_elevation = {lo}\n"));
        meta.push_str(&format!("max_elevation = {hi}\n"));
        meta.push_str(&format!("resolution = {}\n", self.resolution));
        meta.push_str(&format!("dims = {}\n", self.dims));
        meta.push_str(&format!("center_x = {}\n", self.center[0]));
        meta.push_str(&format!("center_y = {}\n", self.center[1]));
        std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
    }
}
