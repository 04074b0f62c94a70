// SPDX-License-Identifier: Apache-2.0

//! Label format: one little-endian `u32` per point, semantic id in the low
//! 16 bits, instance id in the high 16 (discarded on read, zero on write).

use crate::cloud::PointLabel;
use crate::config::Config;
use crate::error::{Error, Result};

pub fn read_labels(bytes: &[u8]) -> Result<Vec<u16>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "label stream length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| (u32::from_le_bytes(w.try_into().unwrap()) & 0xffff) as u16)
        .collect())
}

pub fn write_labels(semantics: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(semantics.len() * 4);
    for &s in semantics {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out
}

/// Map segmentation results to the semantic ids configured for output.
pub fn encode_point_labels(labels: &[PointLabel], cfg: &Config) -> Vec<u16> {
    labels
        .iter()
        .map(|l| match l {
            PointLabel::Ground => cfg.out_ground,
            PointLabel::NonGround => cfg.out_nonground,
            PointLabel::Outlier => cfg.out_outlier,
        })
        .collect()
}
