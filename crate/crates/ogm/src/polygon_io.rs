//! Per-frame free-space polygons as JSON lines.

use std::io::{BufRead, Write};

use ogm_core::geom::Pose2D;
use ogm_core::pipeline::FrameOutput;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl From<Pose2D> for PoseJson {
    fn from(p: Pose2D) -> Self {
        Self { x: p.x, y: p.y, yaw: p.yaw }
    }
}

/// One line of the polygon file. `pose` is the world pose; vertices and
/// `local_pose` are in the local-map metric frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRecord {
    pub timestamp_us: u64,
    pub pose: PoseJson,
    pub local_pose: PoseJson,
    pub vertices_m: Vec<[f64; 2]>,
}

impl From<&FrameOutput> for PolygonRecord {
    fn from(f: &FrameOutput) -> Self {
        Self {
            timestamp_us: f.timestamp_us,
            pose: f.world_pose.into(),
            local_pose: f.local_pose.into(),
            vertices_m: f.polygon.vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }
}

pub fn write_record<W: Write>(mut out: W, rec: &PolygonRecord) -> Result<(), FormatError> {
    serde_json::to_writer(&mut out, rec)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<PolygonRecord>, FormatError> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::at(k as u64 + 1, e))?);
    }
    Ok(out)
}
