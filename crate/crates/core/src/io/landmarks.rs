//! Per-frame landmark files.
//!
//! One line per frame: the frame index, 25 `(u, v)` pixel pairs and
//! optionally 25 `(x, y, z)` camera-space points in millimetres. Blank
//! lines and `#` comments are ignored.

use crate::error::{Error, Result};
use crate::io::{content_lines, parse_f64, parse_frame};
use crate::model::LANDMARK_COUNT;
use crate::Vec3;

const F: &str = "landmarks";

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkRecord {
    pub frame: usize,
    pub points: Vec<[f64; 2]>,
    pub points_3d: Option<Vec<Vec3>>,
}

pub fn parse_landmarks(text: &str) -> Result<Vec<LandmarkRecord>> {
    let mut out: Vec<LandmarkRecord> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        let n2 = 2 * LANDMARK_COUNT;
        let n3 = 3 * LANDMARK_COUNT;
        if tokens.len() != 1 + n2 && tokens.len() != 1 + n2 + n3 {
            return Err(Error::parse(
                F,
                line_no,
                format!("expected {} or {} fields, got {}", 1 + n2, 1 + n2 + n3, tokens.len()),
            ));
        }
        let frame = parse_frame(F, line_no, tokens[0])?;
        if out.iter().any(|r| r.frame == frame) {
            return Err(Error::parse(F, line_no, format!("duplicate frame {frame}")));
        }
        let values = tokens[1..]
            .iter()
            .map(|t| parse_f64(F, line_no, t))
            .collect::<Result<Vec<_>>>()?;
        let points = values[..n2].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let points_3d = (values.len() > n2).then(|| values[n2..].chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect());
        out.push(LandmarkRecord {
            frame,
            points,
            points_3d,
        });
    }
    Ok(out)
}

/// Writes one newline-terminated landmark line.
pub fn format_landmarks(record: &LandmarkRecord) -> String {
    let mut line = record.frame.to_string();
    for p in &record.points {
        line.push_str(&format!(" {} {}", p[0], p[1]));
    }
    if let Some(points) = &record.points_3d {
        for p in points {
            line.push_str(&format!(" {} {} {}", p.x, p.y, p.z));
        }
    }
    line.push('\n');
    line
}
