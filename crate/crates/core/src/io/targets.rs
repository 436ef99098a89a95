//! Gaze-target scripts: one `frame x y z` line per frame, camera-space mm.

use crate::error::{Error, Result};
use crate::io::{content_lines, parse_f64, parse_frame};
use crate::Vec3;

const F: &str = "targets";

#[derive(Clone, Debug, PartialEq)]
pub struct TargetRecord {
    pub frame: usize,
    pub target: Vec3,
}

pub fn parse_targets(text: &str) -> Result<Vec<TargetRecord>> {
    let mut out: Vec<TargetRecord> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        if tokens.len() != 4 {
            return Err(Error::parse(F, line_no, format!("expected 4 fields, got {}", tokens.len())));
        }
        let frame = parse_frame(F, line_no, tokens[0])?;
        if out.iter().any(|r| r.frame == frame) {
            return Err(Error::parse(F, line_no, format!("duplicate frame {frame}")));
        }
        let x = parse_f64(F, line_no, tokens[1])?;
        let y = parse_f64(F, line_no, tokens[2])?;
        let z = parse_f64(F, line_no, tokens[3])?;
        out.push(TargetRecord {
            frame,
            target: Vec3::new(x, y, z),
        });
    }
    Ok(out)
}
