//! Text records of fitted parameters, one block per frame:
//!
//! ```text
//! frame 3
//! beta_face <16 values>
//! beta_iris <1>
//! tau_face <8>
//! tau_iris <3>
//! tau_tint <3>
//! theta_R <3>
//! theta_T <3>
//! theta_iod <1>
//! theta_p <1>
//! theta_y <1>
//! theta_v <1>
//! theta_lid <1>
//! iota_amb <3>
//! iota_dir <3>
//! iota_rot <2>
//! ```
//!
//! Values are written in shortest round-trip form, so a record read back
//! reproduces the parameters bit-exactly.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::io::{content_lines, parse_f64, parse_frame};
use crate::model::params::index;
use crate::model::{ParameterVector, PARAM_COUNT};

const F: &str = "parameter record";

/// Field groups in file order.
pub const GROUPS: [(&str, Range<usize>); 15] = [
    ("beta_face", index::SHAPE),
    ("beta_iris", index::IRIS_SCALE..index::IRIS_SCALE + 1),
    ("tau_face", index::TEXTURE),
    ("tau_iris", index::IRIS_COLOR),
    ("tau_tint", index::SCLERA_TINT),
    ("theta_R", index::ROTATION),
    ("theta_T", index::TRANSLATION),
    ("theta_iod", index::IOD..index::IOD + 1),
    ("theta_p", index::PITCH..index::PITCH + 1),
    ("theta_y", index::YAW..index::YAW + 1),
    ("theta_v", index::VERGENCE..index::VERGENCE + 1),
    ("theta_lid", index::LID..index::LID + 1),
    ("iota_amb", index::AMBIENT),
    ("iota_dir", index::DIRECTIONAL),
    ("iota_rot", index::LIGHT_ANGLES),
];

#[derive(Clone, Debug, PartialEq)]
pub struct PhiRecord {
    pub frame: usize,
    pub phi: ParameterVector,
}

pub fn format_record(record: &PhiRecord) -> String {
    let values = record.phi.to_array();
    let mut out = format!("frame {}\n", record.frame);
    for (name, range) in GROUPS {
        out.push_str(name);
        for v in &values[range] {
            out.push_str(&format!(" {v:?}"));
        }
        out.push('\n');
    }
    out
}

struct Pending {
    frame: usize,
    line: usize,
    values: [f64; PARAM_COUNT],
    seen: [bool; GROUPS.len()],
}

impl Pending {
    fn finish(self) -> Result<PhiRecord> {
        if let Some(g) = self.seen.iter().position(|s| !s) {
            return Err(Error::parse(F, self.line, format!("frame {} lacks `{}`", self.frame, GROUPS[g].0)));
        }
        Ok(PhiRecord {
            frame: self.frame,
            phi: ParameterVector::from_slice(&self.values)?,
        })
    }
}

pub fn parse_records(text: &str) -> Result<Vec<PhiRecord>> {
    let mut out: Vec<PhiRecord> = Vec::new();
    let mut pending: Option<Pending> = None;
    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split_ascii_whitespace();
        let name = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();
        if name == "frame" {
            if rest.len() != 1 {
                return Err(Error::parse(F, line_no, "expected `frame <index>`"));
            }
            let frame = parse_frame(F, line_no, rest[0])?;
            if let Some(p) = pending.take() {
                out.push(p.finish()?);
            }
            if out.iter().any(|r| r.frame == frame) {
                return Err(Error::parse(F, line_no, format!("duplicate frame {frame}")));
            }
            pending = Some(Pending {
                frame,
                line: line_no,
                values: [0.0; PARAM_COUNT],
                seen: [false; GROUPS.len()],
            });
            continue;
        }
        let p = pending
            .as_mut()
            .ok_or_else(|| Error::parse(F, line_no, "field before the first `frame` line"))?;
        let g = GROUPS
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| Error::parse(F, line_no, format!("unknown field `{name}`")))?;
        if p.seen[g] {
            return Err(Error::parse(F, line_no, format!("repeated field `{name}`")));
        }
        let range = GROUPS[g].1.clone();
        if rest.len() != range.len() {
            return Err(Error::parse(
                F,
                line_no,
                format!("`{name}` needs {} values, got {}", range.len(), rest.len()),
            ));
        }
        for (slot, token) in p.values[range].iter_mut().zip(rest) {
            *slot = parse_f64(F, line_no, token)?;
        }
        p.seen[g] = true;
    }
    if let Some(p) = pending {
        out.push(p.finish()?);
    }
    Ok(out)
}
