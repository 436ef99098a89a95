//! On-disk formats.
//!
//! Every decoder takes a byte slice or string and never panics on malformed
//! input; each is covered by a fuzz target.

pub mod floatmap;
pub mod landmarks;
pub mod ppm;
pub mod records;
pub mod targets;

pub use floatmap::{decode_flow, decode_float_map, encode_flow, encode_float_map, FloatMap};
pub use landmarks::{parse_landmarks, LandmarkRecord};
pub use ppm::{decode_ppm, encode_ppm};
pub use records::{format_record, parse_records, PhiRecord};
pub use targets::{parse_targets, TargetRecord};

/// Upper bound on decoded image dimensions, to keep allocations bounded.
pub const MAX_DIMENSION: usize = 1 << 14;

/// Splits off one `\n`-terminated header line starting at `pos`.
pub(crate) fn header_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    let rest = bytes.get(*pos..)?;
    let end = rest.iter().position(|&b| b == b'\n')?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).ok()
}

/// Iterates over non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

pub(crate) fn parse_f64(format: &'static str, line: usize, token: &str) -> crate::Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(crate::Error::parse(format, line, format!("`{token}` is not a finite number"))),
    }
}

pub(crate) fn parse_frame(format: &'static str, line: usize, token: &str) -> crate::Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| crate::Error::parse(format, line, format!("`{token}` is not a frame index")))
}
