//! Portable float maps (`PFLT`) and flow fields (`PFLO`).
//!
//! `PFLT\n{width} {height} {channels}\n` followed by little-endian `f32`
//! samples, row-major and channel-interleaved. Flow files use
//! `PFLO\n{width} {height}\n` and two channels. On reading a flow file a
//! pixel counts as covered when its displacement is non-zero.

use crate::error::{Error, Result};
use crate::io::{header_line, MAX_DIMENSION};
use crate::raster::FlowField;

#[derive(Clone, Debug, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Count {
                what: "float map samples",
                expected: width * height * channels,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }
}

fn encode(magic: &str, dims: &[usize], data: impl Iterator<Item = f32>) -> Vec<u8> {
    let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    let mut out = format!("{magic}\n{}\n", dims.join(" ")).into_bytes();
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_dims(format: &'static str, line: Option<&str>, count: usize) -> Result<Vec<usize>> {
    let line = line.ok_or_else(|| Error::parse(format, 2, "missing dimension line"))?;
    let dims: Vec<usize> = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(format, 2, format!("bad dimensions `{line}`")))?;
    if dims.len() != count {
        return Err(Error::parse(format, 2, format!("expected {count} dimensions, got {}", dims.len())));
    }
    if dims.iter().any(|&d| d == 0 || d > MAX_DIMENSION) {
        return Err(Error::parse(format, 2, format!("dimensions {dims:?} out of range")));
    }
    Ok(dims)
}

fn decode_samples(format: &'static str, body: &[u8], count: usize) -> Result<Vec<f32>> {
    let bytes = count
        .checked_mul(4)
        .ok_or_else(|| Error::parse(format, 3, "payload size overflows"))?;
    if body.len() != bytes {
        return Err(Error::parse(format, 3, format!("expected {bytes} payload bytes, got {}", body.len())));
    }
    Ok(body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn encode_float_map(map: &FloatMap) -> Vec<u8> {
    encode("PFLT", &[map.width, map.height, map.channels], map.data.iter().copied())
}

pub fn decode_float_map(bytes: &[u8]) -> Result<FloatMap> {
    const F: &str = "float map";
    let mut pos = 0;
    if header_line(bytes, &mut pos) != Some("PFLT") {
        return Err(Error::parse(F, 1, "missing PFLT magic"));
    }
    let dims = parse_dims(F, header_line(bytes, &mut pos), 3)?;
    if dims[2] > 64 {
        return Err(Error::parse(F, 2, format!("{} channels is too many", dims[2])));
    }
    let data = decode_samples(F, &bytes[pos..], dims[0] * dims[1] * dims[2])?;
    FloatMap::new(dims[0], dims[1], dims[2], data)
}

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    encode(
        "PFLO",
        &[flow.width(), flow.height()],
        flow.vectors().iter().flat_map(|v| [v[0] as f32, v[1] as f32]),
    )
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    const F: &str = "flow";
    let mut pos = 0;
    if header_line(bytes, &mut pos) != Some("PFLO") {
        return Err(Error::parse(F, 1, "missing PFLO magic"));
    }
    let dims = parse_dims(F, header_line(bytes, &mut pos), 2)?;
    let data = decode_samples(F, &bytes[pos..], dims[0] * dims[1] * 2)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(F, 3, "non-finite flow value"));
    }
    let vectors: Vec<[f64; 2]> = data.chunks_exact(2).map(|c| [c[0] as f64, c[1] as f64]).collect();
    let coverage = vectors.iter().map(|v| v[0] != 0.0 || v[1] != 0.0).collect();
    FlowField::from_parts(dims[0], dims[1], vectors, coverage)
}
