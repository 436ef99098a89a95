//! Binary portable pixmaps (`P6`).

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::io::MAX_DIMENSION;

const F: &str = "ppm";

/// Reads the next header token, skipping whitespace and `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        match bytes.get(*pos)? {
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Decodes 8- or 16-bit `P6` data into `[0, 1]` RGB.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::parse(F, 1, "missing P6 magic"));
    }
    let mut pos = 2;
    let mut next = |what| token(bytes, &mut pos).ok_or_else(|| Error::parse(F, 1, format!("bad {what}")));
    let width = next("width")?;
    let height = next("height")?;
    let maxval = next("maxval")?;
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::parse(F, 1, format!("dimensions {width}x{height} out of range")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(Error::parse(F, 1, format!("maxval {maxval} out of range")));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::parse(F, 1, "missing separator before pixel data"));
    }
    pos += 1;
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let expected = width * height * 3 * sample_bytes;
    let body = &bytes[pos..];
    if body.len() < expected {
        return Err(Error::parse(F, 2, format!("expected {expected} pixel bytes, got {}", body.len())));
    }
    let scale = 1.0 / maxval as f64;
    let sample = |i: usize| -> f64 {
        let raw = if sample_bytes == 1 {
            body[i] as u32
        } else {
            u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as u32
        };
        (raw as f64 * scale).min(1.0)
    };
    let pixels = (0..width * height)
        .map(|p| [sample(3 * p), sample(3 * p + 1), sample(3 * p + 2)])
        .collect();
    RgbImage::from_pixels(width, height, pixels)
}

/// Quantizes to 8 bits with rounding after clamping to `[0, 1]`.
pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    for p in image.pixels() {
        for c in p {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_of_quantized_values() {
        let px: Vec<[f64; 3]> = (0..6).map(|i| [i as f64 / 255.0, 1.0, 0.0]).collect();
        let img = RgbImage::from_pixels(3, 2, px).unwrap();
        let back = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn header_comments_and_16_bit() {
        let mut bytes = b"P6 # comment\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0, 0, 0x80, 0]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.get(0, 0)[0], 1.0);
        assert_eq!(img.get(0, 0)[1], 0.0);
    }

    #[test]
    fn rejects_truncated_data() {
        assert!(decode_ppm(b"P6\n2 2\n255\n\0\0\0").is_err());
        assert!(decode_ppm(b"P6\n2").is_err());
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
    }
}
