//! Frame and text file access. Frames are 8-bit `P6` pixmaps or PNG,
//! chosen by extension.

use std::path::Path;

use eyeshift::io::{decode_ppm, encode_ppm};
use eyeshift::RgbImage;

use crate::error::CliError;

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

pub fn read_frame(path: &Path) -> Result<RgbImage, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if is_png(path) {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let pixels = img.pixels().map(|p| p.0.map(|c| f64::from(c) / 255.0)).collect();
        Ok(RgbImage::from_pixels(w, h, pixels)?)
    } else {
        decode_ppm(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

pub fn write_frame(path: &Path, image: &RgbImage) -> Result<(), CliError> {
    ensure_parent(path)?;
    if is_png(path) {
        let bytes: Vec<u8> = image
            .pixels()
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        let buffer = image::RgbImage::from_raw(image.width() as u32, image.height() as u32, bytes).expect("buffer size matches");
        buffer
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    } else {
        write_bytes(path, &encode_ppm(image))
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let px: Vec<[f64; 3]> = (0..12).map(|i| [i as f64 / 255.0, 1.0 - i as f64 / 255.0, 0.5]).collect();
        let img = RgbImage::from_pixels(4, 3, px).unwrap();
        for name in ["a.png", "a.ppm", "nested/b.PNG"] {
            let path = dir.path().join(name);
            write_frame(&path, &img).unwrap();
            let back = read_frame(&path).unwrap();
            assert_eq!(back.width(), 4);
            for (a, b) in back.pixels().iter().zip(img.pixels()) {
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn missing_and_corrupt_frames_are_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_frame(&dir.path().join("none.ppm")).unwrap_err();
        assert!(matches!(err, CliError::Input(_)));
        let path = dir.path().join("bad.png");
        std::fs::write(&path, b"not a png").unwrap();
        assert!(matches!(read_frame(&path).unwrap_err(), CliError::Input(_)));
    }
}
