//! PGM / PPM / PNG file access for corpus tests and CLI output.

use super::{BinaryImage, Frame, GrayImage, ImageError};
use std::path::Path;

pub fn read_frame(path: impl AsRef<Path>, index: u64) -> Result<Frame, ImageError> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    Frame::new(w, h, index, pixels)
}

/// Format follows the extension (`.ppm`, `.png`, ...).
pub fn write_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let raw: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    let buf = image::RgbImage::from_raw(frame.width(), frame.height(), raw)
        .expect("frame buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    GrayImage::new(w, h, img.into_raw())
}

pub fn write_gray(g: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let buf = image::GrayImage::from_raw(g.width(), g.height(), g.data().to_vec())
        .expect("gray buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

pub fn write_binary(b: &BinaryImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let g = GrayImage::new(b.width(), b.height(), b.data().to_vec())?;
    write_gray(&g, path)
}
