//! Raster primitives the detection pipeline is built on.
//!
//! Every operation here is a pure function over owned or borrowed images.
//! Border policies: convolution clamps coordinates to the nearest edge pixel,
//! morphology treats out-of-bounds neighbours as background.

mod io;

pub use io::{read_frame, read_gray, write_binary, write_frame, write_gray};

use crate::geometry::{BoundingBox, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Value of a foreground pixel in a [`BinaryImage`].
pub const FOREGROUND: u8 = 255;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("pixel buffer holds {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("binary image may only hold 0 or 255, found {0}")]
    NotBinary(u8),
    #[error("image i/o: {0}")]
    Io(#[from] image::ImageError),
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    let expected = width as usize * height as usize;
    if len != expected {
        return Err(ImageError::BufferSize { expected, got: len });
    }
    Ok(())
}

/// An RGB video frame with its sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    index: u64,
    pixels: Vec<[u8; 3]>,
}

impl Frame {
    pub fn new(width: u32, height: u32, index: u64, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, index, pixels })
    }

    pub fn filled(width: u32, height: u32, index: u64, rgb: [u8; 3]) -> Result<Self, ImageError> {
        Self::new(width, height, index, vec![rgb; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn set_index(&mut self, index: u64) {
        self.index = index;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let w = self.width;
        self.pixels[(y * w + x) as usize] = rgb;
    }

    /// Draw a one-pixel rectangle outline, clipped to the frame.
    pub fn draw_box(&mut self, b: &BoundingBox, rgb: [u8; 3]) {
        let (w, h) = (self.width as i64, self.height as i64);
        let x0 = b.x.round() as i64;
        let y0 = b.y.round() as i64;
        let x1 = (b.right().round() as i64 - 1).max(x0);
        let y1 = (b.bottom().round() as i64 - 1).max(y0);
        let mut plot = |x: i64, y: i64| {
            if (0..w).contains(&x) && (0..h).contains(&y) {
                self.pixels[(y * w + x) as usize] = rgb;
            }
        };
        for x in x0..=x1 {
            plot(x, y0);
            plot(x, y1);
        }
        for y in y0..=y1 {
            plot(x0, y);
            plot(x1, y);
        }
    }
}

/// 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width;
        self.data[(y * w + x) as usize] = v;
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// Foreground mask: every value is exactly 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len())?;
        if let Some(&bad) = data.iter().find(|&&v| v != 0 && v != FOREGROUND) {
            return Err(ImageError::NotBinary(bad));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![0; width as usize * height as usize])
    }

    /// Mask with foreground at each listed pixel.
    pub fn from_points(width: u32, height: u32, points: &[(u32, u32)]) -> Result<Self, ImageError> {
        let mut img = Self::empty(width, height)?;
        for &(x, y) in points {
            img.set(x, y, true);
        }
        Ok(img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_set(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize] == FOREGROUND
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let w = self.width;
        self.data[(y * w + x) as usize] = if on { FOREGROUND } else { 0 };
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == FOREGROUND).count()
    }

    /// Pixel-wise AND with another mask of the same size.
    pub fn and(&self, other: &BinaryImage) -> Result<BinaryImage, ImageError> {
        same_dims(self.dimensions(), other.dimensions())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a & b).collect();
        Ok(BinaryImage { width: self.width, height: self.height, data })
    }
}

/// Color in HSV with every component scaled to `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HsvColor {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl HsvColor {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }

    /// Inverse of [`rgb_to_hsv`], rounded to 8-bit channels.
    pub fn to_rgb(&self) -> [u8; 3] {
        let h = (self.h / 255.0 * 6.0).rem_euclid(6.0);
        let s = (self.s / 255.0).clamp(0.0, 1.0);
        let v = self.v.clamp(0.0, 255.0);
        let c = v * s;
        let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
        let m = v - c;
        let (r, g, b) = match h as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        [(r + m).round() as u8, (g + m).round() as u8, (b + m).round() as u8]
    }
}

fn same_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), ImageError> {
    if a == b {
        Ok(())
    } else {
        Err(ImageError::DimensionMismatch { a, b })
    }
}

pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(u32::from);
    // exact integer form of round(0.299 R + 0.587 G + 0.114 B)
    ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
}

pub fn to_grayscale(f: &Frame) -> GrayImage {
    GrayImage {
        width: f.width,
        height: f.height,
        data: f.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

/// Standard hexcone RGB to HSV. Hue is mapped from `[0, 360)` degrees onto
/// `[0, 255)`; achromatic colors get hue 0.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> HsvColor {
    rgb_to_hsv_f64(rgb.map(f64::from))
}

/// [`rgb_to_hsv`] for fractional channel values in `[0, 255]`.
pub fn rgb_to_hsv_f64([r, g, b]: [f64; 3]) -> HsvColor {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max * 255.0 } else { 0.0 };
    let h_deg = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    HsvColor::new(h_deg / 360.0 * 255.0, s, max)
}

/// Normalized 1-D Gaussian taps for radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f32>, ImageError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImageError::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| (t / sum) as f32).collect())
}

/// Separable Gaussian blur with clamped borders.
pub fn gaussian_blur(g: &GrayImage, sigma: f64) -> Result<GrayImage, ImageError> {
    let smoothed = gaussian_blur_f32(g, sigma)?;
    let data = smoothed.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
    Ok(GrayImage { width: g.width, height: g.height, data })
}

/// Blur without the final rounding, for callers that keep working in floats.
pub(crate) fn gaussian_blur_f32(g: &GrayImage, sigma: f64) -> Result<Vec<f32>, ImageError> {
    let kernel = gaussian_kernel(sigma)?;
    let src: Vec<f32> = g.data.iter().map(|&v| f32::from(v)).collect();
    Ok(convolve_separable(&src, g.width as usize, g.height as usize, &kernel))
}

pub(crate) fn convolve_separable(src: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let r = kernel.len() / 2;
    let mut tmp = vec![0f32; w * h];
    let clamped = |row: &[f32], x: usize| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &wk)| wk * row[(x as isize + k as isize - r as isize).clamp(0, w as isize - 1) as usize])
            .sum::<f32>()
    };
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        if w <= 2 * r {
            for (x, o) in out.iter_mut().enumerate() {
                *o = clamped(row, x);
            }
            continue;
        }
        for x in (0..r).chain(w - r..w) {
            out[x] = clamped(row, x);
        }
        for (x, o) in out[r..w - r].iter_mut().enumerate() {
            *o = row[x..x + kernel.len()].iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }
    let mut dst = vec![0f32; w * h];
    for y in 0..h {
        for (k, &wk) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r as isize).clamp(0, h as isize - 1) as usize;
            let src_row = &tmp[sy * w..(sy + 1) * w];
            let dst_row = &mut dst[y * w..(y + 1) * w];
            for (d, &s) in dst_row.iter_mut().zip(src_row) {
                *d += wk * s;
            }
        }
    }
    dst
}

/// Binarize `|a - b| > t`.
pub fn abs_diff_threshold(a: &GrayImage, b: &GrayImage, t: u8) -> Result<BinaryImage, ImageError> {
    same_dims(a.dimensions(), b.dimensions())?;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| if p.abs_diff(q) > t { FOREGROUND } else { 0 })
        .collect();
    Ok(BinaryImage { width: a.width, height: a.height, data })
}

fn morph3x3(b: &BinaryImage, erode: bool) -> BinaryImage {
    // the 3x3 square is separable: a 1x3 pass then a 3x1 pass; pixels beyond
    // the border count as background
    let (w, h) = (b.width as usize, b.height as usize);
    let on = |v: u8| v == FOREGROUND;
    let combine = |a: bool, c: bool| if erode { a && c } else { a || c };
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let src = &b.data[y * w..(y + 1) * w];
        for x in 0..w {
            let l = x > 0 && on(src[x - 1]);
            let r = x + 1 < w && on(src[x + 1]);
            rows[y * w + x] = combine(combine(l, on(src[x])), r);
        }
    }
    let mut data = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let u = y > 0 && rows[(y - 1) * w + x];
            let d = y + 1 < h && rows[(y + 1) * w + x];
            if combine(combine(u, rows[y * w + x]), d) {
                data[y * w + x] = FOREGROUND;
            }
        }
    }
    BinaryImage { width: b.width, height: b.height, data }
}

pub fn erode_3x3(b: &BinaryImage) -> BinaryImage {
    morph3x3(b, true)
}

pub fn dilate_3x3(b: &BinaryImage) -> BinaryImage {
    morph3x3(b, false)
}

/// Erosion followed by dilation with a full 3x3 structuring element.
pub fn morph_open_3x3(b: &BinaryImage) -> BinaryImage {
    dilate_3x3(&erode_3x3(b))
}

/// 8-connected components of the foreground, as pixel lists in raster order.
/// Components are ordered by their first pixel in raster order.
pub fn connected_components(b: &BinaryImage) -> Vec<Vec<(u32, u32)>> {
    use crate::unionfind::DisjointSet;

    let (w, h) = (b.width as usize, b.height as usize);
    let mut labels = vec![usize::MAX; w * h];
    let mut sets = DisjointSet::new(0);
    for y in 0..h {
        for x in 0..w {
            if b.data[y * w + x] != FOREGROUND {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut label = usize::MAX;
            let neighbours = [
                (x > 0).then(|| y * w + x - 1),
                (x > 0 && y > 0).then(|| (y - 1) * w + x - 1),
                (y > 0).then(|| (y - 1) * w + x),
                (y > 0 && x + 1 < w).then(|| (y - 1) * w + x + 1),
            ];
            for n in neighbours.into_iter().flatten() {
                let l = labels[n];
                if l == usize::MAX {
                    continue;
                }
                if label == usize::MAX {
                    label = l;
                } else {
                    sets.union(label, l);
                }
            }
            if label == usize::MAX {
                label = sets.push();
            }
            labels[y * w + x] = label;
        }
    }

    let mut slot: Vec<usize> = Vec::new();
    let mut out: Vec<Vec<(u32, u32)>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == usize::MAX {
            continue;
        }
        let root = sets.find(l);
        if slot.len() <= root {
            slot.resize(root + 1, usize::MAX);
        }
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(Vec::new());
        }
        out[slot[root]].push(((i % w) as u32, (i / w) as u32));
    }
    out
}

/// Sample a gray image at a real-valued position, bilinear, clamped to edges.
pub fn sample_bilinear(g: &GrayImage, x: f64, y: f64) -> f64 {
    let (w, h) = (g.width as f64, g.height as f64);
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(g.width - 1);
    let y1 = (y0 + 1).min(g.height - 1);
    let p = |x, y| f64::from(g.get(x, y));
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Centroid of a pixel set (pixel centres at integer coordinates).
pub fn centroid(pixels: &[(u32, u32)]) -> Option<Point> {
    if pixels.is_empty() {
        return None;
    }
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + f64::from(x), sy + f64::from(y)));
    Some(Point::new(sx / n, sy / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_of(rgb: [u8; 3]) -> Frame {
        Frame::filled(8, 6, 0, rgb).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        assert!(to_grayscale(&frame_of([0, 0, 0])).data().iter().all(|&v| v == 0));
        assert!(to_grayscale(&frame_of([255, 255, 255])).data().iter().all(|&v| v == 255));
        assert!(to_grayscale(&frame_of([100, 50, 200])).data().iter().all(|&v| v == 82));
    }

    #[test]
    fn hsv_examples() {
        assert_eq!(rgb_to_hsv([0, 0, 0]), HsvColor::new(0.0, 0.0, 0.0));
        assert_eq!(rgb_to_hsv([255, 0, 0]), HsvColor::new(0.0, 255.0, 255.0));
        assert_eq!(rgb_to_hsv([128, 128, 128]), HsvColor::new(0.0, 0.0, 128.0));
        // pure blue sits at 240 degrees
        let blue = rgb_to_hsv([0, 0, 255]);
        assert!((blue.h - 240.0 / 360.0 * 255.0).abs() < 1e-9);
    }

    #[test]
    fn hsv_to_rgb_inverts_conversion() {
        for rgb in [[255, 0, 0], [12, 200, 90], [40, 40, 41], [250, 128, 3], [7, 9, 240]] {
            let back = rgb_to_hsv(rgb).to_rgb();
            for c in 0..3 {
                assert!(back[c].abs_diff(rgb[c]) <= 1, "{rgb:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let g = GrayImage::filled(20, 15, 77).unwrap();
        for sigma in [0.5, 1.0, 2.5] {
            let b = gaussian_blur(&g, sigma).unwrap();
            assert!(b.data().iter().all(|&v| v.abs_diff(77) <= 1));
        }
    }

    #[test]
    fn blur_rejects_nonpositive_sigma() {
        let g = GrayImage::filled(4, 4, 1).unwrap();
        assert!(matches!(gaussian_blur(&g, 0.0), Err(ImageError::InvalidParameter(_))));
        assert!(gaussian_blur(&g, -1.0).is_err());
    }

    #[test]
    fn blur_impulse_is_symmetric_and_normalized() {
        let mut g = GrayImage::filled(21, 21, 0).unwrap();
        g.put(10, 10, 255);
        let kernel = gaussian_kernel(1.0).unwrap();
        assert_eq!(kernel.len(), 7);
        let out = gaussian_blur_f32(&g, 1.0).unwrap();
        let at = |x: usize, y: usize| out[y * 21 + x];
        // oracle: outer product of the discrete kernel
        let expected_center = 255.0 * kernel[3] * kernel[3];
        assert!((at(10, 10) - expected_center).abs() < 1e-3);
        assert!(at(10, 10) < 255.0);
        assert!((at(9, 10) - at(11, 10)).abs() < 1e-4);
        assert!((at(10, 9) - at(10, 11)).abs() < 1e-4);
        assert!((at(9, 10) - at(10, 9)).abs() < 1e-4);
        assert!(at(9, 10) < at(10, 10) && at(8, 10) < at(9, 10));
        let total: f32 = out.iter().sum();
        assert!((total - 255.0).abs() / 255.0 < 0.01);
    }

    #[test]
    fn diff_threshold_examples() {
        let a = GrayImage::filled(5, 5, 200).unwrap();
        let b = GrayImage::filled(5, 5, 100).unwrap();
        let c = GrayImage::filled(5, 5, 120).unwrap();
        assert_eq!(abs_diff_threshold(&a, &a, 50).unwrap().count(), 0);
        assert_eq!(abs_diff_threshold(&a, &b, 50).unwrap().count(), 25);
        assert_eq!(abs_diff_threshold(&c, &b, 50).unwrap().count(), 0);
        let small = GrayImage::filled(4, 5, 0).unwrap();
        assert!(matches!(abs_diff_threshold(&a, &small, 1), Err(ImageError::DimensionMismatch { .. })));
    }

    #[test]
    fn opening_examples() {
        let speck = BinaryImage::from_points(9, 9, &[(4, 4)]).unwrap();
        assert_eq!(morph_open_3x3(&speck).count(), 0);

        let block: Vec<_> = (2..7).flat_map(|y| (2..7).map(move |x| (x, y))).collect();
        let img = BinaryImage::from_points(9, 9, &block).unwrap();
        assert_eq!(erode_3x3(&img).count(), 9);
        assert_eq!(morph_open_3x3(&img), img);

        let empty = BinaryImage::empty(9, 9).unwrap();
        assert_eq!(morph_open_3x3(&empty), empty);
    }

    #[test]
    fn binary_rejects_other_values() {
        assert!(matches!(BinaryImage::new(2, 1, vec![0, 7]), Err(ImageError::NotBinary(7))));
    }

    #[test]
    fn component_examples() {
        let empty = BinaryImage::empty(12, 12).unwrap();
        assert!(connected_components(&empty).is_empty());

        let apart = BinaryImage::from_points(12, 12, &[(0, 0), (10, 10)]).unwrap();
        let cc = connected_components(&apart);
        assert_eq!(cc, vec![vec![(0, 0)], vec![(10, 10)]]);

        let diag = BinaryImage::from_points(12, 12, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(connected_components(&diag).len(), 1);
    }

    #[test]
    fn u_shape_joins_late() {
        // two arms that only meet on the bottom row
        let pts = [(0, 0), (0, 1), (0, 2), (4, 0), (4, 1), (4, 2), (1, 3), (2, 3), (3, 3)];
        let img = BinaryImage::from_points(6, 5, &pts).unwrap();
        let cc = connected_components(&img);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].len(), pts.len());
    }

    fn binary_strategy() -> impl Strategy<Value = BinaryImage> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop_oneof![3 => Just(0u8), 2 => Just(255u8)], (w * h) as usize)
                .prop_map(move |data| BinaryImage::new(w, h, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn binary_ops_stay_binary(a in proptest::collection::vec(any::<u8>(), 64), b in proptest::collection::vec(any::<u8>(), 64), t in any::<u8>()) {
            let a = GrayImage::new(8, 8, a).unwrap();
            let b = GrayImage::new(8, 8, b).unwrap();
            let d = abs_diff_threshold(&a, &b, t).unwrap();
            prop_assert!(d.data().iter().all(|&v| v == 0 || v == 255));
            let o = morph_open_3x3(&d);
            prop_assert!(o.data().iter().all(|&v| v == 0 || v == 255));
        }

        #[test]
        fn opening_is_anti_extensive(img in binary_strategy()) {
            let opened = morph_open_3x3(&img);
            let dilated = dilate_3x3(&img);
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if opened.is_set(x, y) {
                        prop_assert!(img.is_set(x, y));
                        prop_assert!(dilated.is_set(x, y));
                    }
                }
            }
            // opening is idempotent
            prop_assert_eq!(morph_open_3x3(&opened), opened);
        }

        #[test]
        fn components_partition_foreground(img in binary_strategy()) {
            let cc = connected_components(&img);
            let mut seen = std::collections::HashSet::new();
            for comp in &cc {
                prop_assert!(!comp.is_empty());
                for &p in comp {
                    prop_assert!(img.is_set(p.0, p.1));
                    prop_assert!(seen.insert(p));
                }
            }
            prop_assert_eq!(seen.len(), img.count());
            // maximality: 8-adjacent foreground pixels share a component
            let mut label = std::collections::HashMap::new();
            for (i, comp) in cc.iter().enumerate() {
                for &p in comp {
                    label.insert(p, i);
                }
            }
            for (&(x, y), &l) in &label {
                for (nx, ny) in [(x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                    if let Some(&m) = label.get(&(nx, ny)) {
                        prop_assert_eq!(l, m);
                    }
                }
                if x > 0 {
                    if let Some(&m) = label.get(&(x - 1, y + 1)) {
                        prop_assert_eq!(l, m);
                    }
                }
            }
        }
    }
}
