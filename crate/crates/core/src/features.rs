//! Interest points, patch descriptors and mutual (symmetric) KNN matching.
//!
//! The detector is a determinant-of-Hessian response on a blurred image with
//! 3x3 non-maximum suppression and quadratic sub-pixel refinement. The
//! descriptor is an 8x8 grid of mean intensities over a 16x16 patch,
//! mean-subtracted and L2-normalized. Neither is scale or rotation invariant;
//! frame-to-frame camera shake is translational.

use crate::geometry::Point;
use crate::imgproc::{self, GrayImage, ImageError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const DESCRIPTOR_LEN: usize = 64;
const PATCH: usize = 16;
const CELL: usize = 2;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image {width}x{height} is smaller than the 32x32 minimum")]
    ImageTooSmall { width: u32, height: u32 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f32,
}

impl Keypoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Unit-length patch descriptor (all zeros for a flat patch).
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub [f32; DESCRIPTOR_LEN]);

impl Descriptor {
    pub fn norm(&self) -> f32 {
        self.0.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    pub fn distance_squared(&self, other: &Descriptor) -> f32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub max_points: usize,
    pub blur_sigma: f64,
    /// Minimum |det H| on the blurred 8-bit intensity scale.
    pub min_response: f32,
    /// Keypoints closer than this to the border are discarded.
    pub border: u32,
    /// Columns and rows of the selection grid. Each cell first receives an
    /// equal share of `max_points`, strongest first; leftover budget then
    /// goes to the strongest remaining candidates anywhere. `[1, 1]` is plain
    /// top-N selection.
    pub grid: [u32; 2],
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { max_points: 400, blur_sigma: 1.5, min_response: 4.0, border: 10, grid: [8, 6] }
    }
}

/// A matched point in frame n-1 and its partner in frame n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub prev: Point,
    pub curr: Point,
    pub distance: f64,
    pub prev_index: usize,
    pub curr_index: usize,
}

impl MatchPair {
    pub fn new(prev: Point, curr: Point) -> Self {
        Self { prev, curr, distance: 0.0, prev_index: 0, curr_index: 0 }
    }

    pub fn displacement(&self) -> (f64, f64) {
        (self.curr.x - self.prev.x, self.curr.y - self.prev.y)
    }
}

/// Hessian determinant magnitude at every pixel of a float image.
fn hessian_response(img: &[f32], w: usize, h: usize) -> Vec<f32> {
    let mut out = vec![0f32; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let c = img[y * w + x];
            let dxx = img[y * w + x + 1] + img[y * w + x - 1] - 2.0 * c;
            let dyy = img[(y + 1) * w + x] + img[(y - 1) * w + x] - 2.0 * c;
            let dxy = (img[(y + 1) * w + x + 1] + img[(y - 1) * w + x - 1]
                - img[(y + 1) * w + x - 1]
                - img[(y - 1) * w + x + 1])
                / 4.0;
            out[y * w + x] = (dxx * dyy - dxy * dxy).abs();
        }
    }
    out
}

fn is_local_max(r: &[f32], w: usize, x: usize, y: usize) -> bool {
    let v = r[y * w + x];
    for dy in 0..3 {
        for dx in 0..3 {
            if dx == 1 && dy == 1 {
                continue;
            }
            let n = r[(y + dy - 1) * w + x + dx - 1];
            // ties go to the first pixel in raster order
            let before = dy == 0 || (dy == 1 && dx == 0);
            if n > v || (before && n == v) {
                return false;
            }
        }
    }
    true
}

fn refine(r: &[f32], w: usize, x: usize, y: usize) -> (f64, f64) {
    let at = |x: usize, y: usize| f64::from(r[y * w + x]);
    let offset = |m: f64, c: f64, p: f64| {
        let denom = m - 2.0 * c + p;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
        }
    };
    let c = at(x, y);
    (
        x as f64 + offset(at(x - 1, y), c, at(x + 1, y)),
        y as f64 + offset(at(x, y - 1), c, at(x, y + 1)),
    )
}

fn sample(img: &[f32], w: usize, h: usize, x: f64, y: f64) -> f32 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
    let top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
    let bot = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

fn describe(img: &[f32], w: usize, h: usize, x: f64, y: f64) -> Descriptor {
    let cells = PATCH / CELL;
    let mut d = [0f32; DESCRIPTOR_LEN];
    let half = PATCH as f64 / 2.0 - 0.5;
    for j in 0..PATCH {
        for i in 0..PATCH {
            let v = sample(img, w, h, x - half + i as f64, y - half + j as f64);
            d[(j / CELL) * cells + i / CELL] += v;
        }
    }
    let n = (CELL * CELL) as f32;
    let mean = d.iter().sum::<f32>() / (DESCRIPTOR_LEN as f32 * n);
    for v in d.iter_mut() {
        *v = *v / n - mean;
    }
    let norm = d.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 1e-6 {
        d.iter_mut().for_each(|v| *v /= norm);
    } else {
        d = [0.0; DESCRIPTOR_LEN];
    }
    Descriptor(d)
}

/// Pick up to `max_points` of the sorted candidates, spread over the grid.
fn spread(candidates: Vec<(f32, usize, usize)>, w: usize, h: usize, params: &DetectorParams) -> Vec<(f32, usize, usize)> {
    let (gx, gy) = (params.grid[0].max(1) as usize, params.grid[1].max(1) as usize);
    if candidates.len() <= params.max_points {
        return candidates;
    }
    let quota = params.max_points.div_ceil(gx * gy);
    let mut used = vec![0usize; gx * gy];
    let mut taken = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(params.max_points);
    for (i, &(_, x, y)) in candidates.iter().enumerate() {
        if out.len() == params.max_points {
            break;
        }
        let cell = (y * gy / h) * gx + x * gx / w;
        if used[cell] < quota {
            used[cell] += 1;
            taken[i] = true;
            out.push(candidates[i]);
        }
    }
    for (i, c) in candidates.iter().enumerate() {
        if out.len() == params.max_points {
            break;
        }
        if !taken[i] {
            out.push(*c);
        }
    }
    out
}

/// Detect up to `params.max_points` keypoints, strongest first, and describe
/// each from its blurred 16x16 neighbourhood.
pub fn detect_and_describe(g: &GrayImage, params: &DetectorParams) -> Result<Vec<Feature>, FeatureError> {
    let (width, height) = g.dimensions();
    if width < 32 || height < 32 {
        return Err(FeatureError::ImageTooSmall { width, height });
    }
    let (w, h) = (width as usize, height as usize);
    let blurred = imgproc::gaussian_blur_f32(g, params.blur_sigma)?;
    let response = hessian_response(&blurred, w, h);
    let border = (params.border as usize).max(PATCH / 2 + 1);
    if w <= 2 * border || h <= 2 * border {
        return Ok(Vec::new());
    }

    let mut candidates: Vec<(f32, usize, usize)> = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let r = response[y * w + x];
            if r > params.min_response && is_local_max(&response, w, x, y) {
                candidates.push((r, x, y));
            }
        }
    }
    // strongest first, raster order among equals
    let order = |a: &(f32, usize, usize), b: &(f32, usize, usize)| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1));
    candidates.sort_by(order);
    let mut candidates = spread(candidates, w, h, params);
    candidates.sort_by(order);

    Ok(candidates
        .into_iter()
        .map(|(r, x, y)| {
            let (fx, fy) = refine(&response, w, x, y);
            Feature {
                keypoint: Keypoint { x: fx, y: fy, response: r },
                descriptor: describe(&blurred, w, h, fx, fy),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    /// Lowe ratio: keep the nearest neighbour only if
    /// `best < ratio * second_best` (plain, not squared, distances).
    pub ratio: f32,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { ratio: 0.7 }
    }
}

/// For each row, the column of its nearest neighbour if it passes the ratio test.
fn best_by_ratio(dist: &[f32], rows: usize, cols: usize, ratio: f32, transposed: bool) -> Vec<Option<usize>> {
    let at = |r: usize, c: usize| if transposed { dist[c * rows + r] } else { dist[r * cols + c] };
    (0..rows)
        .map(|r| {
            let (mut best, mut second) = ((f32::INFINITY, usize::MAX), f32::INFINITY);
            for c in 0..cols {
                let d = at(r, c);
                if d < best.0 {
                    second = best.0;
                    best = (d, c);
                } else if d < second {
                    second = d;
                }
            }
            if best.1 == usize::MAX {
                return None;
            }
            // squared distances: best/second < ratio  <=>  best^2 < ratio^2 second^2
            let accept = second.is_infinite() || best.0 < ratio * ratio * second;
            accept.then_some(best.1)
        })
        .collect()
}

/// Symmetric KNN (k = 2) matching from frame n-1 features `a` to frame n
/// features `b`: a pair survives only if each point is the other's accepted
/// nearest neighbour.
pub fn symmetric_knn_match(a: &[Feature], b: &[Feature], params: &MatchParams) -> Vec<MatchPair> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let (m, n) = (a.len(), b.len());
    let mut dist = vec![0f32; m * n];
    for (i, fa) in a.iter().enumerate() {
        for (j, fb) in b.iter().enumerate() {
            dist[i * n + j] = fa.descriptor.distance_squared(&fb.descriptor);
        }
    }
    let forward = best_by_ratio(&dist, m, n, params.ratio, false);
    let backward = best_by_ratio(&dist, n, m, params.ratio, true);
    forward
        .iter()
        .enumerate()
        .filter_map(|(i, &j)| {
            let j = j?;
            (backward[j] == Some(i)).then(|| MatchPair {
                prev: a[i].keypoint.point(),
                curr: b[j].keypoint.point(),
                distance: f64::from(dist[i * n + j]).sqrt(),
                prev_index: i,
                curr_index: j,
            })
        })
        .collect()
}

/// Debug dump: `x,y,response` per keypoint.
pub fn keypoints_csv(features: &[Feature]) -> String {
    let mut out = String::from("x,y,response\n");
    for f in features {
        let _ = writeln!(out, "{:.3},{:.3},{:.3}", f.keypoint.x, f.keypoint.y, f.keypoint.response);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::BackgroundSpec;
    use proptest::prelude::*;

    fn textured(w: u32, h: u32, dx: i64, dy: i64) -> GrayImage {
        let bg = BackgroundSpec { cell_px: 12.0, octaves: 3, contrast: 1.0, ..BackgroundSpec::default() };
        GrayImage::from_fn(w, h, |x, y| (bg.intensity(x as f64 - dx as f64, y as f64 - dy as f64) * 255.0) as u8).unwrap()
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let g = GrayImage::filled(64, 64, 90).unwrap();
        assert!(detect_and_describe(&g, &DetectorParams::default()).unwrap().is_empty());
    }

    #[test]
    fn small_image_is_rejected() {
        let g = GrayImage::filled(31, 64, 0).unwrap();
        assert!(matches!(
            detect_and_describe(&g, &DetectorParams::default()),
            Err(FeatureError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn checkerboard_corners_are_found() {
        let sq = 8;
        let g = GrayImage::from_fn(96, 96, |x, y| if ((x / sq) + (y / sq)) % 2 == 0 { 40 } else { 210 }).unwrap();
        let feats = detect_and_describe(&g, &DetectorParams { max_points: 1000, ..DetectorParams::default() }).unwrap();
        assert!(!feats.is_empty());
        // oracle: corners sit between pixels sq*k - 1 and sq*k; the Hessian
        // peaks at the saddle or on the blurred square tips beside it, never
        // near a square centre (sq/2 away from every corner)
        let reach = 2.0 * DetectorParams::default().blur_sigma;
        let offset = |v: f64| {
            let c = (v + 0.5) / sq as f64;
            ((c - c.round()) * sq as f64).abs()
        };
        for f in &feats {
            assert!(offset(f.keypoint.x) <= reach && offset(f.keypoint.y) <= reach, "{:?}", f.keypoint);
        }
        for i in 2..=9 {
            for j in 2..=9 {
                let (cx, cy) = ((i * sq) as f64 - 0.5, (j * sq) as f64 - 0.5);
                assert!(
                    feats.iter().any(|f| (f.keypoint.x - cx).abs() <= reach && (f.keypoint.y - cy).abs() <= reach),
                    "corner ({cx}, {cy}) missed"
                );
            }
        }
    }

    #[test]
    fn descriptors_are_unit_length() {
        let g = textured(128, 96, 0, 0);
        let feats = detect_and_describe(&g, &DetectorParams::default()).unwrap();
        assert!(feats.len() > 20);
        for f in &feats {
            assert!((f.descriptor.norm() - 1.0).abs() < 1e-5);
        }
        assert!(feats.windows(2).all(|p| p[0].keypoint.response >= p[1].keypoint.response));
    }

    #[test]
    fn shifted_image_matches_with_shift_mode() {
        let a = textured(240, 180, 0, 0);
        let b = textured(240, 180, 7, 3);
        let params = DetectorParams::default();
        let fa = detect_and_describe(&a, &params).unwrap();
        let fb = detect_and_describe(&b, &params).unwrap();

        // repeatability: interior keypoints reappear within 1 px of the shifted position
        let interior: Vec<_> = fa.iter().filter(|f| f.keypoint.x > 30.0 && f.keypoint.x < 200.0 && f.keypoint.y > 30.0 && f.keypoint.y < 140.0).collect();
        let found = interior
            .iter()
            .filter(|f| fb.iter().any(|g| (g.keypoint.x - f.keypoint.x - 7.0).hypot(g.keypoint.y - f.keypoint.y - 3.0) <= 1.0))
            .count();
        assert!(found * 10 >= interior.len() * 7, "{found}/{}", interior.len());

        let pairs = symmetric_knn_match(&fa, &fb, &MatchParams::default());
        assert!(pairs.len() > 20);
        let mut votes = std::collections::HashMap::new();
        for p in &pairs {
            let (dx, dy) = p.displacement();
            *votes.entry((dx.round() as i64, dy.round() as i64)).or_insert(0) += 1;
        }
        let mode = votes.iter().max_by_key(|(_, &c)| c).map(|(k, _)| *k).unwrap();
        assert_eq!(mode, (7, 3));
        let close = pairs.iter().filter(|p| {
            let (dx, dy) = p.displacement();
            (dx - 7.0).hypot(dy - 3.0) <= 1.0
        });
        assert!(close.count() * 10 >= pairs.len() * 8);
    }

    fn feature(desc: &[f32]) -> Feature {
        let mut d = [0f32; DESCRIPTOR_LEN];
        d[..desc.len()].copy_from_slice(desc);
        Feature { keypoint: Keypoint { x: desc[0] as f64, y: 0.0, response: 1.0 }, descriptor: Descriptor(d) }
    }

    #[test]
    fn self_match_and_empty_inputs() {
        let set: Vec<_> = (0..5).map(|i| feature(&[i as f32, 1.0, (i * i) as f32])).collect();
        let pairs = symmetric_knn_match(&set, &set, &MatchParams::default());
        assert_eq!(pairs.len(), 5);
        assert!(pairs.iter().all(|p| p.prev_index == p.curr_index && p.distance == 0.0));
        assert!(symmetric_knn_match(&set, &[], &MatchParams::default()).is_empty());
        assert!(symmetric_knn_match(&[], &set, &MatchParams::default()).is_empty());
    }

    #[test]
    fn ambiguous_match_is_rejected() {
        let a = vec![feature(&[0.0, 0.0])];
        let b = vec![feature(&[1.0, 0.0]), feature(&[-1.0, 0.0])];
        assert!(symmetric_knn_match(&a, &b, &MatchParams::default()).is_empty());
    }

    fn feature_set() -> impl Strategy<Value = Vec<Feature>> {
        proptest::collection::vec(proptest::collection::vec(-4i8..4, 4), 0..14)
            .prop_map(|v| v.iter().map(|d| feature(&d.iter().map(|&x| f32::from(x)).collect::<Vec<_>>())).collect())
    }

    proptest! {
        #[test]
        fn matching_is_symmetric_and_injective(a in feature_set(), b in feature_set()) {
            let ab = symmetric_knn_match(&a, &b, &MatchParams::default());
            let ba = symmetric_knn_match(&b, &a, &MatchParams::default());
            let mut fwd: Vec<_> = ab.iter().map(|p| (p.prev_index, p.curr_index)).collect();
            let mut rev: Vec<_> = ba.iter().map(|p| (p.curr_index, p.prev_index)).collect();
            fwd.sort();
            rev.sort();
            prop_assert_eq!(&fwd, &rev);
            let mut seen_a = std::collections::HashSet::new();
            let mut seen_b = std::collections::HashSet::new();
            for (i, j) in fwd {
                prop_assert!(seen_a.insert(i));
                prop_assert!(seen_b.insert(j));
            }
        }
    }
}
