//! Foreground regions and the two-stage merging that reassembles non-rigid
//! targets from their fragments.
//!
//! Within one frame, fragments that are close and similarly colored are
//! joined. Across frames, each region is paired with its likely predecessor;
//! pairs that are close and move alike are then joined as well, which catches
//! limbs and clothing whose color differs from the rest of the body.

use crate::geometry::{BoundingBox, Point};
use crate::imgproc::{connected_components, rgb_to_hsv_f64, BinaryImage, Frame, HsvColor};
use crate::motion::AffineTransform;
use crate::unionfind::DisjointSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("region has no pixels")]
    Empty,
    #[error("mask is {mask:?} but frame is {frame:?}")]
    DimensionMismatch { mask: (u32, u32), frame: (u32, u32) },
    #[error("pixel ({0}, {1}) lies outside the frame")]
    OutOfBounds(u32, u32),
    #[error("merge threshold {name} = {value} must be finite and non-negative")]
    InvalidThreshold { name: &'static str, value: f64 },
}

/// A connected set of foreground pixels with its summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pixels: Vec<(u32, u32)>,
    bbox: BoundingBox,
    centroid: Point,
    mean_rgb: [f64; 3],
    color: HsvColor,
}

impl Region {
    /// Pixels are stored in raster order; `mean_rgb` is the average source
    /// color under them.
    pub fn new(mut pixels: Vec<(u32, u32)>, mean_rgb: [f64; 3]) -> Result<Self, RegionError> {
        if pixels.is_empty() {
            return Err(RegionError::Empty);
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y) in &pixels {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sx += f64::from(x);
            sy += f64::from(y);
        }
        let n = pixels.len() as f64;
        let bbox = BoundingBox::new(f64::from(x0), f64::from(y0), f64::from(x1 - x0 + 1), f64::from(y1 - y0 + 1));
        let mean_rgb = mean_rgb.map(|c| c.clamp(0.0, 255.0));
        Ok(Self { pixels, bbox, centroid: Point::new(sx / n, sy / n), mean_rgb, color: rgb_to_hsv_f64(mean_rgb) })
    }

    /// Region over `pixels` colored by the frame underneath.
    pub fn from_frame(pixels: Vec<(u32, u32)>, src: &Frame) -> Result<Self, RegionError> {
        let mut sum = [0.0; 3];
        for &(x, y) in &pixels {
            if x >= src.width() || y >= src.height() {
                return Err(RegionError::OutOfBounds(x, y));
            }
            let p = src.get(x, y);
            for c in 0..3 {
                sum[c] += f64::from(p[c]);
            }
        }
        let n = pixels.len().max(1) as f64;
        Self::new(pixels, sum.map(|s| s / n))
    }

    /// Union of disjoint regions; color is the area-weighted mean.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Region>) -> Result<Self, RegionError> {
        let mut pixels = Vec::new();
        let mut sum = [0.0; 3];
        for r in parts {
            let n = r.area() as f64;
            for c in 0..3 {
                sum[c] += r.mean_rgb[c] * n;
            }
            pixels.extend_from_slice(&r.pixels);
        }
        let n = pixels.len().max(1) as f64;
        Self::new(pixels, sum.map(|s| s / n))
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn color(&self) -> HsvColor {
        self.color
    }

    pub fn mean_rgb(&self) -> [f64; 3] {
        self.mean_rgb
    }

    /// The region moved by `t`, pixels rounded to the nearest grid point and
    /// clipped to a `width` x `height` frame. `None` if nothing remains.
    pub fn transformed(&self, t: &AffineTransform, width: u32, height: u32) -> Option<Region> {
        let pixels: Vec<(u32, u32)> = self
            .pixels
            .iter()
            .filter_map(|&(x, y)| {
                let (u, v) = t.apply(f64::from(x), f64::from(y));
                let (u, v) = (u.round(), v.round());
                (u >= 0.0 && v >= 0.0 && u < f64::from(width) && v < f64::from(height)).then_some((u as u32, v as u32))
            })
            .collect();
        Region::new(pixels, self.mean_rgb).ok()
    }

    fn first_pixel(&self) -> (u32, u32) {
        let (x, y) = self.pixels[0];
        (y, x)
    }
}

/// A region in frame n matched to a region in frame n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalencePair {
    pub current: Region,
    pub previous: Region,
    /// Position of `current` in the list it was paired from.
    pub current_index: usize,
    /// Displacement of the centroid between the two frames, in frame-n pixels.
    pub motion: (f64, f64),
}

/// Thresholds for the two merging stages. Distances are in pixels; color
/// thresholds are squared HSV distances (see [`hsv_distance2`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeParams {
    /// Same-frame centroid distance.
    pub th1: f64,
    /// Same-frame color distance.
    pub th2: f64,
    /// Frame-to-frame centroid distance for pairing.
    pub th3: f64,
    /// Frame-to-frame color distance for pairing.
    pub th4: f64,
    /// Centroid distance between two pairs.
    pub th5: f64,
    /// Motion consistency between two pairs.
    pub th6: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { th1: 30.0, th2: 3000.0, th3: 30.0, th4: 8000.0, th5: 50.0, th6: 30.0 }
    }
}

impl MergeParams {
    /// All thresholds zero: nothing merges.
    pub const fn disabled() -> Self {
        Self { th1: 0.0, th2: 0.0, th3: 0.0, th4: 0.0, th5: 0.0, th6: 0.0 }
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        let all = [
            ("th1", self.th1),
            ("th2", self.th2),
            ("th3", self.th3),
            ("th4", self.th4),
            ("th5", self.th5),
            ("th6", self.th6),
        ];
        for (name, value) in all {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(RegionError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

/// Squared Euclidean distance between two HSV colors on the `[0, 255]` scale.
/// Hue is compared around the circle, so 2 and 253 are 4 apart.
pub fn hsv_distance2(a: HsvColor, b: HsvColor) -> f64 {
    let dh = (a.h - b.h).abs().rem_euclid(255.0);
    let dh = dh.min(255.0 - dh);
    dh * dh + (a.s - b.s).powi(2) + (a.v - b.v).powi(2)
}

/// Connected components of `mask` with at least `min_area` pixels.
pub fn extract_regions(mask: &BinaryImage, src: &Frame, min_area: usize) -> Result<Vec<Region>, RegionError> {
    if mask.dimensions() != src.dimensions() {
        return Err(RegionError::DimensionMismatch { mask: mask.dimensions(), frame: src.dimensions() });
    }
    connected_components(mask)
        .into_iter()
        .filter(|c| c.len() >= min_area.max(1))
        .map(|c| Region::from_frame(c, src))
        .collect()
}

fn merge_groups(regions: &[Region], set: &mut DisjointSet) -> Vec<(Region, Vec<usize>)> {
    let mut out: Vec<(Region, Vec<usize>)> = set
        .groups()
        .into_iter()
        .map(|g| {
            let merged = if g.len() == 1 {
                regions[g[0]].clone()
            } else {
                Region::merge(g.iter().map(|&i| &regions[i])).expect("groups are non-empty")
            };
            (merged, g)
        })
        .collect();
    out.sort_by_key(|(r, _)| r.first_pixel());
    out
}

/// Join regions of one frame whose centroids are closer than `th1` and whose
/// colors are closer than `th2`, transitively. Output is in raster order of
/// each region's first pixel.
pub fn merge_intra_frame(regions: &[Region], p: &MergeParams) -> Vec<Region> {
    let mut set = DisjointSet::new(regions.len());
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let (a, b) = (&regions[i], &regions[j]);
            if a.centroid.distance(&b.centroid) < p.th1 && hsv_distance2(a.color, b.color) < p.th2 {
                set.union(i, j);
            }
        }
    }
    merge_groups(regions, &mut set).into_iter().map(|(r, _)| r).collect()
}

/// Pair each current region with at most one previous region.
pub fn pair_inter_frame(current: &[Region], previous: &[Region], p: &MergeParams) -> Vec<EquivalencePair> {
    pair_inter_frame_compensated(current, previous, p, &AffineTransform::identity())
}

/// [`pair_inter_frame`] where previous centroids are first carried into the
/// current frame by `prev_to_curr`, so motion vectors exclude camera motion.
///
/// Candidates within both thresholds are accepted greedily, nearest first.
pub fn pair_inter_frame_compensated(
    current: &[Region],
    previous: &[Region],
    p: &MergeParams,
    prev_to_curr: &AffineTransform,
) -> Vec<EquivalencePair> {
    let moved: Vec<Point> = previous
        .iter()
        .map(|r| {
            let (x, y) = prev_to_curr.apply(r.centroid.x, r.centroid.y);
            Point::new(x, y)
        })
        .collect();
    let mut candidates = Vec::new();
    for (i, c) in current.iter().enumerate() {
        for (j, q) in previous.iter().enumerate() {
            let d = c.centroid.distance(&moved[j]);
            if d < p.th3 && hsv_distance2(c.color, q.color) < p.th4 {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_c = vec![false; current.len()];
    let mut used_p = vec![false; previous.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if used_c[i] || used_p[j] {
            continue;
        }
        used_c[i] = true;
        used_p[j] = true;
        let c = current[i].centroid;
        pairs.push(EquivalencePair {
            current: current[i].clone(),
            previous: previous[j].clone(),
            current_index: i,
            motion: (c.x - moved[j].x, c.y - moved[j].y),
        });
    }
    pairs.sort_by_key(|e| e.current_index);
    pairs
}

/// Distance between the motion vectors of two equivalence pairs.
pub fn motion_consistency(a: &EquivalencePair, b: &EquivalencePair) -> f64 {
    (a.motion.0 - b.motion.0).hypot(a.motion.1 - b.motion.1)
}

/// A merged current-frame region and, when any of its parts was paired, the
/// area-weighted motion of those parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingRegion {
    pub region: Region,
    pub motion: Option<(f64, f64)>,
}

/// Join current regions whose pairs lie within `th5` of each other and move
/// alike (motion consistency below `th6`). Regions without a pair pass
/// through unchanged.
pub fn merge_by_motion(current: &[Region], pairs: &[EquivalencePair], p: &MergeParams) -> Vec<MovingRegion> {
    let mut set = DisjointSet::new(current.len());
    for (i, a) in pairs.iter().enumerate() {
        for b in &pairs[i + 1..] {
            if a.current.centroid.distance(&b.current.centroid) < p.th5 && motion_consistency(a, b) < p.th6 {
                set.union(a.current_index, b.current_index);
            }
        }
    }
    let mut motion_of: Vec<Option<(f64, f64)>> = vec![None; current.len()];
    for e in pairs {
        if e.current_index < current.len() {
            motion_of[e.current_index] = Some(e.motion);
        }
    }
    merge_groups(current, &mut set)
        .into_iter()
        .map(|(region, members)| {
            let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
            for &m in &members {
                if let Some((dx, dy)) = motion_of[m] {
                    let a = current[m].area() as f64;
                    wx += dx * a;
                    wy += dy * a;
                    wsum += a;
                }
            }
            let motion = (wsum > 0.0).then(|| (wx / wsum, wy / wsum));
            MovingRegion { region, motion }
        })
        .collect()
}
