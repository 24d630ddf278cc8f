//! Per-frame moving-object detection from a moving camera.
//!
//! [`Detector::detect_step`] takes frames n-1 and n and runs: feature
//! matching, background/foreground separation of the matches, affine
//! compensation of frame n onto frame n-1, blurred frame difference,
//! morphological opening, region extraction, and the two merging stages.
//! Regions are reported in frame-n coordinates.

use crate::features::{detect_and_describe, symmetric_knn_match, DetectorParams, Feature, FeatureError, MatchParams};
use crate::geometry::BoundingBox;
use crate::imgproc::{self, Frame, GrayImage, ImageError};
use crate::motion::{adaptive_outlier_filter, valid_region, warp_masked, AffineTransform, FilterParams, Warp};
use crate::regions::{
    extract_regions, merge_by_motion, merge_intra_frame, pair_inter_frame_compensated, MergeParams, MovingRegion,
    Region, RegionError,
};
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("frames differ in size: {prev:?} vs {curr:?}")]
    DimensionMismatch { prev: (u32, u32), curr: (u32, u32) },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("invalid pipeline parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub detector: DetectorParams,
    pub matching: MatchParams,
    pub filter: FilterParams,
    /// Blur applied to both frames before differencing.
    pub blur_sigma: f64,
    pub diff_threshold: u8,
    pub min_area: usize,
    /// Pixels whose compensated source lies closer than this to the frame
    /// edge are excluded from the difference.
    pub border_margin: f64,
    pub merge: MergeParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            matching: MatchParams::default(),
            filter: FilterParams::default(),
            blur_sigma: 1.0,
            diff_threshold: 30,
            min_area: 40,
            border_margin: 2.0,
            merge: MergeParams::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        self.merge.validate()?;
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return Err(DetectError::InvalidParams(format!("blur_sigma = {}", self.blur_sigma)));
        }
        if !(self.border_margin >= 0.0 && self.border_margin.is_finite()) {
            return Err(DetectError::InvalidParams(format!("border_margin = {}", self.border_margin)));
        }
        if self.detector.max_points == 0 {
            return Err(DetectError::InvalidParams("detector.max_points = 0".into()));
        }
        if !(self.filter.c > 0.0) || self.filter.max_iterations == 0 {
            return Err(DetectError::InvalidParams("filter.c and filter.max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one detection step.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Index of frame n.
    pub frame: u64,
    /// Merged regions in frame-n coordinates.
    pub regions: Vec<MovingRegion>,
    /// Background motion from frame n-1 to frame n.
    pub transform: AffineTransform,
    /// False when compensation failed and the identity was used instead.
    pub compensated: bool,
    pub keypoints: usize,
    pub matches: usize,
    pub inliers: usize,
    /// Regions before any merging.
    pub raw_regions: usize,
}

impl Detection {
    pub fn boxes(&self) -> impl Iterator<Item = BoundingBox> + '_ {
        self.regions.iter().map(|r| r.region.bbox())
    }
}

pub const REGIONS_CSV_HEADER: &str = "frame,region_id,x,y,w,h,dx,dy";

/// One CSV row per region; motion columns are empty for unpaired regions.
pub fn regions_csv_rows(d: &Detection) -> String {
    let mut out = String::new();
    for (id, r) in d.regions.iter().enumerate() {
        let b = r.region.bbox();
        let _ = write!(out, "{},{},{},{},{},{}", d.frame, id, b.x, b.y, b.w, b.h);
        match r.motion {
            Some((dx, dy)) => {
                let _ = writeln!(out, ",{dx:.3},{dy:.3}");
            }
            None => out.push_str(",,\n"),
        }
    }
    out
}

pub const BOX_COLOR: [u8; 3] = [0, 255, 0];

/// Copy of `frame` with a green box around every detected region.
pub fn annotate(frame: &Frame, d: &Detection) -> Frame {
    let mut out = frame.clone();
    for b in d.boxes() {
        out.draw_box(&b, BOX_COLOR);
    }
    out
}

struct CachedFeatures {
    key: u64,
    features: Vec<Feature>,
}

struct Memory {
    /// Index of the frame whose coordinates `regions` are in.
    frame: u64,
    regions: Vec<Region>,
    /// Background motion that carries `regions` into the next frame's
    /// reference coordinates.
    forward: AffineTransform,
}

fn frame_key(g: &GrayImage, index: u64) -> u64 {
    let mut h = DefaultHasher::new();
    index.hash(&mut h);
    g.dimensions().hash(&mut h);
    g.data().hash(&mut h);
    h.finish()
}

/// Stateful detector for one frame stream.
///
/// Keeps the features of the last frame seen and the regions of the last
/// step, which the motion-merging stage pairs against.
pub struct Detector {
    params: PipelineParams,
    cache: Option<CachedFeatures>,
    memory: Option<Memory>,
}

impl Detector {
    pub fn new(params: PipelineParams) -> Result<Self, DetectError> {
        params.validate()?;
        Ok(Self { params, cache: None, memory: None })
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    pub fn set_merge_params(&mut self, merge: MergeParams) -> Result<(), DetectError> {
        merge.validate()?;
        self.params.merge = merge;
        Ok(())
    }

    /// Forget remembered regions and features.
    pub fn reset(&mut self) {
        self.cache = None;
        self.memory = None;
    }

    fn features_for(&mut self, g: &GrayImage, index: u64) -> Result<Vec<Feature>, DetectError> {
        let key = frame_key(g, index);
        if let Some(c) = &self.cache {
            if c.key == key {
                return Ok(c.features.clone());
            }
        }
        Ok(detect_and_describe(g, &self.params.detector)?)
    }

    /// Background motion from `prev` to `curr`, or `None` when it cannot be
    /// estimated reliably.
    fn estimate(&mut self, g_prev: &GrayImage, prev: &Frame, g_curr: &GrayImage, curr: &Frame) -> Result<Estimate, DetectError> {
        let f_prev = self.features_for(g_prev, prev.index())?;
        let f_curr = detect_and_describe(g_curr, &self.params.detector)?;
        let matches = symmetric_knn_match(&f_prev, &f_curr, &self.params.matching);
        let keypoints = f_curr.len();
        self.cache = Some(CachedFeatures { key: frame_key(g_curr, curr.index()), features: f_curr });
        let fit = adaptive_outlier_filter(&matches, &self.params.filter)
            .ok()
            .filter(|r| r.transform.inverse().is_ok())
            .map(|r| (r.transform, r.inliers.len()));
        Ok(Estimate { fit, keypoints, matches: matches.len() })
    }

    pub fn detect_step(&mut self, prev: &Frame, curr: &Frame) -> Result<Detection, DetectError> {
        if prev.dimensions() != curr.dimensions() {
            return Err(DetectError::DimensionMismatch { prev: prev.dimensions(), curr: curr.dimensions() });
        }
        let (w, h) = curr.dimensions();
        let p = self.params;
        let g_prev = imgproc::to_grayscale(prev);
        let g_curr = imgproc::to_grayscale(curr);
        let est = self.estimate(&g_prev, prev, &g_curr, curr)?;
        let (transform, compensated, inliers) = match est.fit {
            Some((t, n)) => (t, true, n),
            None => (AffineTransform::identity(), false, 0),
        };

        // frame n resampled into frame n-1 coordinates: output(q) = curr(T q)
        let g_warped = g_curr.warp_with_inverse(&transform);
        let valid = valid_region(w, h, &transform, p.border_margin);
        let a = imgproc::gaussian_blur(&g_prev, p.blur_sigma)?;
        let b = imgproc::gaussian_blur(&g_warped, p.blur_sigma)?;
        let diff = imgproc::abs_diff_threshold(&a, &b, p.diff_threshold)?.and(&valid)?;
        let mask = imgproc::morph_open_3x3(&diff);

        // colors only matter under the mask
        let warped = warp_masked(curr, &transform, &mask);
        let raw = extract_regions(&mask, &warped, p.min_area)?;
        let raw_regions = raw.len();
        let intra = merge_intra_frame(&raw, &p.merge);

        let pairs = match (&self.memory, compensated) {
            (Some(m), true) if m.frame + 1 == prev.index() => {
                pair_inter_frame_compensated(&intra, &m.regions, &p.merge, &m.forward)
            }
            _ => Vec::new(),
        };
        let merged = merge_by_motion(&intra, &pairs, &p.merge);

        let regions = merged
            .into_iter()
            .filter_map(|m| {
                let region = m.region.transformed(&transform, w, h)?;
                let motion = m.motion.map(|(dx, dy)| {
                    let (x0, y0) = transform.apply(0.0, 0.0);
                    let (x1, y1) = transform.apply(dx, dy);
                    (x1 - x0, y1 - y0)
                });
                Some(MovingRegion { region, motion })
            })
            .collect();

        self.memory = compensated.then(|| Memory { frame: prev.index(), regions: intra, forward: transform });

        Ok(Detection {
            frame: curr.index(),
            regions,
            transform,
            compensated,
            keypoints: est.keypoints,
            matches: est.matches,
            inliers,
            raw_regions,
        })
    }
}

struct Estimate {
    fit: Option<(AffineTransform, usize)>,
    keypoints: usize,
    matches: usize,
}

/// Run a detector over consecutive frames; result `i` compares frames `i`
/// and `i + 1`.
pub fn detect_sequence(frames: &[Frame], params: PipelineParams) -> Result<Vec<Detection>, DetectError> {
    let mut det = Detector::new(params)?;
    frames.windows(2).map(|w| det.detect_step(&w[0], &w[1])).collect()
}
