//! Background motion estimation and compensation.
//!
//! Matches between frame n-1 and frame n contain both static background and
//! independently moving foreground. [`adaptive_outlier_filter`] separates the
//! two by repeatedly fitting a 6-parameter affine model and rejecting pairs
//! whose residual exceeds a threshold derived from the current residual
//! statistics; [`warp_affine`] then brings frame n onto frame n-1.

use crate::features::MatchPair;
use crate::imgproc::{BinaryImage, Frame, GrayImage, FOREGROUND};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("need at least {needed} match pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("source points are collinear or coincident")]
    Degenerate,
    #[error("outlier filtering left only {inliers} inliers")]
    DegenerateFilter { inliers: usize },
    #[error("transform is not invertible (det = {0:e})")]
    Singular(f64),
}

/// `(x, y) -> (a x + b y + tx, c x + d y + ty)`, stored row-major as
/// `[[a, b, tx], [c, d, ty]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform(pub [[f64; 3]; 2]);

impl Default for AffineTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform {
    pub const fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    }

    pub const fn translation(tx: f64, ty: f64) -> Self {
        Self([[1.0, 0.0, tx], [0.0, 1.0, ty]])
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (m[0][0] * x + m[0][1] * y + m[0][2], m[1][0] * x + m[1][1] * y + m[1][2])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn translation_part(&self) -> (f64, f64) {
        (self.0[0][2], self.0[1][2])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn inverse(&self) -> Result<AffineTransform, MotionError> {
        let det = self.det();
        if det.abs() <= 1e-6 || !det.is_finite() {
            return Err(MotionError::Singular(det));
        }
        let [[a, b, tx], [c, d, ty]] = self.0;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok(Self([[ia, ib, -(ia * tx + ib * ty)], [ic, id, -(ic * tx + id * ty)]]))
    }

    /// Distance between `T(pair.prev)` and `pair.curr`.
    pub fn residual(&self, pair: &MatchPair) -> f64 {
        let (x, y) = self.apply(pair.prev.x, pair.prev.y);
        (x - pair.curr.x).hypot(y - pair.curr.y)
    }
}

/// Least-squares affine map taking each `prev` point to its `curr` partner.
pub fn fit_affine_lsq(pairs: &[MatchPair]) -> Result<AffineTransform, MotionError> {
    if pairs.len() < 3 {
        return Err(MotionError::InsufficientData { needed: 3, got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let (mut mx, mut my, mut mu, mut mv) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        mx += p.prev.x;
        my += p.prev.y;
        mu += p.curr.x;
        mv += p.curr.y;
    }
    mx /= n;
    my /= n;
    mu /= n;
    mv /= n;

    // centred normal equations
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        let (x, y) = (p.prev.x - mx, p.prev.y - my);
        let (u, v) = (p.curr.x - mu, p.curr.y - mv);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxu += x * u;
        syu += y * u;
        sxv += x * v;
        syv += y * v;
    }
    let det = sxx * syy - sxy * sxy;
    let scale = (sxx + syy).powi(2);
    if scale <= 0.0 || det <= 1e-10 * scale {
        return Err(MotionError::Degenerate);
    }
    let a = (sxu * syy - syu * sxy) / det;
    let b = (syu * sxx - sxu * sxy) / det;
    let c = (sxv * syy - syv * sxy) / det;
    let d = (syv * sxx - sxv * sxy) / det;
    let t = AffineTransform([[a, b, mu - a * mx - b * my], [c, d, mv - c * mx - d * my]]);
    if t.is_finite() {
        Ok(t)
    } else {
        Err(MotionError::Degenerate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Rejection threshold is `mean + c * std` of the current inlier residuals.
    pub c: f64,
    pub max_iterations: usize,
    /// Residuals at or below this many pixels are never rejected.
    pub min_threshold: f64,
    pub min_inliers: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { c: 2.0, max_iterations: 10, min_threshold: 0.5, min_inliers: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub inliers: Vec<MatchPair>,
    pub outliers: Vec<MatchPair>,
    pub transform: AffineTransform,
    pub iterations: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn residuals(t: &AffineTransform, pairs: &[MatchPair]) -> Vec<f64> {
    pairs.iter().map(|p| t.residual(p)).collect()
}

/// Starting model: whichever of the plain least-squares fit and the median
/// displacement explains the median pair better. The median displacement
/// stays on the background when up to half the pairs are foreground, which a
/// least-squares start does not.
fn seed_model(pairs: &[MatchPair]) -> AffineTransform {
    let mut dx: Vec<f64> = pairs.iter().map(|p| p.curr.x - p.prev.x).collect();
    let mut dy: Vec<f64> = pairs.iter().map(|p| p.curr.y - p.prev.y).collect();
    let shift = AffineTransform::translation(median(&mut dx), median(&mut dy));
    match fit_affine_lsq(pairs) {
        Ok(full) => {
            let m_full = median(&mut residuals(&full, pairs));
            let m_shift = median(&mut residuals(&shift, pairs));
            if m_full <= m_shift {
                full
            } else {
                shift
            }
        }
        Err(_) => shift,
    }
}

/// Split match pairs into background (inliers) and foreground (outliers).
///
/// The starting partition comes from a robust seed (median residual plus
/// `c` scaled median absolute deviations). Each round then fits an affine
/// model to the current inliers and drops those whose residual exceeds
/// `max(min_threshold, mean + c * std)` of the inlier residuals. Stops when
/// nothing is dropped or after `max_iterations` rounds. The returned
/// transform is the fit on the returned inliers.
pub fn adaptive_outlier_filter(pairs: &[MatchPair], params: &FilterParams) -> Result<FilterResult, MotionError> {
    let min_inliers = params.min_inliers.max(3);
    if pairs.len() < min_inliers {
        return Err(MotionError::InsufficientData { needed: min_inliers, got: pairs.len() });
    }

    let seed = seed_model(pairs);
    let r = residuals(&seed, pairs);
    let med = median(&mut r.clone());
    let mad = median(&mut r.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
    let threshold = (med + params.c * 1.4826 * mad).max(params.min_threshold);
    let mut inlier: Vec<bool> = r.iter().map(|&v| v <= threshold).collect();

    let mut iterations = 0;
    let transform = loop {
        let count = inlier.iter().filter(|&&b| b).count();
        if count < min_inliers {
            return Err(MotionError::DegenerateFilter { inliers: count });
        }
        let current: Vec<MatchPair> = pairs.iter().zip(&inlier).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
        let model = fit_affine_lsq(&current).map_err(|_| MotionError::DegenerateFilter { inliers: count })?;
        iterations += 1;

        let r = residuals(&model, pairs);
        let kept: Vec<f64> = r.iter().zip(&inlier).filter(|(_, &k)| k).map(|(v, _)| *v).collect();
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / kept.len() as f64;
        let threshold = (mean + params.c * var.sqrt()).max(params.min_threshold);
        let next: Vec<bool> = r.iter().zip(&inlier).map(|(&v, &k)| k && v <= threshold).collect();
        if next == inlier || iterations >= params.max_iterations {
            break model;
        }
        inlier = next;
    };

    let (mut inliers, mut outliers) = (Vec::new(), Vec::new());
    for (p, keep) in pairs.iter().zip(inlier) {
        if keep {
            inliers.push(*p);
        } else {
            outliers.push(*p);
        }
    }
    Ok(FilterResult { inliers, outliers, transform, iterations })
}

/// Images that can be resampled under an affine map.
pub trait Warp: Sized {
    /// Output pixel `q` takes the source value at `inverse(q)`; sources
    /// outside the image give 0.
    fn warp_with_inverse(&self, inverse: &AffineTransform) -> Self;
}

/// Bilinear taps for a source position, `None` when outside the image.
#[inline]
fn taps(w: usize, h: usize, sx: f64, sy: f64) -> Option<([usize; 4], [f32; 4])> {
    const EPS: f64 = 1e-9;
    if sx < -EPS || sy < -EPS || sx > (w - 1) as f64 + EPS || sy > (h - 1) as f64 + EPS {
        return None;
    }
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = ((sx - x0 as f64) as f32, (sy - y0 as f64) as f32);
    Some((
        [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1],
        [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
    ))
}

fn for_each_source(w: usize, h: usize, inv: &AffineTransform, mut f: impl FnMut(usize, Option<([usize; 4], [f32; 4])>)) {
    let m = inv.0;
    for y in 0..h {
        let (mut sx, mut sy) = inv.apply(0.0, y as f64);
        for x in 0..w {
            f(y * w + x, taps(w, h, sx, sy));
            sx += m[0][0];
            sy += m[1][0];
        }
    }
}

impl Warp for GrayImage {
    fn warp_with_inverse(&self, inverse: &AffineTransform) -> Self {
        let (w, h) = (self.width() as usize, self.height() as usize);
        let src = self.data();
        let mut out = vec![0u8; w * h];
        for_each_source(w, h, inverse, |i, t| {
            if let Some((idx, wt)) = t {
                let v: f32 = (0..4).map(|k| wt[k] * f32::from(src[idx[k]])).sum();
                out[i] = v.round().clamp(0.0, 255.0) as u8;
            }
        });
        GrayImage::new(self.width(), self.height(), out).expect("same dimensions")
    }
}

impl Warp for Frame {
    fn warp_with_inverse(&self, inverse: &AffineTransform) -> Self {
        let (w, h) = (self.width() as usize, self.height() as usize);
        let src = self.pixels();
        let mut out = vec![[0u8; 3]; w * h];
        for_each_source(w, h, inverse, |i, t| {
            if let Some((idx, wt)) = t {
                for c in 0..3 {
                    let v: f32 = (0..4).map(|k| wt[k] * f32::from(src[idx[k]][c])).sum();
                    out[i][c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        });
        Frame::new(self.width(), self.height(), self.index(), out).expect("same dimensions")
    }
}

/// Resample `img` so that content at `p` moves to `t(p)`.
pub fn warp_affine<I: Warp>(img: &I, t: &AffineTransform) -> Result<I, MotionError> {
    Ok(img.warp_with_inverse(&t.inverse()?))
}

/// Pixels of a `width` x `height` output whose source under `inverse` lies at
/// least `margin` pixels inside the image.
pub fn valid_region(width: u32, height: u32, inverse: &AffineTransform, margin: f64) -> BinaryImage {
    let (w, h) = (f64::from(width), f64::from(height));
    let m = inverse.0;
    let mut data = vec![0u8; width as usize * height as usize];
    for y in 0..height as usize {
        // source coordinates are linear in x along the row: s = s0 + x * ds
        let (sx0, sy0) = inverse.apply(0.0, y as f64);
        let (mut lo, mut hi) = (0.0f64, w - 1.0);
        for (s0, ds, max) in [(sx0, m[0][0], w - 1.0 - margin), (sy0, m[1][0], h - 1.0 - margin)] {
            if ds.abs() < 1e-12 {
                if s0 < margin || s0 > max {
                    hi = -1.0;
                }
            } else {
                let (a, b) = ((margin - s0) / ds, (max - s0) / ds);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        let row = &mut data[y * width as usize..(y + 1) * width as usize];
        for (x, v) in row.iter_mut().enumerate() {
            let xf = x as f64;
            if xf >= lo && xf <= hi {
                let (sx, sy) = (sx0 + xf * m[0][0], sy0 + xf * m[1][0]);
                // recheck at the ends of the interval against rounding
                if sx >= margin && sy >= margin && sx <= w - 1.0 - margin && sy <= h - 1.0 - margin {
                    *v = FOREGROUND;
                }
            }
        }
    }
    BinaryImage::new(width, height, data).expect("binary by construction")
}

/// Resample `frame` like [`Warp::warp_with_inverse`] but only where `mask`
/// is set; every other pixel is black.
pub fn warp_masked(frame: &Frame, inverse: &AffineTransform, mask: &BinaryImage) -> Frame {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    assert_eq!(mask.dimensions(), frame.dimensions(), "mask and frame sizes differ");
    let src = frame.pixels();
    let mut out = vec![[0u8; 3]; w * h];
    for (i, &v) in mask.data().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let (sx, sy) = inverse.apply((i % w) as f64, (i / w) as f64);
        if let Some((idx, wt)) = taps(w, h, sx, sy) {
            for c in 0..3 {
                let v: f32 = (0..4).map(|k| wt[k] * f32::from(src[idx[k]][c])).sum();
                out[i][c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(frame.width(), frame.height(), frame.index(), out).expect("same dimensions")
}
