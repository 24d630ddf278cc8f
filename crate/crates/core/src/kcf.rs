//! Kernelized correlation filter tracking on grayscale features.
//!
//! The filter is a ridge regression over every cyclic shift of a padded
//! window around the target. With a Gaussian kernel the training and
//! detection both reduce to element-wise operations on 2-D spectra, so each
//! update costs a handful of FFTs of the window.

use crate::fft::{dft2, idft2, ComplexPlane, FftError, Patch};
use crate::geometry::BoundingBox;
use crate::imgproc::{luma, Frame};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KcfError {
    #[error("kernel width must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("patches differ in size: {0:?} vs {1:?}")]
    SizeMismatch((usize, usize), (usize, usize)),
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error("box {0:?} is not inside the {1}x{2} frame")]
    BoxOutOfBounds(BoundingBox, u32, u32),
    #[error("box area {0} is below the 16 px^2 minimum")]
    BoxTooSmall(f64),
    #[error("target lost: search window at ({0:.1}, {1:.1}) lies outside the frame")]
    Lost(f64, f64),
    #[error("invalid tracker parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KcfParams {
    /// Search window size as a multiple of the target box.
    pub padding: f64,
    /// Gaussian kernel width on the normalised features.
    pub sigma: f64,
    /// Ridge regularisation.
    pub lambda: f64,
    /// Model blending factor per frame.
    pub interp: f64,
    /// Regression target width relative to `sqrt(w h)` of the box.
    pub output_sigma_factor: f64,
    /// Largest template side in cells; larger windows are downsampled.
    pub max_template: usize,
}

impl Default for KcfParams {
    fn default() -> Self {
        Self { padding: 2.5, sigma: 0.5, lambda: 1e-4, interp: 0.075, output_sigma_factor: 0.1, max_template: 128 }
    }
}

impl KcfParams {
    pub fn validate(&self) -> Result<(), KcfError> {
        let bad = |what: &str| Err(KcfError::InvalidParams(what.to_string()));
        if !(self.padding >= 1.0 && self.padding.is_finite()) {
            return bad("padding must be at least 1");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(KcfError::InvalidSigma(self.sigma));
        }
        if !(self.lambda > 0.0) || !(0.0..=1.0).contains(&self.interp) || !(self.output_sigma_factor > 0.0) {
            return bad("lambda and output_sigma_factor must be positive, interp within [0, 1]");
        }
        if self.max_template < 8 || !self.max_template.is_power_of_two() {
            return bad("max_template must be a power of two of at least 8");
        }
        Ok(())
    }
}

/// Kernel correlation of `x` with every cyclic shift of `z`:
/// `k(t) = exp(-max(0, |x|^2 + |z|^2 - 2 (x * z)(t)) / (sigma^2 N))`.
pub fn gaussian_correlation(x: &Patch, z: &Patch, sigma: f64) -> Result<Patch, KcfError> {
    if !(sigma > 0.0) {
        return Err(KcfError::InvalidSigma(sigma));
    }
    if (x.width, x.height) != (z.width, z.height) {
        return Err(KcfError::SizeMismatch((x.width, x.height), (z.width, z.height)));
    }
    let (xf, zf) = (dft2(x)?, dft2(z)?);
    correlate_spectra(&xf, x.energy(), &zf, z.energy(), sigma)
}

fn correlate_spectra(xf: &ComplexPlane, xx: f64, zf: &ComplexPlane, zz: f64, sigma: f64) -> Result<Patch, KcfError> {
    let prod = ComplexPlane {
        width: xf.width,
        height: xf.height,
        data: xf.data.iter().zip(&zf.data).map(|(a, b)| a.conj() * b).collect(),
    };
    let mut xz = idft2(&prod)?;
    let n = xz.data.len() as f64;
    for v in &mut xz.data {
        *v = (-((xx + zz - 2.0 * *v).max(0.0)) / (sigma * sigma * n)).exp();
    }
    Ok(xz)
}

fn nearest_pow2(v: f64, max: usize) -> usize {
    let p = 2f64.powf(v.max(1.0).log2().round()) as usize;
    p.clamp(8, max)
}

/// Periodic Hann window peaking at exactly 1 in the middle cell.
fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect()
}

/// Tracker state for a single target.
#[derive(Debug, Clone)]
pub struct TrackState {
    pub bbox: BoundingBox,
    /// Search window size in image pixels.
    pub window: (f64, f64),
    /// Template size in cells (powers of two).
    pub template: (usize, usize),
    pub params: KcfParams,
    cosine: Patch,
    /// Regression target, peaked at the template centre.
    pub y: Patch,
    yf: ComplexPlane,
    /// Blended training features.
    pub x: Patch,
    xf: ComplexPlane,
    /// Blended dual coefficients (frequency domain).
    pub alphaf: ComplexPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub bbox: BoundingBox,
    pub peak: f64,
    /// Estimated target displacement in image pixels.
    pub shift: (f64, f64),
}

impl TrackState {
    fn cell_size(&self) -> (f64, f64) {
        (self.window.0 / self.template.0 as f64, self.window.1 / self.template.1 as f64)
    }

    /// Windowed features of a `template`-sized grid centred at `(cx, cy)`.
    fn features(&self, gray: &GrayF, cx: f64, cy: f64) -> Patch {
        let (tw, th) = self.template;
        let (sx, sy) = self.cell_size();
        let mut data = Vec::with_capacity(tw * th);
        for j in 0..th {
            let y = cy + (j as f64 - (th / 2) as f64) * sy;
            for i in 0..tw {
                let x = cx + (i as f64 - (tw / 2) as f64) * sx;
                data.push((gray.sample(x, y) / 255.0 - 0.5) * self.cosine.data[j * tw + i]);
            }
        }
        Patch { width: tw, height: th, data }
    }

    fn train(&self, x: &Patch) -> Result<(ComplexPlane, ComplexPlane), KcfError> {
        let xf = dft2(x)?;
        let kf = dft2(&correlate_spectra(&xf, x.energy(), &xf, x.energy(), self.params.sigma)?)?;
        let lambda = self.params.lambda;
        let alphaf = ComplexPlane {
            width: kf.width,
            height: kf.height,
            data: self.yf.data.iter().zip(&kf.data).map(|(y, k)| y / (k + lambda)).collect(),
        };
        Ok((xf, alphaf))
    }

    /// Correlation response of the current model over the window at `(cx, cy)`.
    pub fn response(&self, frame: &Frame, cx: f64, cy: f64) -> Result<Patch, KcfError> {
        let gray = GrayF::new(frame);
        self.response_on(&gray, cx, cy)
    }

    fn response_on(&self, gray: &GrayF, cx: f64, cy: f64) -> Result<Patch, KcfError> {
        let z = self.features(gray, cx, cy);
        let zf = dft2(&z)?;
        let k = correlate_spectra(&self.xf, self.x.energy(), &zf, z.energy(), self.params.sigma)?;
        let kf = dft2(&k)?;
        let rf = ComplexPlane {
            width: kf.width,
            height: kf.height,
            data: kf.data.iter().zip(&self.alphaf.data).map(|(a, b)| a * b).collect(),
        };
        Ok(idft2(&rf)?)
    }

    /// Peak of the response around `(cx, cy)` as a pixel offset, and its value.
    fn locate(&self, gray: &GrayF, cx: f64, cy: f64) -> Result<((f64, f64), f64), KcfError> {
        let r = self.response_on(gray, cx, cy)?;
        let (px, py) = r.argmax();
        let peak = r.at(px, py);
        let (tw, th) = self.template;
        let wrap = |i: usize, d: isize, n: usize| (i as isize + d).rem_euclid(n as isize) as usize;
        let ox = vertex(r.at(wrap(px, -1, tw), py), peak, r.at(wrap(px, 1, tw), py));
        let oy = vertex(r.at(px, wrap(py, -1, th)), peak, r.at(px, wrap(py, 1, th)));
        let (sx, sy) = self.cell_size();
        Ok((((px as f64 + ox - (tw / 2) as f64) * sx, (py as f64 + oy - (th / 2) as f64) * sy), peak))
    }

    pub fn center(&self) -> (f64, f64) {
        let c = self.bbox.center();
        (c.x, c.y)
    }
}

/// Frame luma as floats with edge-clamped bilinear sampling.
struct GrayF {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl GrayF {
    fn new(f: &Frame) -> Self {
        Self {
            w: f.width() as usize,
            h: f.height() as usize,
            data: f.pixels().iter().map(|&p| f32::from(luma(p))).collect(),
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.w - 1), (y0 + 1).min(self.h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |x: usize, y: usize| f64::from(self.data[y * self.w + x]);
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Start tracking the target inside `bbox`.
pub fn init_track(frame: &Frame, bbox: BoundingBox, params: KcfParams) -> Result<TrackState, KcfError> {
    params.validate()?;
    let (fw, fh) = frame.dimensions();
    if !bbox.is_finite()
        || bbox.w <= 0.0
        || bbox.h <= 0.0
        || bbox.x < 0.0
        || bbox.y < 0.0
        || bbox.right() > f64::from(fw)
        || bbox.bottom() > f64::from(fh)
    {
        return Err(KcfError::BoxOutOfBounds(bbox, fw, fh));
    }
    if bbox.area() < 16.0 {
        return Err(KcfError::BoxTooSmall(bbox.area()));
    }

    let window = (bbox.w * params.padding, bbox.h * params.padding);
    let template = (nearest_pow2(window.0, params.max_template), nearest_pow2(window.1, params.max_template));
    let (tw, th) = template;
    let (hx, hy) = (hann(tw), hann(th));
    let cosine = Patch { width: tw, height: th, data: (0..th).flat_map(|j| { let hj = hy[j]; hx.iter().map(move |v| v * hj) }).collect() };

    let (sx, sy) = (window.0 / tw as f64, window.1 / th as f64);
    let s = (bbox.w / sx * bbox.h / sy).sqrt() * params.output_sigma_factor;
    let mut y = Patch::zeros(tw, th);
    for j in 0..th {
        for i in 0..tw {
            let (di, dj) = (i as f64 - (tw / 2) as f64, j as f64 - (th / 2) as f64);
            y.data[j * tw + i] = (-(di * di + dj * dj) / (2.0 * s * s)).exp();
        }
    }
    let yf = dft2(&y)?;

    let mut state = TrackState {
        bbox,
        window,
        template,
        params,
        cosine,
        y,
        yf,
        x: Patch::zeros(tw, th),
        xf: ComplexPlane { width: tw, height: th, data: vec![Complex64::default(); tw * th] },
        alphaf: ComplexPlane { width: tw, height: th, data: vec![Complex64::default(); tw * th] },
    };
    let c = bbox.center();
    let x = state.features(&GrayF::new(frame), c.x, c.y);
    let (xf, alphaf) = state.train(&x)?;
    state.x = x;
    state.xf = xf;
    state.alphaf = alphaf;
    Ok(state)
}

/// Offset of the parabola vertex through three samples around the middle one.
fn vertex(m: f64, c: f64, p: f64) -> f64 {
    let d = m - 2.0 * c + p;
    if d.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (m - p) / d).clamp(-0.5, 0.5)
    }
}

/// Locate the target in `frame`, move the box and refresh the model.
pub fn update_track(state: &mut TrackState, frame: &Frame) -> Result<TrackResult, KcfError> {
    let (fw, fh) = (f64::from(frame.width()), f64::from(frame.height()));
    let (cx, cy) = state.center();
    let (ww, wh) = state.window;
    if cx + ww / 2.0 <= 0.0 || cy + wh / 2.0 <= 0.0 || cx - ww / 2.0 >= fw || cy - wh / 2.0 >= fh {
        return Err(KcfError::Lost(cx, cy));
    }
    let gray = GrayF::new(frame);
    let (mut shift, mut peak) = state.locate(&gray, cx, cy)?;
    // the window taper pulls the peak toward the old centre; look again from the estimate
    let (sx, sy) = state.cell_size();
    if shift.0.abs() > sx || shift.1.abs() > sy {
        let (again, p) = state.locate(&gray, cx + shift.0, cy + shift.1)?;
        shift = (shift.0 + again.0, shift.1 + again.1);
        peak = p;
    }

    let (ncx, ncy) = (cx + shift.0, cy + shift.1);
    state.bbox = BoundingBox::from_center(ncx, ncy, state.bbox.w, state.bbox.h);

    let x = state.features(&gray, ncx, ncy);
    let (xf, alphaf) = state.train(&x)?;
    let eta = state.params.interp;
    for (m, n) in state.alphaf.data.iter_mut().zip(&alphaf.data) {
        *m = *m * (1.0 - eta) + n * eta;
    }
    for (m, n) in state.x.data.iter_mut().zip(&x.data) {
        *m = *m * (1.0 - eta) + n * eta;
    }
    for (m, n) in state.xf.data.iter_mut().zip(&xf.data) {
        *m = *m * (1.0 - eta) + n * eta;
    }
    Ok(TrackResult { bbox: state.bbox, peak, shift })
}

pub const TRACK_CSV_HEADER: &str = "frame,cx,cy,w,h,peak";

pub fn track_csv_row(frame: u64, r: &TrackResult) -> String {
    let c = r.bbox.center();
    format!("{frame},{:.3},{:.3},{},{},{:.6}", c.x, c.y, r.bbox.w, r.bbox.h, r.peak)
}
