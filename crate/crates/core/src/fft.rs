//! Radix-2 complex FFT in one and two dimensions.
//!
//! Sizes must be powers of two. The inverse transforms include the `1/N`
//! normalisation, so `ifft2(fft2(x)) == x`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FftError {
    #[error("transform size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("buffer holds {got} values, expected {width}x{height}")]
    BufferSize { width: usize, height: usize, got: usize },
}

fn check_len(n: usize) -> Result<(), FftError> {
    if n == 0 || !n.is_power_of_two() {
        Err(FftError::NotPowerOfTwo(n))
    } else {
        Ok(())
    }
}

fn transform(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, sign * 2.0 * PI / len as f64);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= step;
            }
        }
        len <<= 1;
    }
}

/// In-place forward transform, `X[k] = sum x[n] e^{-2 pi i k n / N}`.
pub fn fft(buf: &mut [Complex64]) -> Result<(), FftError> {
    check_len(buf.len())?;
    transform(buf, false);
    Ok(())
}

/// In-place inverse transform with `1/N` scaling.
pub fn ifft(buf: &mut [Complex64]) -> Result<(), FftError> {
    check_len(buf.len())?;
    transform(buf, true);
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    Ok(())
}

fn transform_2d(buf: &mut [Complex64], width: usize, height: usize, inverse: bool) -> Result<(), FftError> {
    check_len(width)?;
    check_len(height)?;
    if buf.len() != width * height {
        return Err(FftError::BufferSize { width, height, got: buf.len() });
    }
    for row in buf.chunks_exact_mut(width) {
        transform(row, inverse);
    }
    let mut col = vec![Complex64::default(); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = buf[y * width + x];
        }
        transform(&mut col, inverse);
        for y in 0..height {
            buf[y * width + x] = col[y];
        }
    }
    if inverse {
        let s = 1.0 / (width * height) as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
    Ok(())
}

/// Real-valued row-major 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, FftError> {
        if data.len() != width * height {
            return Err(FftError::BufferSize { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Position of the largest value, first in raster order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Complex-valued row-major 2-D array, usually a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

/// Spectrum of a real patch.
pub fn dft2(p: &Patch) -> Result<ComplexPlane, FftError> {
    let mut data: Vec<Complex64> = p.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut data, p.width, p.height)?;
    Ok(ComplexPlane { width: p.width, height: p.height, data })
}

/// Real part of the inverse transform.
pub fn idft2(c: &ComplexPlane) -> Result<Patch, FftError> {
    let mut data = c.data.clone();
    ifft2(&mut data, c.width, c.height)?;
    Ok(Patch { width: c.width, height: c.height, data: data.into_iter().map(|v| v.re).collect() })
}

/// Row-major 2-D forward transform.
pub fn fft2(buf: &mut [Complex64], width: usize, height: usize) -> Result<(), FftError> {
    transform_2d(buf, width, height, false)
}

/// Row-major 2-D inverse transform with `1/(width*height)` scaling.
pub fn ifft2(buf: &mut [Complex64], width: usize, height: usize) -> Result<(), FftError> {
    transform_2d(buf, width, height, true)
}
