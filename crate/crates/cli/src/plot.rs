//! Offset-versus-frame line chart.

use hexwatch::imgproc::Frame;

const W: u32 = 800;
const H: u32 = 400;
const MARGIN: u32 = 20;
const DX_COLOR: [u8; 3] = [220, 40, 40];
const DY_COLOR: [u8; 3] = [40, 80, 220];
const AXIS: [u8; 3] = [0, 0, 0];
const BAND: [u8; 3] = [160, 160, 160];

/// Plot `dx` (red) and `dy` (blue) against frame on a fixed ±320 px scale,
/// with the zero line in black and the ±`band` deadband in grey.
pub fn offset_chart(samples: &[(u64, Option<f64>, Option<f64>)], band: f64) -> Frame {
    let mut f = Frame::filled(W, H, 0, [255, 255, 255]).expect("fixed chart size");
    let n = samples.last().map_or(1, |s| s.0.max(1)) as f64;
    let sx = |frame: u64| MARGIN as f64 + frame as f64 / n * f64::from(W - 2 * MARGIN);
    let sy = |v: f64| f64::from(H) / 2.0 - v.clamp(-320.0, 320.0) / 320.0 * f64::from(H / 2 - MARGIN);
    hline(&mut f, sy(0.0), AXIS);
    hline(&mut f, sy(band), BAND);
    hline(&mut f, sy(-band), BAND);
    for x in [MARGIN, W - MARGIN] {
        for y in MARGIN..H - MARGIN {
            f.put(x, y, AXIS);
        }
    }
    for (pick, color) in [(1usize, DX_COLOR), (2, DY_COLOR)] {
        let pts: Vec<Option<(f64, f64)>> = samples
            .iter()
            .map(|s| {
                let v = if pick == 1 { s.1 } else { s.2 };
                v.map(|v| (sx(s.0), sy(v)))
            })
            .collect();
        for w in pts.windows(2) {
            if let (Some(a), Some(b)) = (w[0], w[1]) {
                line(&mut f, a, b, color);
            }
        }
    }
    f
}

fn hline(f: &mut Frame, y: f64, c: [u8; 3]) {
    let y = y.round() as u32;
    if y < H {
        for x in MARGIN..W - MARGIN {
            f.put(x, y, c);
        }
    }
}

fn line(f: &mut Frame, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = (x0 + (x1 - x0) * t, y0 + (y1 - y0) * t);
        if x >= 0.0 && y >= 0.0 && x < f64::from(W) && y < f64::from(H) {
            f.put(x as u32, y as u32, c);
        }
    }
}
