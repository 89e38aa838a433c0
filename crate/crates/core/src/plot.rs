//! Minimal raster line charts: mean curves with an optional min–max band.
//!
//! There is no text rendering; axes carry tick marks at "nice" values, and
//! the value range is written into the accompanying CSV files instead.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 500;
const MARGIN: f64 = 40.0;

/// Distinct colours for overlaid curves.
pub const PALETTE: [[u8; 3]; 6] =
    [[31, 119, 180], [214, 39, 40], [44, 160, 44], [148, 103, 189], [255, 127, 14], [23, 190, 207]];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub mean: Vec<f64>,
    pub band: Option<(Vec<f64>, Vec<f64>)>,
    pub color: [u8; 3],
}

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn fit(series: &[Series]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut n = 1usize;
        for s in series {
            n = n.max(s.mean.len());
            let extra = s.band.iter().flat_map(|(a, b)| a.iter().chain(b));
            for &v in s.mean.iter().chain(extra).filter(|v| v.is_finite()) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let pad = 0.05 * (hi - lo);
        Self { x_max: (n.max(2) - 1) as f64, y_min: lo - pad, y_max: hi + pad }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + x / self.x_max * (f64::from(WIDTH) - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let t = (y - self.y_min) / (self.y_max - self.y_min);
        f64::from(HEIGHT) - MARGIN - t * (f64::from(HEIGHT) - 2.0 * MARGIN)
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn blend(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3], alpha: f64) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        let p = img.get_pixel_mut(x as u32, y as u32);
        for (ch, &ck) in p.0.iter_mut().zip(&c) {
            *ch = (f64::from(*ch) * (1.0 - alpha) + f64::from(ck) * alpha).round() as u8;
        }
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3], thick: i64) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let (x, y) = ((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64);
        for dx in -thick / 2..=thick / 2 {
            for dy in -thick / 2..=thick / 2 {
                put(img, x + dx, y + dy, c);
            }
        }
    }
}

/// Step between ticks giving roughly `target` intervals over `span`.
pub fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn axes(img: &mut RgbImage, f: &Frame) {
    let grid = [225, 225, 225];
    let axis = [40, 40, 40];
    let (left, right) = (MARGIN, f64::from(WIDTH) - MARGIN);
    let (top, bottom) = (MARGIN, f64::from(HEIGHT) - MARGIN);
    let ystep = nice_step(f.y_max - f.y_min, 6.0);
    let mut y = (f.y_min / ystep).ceil() * ystep;
    while y <= f.y_max {
        let py = f.py(y);
        line(img, (left, py), (right, py), grid, 1);
        line(img, (left - 6.0, py), (left, py), axis, 1);
        y += ystep;
    }
    let xstep = nice_step(f.x_max, 8.0).max(1.0);
    let mut x = 0.0;
    while x <= f.x_max {
        let px = f.px(x);
        line(img, (px, bottom), (px, bottom + 6.0), axis, 1);
        x += xstep;
    }
    if f.y_min < 0.0 && f.y_max > 0.0 {
        line(img, (left, f.py(0.0)), (right, f.py(0.0)), [160, 160, 160], 1);
    }
    line(img, (left, top), (left, bottom), axis, 1);
    line(img, (left, bottom), (right, bottom), axis, 1);
}

pub fn render(series: &[Series]) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let f = Frame::fit(series);
    axes(&mut img, &f);
    for s in series {
        if let Some((lo, hi)) = &s.band {
            let n = lo.len().min(hi.len());
            let (x_start, x_end) = (f.px(0.0).round() as i64, f.px((n.max(1) - 1) as f64).round() as i64);
            for px in x_start..=x_end {
                let t = (px as f64 - MARGIN) / (f64::from(WIDTH) - 2.0 * MARGIN) * f.x_max;
                let k = (t.floor().max(0.0) as usize).min(n.saturating_sub(1));
                let k1 = (k + 1).min(n.saturating_sub(1));
                let frac = (t - k as f64).clamp(0.0, 1.0);
                let lerp = |v: &[f64]| v[k] + frac * (v[k1] - v[k]);
                if n == 0 || !(lerp(lo).is_finite() && lerp(hi).is_finite()) {
                    continue;
                }
                let (a, b) = (f.py(lerp(hi)).round() as i64, f.py(lerp(lo)).round() as i64);
                for py in a.min(b)..=a.max(b) {
                    blend(&mut img, px, py, s.color, 0.25);
                }
            }
        }
    }
    for s in series {
        let pts: Vec<(f64, f64)> =
            s.mean.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(k, &v)| (f.px(k as f64), f.py(v))).collect();
        if pts.len() == 1 {
            line(&mut img, pts[0], pts[0], s.color, 3);
        }
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], s.color, 2);
        }
    }
    img
}

pub fn save(series: &[Series], path: &Path) -> Result<()> {
    render(series).save(path).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}
