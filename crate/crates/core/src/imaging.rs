//! Image loading, quad rectification and canonicalization.
//!
//! Rectification maps an annotated corner quad onto an axis-aligned
//! rectangle through a 4-point homography and resamples with bilinear
//! interpolation. Canonicalization converts to grayscale (BT.601 luma
//! weights 0.299/0.587/0.114), resizes to a fixed size and scales
//! intensities to `[0, 1]` — the representation all pairwise distances
//! operate on.
//!
//! Everything here is a pure function over owned buffers, so batches can be
//! processed concurrently without coordination.

use std::path::Path;

use image::RgbImage;

use crate::manifest::QuadAnnotation;
use crate::{Error, Result};

/// Default canonical height (pixels).
pub const DEFAULT_CANONICAL_HEIGHT: u32 = 48;
/// Default canonical width (pixels).
pub const DEFAULT_CANONICAL_WIDTH: u32 = 96;

/// A fixed-size grayscale image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f32>,
}

impl CanonicalImage {
    /// Build from raw pixels, enforcing the shape and range invariants.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != (width as usize) * (height as usize) {
            return Err(Error::Config(format!(
                "pixel buffer of length {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::Config("pixel intensity outside [0, 1]".into()));
        }
        Ok(CanonicalImage {
            width,
            height,
            pixels,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Load an image (PNG or JPEG) from disk as RGB.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(img.to_rgb8())
}

/// A planar projective transform, row-major 3x3.
#[derive(Debug, Clone, Copy)]
pub struct Homography {
    m: [f64; 9],
}

impl Homography {
    /// Solve the homography mapping each `src[i]` to `dst[i]`.
    ///
    /// Uses the standard 8-unknown linear system with `h33 = 1`, solved by
    /// Gaussian elimination with partial pivoting. Degenerate point sets
    /// (collinear corners, repeated points) make the system singular.
    pub fn from_points(src: [(f64, f64); 4], dst: [(f64, f64); 4]) -> Result<Self> {
        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let (x, y) = src[i];
            let (u, v) = dst[i];
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        // Forward elimination with partial pivoting on the augmented system.
        for col in 0..8 {
            let pivot_row = (col..8)
                .max_by(|&r1, &r2| {
                    a[r1][col]
                        .abs()
                        .partial_cmp(&a[r2][col].abs())
                        .expect("finite pivots")
                })
                .expect("non-empty range");
            if a[pivot_row][col].abs() < 1e-10 {
                return Err(Error::Rectify("singular homography system".into()));
            }
            a.swap(col, pivot_row);
            for row in (col + 1)..8 {
                let factor = a[row][col] / a[col][col];
                for k in col..9 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        let mut h = [0.0f64; 8];
        for row in (0..8).rev() {
            let mut acc = a[row][8];
            for k in (row + 1)..8 {
                acc -= a[row][k] * h[k];
            }
            h[row] = acc / a[row][row];
        }
        Ok(Homography {
            m: [h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0],
        })
    }

    /// Apply the transform to a point.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let d = m[6] * x + m[7] * y + m[8];
        ((m[0] * x + m[1] * y + m[2]) / d, (m[3] * x + m[4] * y + m[5]) / d)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear sample with clamp-to-edge addressing.
fn sample_rgb(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let tx = x - x0;
    let ty = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = lerp(p00[c] as f64, p10[c] as f64, tx);
        let bottom = lerp(p01[c] as f64, p11[c] as f64, tx);
        out[c] = lerp(top, bottom, ty);
    }
    out
}

/// Warp `img` into an `out_w`x`out_h` raster, sampling the source at
/// `out_to_src(x, y)` for every output pixel.
pub fn warp_rgb(img: &RgbImage, out_to_src: &Homography, out_w: u32, out_h: u32) -> RgbImage {
    let mut out = RgbImage::new(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = out_to_src.apply(x as f64, y as f64);
            let rgb = sample_rgb(img, sx, sy);
            let px = image::Rgb([
                rgb[0].round().clamp(0.0, 255.0) as u8,
                rgb[1].round().clamp(0.0, 255.0) as u8,
                rgb[2].round().clamp(0.0, 255.0) as u8,
            ]);
            out.put_pixel(x, y, px);
        }
    }
    out
}

fn collinear(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    cross.abs() < 1e-9
}

/// Rectify the quad region of `img` into an axis-aligned `out_w`x`out_h`
/// raster. The quad corners map to the output corners in order (top-left,
/// top-right, bottom-right, bottom-left).
pub fn rectify(
    img: &RgbImage,
    quad: &QuadAnnotation,
    out_w: u32,
    out_h: u32,
) -> Result<RgbImage> {
    if out_w < 8 || out_h < 8 {
        return Err(Error::Rectify(format!(
            "output size {}x{} below the 8px minimum",
            out_w, out_h
        )));
    }
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::EmptyImage);
    }
    if quad.area() < 1.0 {
        return Err(Error::Rectify("quad area below 1 px^2".into()));
    }
    let q: Vec<(f64, f64)> = quad.points.iter().map(|p| (p.x, p.y)).collect();
    for i in 0..4 {
        if collinear(q[i], q[(i + 1) % 4], q[(i + 2) % 4]) {
            return Err(Error::Rectify("collinear corners".into()));
        }
    }
    let rect = [
        (0.0, 0.0),
        ((out_w - 1) as f64, 0.0),
        ((out_w - 1) as f64, (out_h - 1) as f64),
        (0.0, (out_h - 1) as f64),
    ];
    let h = Homography::from_points(rect, [q[0], q[1], q[2], q[3]])?;
    Ok(warp_rgb(img, &h, out_w, out_h))
}

/// Exact integer-valued BT.601 luma in `[0, 255]`.
///
/// Products and sums stay integer-valued in f64, so equal-channel pixels map
/// to exactly their own value and pure white maps to exactly 255.
fn luma(px: &image::Rgb<u8>) -> f64 {
    (299.0 * px.0[0] as f64 + 587.0 * px.0[1] as f64 + 114.0 * px.0[2] as f64) / 1000.0
}

fn sample_gray(gray: &[f64], w: u32, h: u32, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor();
    let y0 = y.floor();
    let tx = x - x0;
    let ty = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(w as usize - 1);
    let y1 = (y0 + 1).min(h as usize - 1);
    let w = w as usize;
    let top = lerp(gray[y0 * w + x0], gray[y0 * w + x1], tx);
    let bottom = lerp(gray[y1 * w + x0], gray[y1 * w + x1], tx);
    lerp(top, bottom, ty)
}

/// Convert to grayscale, resize to `target_w`x`target_h` with bilinear
/// interpolation, and scale intensities to `[0, 1]`.
///
/// Constant images come out exactly constant: grayscale conversion is
/// per-pixel and the interpolation is in `a + t*(b - a)` form.
pub fn canonicalize(img: &RgbImage, target_w: u32, target_h: u32) -> Result<CanonicalImage> {
    let (src_w, src_h) = img.dimensions();
    if src_w == 0 || src_h == 0 || target_w == 0 || target_h == 0 {
        return Err(Error::EmptyImage);
    }
    let gray: Vec<f64> = img.pixels().map(luma).collect();
    let scale_x = src_w as f64 / target_w as f64;
    let scale_y = src_h as f64 / target_h as f64;
    let mut pixels = Vec::with_capacity((target_w * target_h) as usize);
    for y in 0..target_h {
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        for x in 0..target_w {
            let sx = (x as f64 + 0.5) * scale_x - 0.5;
            let v = sample_gray(&gray, src_w, src_h, sx, sy) / 255.0;
            pixels.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    CanonicalImage::from_pixels(target_w, target_h, pixels)
}
