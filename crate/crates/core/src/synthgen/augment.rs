//! Randomized plate augmentation.
//!
//! Four transforms run in a fixed order — perspective warp, shadow, HSV
//! perturbation, Gaussian noise — each with parameters drawn from the
//! configured ranges. The fixed order plus the seeded generator make the
//! output a pure function of (image, seed, config). The same pipeline is
//! applied to synthetic renders and to real training crops.

use image::RgbImage;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::imaging::Homography;
use crate::rng::SeededRng;
use crate::{Error, Result};

/// A closed parameter interval; zero-width ranges pin the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        ParamRange { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        ParamRange { lo: v, hi: v }
    }

    fn check(&self, name: &str, min: f64, max: f64) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::Config(format!("{name}: invalid range")));
        }
        if self.lo < min || self.hi > max {
            return Err(Error::Config(format!(
                "{name}: range [{}, {}] outside [{min}, {max}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SeededRng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

/// Parameter ranges for the augmentation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Corner jitter as a fraction of each dimension, at most 0.15.
    pub perspective_jitter: ParamRange,
    /// Shadow opacity in [0, 0.6].
    pub shadow_opacity: ParamRange,
    /// Hue shift in turns, within [-0.05, 0.05].
    pub hue_delta: ParamRange,
    /// Additive saturation delta within [-0.3, 0.3].
    pub saturation_delta: ParamRange,
    /// Additive value (brightness) delta within [-0.3, 0.3].
    pub value_delta: ParamRange,
    /// Gaussian noise sigma in [0, 0.1] (intensity units).
    pub noise_sigma: ParamRange,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            perspective_jitter: ParamRange::new(0.0, 0.06),
            shadow_opacity: ParamRange::new(0.0, 0.4),
            hue_delta: ParamRange::new(-0.02, 0.02),
            saturation_delta: ParamRange::new(-0.15, 0.15),
            value_delta: ParamRange::new(-0.2, 0.2),
            noise_sigma: ParamRange::new(0.0, 0.05),
        }
    }
}

impl AugmentConfig {
    /// The identity configuration: every range pinned to its no-op value.
    pub fn identity() -> Self {
        AugmentConfig {
            perspective_jitter: ParamRange::fixed(0.0),
            shadow_opacity: ParamRange::fixed(0.0),
            hue_delta: ParamRange::fixed(0.0),
            saturation_delta: ParamRange::fixed(0.0),
            value_delta: ParamRange::fixed(0.0),
            noise_sigma: ParamRange::fixed(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.perspective_jitter
            .check("perspective_jitter", 0.0, 0.15)?;
        self.shadow_opacity.check("shadow_opacity", 0.0, 0.6)?;
        self.hue_delta.check("hue_delta", -0.05, 0.05)?;
        self.saturation_delta
            .check("saturation_delta", -0.3, 0.3)?;
        self.value_delta.check("value_delta", -0.3, 0.3)?;
        self.noise_sigma.check("noise_sigma", 0.0, 0.1)?;
        Ok(())
    }
}

/// The parameters one transform actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "lowercase")]
pub enum TransformParams {
    Perspective { corner_offsets: [[f64; 2]; 4] },
    Shadow { angle: f64, px: f64, py: f64, opacity: f64 },
    Hsv { hue: f64, saturation: f64, value: f64 },
    Noise { sigma: f64 },
}

/// Ordered record of the transforms applied to one image.
pub type TransformLog = Vec<TransformParams>;

/// Planar f32 RGB in [0, 1].
struct Planar {
    w: u32,
    h: u32,
    data: Vec<[f32; 3]>,
}

impl Planar {
    fn from_image(img: &RgbImage) -> Planar {
        Planar {
            w: img.width(),
            h: img.height(),
            data: img
                .pixels()
                .map(|p| {
                    [
                        p.0[0] as f32 / 255.0,
                        p.0[1] as f32 / 255.0,
                        p.0[2] as f32 / 255.0,
                    ]
                })
                .collect(),
        }
    }

    fn to_image(&self) -> RgbImage {
        let mut out = RgbImage::new(self.w, self.h);
        for (i, px) in self.data.iter().enumerate() {
            let x = (i as u32) % self.w;
            let y = (i as u32) / self.w;
            out.put_pixel(
                x,
                y,
                image::Rgb([
                    (px[0].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (px[1].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (px[2].clamp(0.0, 1.0) * 255.0).round() as u8,
                ]),
            );
        }
        out
    }

    fn sample(&self, x: f64, y: f64) -> [f32; 3] {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = (x - x0) as f32;
        let ty = (y - y0) as f32;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.w as usize - 1);
        let y1 = (y0 + 1).min(self.h as usize - 1);
        let w = self.w as usize;
        let lerp = |a: f32, b: f32, t: f32| a + t * (b - a);
        let mut out = [0.0f32; 3];
        for c in 0..3 {
            let top = lerp(self.data[y0 * w + x0][c], self.data[y0 * w + x1][c], tx);
            let bottom = lerp(self.data[y1 * w + x0][c], self.data[y1 * w + x1][c], tx);
            out[c] = lerp(top, bottom, ty);
        }
        out
    }
}

fn rgb_to_hsv(rgb: [f32; 3]) -> [f32; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

fn hsv_to_rgb(hsv: [f32; 3]) -> [f32; 3] {
    let [h, s, v] = hsv;
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6 % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Apply the augmentation chain. Returns the transformed image (same
/// dimensions, pixels clamped to range) and the parameters that were used.
pub fn augment(
    image: &RgbImage,
    rng: &mut SeededRng,
    config: &AugmentConfig,
) -> Result<(RgbImage, TransformLog)> {
    config.validate()?;
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::EmptyImage);
    }
    let w = image.width() as f64;
    let h = image.height() as f64;
    let mut planar = Planar::from_image(image);
    let mut log = TransformLog::new();

    // 1. Perspective.
    let jitter = config.perspective_jitter.sample(rng);
    let mut offsets = [[0.0f64; 2]; 4];
    if jitter > 0.0 {
        for corner in &mut offsets {
            corner[0] = rng.gen_range(-1.0..=1.0) * jitter * w;
            corner[1] = rng.gen_range(-1.0..=1.0) * jitter * h;
        }
    }
    if offsets.iter().any(|c| c[0] != 0.0 || c[1] != 0.0) {
        let src = [(0.0, 0.0), (w - 1.0, 0.0), (w - 1.0, h - 1.0), (0.0, h - 1.0)];
        let dst = [
            (offsets[0][0], offsets[0][1]),
            (w - 1.0 + offsets[1][0], offsets[1][1]),
            (w - 1.0 + offsets[2][0], h - 1.0 + offsets[2][1]),
            (offsets[3][0], h - 1.0 + offsets[3][1]),
        ];
        // Sample the source at the inverse map of each output pixel.
        let back = Homography::from_points(dst, src)
            .map_err(|_| Error::Config("perspective jitter collapsed the quad".into()))?;
        let mut warped = Vec::with_capacity(planar.data.len());
        for y in 0..planar.h {
            for x in 0..planar.w {
                let (sx, sy) = back.apply(x as f64, y as f64);
                warped.push(planar.sample(sx, sy));
            }
        }
        planar.data = warped;
    }
    log.push(TransformParams::Perspective {
        corner_offsets: offsets,
    });

    // 2. Shadow: darken one side of a random line.
    let opacity = config.shadow_opacity.sample(rng);
    let (angle, px, py) = if opacity > 0.0 {
        (
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..w),
            rng.gen_range(0.0..h),
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    if opacity > 0.0 {
        let (nx, ny) = (angle.cos(), angle.sin());
        let keep = (1.0 - opacity) as f32;
        for y in 0..planar.h {
            for x in 0..planar.w {
                let side = (x as f64 - px) * nx + (y as f64 - py) * ny;
                if side > 0.0 {
                    let px_ref = &mut planar.data[(y * planar.w + x) as usize];
                    for c in px_ref.iter_mut() {
                        *c *= keep;
                    }
                }
            }
        }
    }
    log.push(TransformParams::Shadow {
        angle,
        px,
        py,
        opacity,
    });

    // 3. HSV perturbation.
    let dh = config.hue_delta.sample(rng);
    let ds = config.saturation_delta.sample(rng);
    let dv = config.value_delta.sample(rng);
    if dh != 0.0 || ds != 0.0 || dv != 0.0 {
        for px_ref in &mut planar.data {
            let [hh, s, v] = rgb_to_hsv(*px_ref);
            let hsv = [
                (hh + dh as f32).rem_euclid(1.0),
                (s + ds as f32).clamp(0.0, 1.0),
                (v + dv as f32).clamp(0.0, 1.0),
            ];
            *px_ref = hsv_to_rgb(hsv);
        }
    }
    log.push(TransformParams::Hsv {
        hue: dh,
        saturation: ds,
        value: dv,
    });

    // 4. Gaussian noise.
    let sigma = config.noise_sigma.sample(rng);
    if sigma > 0.0 {
        let normal = Normal::new(0.0f64, sigma).expect("positive sigma");
        for px_ref in &mut planar.data {
            for c in px_ref.iter_mut() {
                *c = (*c + normal.sample(rng) as f32).clamp(0.0, 1.0);
            }
        }
    }
    log.push(TransformParams::Noise { sigma });

    Ok((planar.to_image(), log))
}
