//! Synthetic fluorescence images: Gaussian spots on the 45-degree camera
//! plane.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::error::{KzmError, Result};

/// Camera geometry. The camera's horizontal axis is the trap axis; the
/// vertical axis is the transverse projection at `view_angle` about it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub width_px: usize,
    pub height_px: usize,
    /// Pixel pitch, m.
    pub pixel_pitch: f64,
    /// Point-spread-function sigma, m.
    pub psf_sigma: f64,
    /// Rotation of the camera plane about the trap axis, rad.
    pub view_angle: f64,
}

impl ImageGeometry {
    /// Experiment camera: 2.2 um pixels, 1.5 um spots, 45 degrees.
    pub fn experiment_default() -> Self {
        Self {
            width_px: 128,
            height_px: 32,
            pixel_pitch: 2.2e-6,
            psf_sigma: 1.5e-6,
            view_angle: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Rendered intensity grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticImage {
    pub width_px: usize,
    pub height_px: usize,
    pub pixels: Vec<f64>,
    /// Set when an ion centre fell outside the field of view.
    pub truncated: bool,
}

impl SyntheticImage {
    pub fn total_intensity(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// 8-bit binary PGM (P5), intensities normalized to the peak.
    pub fn to_pgm(&self) -> Vec<u8> {
        let peak = self.pixels.iter().cloned().fold(0.0_f64, f64::max);
        let mut out = format!("P5\n{} {}\n255\n", self.width_px, self.height_px).into_bytes();
        for &p in &self.pixels {
            let v = if peak > 0.0 {
                (p / peak * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            out.push(v);
        }
        out
    }
}

/// Render a final state onto the camera plane. Each ion contributes a unit-
/// amplitude isotropic Gaussian spot; `shot_noise` scales intensities into
/// photon counts and draws per-pixel Poisson samples.
pub fn render_synthetic_image(
    state: &SimState,
    geometry: &ImageGeometry,
    shot_noise: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<SyntheticImage> {
    if geometry.width_px == 0 || geometry.height_px == 0 {
        return Err(KzmError::Config("image dimensions must be nonzero".into()));
    }
    if !(geometry.pixel_pitch > 0.0 && geometry.psf_sigma > 0.0) {
        return Err(KzmError::Config(
            "pixel pitch and PSF sigma must be positive".into(),
        ));
    }
    let (w, h) = (geometry.width_px, geometry.height_px);
    let (sin_a, cos_a) = geometry.view_angle.sin_cos();
    let mut pixels = vec![0.0_f64; w * h];
    let mut truncated = false;
    let half_w = 0.5 * (w as f64 - 1.0);
    let half_h = 0.5 * (h as f64 - 1.0);
    let inv_2s2 = 1.0 / (2.0 * geometry.psf_sigma * geometry.psf_sigma);
    let cut = (6.0 * geometry.psf_sigma / geometry.pixel_pitch).ceil() as isize;
    for p in &state.positions {
        let u = p[2];
        let v = p[0] * cos_a + p[1] * sin_a;
        let cu = u / geometry.pixel_pitch + half_w;
        let cv = v / geometry.pixel_pitch + half_h;
        if cu < 0.0 || cu > w as f64 - 1.0 || cv < 0.0 || cv > h as f64 - 1.0 {
            truncated = true;
        }
        let iu = cu.round() as isize;
        let iv = cv.round() as isize;
        for dy in -cut..=cut {
            let py = iv + dy;
            if py < 0 || py >= h as isize {
                continue;
            }
            for dx in -cut..=cut {
                let px = iu + dx;
                if px < 0 || px >= w as isize {
                    continue;
                }
                let du = (px as f64 - cu) * geometry.pixel_pitch;
                let dv = (py as f64 - cv) * geometry.pixel_pitch;
                pixels[py as usize * w + px as usize] +=
                    (-(du * du + dv * dv) * inv_2s2).exp();
            }
        }
    }
    if let Some((photons_per_unit, rng)) = shot_noise {
        for p in pixels.iter_mut() {
            let mean = *p * photons_per_unit;
            *p = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| KzmError::Config(format!("invalid shot-noise scale: {e}")))?
                    .sample(rng)
            } else {
                0.0
            };
        }
    }
    Ok(SyntheticImage {
        width_px: w,
        height_px: h,
        pixels,
        truncated,
    })
}
