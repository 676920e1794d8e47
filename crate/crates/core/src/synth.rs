//! Synthetic test scenes with known ground truth: a smooth static
//! background, one square moving diagonally (bouncing off the borders) and
//! optional Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::BackgroundFrame;
use crate::error::{Error, Result};
use crate::mrf::ForegroundMask;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    /// Side of the moving square, in pixels.
    pub square: usize,
    /// Distance travelled per frame, in pixels, along the diagonal.
    pub speed: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub square_color: [f64; 3],
    /// When false the square is omitted and every frame shows the background.
    pub moving_object: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            frames: 60,
            square: 24,
            speed: 2.0,
            noise_sigma: 0.02,
            seed: 7,
            square_color: [0.95, 0.92, 0.88],
            moving_object: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::invalid("scene dimensions must be positive"));
        }
        if self.moving_object && (self.square == 0 || self.square > self.height.min(self.width)) {
            return Err(Error::invalid(format!(
                "square of side {} does not fit a {}x{} frame",
                self.square, self.height, self.width
            )));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid("speed must be non-negative"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }

    /// Top-left corner `(row, col)` of the square in frame `t`.
    pub fn square_origin(&self, t: usize) -> (usize, usize) {
        let travel = self.speed * t as f64 / std::f64::consts::SQRT_2;
        (
            bounce(travel, self.height - self.square),
            bounce(travel, self.width - self.square),
        )
    }
}

/// Position after travelling `s` along a segment `[0, span]` with
/// reflection at both ends.
fn bounce(s: f64, span: usize) -> usize {
    if span == 0 {
        return 0;
    }
    let period = 2.0 * span as f64;
    let phase = s.rem_euclid(period);
    let pos = if phase <= span as f64 {
        phase
    } else {
        period - phase
    };
    (pos.round() as usize).min(span)
}

/// Smooth background in roughly `[0.13, 0.37]`, distinct per channel.
pub fn background_value(row: usize, col: usize, channel: usize) -> f64 {
    use std::f64::consts::TAU;
    let c = channel as f64;
    0.25 + 0.12 * (TAU * col as f64 / 53.0 + c).sin() * (TAU * row as f64 / 41.0 + 0.5 * c).cos()
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    /// `(height, width, 3, frames)`, values in `[0, 1]`.
    pub frames: DenseTensor,
    pub background: BackgroundFrame,
    /// Foreground truth per frame.
    pub masks: Vec<ForegroundMask>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthScene> {
    cfg.validate()?;
    let (h, w, n) = (cfg.height, cfg.width, cfg.frames);
    let background = DenseTensor::from_fn(vec![h, w, 3], |i| background_value(i[0], i[1], i[2]))?;
    let masks: Vec<ForegroundMask> = (0..n)
        .map(|t| {
            if !cfg.moving_object {
                return ForegroundMask::empty(h, w);
            }
            let (r0, c0) = cfg.square_origin(t);
            ForegroundMask::from_fn(h, w, |r, c| {
                (r0..r0 + cfg.square).contains(&r) && (c0..c0 + cfg.square).contains(&c)
            })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = vec![0.0; h * w * 3 * n];
    // Noise is drawn frame by frame in row-major pixel order.
    for (t, mask) in masks.iter().enumerate() {
        for r in 0..h {
            for c in 0..w {
                let covered = mask.get(r, c);
                for ch in 0..3 {
                    let clean = if covered {
                        cfg.square_color[ch]
                    } else {
                        background.get(&[r, c, ch])
                    };
                    let v = if cfg.noise_sigma > 0.0 {
                        (clean + normal.sample(&mut rng)).clamp(0.0, 1.0)
                    } else {
                        clean
                    };
                    data[((r * w + c) * 3 + ch) * n + t] = v;
                }
            }
        }
    }
    Ok(SynthScene {
        frames: DenseTensor::new(vec![h, w, 3, n], data)?,
        background: BackgroundFrame::new(background)?,
        masks,
    })
}

/// Largest fraction of frames in which any single pixel is covered.
pub fn max_occlusion_fraction(masks: &[ForegroundMask]) -> f64 {
    let Some(first) = masks.first() else {
        return 0.0;
    };
    let mut counts = vec![0usize; first.labels().len()];
    for m in masks {
        for (k, &on) in m.labels().iter().enumerate() {
            counts[k] += usize::from(on);
        }
    }
    counts.into_iter().max().unwrap_or(0) as f64 / masks.len() as f64
}
