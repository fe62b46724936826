//! Deterministic synthetic videos.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{save_frames, VideoTensor};

/// Supersampling factor per axis for anti-aliased shapes.
const SUPERSAMPLE: usize = 4;

/// Parameters shared by all generators. Positions are pixel-centre units
/// (pixel `j` has centre `j`), velocities are pixels per frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    /// Blob standard deviation, disk radius, or half-width of the bar.
    pub size: f64,
    /// `(x, y)` of the moving object at frame 0.
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    /// Peak intensity of the objects.
    pub intensity: f64,
    /// Position of the static blob, if any.
    pub static_center: Option<(f64, f64)>,
    /// Horizontal oscillation amplitude (pixels) and period (frames).
    pub amplitude: f64,
    pub period: f64,
    /// Frame and horizontal displacement of a one-off positional jump.
    pub spike: Option<(usize, f64)>,
    pub background: f64,
    /// Amplitude of an additive smooth random texture; 0 disables it.
    pub texture: f64,
    pub seed: u64,
}

impl ToySpec {
    /// 64×64×16 scene: a blob moving right towards a stationary one.
    pub fn blob() -> Self {
        Self {
            height: 64,
            width: 64,
            frames: 16,
            size: 6.0,
            start: (16.0, 32.0),
            velocity: (1.0, 0.0),
            intensity: 0.8,
            static_center: Some((48.0, 32.0)),
            amplitude: 0.0,
            period: 8.0,
            spike: None,
            background: 0.0,
            texture: 0.0,
            seed: 0,
        }
    }

    /// White disk moving right on black.
    pub fn circle() -> Self {
        Self {
            size: 8.0,
            start: (20.0, 32.0),
            velocity: (1.0, 0.0),
            intensity: 1.0,
            static_center: None,
            ..Self::blob()
        }
    }

    /// Vertical bar oscillating horizontally, with one displaced frame.
    pub fn bar() -> Self {
        Self {
            size: 4.0,
            start: (32.0, 32.0),
            velocity: (0.0, 0.0),
            intensity: 1.0,
            static_center: None,
            amplitude: 1.5,
            period: 8.0,
            spike: Some((5, 12.0)),
            ..Self::blob()
        }
    }

    /// Smooth random texture drifting right.
    pub fn texture() -> Self {
        Self {
            velocity: (1.0, 0.0),
            intensity: 0.0,
            static_center: None,
            background: 0.5,
            texture: 0.35,
            seed: 7,
            ..Self::blob()
        }
    }

    fn center(&self, t: usize) -> (f64, f64) {
        let t = t as f64;
        (self.start.0 + self.velocity.0 * t, self.start.1 + self.velocity.1 * t)
    }

    fn bar_x(&self, t: usize) -> f64 {
        let mut x = self.start.0 + self.amplitude * (TAU * t as f64 / self.period).sin();
        if let Some((k, dx)) = self.spike {
            if k == t {
                x += dx;
            }
        }
        x
    }

    fn check(&self, inside: bool, what: &str) -> Result<()> {
        if inside {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "toy {what} leaves the {}×{} frame",
                self.height, self.width
            )))
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::Config("toy video must have nonzero extent".into()));
        }
        if self.size.is_nan() || self.size <= 0.0 {
            return Err(Error::Config(format!(
                "object size must be positive, got {}",
                self.size
            )));
        }
        Ok(())
    }

    fn centers_inside(&self, margin: f64) -> bool {
        (0..self.frames).all(|t| {
            let (x, y) = self.center(t);
            x - margin >= -0.5
                && x + margin <= self.width as f64 - 0.5
                && y - margin >= -0.5
                && y + margin <= self.height as f64 - 0.5
        })
    }
}

/// Smooth texture: a handful of random low-frequency gratings.
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(spec: &ToySpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let waves = (0..6)
            .map(|_| {
                let angle = rng.random_range(0.0..TAU);
                let freq = rng.random_range(1.0..3.0) / spec.width.max(spec.height) as f64;
                let phase = rng.random_range(0.0..TAU);
                let amp = rng.random_range(0.5..1.0);
                (freq * angle.cos(), freq * angle.sin(), phase, amp)
            })
            .collect::<Vec<_>>();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let total: f64 = self.waves.iter().map(|w| w.3).sum();
        self.waves
            .iter()
            .map(|&(fx, fy, p, a)| a * (TAU * (fx * x + fy * y) + p).sin())
            .sum::<f64>()
            / total
    }
}

fn render(spec: &ToySpec, object: impl Fn(usize, f64, f64) -> f64) -> Result<VideoTensor> {
    let texture = (spec.texture != 0.0).then(|| Texture::new(spec));
    VideoTensor::from_fn(spec.frames, spec.height, spec.width, 1, |t, y, x, _| {
        let mut v = spec.background + object(t, x as f64, y as f64);
        if let Some(tex) = &texture {
            let (dx, dy) = (spec.velocity.0 * t as f64, spec.velocity.1 * t as f64);
            v += spec.texture * tex.at(x as f64 - dx, y as f64 - dy);
        }
        v
    })
}

/// Fraction of the pixel centred at `(x, y)` covered by `inside`, by supersampling.
fn coverage(x: f64, y: f64, inside: impl Fn(f64, f64) -> bool) -> f64 {
    let n = SUPERSAMPLE;
    let mut hits = 0;
    for sy in 0..n {
        for sx in 0..n {
            let ox = (sx as f64 + 0.5) / n as f64 - 0.5;
            let oy = (sy as f64 + 0.5) / n as f64 - 0.5;
            if inside(x + ox, y + oy) {
                hits += 1;
            }
        }
    }
    hits as f64 / (n * n) as f64
}

/// One static and one translating isotropic Gaussian.
pub fn gaussian_blob_video(spec: &ToySpec) -> Result<VideoTensor> {
    spec.validate_common()?;
    spec.check(spec.centers_inside(0.0), "moving blob")?;
    if let Some((x, y)) = spec.static_center {
        let inside = (-0.5..=spec.width as f64 - 0.5).contains(&x) && (-0.5..=spec.height as f64 - 0.5).contains(&y);
        spec.check(inside, "static blob")?;
    }
    let two_var = 2.0 * spec.size * spec.size;
    let bump = |x: f64, y: f64, c: (f64, f64)| (-((x - c.0).powi(2) + (y - c.1).powi(2)) / two_var).exp();
    render(spec, |t, x, y| {
        let mut v = spec.intensity * bump(x, y, spec.center(t));
        if let Some(c) = spec.static_center {
            v += spec.intensity * bump(x, y, c);
        }
        v
    })
}

/// Anti-aliased filled disk translating at constant velocity.
pub fn moving_circle_video(spec: &ToySpec) -> Result<VideoTensor> {
    spec.validate_common()?;
    spec.check(spec.centers_inside(spec.size), "disk")?;
    let r2 = spec.size * spec.size;
    render(spec, |t, x, y| {
        let (cx, cy) = spec.center(t);
        if (x - cx).abs() > spec.size + 1.0 || (y - cy).abs() > spec.size + 1.0 {
            return 0.0;
        }
        spec.intensity * coverage(x, y, |px, py| (px - cx).powi(2) + (py - cy).powi(2) <= r2)
    })
}

/// Vertical bar spanning the middle half of the frame height, its horizontal
/// position oscillating sinusoidally, with an optional one-frame jump.
pub fn oscillating_bar_video(spec: &ToySpec) -> Result<VideoTensor> {
    spec.validate_common()?;
    let (lo, hi) = (spec.height as f64 * 0.25, spec.height as f64 * 0.75);
    let inside = (0..spec.frames).all(|t| {
        let x = spec.bar_x(t);
        x - spec.size >= -0.5 && x + spec.size <= spec.width as f64 - 0.5
    });
    spec.check(inside, "bar")?;
    render(spec, |t, x, y| {
        let bx = spec.bar_x(t);
        if (x - bx).abs() > spec.size + 1.0 {
            return 0.0;
        }
        spec.intensity * coverage(x, y, |px, py| (px - bx).abs() <= spec.size && py >= lo && py < hi)
    })
}

/// Background plus drifting texture (the texture is translated by `velocity` per frame).
pub fn texture_video(spec: &ToySpec) -> Result<VideoTensor> {
    spec.validate_common()?;
    render(spec, |_, _, _| 0.0)
}

/// Writes a generated video as a PNG frame directory.
pub fn write_toy(video: &VideoTensor, dir: &Path) -> Result<()> {
    save_frames(video, dir)
}
