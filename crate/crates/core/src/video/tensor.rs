use crate::error::{Error, Result};

/// Frames `[T × H × W × C]` with values in `[0, 1]`, plus an optional
/// observation mask `[T × H × W]` (`false` marks an unobserved pixel).
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTensor {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl VideoTensor {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Config(format!("videos have 1 or 3 channels, got {channels}")));
        }
        let n = frames * height * width * channels;
        if data.len() != n {
            return Err(Error::dim(
                "video",
                format!(
                    "{frames}×{height}×{width}×{channels} needs {n} values, got {}",
                    data.len()
                ),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
            mask: None,
        })
    }

    /// Builds a video from a per-pixel function `f(t, y, x, c)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        frames: usize,
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(frames * height * width * channels);
        for t in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    for c in 0..channels {
                        data.push(f(t, y, x, c).clamp(0.0, 1.0));
                    }
                }
            }
        }
        Self::new(frames, height, width, channels, data)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.frames * self.height * self.width {
            return Err(Error::dim(
                "video mask",
                format!(
                    "{} entries for {}×{}×{}",
                    mask.len(),
                    self.frames,
                    self.height,
                    self.width
                ),
            ));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.frames, self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[((t * self.height + y) * self.width + x) * self.channels + c]
    }

    pub fn observed(&self, t: usize, y: usize, x: usize) -> bool {
        self.mask
            .as_ref()
            .is_none_or(|m| m[(t * self.height + y) * self.width + x])
    }

    /// Copy of the listed frames, in order.
    pub fn select_frames(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.frames) {
            return Err(Error::Range(format!("frame {bad} of {}", self.frames)));
        }
        let mut data = Vec::with_capacity(indices.len() * self.frame_len());
        for &i in indices {
            data.extend_from_slice(self.frame(i));
        }
        let mask = self.mask.as_ref().map(|m| {
            let n = self.pixels_per_frame();
            indices
                .iter()
                .flat_map(|&i| m[i * n..(i + 1) * n].iter().copied())
                .collect()
        });
        Ok(Self {
            frames: indices.len(),
            mask,
            data,
            ..*self
        })
    }

    pub fn max_abs_diff(&self, other: &VideoTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Luma (or the single channel) of frame `t`, `[H × W]`.
    pub fn luma(&self, t: usize) -> Vec<f64> {
        let f = self.frame(t);
        if self.channels == 1 {
            return f.to_vec();
        }
        f.chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Spatial box-filter downsampling by an integer factor.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.height.is_multiple_of(factor) || !self.width.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "cannot downsample {}×{} by {factor}",
                self.height, self.width
            )));
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let norm = (factor * factor) as f64;
        Self::from_fn(self.frames, h, w, self.channels, |t, y, x, c| {
            let mut acc = 0.0;
            for dy in 0..factor {
                for dx in 0..factor {
                    acc += self.get(t, y * factor + dy, x * factor + dx, c);
                }
            }
            acc / norm
        })
    }
}
