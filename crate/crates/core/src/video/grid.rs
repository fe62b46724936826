//! Decomposition of a video into spatial patches × temporal groups, and the
//! inverse reassembly with optional overlapping-window blending.

use serde::{Deserialize, Serialize};

use super::tensor::VideoTensor;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MIN_PATCH: usize = 8;

/// Pixel-centre coordinate of index `j` in a window of `p` pixels, in `[−1, 1]`.
pub fn normalized_coord(j: usize, p: usize) -> f64 {
    (2.0 * j as f64 + 1.0 - p as f64) / p as f64
}

/// Normalized time of frame `k` in a group of `len` frames.
pub fn gop_time(k: usize, len: usize) -> f64 {
    if len <= 1 {
        0.0
    } else {
        k as f64 / (len - 1) as f64
    }
}

/// `[P² × 2]` coordinates of a `P × P` window, row-major, columns `(x, y)`.
pub fn patch_coords(p: usize) -> Tensor {
    let mut data = Vec::with_capacity(p * p * 2);
    for y in 0..p {
        for x in 0..p {
            data.push(normalized_coord(x, p));
            data.push(normalized_coord(y, p));
        }
    }
    Tensor::new(vec![p * p, 2], data).expect("shape matches buffer")
}

/// Blending weight of local position `i` along one axis of a window of `p`
/// pixels overlapping its neighbours by `overlap` pixels.
pub fn ramp_weight(i: usize, p: usize, overlap: usize, has_prev: bool, has_next: bool) -> f64 {
    let o = overlap as f64;
    if has_prev && i < overlap {
        (i as f64 + 0.5) / o
    } else if has_next && i + overlap >= p {
        (p as f64 - i as f64 - 0.5) / o
    } else {
        1.0
    }
}

fn windows_along(extent: usize, patch: usize, stride: usize) -> usize {
    if extent <= patch {
        1
    } else {
        (extent - patch).div_ceil(stride) + 1
    }
}

/// Mirror an index into `[0, n)` without repeating the edge sample.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch: usize,
    pub gop: usize,
    pub overlap: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub padded_height: usize,
    pub padded_width: usize,
    pub rows: usize,
    pub cols: usize,
    pub gops: usize,
}

impl PatchGrid {
    pub fn new(frames: usize, height: usize, width: usize, patch: usize, gop: usize, overlap: usize) -> Result<Self> {
        if patch < MIN_PATCH {
            return Err(Error::Config(format!(
                "patch size must be at least {MIN_PATCH}, got {patch}"
            )));
        }
        if gop == 0 {
            return Err(Error::Config("GOP length must be at least 1".into()));
        }
        if 2 * overlap > patch {
            return Err(Error::Config(format!(
                "overlap {overlap} exceeds half the patch size {patch}"
            )));
        }
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::Config("empty video".into()));
        }
        let stride = patch - overlap;
        let rows = windows_along(height, patch, stride);
        let cols = windows_along(width, patch, stride);
        let padded_height = stride * (rows - 1) + patch;
        let padded_width = stride * (cols - 1) + patch;
        for (extent, padded) in [(height, padded_height), (width, padded_width)] {
            if padded > 2 * extent - 1 && padded > extent {
                return Err(Error::Config(format!(
                    "patch {patch} exceeds what reflect padding of a {extent}-pixel extent can cover"
                )));
            }
        }
        Ok(Self {
            patch,
            gop,
            overlap,
            frames,
            height,
            width,
            padded_height,
            padded_width,
            rows,
            cols,
            gops: frames.div_ceil(gop),
        })
    }

    pub fn for_video(video: &VideoTensor, patch: usize, gop: usize, overlap: usize) -> Result<Self> {
        Self::new(video.frames(), video.height(), video.width(), patch, gop, overlap)
    }

    pub fn stride(&self) -> usize {
        self.patch - self.overlap
    }

    pub fn spatial_patches(&self) -> usize {
        self.rows * self.cols
    }

    pub fn block_count(&self) -> usize {
        self.spatial_patches() * self.gops
    }

    /// Block index in partition order: GOP-major, then row-major patches.
    pub fn block_index(&self, gop: usize, patch_index: usize) -> usize {
        gop * self.spatial_patches() + patch_index
    }

    /// First frame and frame count of GOP `g`.
    pub fn gop_span(&self, g: usize) -> (usize, usize) {
        let start = g * self.gop;
        (start, self.gop.min(self.frames - start))
    }

    pub fn gop_of_frame(&self, t: usize) -> usize {
        t / self.gop
    }

    pub fn patch_origin(&self, patch_index: usize) -> (usize, usize) {
        let (r, c) = (patch_index / self.cols, patch_index % self.cols);
        (r * self.stride(), c * self.stride())
    }

    /// Blending weight of local pixel `(ly, lx)` in spatial patch `patch_index`.
    pub fn pixel_weight(&self, patch_index: usize, ly: usize, lx: usize) -> f64 {
        if self.overlap == 0 {
            return 1.0;
        }
        let (r, c) = (patch_index / self.cols, patch_index % self.cols);
        ramp_weight(ly, self.patch, self.overlap, r > 0, r + 1 < self.rows)
            * ramp_weight(lx, self.patch, self.overlap, c > 0, c + 1 < self.cols)
    }

    /// Spatial patches containing padded pixel `(y, x)` with their local coordinates.
    pub fn covering_patches(&self, y: usize, x: usize) -> Vec<(usize, usize, usize)> {
        let s = self.stride();
        let along = |v: usize, n: usize| -> Vec<(usize, usize)> {
            (0..n)
                .filter_map(|k| {
                    let start = k * s;
                    (v >= start && v < start + self.patch).then(|| (k, v - start))
                })
                .collect()
        };
        let mut out = Vec::new();
        for (r, ly) in along(y, self.rows) {
            for (c, lx) in along(x, self.cols) {
                out.push((r * self.cols + c, ly, lx));
            }
        }
        out
    }
}

/// One patch × one GOP of a partitioned video.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub index: usize,
    pub patch_index: usize,
    pub gop: usize,
    pub y0: usize,
    pub x0: usize,
    pub t0: usize,
    pub frames: usize,
    pub patch: usize,
    pub channels: usize,
    /// `[frames × P² × C]`
    pub values: Vec<f64>,
    /// `[frames × P²]`
    pub observed: Vec<bool>,
    /// `[P²]`, false for reflect-padding pixels.
    pub inside: Vec<bool>,
}

impl Block {
    pub fn pixels(&self) -> usize {
        self.patch * self.patch
    }

    pub fn frame_values(&self, k: usize) -> &[f64] {
        let n = self.pixels() * self.channels;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.frames).map(|k| gop_time(k, self.frames)).collect()
    }
}

/// Splits `video` into blocks in partition order.
pub fn partition(video: &VideoTensor, patch: usize, gop: usize, overlap: usize) -> Result<(PatchGrid, Vec<Block>)> {
    let grid = PatchGrid::for_video(video, patch, gop, overlap)?;
    let blocks = partition_with(video, &grid)?;
    Ok((grid, blocks))
}

pub fn partition_with(video: &VideoTensor, grid: &PatchGrid) -> Result<Vec<Block>> {
    let (frames, height, width, channels) = video.dims();
    if (frames, height, width) != (grid.frames, grid.height, grid.width) {
        return Err(Error::dim("partition", "grid was built for a different video"));
    }
    let p = grid.patch;
    let mut blocks = Vec::with_capacity(grid.block_count());
    for g in 0..grid.gops {
        let (t0, len) = grid.gop_span(g);
        for pi in 0..grid.spatial_patches() {
            let (y0, x0) = grid.patch_origin(pi);
            let mut values = Vec::with_capacity(len * p * p * channels);
            let mut observed = Vec::with_capacity(len * p * p);
            let mut inside = Vec::with_capacity(p * p);
            for k in 0..len {
                for ly in 0..p {
                    let (py, sy) = (y0 + ly, reflect(y0 + ly, height));
                    for lx in 0..p {
                        let (px, sx) = (x0 + lx, reflect(x0 + lx, width));
                        for c in 0..channels {
                            values.push(video.get(t0 + k, sy, sx, c));
                        }
                        observed.push(video.observed(t0 + k, sy, sx));
                        if k == 0 {
                            inside.push(py < height && px < width);
                        }
                    }
                }
            }
            blocks.push(Block {
                index: grid.block_index(g, pi),
                patch_index: pi,
                gop: g,
                y0,
                x0,
                t0,
                frames: len,
                patch: p,
                channels,
                values,
                observed,
                inside,
            });
        }
    }
    Ok(blocks)
}

/// Reassembles per-block predictions (`[frames × P² × C]`, indexed by block
/// index) into a video, blending overlaps and cropping the padding.
pub fn assemble(grid: &PatchGrid, channels: usize, predictions: &[Option<&[f64]>]) -> Result<VideoTensor> {
    let (h, w) = (grid.height, grid.width);
    let p = grid.patch;
    let mut acc = vec![0.0; grid.frames * h * w * channels];
    let mut weight = vec![0.0; grid.frames * h * w];
    for g in 0..grid.gops {
        let (t0, len) = grid.gop_span(g);
        for pi in 0..grid.spatial_patches() {
            let Some(Some(pred)) = predictions.get(grid.block_index(g, pi)) else {
                continue;
            };
            if pred.len() != len * p * p * channels {
                return Err(Error::Assembly(format!(
                    "block {} has {} values, expected {}",
                    grid.block_index(g, pi),
                    pred.len(),
                    len * p * p * channels
                )));
            }
            let (y0, x0) = grid.patch_origin(pi);
            for k in 0..len {
                for ly in 0..p {
                    let y = y0 + ly;
                    if y >= h {
                        break;
                    }
                    for lx in 0..p {
                        let x = x0 + lx;
                        if x >= w {
                            break;
                        }
                        let wgt = grid.pixel_weight(pi, ly, lx);
                        let pix = ((t0 + k) * h + y) * w + x;
                        weight[pix] += wgt;
                        let src = ((k * p + ly) * p + lx) * channels;
                        for c in 0..channels {
                            acc[pix * channels + c] += wgt * pred[src + c];
                        }
                    }
                }
            }
        }
    }
    if let Some(pix) = weight.iter().position(|&w| w <= 0.0) {
        let (t, rest) = (pix / (h * w), pix % (h * w));
        return Err(Error::Assembly(format!(
            "pixel (t={t}, y={}, x={}) is not covered by any block",
            rest / w,
            rest % w
        )));
    }
    for (pix, &wt) in weight.iter().enumerate() {
        for c in 0..channels {
            let v = &mut acc[pix * channels + c];
            *v = (*v / wt).clamp(0.0, 1.0);
        }
    }
    VideoTensor::new(grid.frames, h, w, channels, acc)
}
