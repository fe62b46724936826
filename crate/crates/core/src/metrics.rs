//! Fidelity metrics and the patch-seam diagnostic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{PatchGrid, VideoTensor};

pub const PSNR_CAP: f64 = 100.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim("metric", format!("{} vs {} values", a.len(), b.len())));
    }
    Ok(())
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a, b)?;
    if a.is_empty() {
        return Err(Error::dim("metric", "empty input"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10·log10(peak²/MSE)`, capped at 100 dB.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

/// PSNR over the pixels of the listed frames where `region` (if given, `[T × H × W]`) is true.
pub fn video_psnr(a: &VideoTensor, b: &VideoTensor, frames: &[usize], region: Option<&[bool]>) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dim("video_psnr", format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    let (_, h, w, c) = a.dims();
    let n = h * w;
    let (mut total, mut count) = (0.0, 0usize);
    for &t in frames {
        if t >= a.frames() {
            return Err(Error::Range(format!("frame {t} of {}", a.frames())));
        }
        let (fa, fb) = (a.frame(t), b.frame(t));
        for i in 0..n {
            if region.is_none_or(|r| r[t * n + i]) {
                for k in 0..c {
                    let d = fa[i * c + k] - fb[i * c + k];
                    total += d * d;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidMask);
    }
    Ok(psnr_from_mse(total / count as f64, 1.0))
}

fn gaussian_window() -> Vec<f64> {
    let half = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SIGMA * SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" Gaussian filtering of an `h × w` image.
fn blur(img: &[f64], h: usize, w: usize, win: &[f64]) -> Vec<f64> {
    let k = win.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| win[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| win[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of two single-channel images.
fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize) -> Result<(f64, f64)> {
    if h < WINDOW || w < WINDOW {
        return Err(Error::Range(format!(
            "{h}×{w} image is smaller than the {WINDOW}-pixel SSIM window"
        )));
    }
    let win = gaussian_window();
    let (c1, c2) = (K1 * K1, K2 * K2);
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = blur(a, h, w, &win);
    let mu_b = blur(b, h, w, &win);
    let aa = blur(&prod(a, a), h, w, &win);
    let bb = blur(&prod(b, b), h, w, &win);
    let ab = blur(&prod(a, b), h, w, &win);
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let cs_i = (2.0 * cov + c2) / (va + vb + c2);
        cs += cs_i;
        ssim += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs_i;
    }
    let n = mu_a.len() as f64;
    Ok((ssim / n, cs / n))
}

/// Mean structural similarity of two `h × w` single-channel images.
pub fn ssim(a: &[f64], b: &[f64], h: usize, w: usize) -> Result<f64> {
    check_len(a, b)?;
    if a.len() != h * w {
        return Err(Error::dim("ssim", format!("{} values for {h}×{w}", a.len())));
    }
    Ok(ssim_terms(a, b, h, w)?.0)
}

/// Largest scale count (≤ 5) whose coarsest level still fits the SSIM window.
pub fn ms_ssim_scales(h: usize, w: usize) -> usize {
    let side = h.min(w);
    (1..=MS_SSIM_WEIGHTS.len())
        .rev()
        .find(|&s| side >= WINDOW << (s - 1))
        .unwrap_or(0)
}

fn halve(img: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let s = img[2 * y * w + 2 * x]
                + img[2 * y * w + 2 * x + 1]
                + img[(2 * y + 1) * w + 2 * x]
                + img[(2 * y + 1) * w + 2 * x + 1];
            out.push(s / 4.0);
        }
    }
    (out, oh, ow)
}

/// Multi-scale SSIM with `scales` dyadic levels; the standard weights of the
/// used levels are renormalized to sum to one when fewer than five are used.
pub fn ms_ssim_with_scales(a: &[f64], b: &[f64], h: usize, w: usize, scales: usize) -> Result<f64> {
    check_len(a, b)?;
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() || h.min(w) < WINDOW << (scales - 1) {
        return Err(Error::Range(format!(
            "{h}×{w} image cannot support {scales} MS-SSIM scales"
        )));
    }
    let weights = &MS_SSIM_WEIGHTS[..scales];
    let total: f64 = weights.iter().sum();
    let (mut x, mut y, mut hh, mut ww) = (a.to_vec(), b.to_vec(), h, w);
    let mut value = 1.0;
    for (s, &wt) in weights.iter().enumerate() {
        let (full, cs) = ssim_terms(&x, &y, hh, ww)?;
        let term = if s + 1 == scales { full } else { cs };
        value *= term.max(0.0).powf(wt / total);
        if s + 1 < scales {
            let (nx, nh, nw) = halve(&x, hh, ww);
            let (ny, _, _) = halve(&y, hh, ww);
            (x, y, hh, ww) = (nx, ny, nh, nw);
        }
    }
    Ok(value)
}

/// Multi-scale SSIM using as many of the five standard scales as the image allows.
pub fn ms_ssim(a: &[f64], b: &[f64], h: usize, w: usize) -> Result<f64> {
    ms_ssim_with_scales(a, b, h, w, ms_ssim_scales(h, w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_index: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub frames: Vec<FrameMetrics>,
    /// Dyadic scales used for MS-SSIM (5 unless the frames are too small).
    pub ms_ssim_scales: usize,
    /// PSNR of the MSE pooled over all reported frames.
    pub psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_ms_ssim: f64,
}

/// Per-frame metrics of `output` against `reference` for the listed frames.
/// Colour frames are compared on luma for the SSIM family.
pub fn evaluate(output: &VideoTensor, reference: &VideoTensor, frames: &[usize]) -> Result<MetricReport> {
    if output.dims() != reference.dims() {
        return Err(Error::dim(
            "evaluate",
            format!("{:?} vs {:?}", output.dims(), reference.dims()),
        ));
    }
    if frames.is_empty() {
        return Err(Error::Contract("no frames to evaluate".into()));
    }
    let (h, w) = (output.height(), output.width());
    let scales = ms_ssim_scales(h, w);
    let mut rows = Vec::with_capacity(frames.len());
    for &t in frames {
        if t >= output.frames() {
            return Err(Error::Range(format!("frame {t} of {}", output.frames())));
        }
        let (la, lb) = (output.luma(t), reference.luma(t));
        let (s, ms) = if scales > 0 {
            (ssim(&la, &lb, h, w)?, ms_ssim_with_scales(&la, &lb, h, w, scales)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(FrameMetrics {
            frame_index: t,
            psnr_db: psnr(output.frame(t), reference.frame(t), 1.0)?,
            ssim: s,
            ms_ssim: ms,
        });
    }
    let n = rows.len() as f64;
    Ok(MetricReport {
        psnr_db: video_psnr(output, reference, frames, None)?,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        mean_ms_ssim: rows.iter().map(|r| r.ms_ssim).sum::<f64>() / n,
        ms_ssim_scales: scales,
        frames: rows,
    })
}

/// Six significant digits.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 5 - v.abs().log10().floor() as i32;
    if (0..=17).contains(&digits) {
        let s = format!("{v:.*}", digits as usize);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,psnr_db,ssim,ms_ssim\n");
        for r in &self.frames {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.frame_index,
                fmt6(r.psnr_db),
                fmt6(r.ssim),
                fmt6(r.ms_ssim)
            );
        }
        out
    }
}

/// Mean absolute first difference across patch-boundary pixel pairs minus the
/// same statistic over all other adjacent pairs.
pub fn seam_energy(video: &VideoTensor, grid: &PatchGrid) -> Result<f64> {
    let (t, h, w, c) = video.dims();
    if (t, h, w) != (grid.frames, grid.height, grid.width) {
        return Err(Error::dim("seam_energy", "grid was built for a different video"));
    }
    let edges = |extent: usize, count: usize| -> Vec<bool> {
        // edge[i] marks the pair (i − 1, i).
        let mut e = vec![false; extent + 1];
        for k in 0..count {
            let start = k * grid.stride();
            if k > 0 && start < extent {
                e[start] = true;
            }
            let end = start + grid.patch;
            if k + 1 < count && end < extent {
                e[end] = true;
            }
        }
        e
    };
    let col_edge = edges(w, grid.cols);
    let row_edge = edges(h, grid.rows);
    let (mut seam, mut ns, mut rest, mut nr) = (0.0, 0usize, 0.0, 0usize);
    let mut add = |boundary: bool, d: f64| {
        if boundary {
            seam += d;
            ns += 1;
        } else {
            rest += d;
            nr += 1;
        }
    };
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                for k in 0..c {
                    let v = video.get(f, y, x, k);
                    if x + 1 < w {
                        add(col_edge[x + 1], (video.get(f, y, x + 1, k) - v).abs());
                    }
                    if y + 1 < h {
                        add(row_edge[y + 1], (video.get(f, y + 1, x, k) - v).abs());
                    }
                }
            }
        }
    }
    if ns == 0 {
        return Err(Error::Contract("grid has no interior patch boundaries".into()));
    }
    let rest_mean = if nr == 0 { 0.0 } else { rest / nr as f64 };
    Ok(seam / ns as f64 - rest_mean)
}

/// Mean over the selected pixels (and channels) of the variance across frames.
/// `region` is `[H × W]`.
pub fn temporal_variance(video: &VideoTensor, region: Option<&[bool]>) -> Result<f64> {
    let (t, h, w, c) = video.dims();
    if region.is_some_and(|r| r.len() != h * w) {
        return Err(Error::dim("temporal_variance", "region must be H × W"));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..h * w {
        if region.is_some_and(|r| !r[i]) {
            continue;
        }
        for k in 0..c {
            let series = (0..t).map(|f| video.frame(f)[i * c + k]);
            let mean = series.clone().sum::<f64>() / t as f64;
            total += series.map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidMask);
    }
    Ok(total / count as f64)
}

/// `[H × W]` mask of pixels whose temporal variance exceeds `fraction` of the
/// largest per-pixel temporal variance.
pub fn moving_region(video: &VideoTensor, fraction: f64) -> Vec<bool> {
    let (t, h, w, c) = video.dims();
    let var: Vec<f64> = (0..h * w)
        .map(|i| {
            (0..c)
                .map(|k| {
                    let mean = (0..t).map(|f| video.frame(f)[i * c + k]).sum::<f64>() / t as f64;
                    (0..t).map(|f| (video.frame(f)[i * c + k] - mean).powi(2)).sum::<f64>() / t as f64
                })
                .sum::<f64>()
                / c as f64
        })
        .collect();
    let peak = var.iter().copied().fold(0.0, f64::max);
    var.iter().map(|&v| peak > 0.0 && v > fraction * peak).collect()
}
