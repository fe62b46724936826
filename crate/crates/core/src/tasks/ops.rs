//! The video tasks built on top of block fitting.

use std::fmt::Write as _;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::fit::{fit_video_with, train_indices, BiasKind, FitReport, ModelBundle, UnitModel};
use super::sample::render_grid;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::inr::{BlockModel, TableLookup, OFFSET_SCALE};
use crate::metrics::{evaluate, fmt6, video_psnr, MetricReport};
use crate::video::{gop_time, VideoTensor};

/// Output of a task run.
#[derive(Clone, Debug)]
pub struct TaskResult {
    pub output: VideoTensor,
    pub bundle: ModelBundle,
    /// Output frames used for fitting.
    pub train_frames: Vec<usize>,
    /// Output frames the metric table covers.
    pub eval_frames: Vec<usize>,
    pub metrics: MetricReport,
    /// PSNR of the output against the reference on the training frames.
    pub train_psnr_db: f64,
    /// PSNR of the degraded input (denoising only).
    pub input_psnr_db: Option<f64>,
    /// PSNR inside the unobserved region (inpainting only).
    pub region_psnr_db: Option<f64>,
    /// Mean-fill baseline PSNR inside the unobserved region (inpainting only).
    pub baseline_psnr_db: Option<f64>,
    pub loss_curves: Vec<Vec<f64>>,
    pub elapsed: Duration,
}

fn finish(
    report: FitReport,
    output: VideoTensor,
    reference: &VideoTensor,
    train_frames: Vec<usize>,
    eval_frames: Vec<usize>,
) -> Result<TaskResult> {
    let metrics = evaluate(&output, reference, &eval_frames)?;
    let train_psnr_db = video_psnr(&output, reference, &train_frames, None)?;
    Ok(TaskResult {
        output,
        bundle: report.bundle,
        train_frames,
        eval_frames,
        metrics,
        train_psnr_db,
        input_psnr_db: None,
        region_psnr_db: None,
        baseline_psnr_db: None,
        loss_curves: report.loss_curves,
        elapsed: report.elapsed,
    })
}

/// Plain fit of every frame, evaluated on every frame.
pub fn fit_task(video: &VideoTensor, config: &FitConfig) -> Result<TaskResult> {
    let cfg = FitConfig {
        stride: 1,
        ..config.clone()
    };
    let report = fit_video_with(video, &cfg, BiasKind::Hyper)?;
    let all: Vec<usize> = (0..video.frames()).collect();
    let output = report.reconstruction.clone();
    finish(report, output, &video.clone().without_mask(), all.clone(), all)
}

/// `(train, held-out)` frame indices for a temporal stride.
pub fn split_frames(frames: usize, stride: usize) -> (Vec<usize>, Vec<usize>) {
    (0..frames).partition(|f| f % stride == 0)
}

fn check_interp_split(frames: usize, config: &FitConfig, stride: usize) -> Result<()> {
    if stride < 2 {
        return Err(Error::Config(format!(
            "interpolation stride must be at least 2, got {stride}"
        )));
    }
    for t0 in (0..frames).step_by(config.gop) {
        let len = config.gop.min(frames - t0);
        let n = train_indices(t0, len, stride).len();
        if n < 2 {
            return Err(Error::Config(format!(
                "group of pictures at frame {t0} has {n} training frame(s) at stride {stride}; \
                 use a GOP length of at least {}",
                stride + 1
            )));
        }
    }
    Ok(())
}

fn held_out_fit(video: &VideoTensor, stride: usize, config: &FitConfig, kind: BiasKind) -> Result<TaskResult> {
    check_interp_split(video.frames(), config, stride)?;
    let cfg = FitConfig {
        stride,
        ..config.clone()
    };
    let report = fit_video_with(video, &cfg, kind)?;
    let (train, test) = split_frames(video.frames(), stride);
    let output = report.reconstruction.clone();
    finish(report, output, video, train, test)
}

/// Trains on frames `0, s, 2s, …` and evaluates at the held-out frames.
pub fn interpolate(video: &VideoTensor, stride: usize, config: &FitConfig) -> Result<TaskResult> {
    held_out_fit(video, stride, config, BiasKind::Hyper)
}

/// Per-frame lookup-table biases trained on kept frames, linearly interpolated at held-out ones.
pub fn linear_bias_baseline(video: &VideoTensor, stride: usize, config: &FitConfig) -> Result<TaskResult> {
    held_out_fit(video, stride, config, BiasKind::Table(TableLookup::Linear))
}

/// Free per-frame biases trained on every frame; only stored frames can be rendered.
pub fn oracle_baseline(video: &VideoTensor, config: &FitConfig) -> Result<TaskResult> {
    let cfg = FitConfig {
        stride: 1,
        ..config.clone()
    };
    let report = fit_video_with(video, &cfg, BiasKind::Table(TableLookup::Exact))?;
    let all: Vec<usize> = (0..video.frames()).collect();
    let output = report.reconstruction.clone();
    finish(report, output, video, all.clone(), all)
}

/// Box-downsamples `reference` by `k` and keeps every `temporal`-th frame.
pub fn superres_input(reference: &VideoTensor, k: usize, temporal: usize) -> Result<VideoTensor> {
    if temporal == 0 {
        return Err(Error::Config("temporal factor must be positive".into()));
    }
    let keep: Vec<usize> = (0..reference.frames()).step_by(temporal).collect();
    reference.select_frames(&keep)?.without_mask().downsample(k)
}

/// Fits the low-resolution video and renders it on the `k`× finer spatial and
/// `temporal`× finer time grid of `reference`.
pub fn superres(
    low: &VideoTensor,
    k: usize,
    temporal: usize,
    reference: &VideoTensor,
    config: &FitConfig,
) -> Result<TaskResult> {
    if k == 0 || temporal == 0 {
        return Err(Error::Config("upscaling factors must be positive".into()));
    }
    let expected = (
        low.frames() * temporal,
        low.height() * k,
        low.width() * k,
        low.channels(),
    );
    if reference.dims() != expected {
        return Err(Error::dim(
            "superres",
            format!("reference is {:?}, expected {expected:?}", reference.dims()),
        ));
    }
    let cfg = FitConfig {
        stride: 1,
        ..config.clone()
    };
    let report = fit_video_with(low, &cfg, BiasKind::Hyper)?;
    let times: Vec<f64> = (0..reference.frames()).map(|j| j as f64 / temporal as f64).collect();
    let output = render_grid(&report.bundle, reference.height(), reference.width(), &times)?;
    let train = (0..reference.frames()).step_by(temporal).collect();
    let all = (0..reference.frames()).collect();
    finish(report, output, reference, train, all)
}

/// Photon-limited sensor: Poisson shot noise plus Gaussian readout noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mean photon count at pixel value 1.
    pub alpha: f64,
    /// Readout noise std in photons.
    pub readout: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            readout: 5.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.readout >= 0.0 && self.readout.is_finite()) {
            return Err(Error::Config(format!(
                "noise model needs alpha > 0 and readout >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Noisy observations of `clean`, clamped below at 0 only.
pub fn photon_noise_values(clean: &[f64], model: NoiseModel, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let readout = Normal::new(0.0, model.readout).map_err(|e| Error::Config(e.to_string()))?;
    clean
        .iter()
        .map(|&v| {
            let lambda = v * model.alpha;
            let counts = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            let noise = if model.readout > 0.0 {
                readout.sample(&mut rng)
            } else {
                0.0
            };
            Ok(((counts + noise) / model.alpha).max(0.0))
        })
        .collect()
}

/// Noisy copy of a video; values above 1 are clipped so the result stays a valid frame stack.
pub fn synthesize_photon_noise(clean: &VideoTensor, model: NoiseModel, seed: u64) -> Result<VideoTensor> {
    let noisy = photon_noise_values(clean.data(), model, seed)?;
    let (t, h, w, c) = clean.dims();
    VideoTensor::new(t, h, w, c, noisy.into_iter().map(|v| v.min(1.0)).collect())
}

/// Fits the noisy frames; metrics are against `clean` when given.
pub fn denoise(noisy: &VideoTensor, clean: Option<&VideoTensor>, config: &FitConfig) -> Result<TaskResult> {
    let reference = clean.unwrap_or(noisy);
    if reference.dims() != noisy.dims() {
        return Err(Error::dim("denoise", "clean reference must match the noisy video"));
    }
    let mut result = fit_task(noisy, config)?;
    if clean.is_some() {
        let all = result.eval_frames.clone();
        result.metrics = evaluate(&result.output, reference, &all)?;
        result.train_psnr_db = result.metrics.psnr_db;
        result.input_psnr_db = Some(video_psnr(noisy, reference, &all, None)?);
    }
    Ok(result)
}

/// Box side used at a given resolution: 50 px at 1080 lines, at least 8.
pub fn mask_side(height: usize, width: usize) -> usize {
    let s = (50.0 * height.min(width) as f64 / 1080.0).round() as usize;
    s.max(8)
}

/// `[frames × H × W]` observation mask with five `s × s` holes: one at the
/// frame centre and one at each quadrant centre.
pub fn make_inpaint_masks(frames: usize, height: usize, width: usize, side: usize) -> Result<Vec<bool>> {
    if side == 0 {
        return Err(Error::Config("mask side must be positive".into()));
    }
    let mut frame = vec![true; height * width];
    for (qy, qx) in [(2, 2), (1, 1), (1, 3), (3, 1), (3, 3)] {
        let (cy, cx) = (qy * height / 4, qx * width / 4);
        let y0 = cy.checked_sub(side / 2);
        let x0 = cx.checked_sub(side / 2);
        let (Some(y0), Some(x0)) = (y0, x0) else {
            return Err(Error::Config(format!(
                "box of side {side} leaves a {height}×{width} frame"
            )));
        };
        if y0 + side > height || x0 + side > width {
            return Err(Error::Config(format!(
                "box of side {side} leaves a {height}×{width} frame"
            )));
        }
        for y in y0..y0 + side {
            frame[y * width + x0..y * width + x0 + side].fill(false);
        }
    }
    Ok(frame.repeat(frames))
}

/// Fills every unobserved pixel with its frame's mean observed value, per channel.
pub fn mean_fill(video: &VideoTensor, mask: &[bool]) -> Result<VideoTensor> {
    let (t, h, w, c) = video.dims();
    let n = h * w;
    if mask.len() != t * n {
        return Err(Error::dim("mean_fill", "mask does not match the video"));
    }
    let mut data = video.data().to_vec();
    for f in 0..t {
        let m = &mask[f * n..(f + 1) * n];
        let count = m.iter().filter(|&&o| o).count();
        for ch in 0..c {
            let sum: f64 = (0..n).filter(|&i| m[i]).map(|i| data[(f * n + i) * c + ch]).sum();
            let mean = if count > 0 { sum / count as f64 } else { 0.0 };
            for i in (0..n).filter(|&i| !m[i]) {
                data[(f * n + i) * c + ch] = mean;
            }
        }
    }
    VideoTensor::new(t, h, w, c, data)
}

/// Fits the observed pixels only and scores the holes against the full video.
pub fn inpaint(video: &VideoTensor, mask: &[bool], config: &FitConfig) -> Result<TaskResult> {
    let reference = video.clone().without_mask();
    let observed = reference.clone().with_mask(mask.to_vec())?;
    let mut result = fit_task(&observed, config)?;
    let holes: Vec<bool> = mask.iter().map(|&m| !m).collect();
    let all = result.eval_frames.clone();
    result.metrics = evaluate(&result.output, &reference, &all)?;
    result.train_psnr_db = video_psnr(&result.output, &reference, &all, Some(mask))?;
    result.region_psnr_db = Some(video_psnr(&result.output, &reference, &all, Some(&holes))?);
    let baseline = mean_fill(&reference, mask)?;
    result.baseline_psnr_db = Some(video_psnr(&baseline, &reference, &all, Some(&holes))?);
    Ok(result)
}

/// Componentwise sliding median, window truncated at the ends.
pub fn median_filter(series: &[f64], w: usize) -> Vec<f64> {
    let r = w / 2;
    (0..series.len())
        .map(|i| {
            let mut win: Vec<f64> = series[i.saturating_sub(r)..(i + r + 1).min(series.len())].to_vec();
            win.sort_by(f64::total_cmp);
            let m = win.len();
            if m % 2 == 1 {
                win[m / 2]
            } else {
                0.5 * (win[m / 2 - 1] + win[m / 2])
            }
        })
        .collect()
}

/// Training-frame times (normalized) of a group of pictures.
fn unit_train_times(bundle: &ModelBundle, gop: usize) -> Vec<f64> {
    let (t0, len) = bundle.grid.gop_span(gop);
    train_indices(t0, len, bundle.config.stride)
        .into_iter()
        .map(|k| gop_time(k, len))
        .collect()
}

/// Offsets of every modulated layer at `times` for patch row `row`: `[layer][time][component]`.
fn trajectory(model: &BlockModel, row: usize, times: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let per_time: Vec<Vec<Vec<f64>>> = times.iter().map(|&t| model.offsets_at(row, t)).collect::<Result<_>>()?;
    let layers = per_time.first().map_or(0, Vec::len);
    Ok((0..layers)
        .map(|l| per_time.iter().map(|v| v[l].clone()).collect())
        .collect())
}

/// Replaces each unit's bias source by a nearest-time table holding the
/// median-filtered offsets at its training times.
pub fn filter_bias_trajectories(bundle: &ModelBundle, w: usize) -> Result<ModelBundle> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "median window must be odd and positive, got {w}"
        )));
    }
    for u in &bundle.units {
        let n = unit_train_times(bundle, u.gop).len();
        if w > n {
            return Err(Error::Config(format!(
                "median window {w} exceeds the {n} sampled frames of group {}",
                u.gop
            )));
        }
    }
    if w == 1 {
        return Ok(bundle.clone());
    }
    let mut units = Vec::with_capacity(bundle.units.len());
    for u in &bundle.units {
        let times = unit_train_times(bundle, u.gop);
        let n = times.len();
        let mut model = BlockModel::new_table(
            u.model.arch.clone(),
            u.model.frame.clone(),
            times.clone(),
            TableLookup::Nearest,
        );
        let crate::inr::BiasSource::Table(table) = &mut model.bias else {
            unreachable!("new_table builds a table")
        };
        for row in 0..u.patches.len() {
            for (l, series) in trajectory(&u.model, row, &times)?.into_iter().enumerate() {
                let o: &mut Tensor = &mut table.offsets[l];
                let cols = o.cols();
                for comp in 0..cols {
                    let raw: Vec<f64> = series.iter().map(|v| v[comp]).collect();
                    for (k, v) in median_filter(&raw, w).into_iter().enumerate() {
                        o.data_mut()[(row * n + k) * cols + comp] = v / OFFSET_SCALE;
                    }
                }
            }
        }
        units.push(UnitModel {
            gop: u.gop,
            patches: u.patches.clone(),
            model,
        });
    }
    Ok(ModelBundle {
        kind: BiasKind::Table(TableLookup::Nearest),
        units,
        ..bundle.clone()
    })
}

/// One sampled bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasSample {
    pub gop: usize,
    pub patch: usize,
    pub layer: usize,
    /// Global frame time.
    pub t: f64,
    pub values: Vec<f64>,
}

/// Bias offsets of every unit, patch and modulated layer at `per_frame`
/// samples per frame interval. Exact tables are sampled at their stored times only.
pub fn bias_trajectories(bundle: &ModelBundle, per_frame: usize) -> Result<Vec<BiasSample>> {
    let mut out = Vec::new();
    for u in &bundle.units {
        let (t0, len) = bundle.grid.gop_span(u.gop);
        let taus: Vec<f64> = match &u.model.bias {
            crate::inr::BiasSource::Table(t) if t.lookup == TableLookup::Exact => t.times.clone(),
            _ if len <= 1 => vec![0.0],
            _ => {
                let steps = per_frame.max(1) * (len - 1);
                (0..=steps).map(|i| i as f64 / steps as f64).collect()
            }
        };
        for (row, &pi) in u.patches.iter().enumerate() {
            for (l, series) in trajectory(&u.model, row, &taus)?.into_iter().enumerate() {
                for (&tau, values) in taus.iter().zip(series) {
                    out.push(BiasSample {
                        gop: u.gop,
                        patch: pi,
                        layer: l,
                        t: t0 as f64 + tau * len.saturating_sub(1) as f64,
                        values,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn trajectory_csv(samples: &[BiasSample]) -> String {
    let mut out = String::from("gop,patch,layer,t,component,value\n");
    for s in samples {
        for (k, v) in s.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.gop,
                s.patch,
                s.layer,
                fmt6(s.t),
                k,
                fmt6(*v)
            );
        }
    }
    out
}

/// Mean over units, patches and components of the variance of each bias
/// component across training times, one value per modulated layer.
pub fn bias_temporal_variance(bundle: &ModelBundle) -> Result<Vec<f64>> {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for u in &bundle.units {
        let times = unit_train_times(bundle, u.gop);
        for row in 0..u.patches.len() {
            for (l, series) in trajectory(&u.model, row, &times)?.into_iter().enumerate() {
                if sums.len() <= l {
                    sums.resize(l + 1, (0.0, 0));
                }
                let n = series.len() as f64;
                for comp in 0..series[0].len() {
                    let mean = series.iter().map(|v| v[comp]).sum::<f64>() / n;
                    let var = series.iter().map(|v| (v[comp] - mean).powi(2)).sum::<f64>() / n;
                    sums[l].0 += var;
                    sums[l].1 += 1;
                }
            }
        }
    }
    Ok(sums.into_iter().map(|(s, n)| s / n.max(1) as f64).collect())
}

/// Projection of each row of `rows` onto their first principal component.
pub fn first_principal_scores(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centred: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    // power iteration from a fixed start
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 1e-3).collect();
    for _ in 0..500 {
        let mut next: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum()).collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        v = next;
    }
    centred
        .iter()
        .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_splits() {
        let (train, test) = split_frames(10, 2);
        assert_eq!(train, vec![0, 2, 4, 6, 8]);
        assert_eq!(test, vec![1, 3, 5, 7, 9]);
        let (train, test) = split_frames(21, 10);
        assert_eq!(train, vec![0, 10, 20]);
        assert_eq!(test.len(), 18);
    }

    #[test]
    fn interpolation_needs_two_train_frames_per_group() {
        let cfg = FitConfig {
            gop: 10,
            ..FitConfig::desk()
        };
        let err = check_interp_split(21, &cfg, 10).unwrap_err().to_string();
        assert!(err.contains("at least 11"), "{err}");
        assert!(check_interp_split(21, &FitConfig { gop: 21, ..cfg.clone() }, 10).is_ok());
        assert!(check_interp_split(10, &cfg, 1).is_err());
    }

    #[test]
    fn mask_geometry() {
        let m = make_inpaint_masks(1, 100, 100, 50).unwrap();
        for y in 0..100 {
            for x in 0..100 {
                let centre = (25..75).contains(&y) && (25..75).contains(&x);
                if centre {
                    assert!(!m[y * 100 + x]);
                }
            }
        }
        let holes = m.iter().filter(|&&o| !o).count();
        assert!(holes <= 5 * 50 * 50);
        assert!(make_inpaint_masks(1, 100, 100, 52).is_err());

        let m = make_inpaint_masks(2, 64, 64, 8).unwrap();
        assert_eq!(m.iter().filter(|&&o| !o).count(), 2 * 5 * 64);
        assert_eq!(mask_side(64, 64), 8);
        assert_eq!(mask_side(1080, 1920), 50);
    }

    #[test]
    fn zero_light_gives_zero() {
        let v = photon_noise_values(
            &[0.0; 100],
            NoiseModel {
                alpha: 30.0,
                readout: 0.0,
            },
            1,
        )
        .unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(photon_noise_values(
            &[0.5],
            NoiseModel {
                alpha: 0.0,
                readout: 1.0
            },
            1
        )
        .is_err());
    }

    #[test]
    fn photon_noise_is_unbiased() {
        let n = 1_000_000;
        let clean: Vec<f64> = (0..n).map(|i| (i % 11) as f64 / 10.0).collect();
        let noisy = photon_noise_values(
            &clean,
            NoiseModel {
                alpha: 30.0,
                readout: 0.0,
            },
            3,
        )
        .unwrap();
        let mean_clean = clean.iter().sum::<f64>() / n as f64;
        let mean_noisy = noisy.iter().sum::<f64>() / n as f64;
        // per-pixel variance is clean/α
        let se = (mean_clean / 30.0 / n as f64).sqrt();
        assert!(
            (mean_noisy - mean_clean).abs() < 3.0 * se,
            "{mean_noisy} vs {mean_clean}"
        );
    }

    #[test]
    fn photon_noise_psnr_matches_closed_form() {
        let n = 200_000;
        let clean = vec![0.5; n];
        let noisy = photon_noise_values(&clean, NoiseModel::default(), 11).unwrap();
        let mse = crate::metrics::mse(&noisy, &clean).unwrap();
        let expected = (0.5 * 30.0 + 25.0) / 900.0;
        assert!((mse - expected).abs() / expected < 0.02, "{mse} vs {expected}");
        let db = crate::metrics::psnr_from_mse(mse, 1.0);
        assert!((db - 13.5).abs() < 0.1, "{db}");
    }

    #[test]
    fn median_of_three_removes_spike() {
        let s = [0.1, 0.1, 0.9, 0.1, 0.1];
        assert_eq!(median_filter(&s, 3), vec![0.1; 5]);
        assert_eq!(median_filter(&s, 1), s.to_vec());
        assert_eq!(median_filter(&[0.3; 6], 5), vec![0.3; 6]);
    }

    #[test]
    fn mean_fill_uses_observed_pixels() {
        let v = VideoTensor::new(1, 1, 4, 1, vec![0.2, 0.4, 0.9, 0.0]).unwrap();
        let out = mean_fill(&v, &[true, true, false, false]).unwrap();
        assert!((out.data()[2] - 0.3).abs() < 1e-15 && (out.data()[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn principal_scores_follow_a_line() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0, -0.5 * i as f64])
            .collect();
        let s = first_principal_scores(&rows);
        let idx: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!((pearson(&s, &idx).abs() - 1.0).abs() < 1e-12);
    }
}
