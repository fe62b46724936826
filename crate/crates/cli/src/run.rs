use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use actinr::metrics::{evaluate, fmt6, moving_region, temporal_variance, FrameMetrics};
use actinr::tasks::{
    ablation_csv, bias_temporal_variance, bias_trajectories, denoise, filter_bias_trajectories, fit_task, inpaint,
    interpolate, load_bundle, make_inpaint_masks, run_study, save_bundle, superres, superres_input,
    synthesize_photon_noise, trajectory_csv, FitConfig, ModelBundle, NoiseModel, Study, TaskResult,
};
use actinr::toy::{gaussian_blob_video, moving_circle_video, ToySpec};
use actinr::video::{load_frames, save_frames, save_mask, VideoTensor};
use anyhow::{Context, Result};
use serde::Serialize;

use crate::manifest::{Manifest, Task};

/// Pixels counted as moving when filtering biases: temporal variance above this
/// fraction of the most variable pixel.
const MOVING_FRACTION: f64 = 0.05;

/// Run facts that are not part of the reproducibility contract (timing lives here).
#[derive(Serialize)]
struct Summary {
    task: &'static str,
    elapsed_seconds: f64,
    parameters: usize,
    train_psnr_db: f64,
    test_psnr_db: Option<f64>,
    input_psnr_db: Option<f64>,
    region_psnr_db: Option<f64>,
    baseline_psnr_db: Option<f64>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn metrics_csv(rows: &mut [(&str, FrameMetrics)]) -> String {
    rows.sort_by_key(|r| r.1.frame_index);
    let mut out = String::from("frame_index,split,psnr_db,ssim,ms_ssim\n");
    for (split, m) in rows.iter() {
        let _ = writeln!(
            out,
            "{},{split},{},{},{}",
            m.frame_index,
            fmt6(m.psnr_db),
            fmt6(m.ssim),
            fmt6(m.ms_ssim)
        );
    }
    out
}

fn loss_csv(curves: &[Vec<f64>]) -> String {
    let mut out = String::from("unit,iteration,loss\n");
    for (u, curve) in curves.iter().enumerate() {
        for (i, l) in curve.iter().enumerate() {
            let _ = writeln!(out, "{u},{i},{}", fmt6(*l));
        }
    }
    out
}

fn write_model(out: &Path, bundle: &ModelBundle) -> Result<()> {
    save_bundle(bundle, &out.join("model.actinr"))?;
    write(
        &out.join("bias_traj.csv"),
        &trajectory_csv(&bias_trajectories(bundle, 1)?),
    )
}

/// Writes the artifacts shared by every video task.
fn write_task(out: &Path, task: &Task, result: &TaskResult, reference: &VideoTensor, test_split: bool) -> Result<()> {
    save_frames(&result.output, &out.join("frames"))?;
    write_model(out, &result.bundle)?;
    write(&out.join("loss_curve.csv"), &loss_csv(&result.loss_curves))?;

    let train = evaluate(&result.output, reference, &result.train_frames)?;
    let mut rows: Vec<(&str, FrameMetrics)> = train.frames.into_iter().map(|m| ("train", m)).collect();
    if test_split {
        let test: Vec<usize> = result
            .eval_frames
            .iter()
            .copied()
            .filter(|f| !result.train_frames.contains(f))
            .collect();
        if !test.is_empty() {
            let held = evaluate(&result.output, reference, &test)?;
            rows.extend(held.frames.into_iter().map(|m| ("test", m)));
        }
    }
    write(&out.join("metrics.csv"), &metrics_csv(&mut rows))?;

    let summary = Summary {
        task: task.name(),
        elapsed_seconds: result.elapsed.as_secs_f64(),
        parameters: result.bundle.parameter_count(),
        train_psnr_db: result.train_psnr_db,
        test_psnr_db: test_split.then_some(result.metrics.psnr_db),
        input_psnr_db: result.input_psnr_db,
        region_psnr_db: result.region_psnr_db,
        baseline_psnr_db: result.baseline_psnr_db,
    };
    write(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )
}

fn standard_toy(study: Study) -> Result<VideoTensor> {
    Ok(match study {
        Study::Activation => moving_circle_video(&ToySpec::circle())?,
        _ => gaussian_blob_video(&ToySpec::blob())?,
    })
}

fn filter_csv(before: &ModelBundle, after: &ModelBundle, window: usize) -> Result<String> {
    let (rb, ra) = (before.render()?, after.render()?);
    let region = moving_region(&rb, MOVING_FRACTION);
    let region = region.iter().any(|&m| m).then_some(region);
    let mut out =
        String::from("stage,window,temporal_variance,moving_region_temporal_variance,bias_temporal_variance\n");
    for (stage, w, bundle, video) in [("before", 1, before, &rb), ("after", window, after, &ra)] {
        let bias = bias_temporal_variance(bundle)?;
        let mean_bias = bias.iter().sum::<f64>() / bias.len().max(1) as f64;
        let moving = match &region {
            Some(r) => fmt6(temporal_variance(video, Some(r))?),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{stage},{w},{},{moving},{}",
            fmt6(temporal_variance(video, None)?),
            fmt6(mean_bias)
        );
    }
    Ok(out)
}

/// Writes the manifest, then performs the run it describes.
pub fn execute(manifest: &Manifest) -> Result<()> {
    let out = &manifest.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    manifest.write(out)?;

    let config = FitConfig::default().apply_flat(&manifest.config)?;
    let input = manifest.input.as_ref().map(|r| r.path.as_path());
    let load = || -> Result<VideoTensor> {
        let dir = input.context("this task needs an input frame directory")?;
        Ok(load_frames(dir, manifest.channels)?)
    };

    match &manifest.task {
        Task::Fit => {
            let video = load()?;
            let result = fit_task(&video, &config)?;
            write_task(out, &manifest.task, &result, &video, false)
        }
        Task::Interp { stride } => {
            let video = load()?;
            let result = interpolate(&video, *stride, &config)?;
            write_task(out, &manifest.task, &result, &video, true)
        }
        Task::Superres { spatial, temporal } => {
            let video = load()?;
            let low = superres_input(&video, *spatial, *temporal)?;
            save_frames(&low, &out.join("input"))?;
            let result = superres(&low, *spatial, *temporal, &video, &config)?;
            write_task(out, &manifest.task, &result, &video, true)
        }
        Task::Denoise {
            alpha,
            read,
            noise_seed,
        } => {
            let video = load()?;
            let model = NoiseModel {
                alpha: *alpha,
                readout: *read,
            };
            let noisy = synthesize_photon_noise(&video, model, *noise_seed)?;
            save_frames(&noisy, &out.join("noisy"))?;
            let result = denoise(&noisy, Some(&video), &config)?;
            write_task(out, &manifest.task, &result, &video, false)
        }
        Task::Inpaint { box_side } => {
            let video = load()?;
            let (t, h, w, _) = video.dims();
            let mask = make_inpaint_masks(t, h, w, *box_side)?;
            save_mask(&mask, t, h, w, &out.join("masks"))?;
            let result = inpaint(&video, &mask, &config)?;
            write_task(out, &manifest.task, &result, &video, false)
        }
        Task::Ablate { study } => {
            let video = match input {
                Some(_) => load()?,
                None => standard_toy(*study)?,
            };
            let rows = run_study(*study, &video, &config)?;
            write(&out.join("metrics.csv"), &ablation_csv(&rows))
        }
        Task::FilterBias { window } => {
            let path = input.context("filter-bias needs a model bundle")?;
            let before = load_bundle(path)?;
            let after = filter_bias_trajectories(&before, *window)?;
            save_frames(&before.render()?, &out.join("frames_before"))?;
            save_frames(&after.render()?, &out.join("frames"))?;
            write_model(out, &after)?;
            write(&out.join("metrics.csv"), &filter_csv(&before, &after, *window)?)
        }
    }
}
