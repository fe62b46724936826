//! Parameter sweeps over a single video.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{activation_from_parts, FitConfig};
use super::ops::{fit_task, interpolate, linear_bias_baseline, oracle_baseline, split_frames, TaskResult};
use crate::error::{Error, Result};
use crate::inr::InrArch;
use crate::metrics::{fmt6, video_psnr};
use crate::video::{PatchGrid, VideoTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Activation,
    InterpStrategy,
    Gop,
    Patch,
    Params,
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "activation" => Study::Activation,
            "interp-strategy" => Study::InterpStrategy,
            "gop" => Study::Gop,
            "patch" => Study::Patch,
            "params" => Study::Params,
            other => {
                return Err(Error::Config(format!(
                    "unknown study `{other}` (expected activation, interp-strategy, gop, patch or params)"
                )))
            }
        })
    }
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Activation => "activation",
            Study::InterpStrategy => "interp-strategy",
            Study::Gop => "gop",
            Study::Patch => "patch",
            Study::Params => "params",
        }
    }
}

pub const GOP_SETTINGS: [usize; 4] = [4, 8, 16, 32];
pub const PATCH_SETTINGS: [usize; 4] = [8, 16, 32, 64];
pub const WIDTH_SETTINGS: [usize; 5] = [20, 30, 40, 50, 60];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub train_psnr_db: f64,
    /// Only for studies with held-out frames.
    pub test_psnr_db: Option<f64>,
    pub parameters: usize,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("setting,train_psnr_db,test_psnr_db,parameters\n");
    for r in rows {
        let test = r.test_psnr_db.map(fmt6).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.setting, fmt6(r.train_psnr_db), test, r.parameters);
    }
    out
}

/// Trainable parameters of one fit unit with `patches` patches and a hypernetwork.
pub fn unit_parameter_count(arch: &InrArch, patches: usize) -> usize {
    let dims = arch.layer_dims();
    let frame: usize = dims.iter().map(|&(i, o)| o * i + patches * o).sum();
    let mut trunk = 0;
    let mut fan_in = arch.hyper_input_dim();
    for _ in 0..arch.trunk_depth {
        trunk += arch.trunk_width * fan_in + arch.trunk_width;
        fan_in = arch.trunk_width;
    }
    let heads: usize = dims[..arch.modulated_layers()]
        .iter()
        .map(|&(_, o)| o * fan_in + o)
        .sum();
    frame + trunk + heads + patches * arch.latent_dim
}

/// Parameters of a whole-video fit under `config`.
pub fn video_parameter_count(config: &FitConfig, grid: &PatchGrid, channels: usize) -> usize {
    let arch = config.arch(channels);
    let patches = grid.spatial_patches();
    if config.share_weights {
        grid.gops * unit_parameter_count(&arch, patches)
    } else {
        grid.gops * patches * unit_parameter_count(&arch, 1)
    }
}

/// `config` with hidden and hypernetwork widths scaled together so that a fit
/// with patch size `patch` has about `budget` parameters.
pub fn scale_to_budget(config: &FitConfig, video: &VideoTensor, patch: usize, budget: usize) -> Result<FitConfig> {
    let grid = PatchGrid::for_video(video, patch, config.gop, config.overlap)?;
    let ratio = config.trunk_width as f64 / config.hidden as f64;
    let candidate = |hidden: usize| FitConfig {
        patch,
        hidden,
        trunk_width: ((hidden as f64 * ratio).round() as usize).max(1),
        ..config.clone()
    };
    let best = (1..=1024)
        .map(candidate)
        .min_by_key(|c| video_parameter_count(c, &grid, video.channels()).abs_diff(budget))
        .expect("non-empty range");
    Ok(best)
}

fn interp_row(setting: String, video: &VideoTensor, config: &FitConfig) -> Result<AblationRow> {
    let r = interpolate(video, 2, config)?;
    Ok(AblationRow {
        setting,
        train_psnr_db: r.train_psnr_db,
        test_psnr_db: Some(r.metrics.psnr_db),
        parameters: r.bundle.parameter_count(),
    })
}

fn fit_row(setting: String, video: &VideoTensor, config: &FitConfig) -> Result<AblationRow> {
    let r = fit_task(video, config)?;
    Ok(AblationRow {
        setting,
        train_psnr_db: r.train_psnr_db,
        test_psnr_db: None,
        parameters: r.bundle.parameter_count(),
    })
}

/// Runs one sweep. Studies with held-out frames use stride-2 interpolation.
pub fn run_study(study: Study, video: &VideoTensor, config: &FitConfig) -> Result<Vec<AblationRow>> {
    match study {
        Study::Activation => ["wire", "gauss", "sine"]
            .into_iter()
            .map(|kind| {
                let cfg = FitConfig {
                    activation: activation_from_parts(kind, None, None)?,
                    ..config.clone()
                };
                interp_row(kind.to_string(), video, &cfg)
            })
            .collect(),
        Study::InterpStrategy => {
            // Held-out frames after the last trained one are extrapolated, so
            // only the interior ones are scored.
            let (train, test) = split_frames(video.frames(), 2);
            let last = train.last().copied().unwrap_or(0);
            let interior: Vec<usize> = test.into_iter().filter(|&f| f < last).collect();
            let oracle = oracle_baseline(video, config)?;
            let linear = linear_bias_baseline(video, 2, config)?;
            let bias = interpolate(video, 2, config)?;
            let row = |setting: &str, r: &TaskResult, train_db: f64| -> Result<AblationRow> {
                Ok(AblationRow {
                    setting: setting.into(),
                    train_psnr_db: train_db,
                    test_psnr_db: Some(video_psnr(&r.output, video, &interior, None)?),
                    parameters: r.bundle.parameter_count(),
                })
            };
            Ok(vec![
                row("oracle", &oracle, video_psnr(&oracle.output, video, &train, None)?)?,
                row("linear", &linear, linear.train_psnr_db)?,
                row("bias-inr", &bias, bias.train_psnr_db)?,
            ])
        }
        Study::Gop => GOP_SETTINGS
            .into_iter()
            .filter(|&g| g <= video.frames())
            .map(|gop| fit_row(gop.to_string(), video, &FitConfig { gop, ..config.clone() }))
            .collect(),
        Study::Patch => {
            let grid = PatchGrid::for_video(video, config.patch, config.gop, config.overlap)?;
            let budget = video_parameter_count(config, &grid, video.channels());
            PATCH_SETTINGS
                .into_iter()
                .filter(|&p| p <= video.height().min(video.width()))
                .map(|p| fit_row(p.to_string(), video, &scale_to_budget(config, video, p, budget)?))
                .collect()
        }
        Study::Params => WIDTH_SETTINGS
            .into_iter()
            .map(|hidden| {
                fit_row(
                    hidden.to_string(),
                    video,
                    &FitConfig {
                        hidden,
                        ..config.clone()
                    },
                )
            })
            .collect(),
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    super::ops::pearson(&ranks(a), &ranks(b))
}
