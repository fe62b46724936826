mod manifest;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actinr::inr::ActivationKind;
use actinr::tasks::{load_bundle, mask_side, FitConfig, Study};
use actinr::toy::{gaussian_blob_video, moving_circle_video, oscillating_bar_video, texture_video, write_toy, ToySpec};
use actinr::video::load_frames;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::{record_input, Manifest, Task};

#[derive(Parser)]
#[command(
    name = "actinr",
    version,
    about = "Fit, interpolate and restore videos with bias-modulated INRs"
)]
struct Cli {
    /// Worker threads; falls back to ACTINR_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-size defaults (96-pixel patches, 10-frame groups).
    Paper,
    /// Small-video defaults (32-pixel patches, 8-frame groups).
    Desk,
}

#[derive(Args)]
struct Common {
    /// Directory of PNG frames.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct Settings {
    /// Flat JSON config with dotted keys, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    channels: u8,
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    preset: Preset,
}

#[derive(Clone, Copy, ValueEnum)]
enum ToyKind {
    Blob,
    Circle,
    Bar,
    Texture,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every frame.
    Fit(Common),
    /// Train on every stride-th frame and score the rest.
    Interp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        stride: usize,
    },
    /// Downsample the input, fit it, and render back at full resolution.
    Superres {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        spatial: usize,
        #[arg(long, default_value_t = 1)]
        temporal: usize,
    },
    /// Add photon noise to the input and fit the noisy frames.
    Denoise {
        #[command(flatten)]
        common: Common,
        /// Mean photon count at full intensity.
        #[arg(long, default_value_t = 30.0)]
        alpha: f64,
        /// Readout noise std in photons.
        #[arg(long, default_value_t = 5.0)]
        read: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
    /// Hide five square boxes per frame and fit the remaining pixels.
    Inpaint {
        #[command(flatten)]
        common: Common,
        /// Box side in pixels (default scales with resolution).
        #[arg(long = "box")]
        box_side: Option<usize>,
    },
    /// Run a parameter sweep on the input or on a built-in toy.
    Ablate {
        #[arg(long, value_parser = parse_study)]
        study: Study,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Median-filter the bias trajectories of a saved model and re-render.
    FilterBias {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic video as PNG frames.
    Toy {
        #[arg(long, value_enum)]
        kind: ToyKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (defaults to the one recorded in the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_study(s: &str) -> Result<Study, String> {
    s.parse().map_err(|e: actinr::Error| e.to_string())
}

/// Raised for problems with how the tool was invoked.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}

fn base_config(settings: &Settings, task: &Task) -> Result<FitConfig> {
    let mut base = match settings.preset {
        Preset::Paper => FitConfig::default(),
        Preset::Desk => FitConfig::desk(),
    };
    if matches!(task, Task::Inpaint { .. }) {
        base.activation = ActivationKind::wire_inpainting();
    }
    match &settings.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            Ok(base.apply_json_str(&text)?)
        }
        None => Ok(base),
    }
}

fn check_input_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(usage(format!("input directory {} does not exist", path.display())));
    }
    Ok(())
}

fn check_out(out: &Path, input: Option<&Path>) -> Result<()> {
    if let Some(input) = input.filter(|p| p.is_dir()) {
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
        if abs(out).starts_with(abs(input)) {
            return Err(usage(format!(
                "output {} lies inside the input directory; inputs are never modified",
                out.display()
            )));
        }
    }
    Ok(())
}

fn video_manifest(task: Task, input: &Path, settings: &Settings) -> Result<Manifest> {
    check_input_dir(input)?;
    check_out(&settings.out, Some(input))?;
    let config = base_config(settings, &task)?;
    Ok(Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        task,
        input: Some(record_input(input)?),
        out: settings.out.clone(),
        channels: settings.channels as usize,
        seed: config.seed,
        config: config.to_flat(),
    })
}

fn build_manifest(command: Command) -> Result<Manifest> {
    match command {
        Command::Fit(c) => video_manifest(Task::Fit, &c.input, &c.settings),
        Command::Interp { common, stride } => video_manifest(Task::Interp { stride }, &common.input, &common.settings),
        Command::Superres {
            common,
            spatial,
            temporal,
        } => video_manifest(Task::Superres { spatial, temporal }, &common.input, &common.settings),
        Command::Denoise {
            common,
            alpha,
            read,
            noise_seed,
        } => video_manifest(
            Task::Denoise {
                alpha,
                read,
                noise_seed,
            },
            &common.input,
            &common.settings,
        ),
        Command::Inpaint { common, box_side } => {
            check_input_dir(&common.input)?;
            let side = match box_side {
                Some(s) => s,
                None => {
                    let v = load_frames(&common.input, 1)?;
                    mask_side(v.height(), v.width())
                }
            };
            video_manifest(Task::Inpaint { box_side: side }, &common.input, &common.settings)
        }
        Command::Ablate { study, input, settings } => {
            let task = Task::Ablate { study };
            let input = match input {
                Some(p) => {
                    check_input_dir(&p)?;
                    check_out(&settings.out, Some(&p))?;
                    Some(record_input(&p)?)
                }
                None => None,
            };
            let config = base_config(&settings, &task)?;
            Ok(Manifest {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                task,
                input,
                out: settings.out,
                channels: settings.channels as usize,
                seed: config.seed,
                config: config.to_flat(),
            })
        }
        Command::FilterBias { bundle, window, out } => {
            if !bundle.is_file() {
                return Err(usage(format!("model bundle {} does not exist", bundle.display())));
            }
            if window % 2 == 0 {
                return Err(usage(format!("median window must be odd, got {window}")));
            }
            let model = load_bundle(&bundle)?;
            Ok(Manifest {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                task: Task::FilterBias { window },
                input: Some(record_input(&bundle)?),
                out,
                channels: model.channels,
                seed: model.config.seed,
                config: model.config.to_flat(),
            })
        }
        Command::Toy { .. } | Command::Rerun { .. } => unreachable!("handled before manifest construction"),
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("ACTINR_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| usage(format!("ACTINR_THREADS must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(usage("thread count must be positive".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker threads")?;
    }
    match cli.command {
        Command::Toy { kind, out } => {
            let video = match kind {
                ToyKind::Blob => gaussian_blob_video(&ToySpec::blob())?,
                ToyKind::Circle => moving_circle_video(&ToySpec::circle())?,
                ToyKind::Bar => oscillating_bar_video(&ToySpec::bar())?,
                ToyKind::Texture => texture_video(&ToySpec::texture())?,
            };
            write_toy(&video, &out)?;
            Ok(())
        }
        Command::Rerun { manifest, out } => {
            let mut m = Manifest::read(&manifest)?;
            m.verify_input()?;
            if let Some(out) = out {
                check_out(&out, m.input.as_ref().map(|r| r.path.as_path()))?;
                m.out = out;
            }
            run::execute(&m)
        }
        command => run::execute(&build_manifest(command)?),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage_like = err
        .chain()
        .any(|e| e.is::<UsageError>() || matches!(e.downcast_ref::<actinr::Error>(), Some(actinr::Error::Config(_))));
    if usage_like {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
