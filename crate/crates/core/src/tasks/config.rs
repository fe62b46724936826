use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::inr::{ActivationKind, BiasMode, InrArch};

/// Everything needed to fit a video, with a flat dotted-key JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub layers: usize,
    pub hidden: usize,
    pub activation: ActivationKind,
    pub patch: usize,
    pub gop: usize,
    pub overlap: usize,
    pub rff_size: usize,
    pub rff_variance: f64,
    pub latent_dim: usize,
    pub trunk_width: usize,
    pub trunk_depth: usize,
    pub iterations: usize,
    pub lr: f64,
    pub decay_ratio: f64,
    /// Fraction of `iterations` after which the learning rate is decayed.
    pub decay_fraction: f64,
    pub seed: u64,
    /// Initialize each group of pictures from the previous one of the same patch.
    pub warm_start: bool,
    pub bias_mode: BiasMode,
    pub modulate_output: bool,
    /// Frames whose global index is a multiple of `stride` are trained on.
    pub stride: usize,
    /// Share frame-INR weights across all patches of a group of pictures.
    pub share_weights: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        let arch = InrArch::default();
        Self {
            layers: arch.layers,
            hidden: arch.hidden,
            activation: arch.activation,
            patch: 96,
            gop: 10,
            overlap: 0,
            rff_size: arch.rff_size,
            rff_variance: arch.rff_variance,
            latent_dim: arch.latent_dim,
            trunk_width: arch.trunk_width,
            trunk_depth: arch.trunk_depth,
            iterations: 2000,
            lr: 5e-3,
            decay_ratio: 0.1,
            decay_fraction: 0.75,
            seed: 0,
            warm_start: false,
            bias_mode: arch.bias_mode,
            modulate_output: arch.modulate_output,
            stride: 1,
            share_weights: false,
        }
    }
}

pub const DESK_RFF_VARIANCE: f64 = 0.05;

const KEYS: &[&str] = &[
    "model.layers",
    "model.hidden",
    "model.bias_mode",
    "model.modulate_output",
    "activation.kind",
    "activation.omega",
    "activation.scale",
    "grid.patch",
    "grid.gop",
    "grid.overlap",
    "grid.share_weights",
    "rff.size",
    "rff.variance",
    "hyper.latent_dim",
    "hyper.width",
    "hyper.depth",
    "train.iterations",
    "train.lr",
    "train.decay_ratio",
    "train.decay_fraction",
    "train.seed",
    "train.warm_start",
    "train.stride",
];

fn key_error(key: &str, expected: &str) -> Error {
    Error::Config(format!("key `{key}` must be {expected}"))
}

fn get_usize(map: &Map<String, Value>, key: &str, into: &mut usize) -> Result<()> {
    if let Some(v) = map.get(key) {
        *into = v.as_u64().ok_or_else(|| key_error(key, "a non-negative integer"))? as usize;
    }
    Ok(())
}

fn get_u64(map: &Map<String, Value>, key: &str, into: &mut u64) -> Result<()> {
    if let Some(v) = map.get(key) {
        *into = v.as_u64().ok_or_else(|| key_error(key, "a non-negative integer"))?;
    }
    Ok(())
}

fn get_f64(map: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| key_error(key, "a number")),
    }
}

fn get_bool(map: &Map<String, Value>, key: &str, into: &mut bool) -> Result<()> {
    if let Some(v) = map.get(key) {
        *into = v.as_bool().ok_or_else(|| key_error(key, "a boolean"))?;
    }
    Ok(())
}

fn get_str<'a>(map: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>> {
    map.get(key)
        .map(|v| v.as_str().ok_or_else(|| key_error(key, "a string")))
        .transpose()
}

/// Activation of the given kind, using per-kind defaults for unspecified parameters.
pub fn activation_from_parts(kind: &str, omega: Option<f64>, scale: Option<f64>) -> Result<ActivationKind> {
    let act = match kind {
        "wire" => {
            let ActivationKind::GaborWire { omega: o, scale: s } = ActivationKind::wire() else {
                unreachable!()
            };
            ActivationKind::GaborWire {
                omega: omega.unwrap_or(o),
                scale: scale.unwrap_or(s),
            }
        }
        "gauss" => {
            let ActivationKind::Gauss { scale: s } = ActivationKind::gauss() else {
                unreachable!()
            };
            ActivationKind::Gauss {
                scale: scale.unwrap_or(s),
            }
        }
        "sine" => {
            let ActivationKind::Sine { omega: o } = ActivationKind::sine() else {
                unreachable!()
            };
            ActivationKind::Sine {
                omega: omega.unwrap_or(o),
            }
        }
        "gelu" => ActivationKind::Gelu,
        "linear" => ActivationKind::Linear,
        other => return Err(Error::Config(format!("unknown activation kind `{other}`"))),
    };
    act.validate()?;
    Ok(act)
}

impl FitConfig {
    /// Reduced-size defaults for small videos: 32-pixel patches, 8-frame groups.
    ///
    /// Time is normalized to `[0, 1]` within each group, so the time-encoding
    /// variance is lowered to keep frequencies well below one cycle per frame;
    /// at variance 5 held-out frames between training frames are not recovered.
    pub fn desk() -> Self {
        Self {
            patch: 32,
            gop: 8,
            rff_variance: DESK_RFF_VARIANCE,
            ..Self::default()
        }
    }

    pub fn arch(&self, channels: usize) -> InrArch {
        InrArch {
            layers: self.layers,
            hidden: self.hidden,
            channels,
            activation: self.activation,
            rff_size: self.rff_size,
            rff_variance: self.rff_variance,
            latent_dim: self.latent_dim,
            trunk_width: self.trunk_width,
            trunk_depth: self.trunk_depth,
            bias_mode: self.bias_mode,
            modulate_output: self.modulate_output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch(1).validate()?;
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "decay ratio must lie in (0, 1], got {}",
                self.decay_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.decay_fraction) {
            return Err(Error::Config(format!(
                "decay fraction must lie in [0, 1], got {}",
                self.decay_fraction
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("train-frame stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Flat dotted-key form with every field materialized.
    pub fn to_flat(&self) -> Map<String, Value> {
        let (omega, scale) = match self.activation {
            ActivationKind::GaborWire { omega, scale } => (Some(omega), Some(scale)),
            ActivationKind::Gauss { scale } => (None, Some(scale)),
            ActivationKind::Sine { omega } => (Some(omega), None),
            ActivationKind::Gelu | ActivationKind::Linear => (None, None),
        };
        let bias_mode = match self.bias_mode {
            BiasMode::Additive => "additive",
            BiasMode::Replace => "replace",
        };
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("model.layers", self.layers.into());
        put("model.hidden", self.hidden.into());
        put("model.bias_mode", bias_mode.into());
        put("model.modulate_output", self.modulate_output.into());
        put("activation.kind", self.activation.name().into());
        put("activation.omega", omega.map_or(Value::Null, Value::from));
        put("activation.scale", scale.map_or(Value::Null, Value::from));
        put("grid.patch", self.patch.into());
        put("grid.gop", self.gop.into());
        put("grid.overlap", self.overlap.into());
        put("grid.share_weights", self.share_weights.into());
        put("rff.size", self.rff_size.into());
        put("rff.variance", self.rff_variance.into());
        put("hyper.latent_dim", self.latent_dim.into());
        put("hyper.width", self.trunk_width.into());
        put("hyper.depth", self.trunk_depth.into());
        put("train.iterations", self.iterations.into());
        put("train.lr", self.lr.into());
        put("train.decay_ratio", self.decay_ratio.into());
        put("train.decay_fraction", self.decay_fraction.into());
        put("train.seed", self.seed.into());
        put("train.warm_start", self.warm_start.into());
        put("train.stride", self.stride.into());
        m
    }

    /// Applies the keys of `map` on top of `self`. Unknown keys are errors.
    pub fn apply_flat(&self, map: &Map<String, Value>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        let mut c = self.clone();
        get_usize(map, "model.layers", &mut c.layers)?;
        get_usize(map, "model.hidden", &mut c.hidden)?;
        if let Some(mode) = get_str(map, "model.bias_mode")? {
            c.bias_mode = match mode {
                "additive" => BiasMode::Additive,
                "replace" => BiasMode::Replace,
                other => {
                    return Err(key_error(
                        "model.bias_mode",
                        &format!("additive or replace, not `{other}`"),
                    ))
                }
            };
        }
        get_bool(map, "model.modulate_output", &mut c.modulate_output)?;

        let omega = get_f64(map, "activation.omega")?;
        let scale = get_f64(map, "activation.scale")?;
        let current = self.to_flat();
        let kind = get_str(map, "activation.kind")?;
        c.activation = match kind {
            Some(k) if k != self.activation.name() => activation_from_parts(k, omega, scale)?,
            _ => activation_from_parts(
                self.activation.name(),
                omega.or(current["activation.omega"].as_f64()),
                scale.or(current["activation.scale"].as_f64()),
            )?,
        };

        get_usize(map, "grid.patch", &mut c.patch)?;
        get_usize(map, "grid.gop", &mut c.gop)?;
        get_usize(map, "grid.overlap", &mut c.overlap)?;
        get_bool(map, "grid.share_weights", &mut c.share_weights)?;
        get_usize(map, "rff.size", &mut c.rff_size)?;
        if let Some(v) = get_f64(map, "rff.variance")? {
            c.rff_variance = v;
        }
        get_usize(map, "hyper.latent_dim", &mut c.latent_dim)?;
        get_usize(map, "hyper.width", &mut c.trunk_width)?;
        get_usize(map, "hyper.depth", &mut c.trunk_depth)?;
        get_usize(map, "train.iterations", &mut c.iterations)?;
        for (key, slot) in [
            ("train.lr", &mut c.lr),
            ("train.decay_ratio", &mut c.decay_ratio),
            ("train.decay_fraction", &mut c.decay_fraction),
        ] {
            if let Some(v) = get_f64(map, key)? {
                *slot = v;
            }
        }
        get_u64(map, "train.seed", &mut c.seed)?;
        get_bool(map, "train.warm_start", &mut c.warm_start)?;
        get_usize(map, "train.stride", &mut c.stride)?;
        c.validate()?;
        Ok(c)
    }

    /// Parses a flat JSON object on top of the defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::default().apply_json_str(text)
    }

    pub fn apply_json_str(&self, text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let map = value
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        self.apply_flat(map)
    }
}
