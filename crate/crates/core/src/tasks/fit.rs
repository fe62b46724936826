//! Per-block optimization and whole-video fitting.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use crate::autodiff::{AdamConfig, AdamState, Graph, StepDecay, Tensor};
use crate::error::{Error, Result};
use crate::inr::{init_params, BiasSource, BlockModel, Query, TableLookup};
use crate::video::{assemble, gop_time, partition_with, patch_coords, Block, PatchGrid, VideoTensor};

/// Where the per-frame bias offsets come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Hyper,
    Table(TableLookup),
}

/// A set of spatial patches of one group of pictures fitted with shared weights.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitModel {
    pub gop: usize,
    /// Spatial patch indices, in latent/base-bias row order.
    pub patches: Vec<usize>,
    pub model: BlockModel,
}

/// All fitted parameters of a video plus the geometry needed to render it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub config: FitConfig,
    pub grid: PatchGrid,
    pub channels: usize,
    pub kind: BiasKind,
    pub units: Vec<UnitModel>,
}

/// Result of optimizing one fit unit.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Best-so-far parameters by training loss.
    pub model: BlockModel,
    /// Training loss evaluated at the start of every iteration.
    pub loss_curve: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub bundle: ModelBundle,
    pub reconstruction: VideoTensor,
    /// One curve per fit unit, in unit order.
    pub loss_curves: Vec<Vec<f64>>,
    pub train_frames: Vec<usize>,
    pub elapsed: Duration,
}

/// Training pixels of a fit unit, laid out query-major.
struct UnitData {
    coords: Tensor,
    queries: Vec<Query>,
    target: Tensor,
    mask: Vec<bool>,
}

impl UnitData {
    fn new(blocks: &[&Block], train: &[usize]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Contract("fit unit without blocks".into()))?;
        let (p, c, len) = (first.patch, first.channels, first.frames);
        if blocks.iter().any(|b| (b.patch, b.channels, b.frames) != (p, c, len)) {
            return Err(Error::dim("fit_block", "blocks of one unit must share their geometry"));
        }
        let n = p * p;
        let mut queries = Vec::with_capacity(blocks.len() * train.len());
        let mut target = Vec::with_capacity(blocks.len() * train.len() * n * c);
        let mut mask = Vec::with_capacity(target.capacity());
        for (j, b) in blocks.iter().enumerate() {
            for &k in train {
                queries.push(Query {
                    patch: j,
                    t: gop_time(k, len),
                });
                target.extend_from_slice(b.frame_values(k));
                for &obs in &b.observed[k * n..(k + 1) * n] {
                    mask.extend(std::iter::repeat_n(obs, c));
                }
            }
        }
        Ok(Self {
            coords: patch_coords(p),
            target: Tensor::new(vec![queries.len() * n, c], target)?,
            queries,
            mask,
        })
    }

    fn loss(
        &self,
        model: &BlockModel,
        trainable: bool,
    ) -> Result<(Graph, crate::autodiff::Var, Vec<crate::autodiff::Var>)> {
        let mut g = Graph::new();
        let vars = model.register(&mut g, trainable);
        let coords = g.constant(self.coords.clone());
        let pred = model.forward(&mut g, &vars, coords, &self.queries)?;
        let target = g.constant(self.target.clone());
        let loss = g.mse(pred, target, Some(&self.mask))?;
        Ok((g, loss, vars))
    }
}

/// Local indices of the frames of `block`'s group that are trained on.
pub fn train_indices(t0: usize, len: usize, stride: usize) -> Vec<usize> {
    (0..len).filter(|k| (t0 + k).is_multiple_of(stride)).collect()
}

fn fresh_model(
    config: &FitConfig,
    channels: usize,
    patches: usize,
    kind: BiasKind,
    times: &[f64],
    seed: u64,
) -> BlockModel {
    let arch = config.arch(channels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = init_params(&arch, patches, &mut rng);
    match kind {
        BiasKind::Hyper => BlockModel::new_hyper(arch, init),
        BiasKind::Table(lookup) => {
            let mut model = BlockModel::new_table(arch, init.frame, times.to_vec(), lookup);
            // free entries: drawn independently per frame, like ordinary biases
            let fans: Vec<usize> = model.arch.layer_dims().iter().map(|d| d.0).collect();
            if let BiasSource::Table(t) = &mut model.bias {
                for (o, fan_in) in t.offsets.iter_mut().zip(fans) {
                    let dist = Uniform::new_inclusive(-1.0, 1.0).expect("finite bound");
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    o.data_mut().iter_mut().for_each(|v| *v = bound * dist.sample(&mut rng));
                }
            }
            model
        }
    }
}

fn warm_model(warm: &BlockModel, kind: BiasKind, times: &[f64]) -> BlockModel {
    match (kind, &warm.bias) {
        (BiasKind::Table(lookup), BiasSource::Table(t)) if t.times != times => {
            BlockModel::new_table(warm.arch.clone(), warm.frame.clone(), times.to_vec(), lookup)
        }
        _ => warm.clone(),
    }
}

fn diverged(unit: usize, iteration: usize, e: Error) -> Error {
    match e {
        Error::NonFiniteValue { .. } | Error::NonFinite { .. } => Error::Divergence {
            block: unit,
            iteration,
            reason: e.to_string(),
        },
        other => other,
    }
}

/// Jointly optimizes the frame weights, base biases and bias source of a
/// fit unit against the observed pixels of its training frames.
///
/// `unit` is the unit's position in partition order; it seeds the
/// initialization and labels diagnostics.
pub fn fit_unit(
    blocks: &[&Block],
    train: &[usize],
    config: &FitConfig,
    kind: BiasKind,
    warm: Option<&BlockModel>,
    unit: usize,
) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config(format!("block {unit} has no training frames")));
    }
    let data = UnitData::new(blocks, train)?;
    if !data.mask.iter().any(|&m| m) {
        return Err(Error::Contract(format!("block {unit} has no observed training pixels")));
    }
    let len = blocks[0].frames;
    let times: Vec<f64> = train.iter().map(|&k| gop_time(k, len)).collect();
    let mut model = match warm {
        Some(w) => warm_model(w, kind, &times),
        None => fresh_model(
            config,
            blocks[0].channels,
            blocks.len(),
            kind,
            &times,
            config.seed ^ unit as u64,
        ),
    };
    if model.patches() != blocks.len() {
        return Err(Error::dim("fit_block", "warm-start model has a different patch count"));
    }

    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let decay = StepDecay::at_fraction(config.decay_ratio, config.decay_fraction, config.iterations);
    let mut opt = AdamState::new(adam, Some(decay), model.tensors());
    let mut curve = Vec::with_capacity(config.iterations);
    let mut best = (f64::INFINITY, 0, model.clone());

    for it in 0..config.iterations {
        let (g, loss, vars) = data.loss(&model, true).map_err(|e| diverged(unit, it, e))?;
        let value = g.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Divergence {
                block: unit,
                iteration: it,
                reason: format!("loss is {value}"),
            });
        }
        curve.push(value);
        if value < best.0 {
            best = (value, it, model.clone());
        }
        let grads = g.backward(loss).map_err(|e| diverged(unit, it, e))?;
        let grads: Vec<&Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();
        opt.update(&mut model.tensors_mut(), &grads)
            .map_err(|e| diverged(unit, it, e))?;
    }
    Ok(FitOutcome {
        model: best.2,
        loss_curve: curve,
        best_loss: best.0,
        best_iteration: best.1,
    })
}

/// Fits a single block (one patch, one group of pictures).
pub fn fit_block(block: &Block, config: &FitConfig, warm: Option<&BlockModel>) -> Result<FitOutcome> {
    let train = train_indices(block.t0, block.frames, config.stride);
    fit_unit(&[block], &train, config, BiasKind::Hyper, warm, block.index)
}

/// Block indices of every fit unit, in partition order.
pub fn unit_layout(grid: &PatchGrid, share_weights: bool) -> Vec<(usize, Vec<usize>)> {
    let patches = grid.spatial_patches();
    if share_weights {
        (0..grid.gops).map(|g| (g, (0..patches).collect())).collect()
    } else {
        (0..grid.gops)
            .flat_map(|g| (0..patches).map(move |p| (g, vec![p])))
            .collect()
    }
}

impl ModelBundle {
    /// Unit index and row of spatial patch `pi` in group `gop`.
    pub fn locate(&self, gop: usize, pi: usize) -> Result<(usize, usize)> {
        self.units
            .iter()
            .enumerate()
            .find_map(|(u, unit)| {
                (unit.gop == gop)
                    .then(|| unit.patches.iter().position(|&p| p == pi).map(|row| (u, row)))
                    .flatten()
            })
            .ok_or_else(|| Error::Range(format!("no fitted block for patch {pi} of group {gop}")))
    }

    /// Predicted `[frames × P² × C]` values of every block, in block order.
    pub fn predict_blocks(&self) -> Result<Vec<Vec<f64>>> {
        let coords = patch_coords(self.grid.patch);
        let mut out = vec![Vec::new(); self.grid.block_count()];
        for unit in &self.units {
            let (_, len) = self.grid.gop_span(unit.gop);
            let queries: Vec<Query> = (0..unit.patches.len())
                .flat_map(|j| {
                    (0..len).map(move |k| Query {
                        patch: j,
                        t: gop_time(k, len),
                    })
                })
                .collect();
            let pred = unit.model.predict(&coords, &queries)?;
            let per_block = len * coords.rows() * self.channels;
            for (j, &pi) in unit.patches.iter().enumerate() {
                out[self.grid.block_index(unit.gop, pi)] = pred.data()[j * per_block..(j + 1) * per_block].to_vec();
            }
        }
        Ok(out)
    }

    /// Reconstruction at every frame of the original video.
    pub fn render(&self) -> Result<VideoTensor> {
        let blocks = self.predict_blocks()?;
        let refs: Vec<Option<&[f64]>> = blocks.iter().map(|b| Some(b.as_slice())).collect();
        let mut video = assemble(&self.grid, self.channels, &refs)?;
        let seams = super::sample::seam_frames(self);
        if !seams.is_empty() {
            let times: Vec<f64> = seams.iter().map(|&f| f as f64).collect();
            let blended = super::sample::render_grid(self, self.grid.height, self.grid.width, &times)?;
            let n = self.grid.height * self.grid.width * self.channels;
            let data = video.data_mut();
            for (k, &f) in seams.iter().enumerate() {
                data[f * n..(f + 1) * n].copy_from_slice(&blended.data()[k * n..(k + 1) * n]);
            }
        }
        Ok(video)
    }

    pub fn parameter_count(&self) -> usize {
        self.units.iter().map(|u| u.model.parameter_count()).sum()
    }
}

/// Fits every block of `video` and renders the reconstruction.
pub fn fit_video_with(video: &VideoTensor, config: &FitConfig, kind: BiasKind) -> Result<FitReport> {
    config.validate()?;
    let start = Instant::now();
    let grid = PatchGrid::for_video(video, config.patch, config.gop, config.overlap)?;
    let blocks = partition_with(video, &grid)?;
    let layout = unit_layout(&grid, config.share_weights);
    for g in 0..grid.gops {
        let (t0, len) = grid.gop_span(g);
        if train_indices(t0, len, config.stride).is_empty() {
            return Err(Error::Config(format!(
                "group of pictures {g} (frames {t0}..{}) contains no training frame",
                t0 + len
            )));
        }
    }

    let run = |u: usize, warm: Option<&BlockModel>| -> Result<FitOutcome> {
        let (g, patches) = &layout[u];
        let members: Vec<&Block> = patches.iter().map(|&p| &blocks[grid.block_index(*g, p)]).collect();
        let (t0, len) = grid.gop_span(*g);
        fit_unit(&members, &train_indices(t0, len, config.stride), config, kind, warm, u)
    };

    let outcomes: Vec<FitOutcome> = if config.warm_start {
        let per_gop = layout.len() / grid.gops;
        let chains: Vec<Vec<FitOutcome>> = (0..per_gop)
            .into_par_iter()
            .map(|slot| {
                let mut chain: Vec<FitOutcome> = Vec::with_capacity(grid.gops);
                for g in 0..grid.gops {
                    let warm = chain.last().map(|o| &o.model);
                    chain.push(run(g * per_gop + slot, warm)?);
                }
                Ok(chain)
            })
            .collect::<Result<_>>()?;
        let mut slots: Vec<_> = chains.into_iter().map(|c| c.into_iter()).collect();
        (0..layout.len())
            .map(|u| slots[u % per_gop].next().expect("one outcome per group"))
            .collect()
    } else {
        (0..layout.len())
            .into_par_iter()
            .map(|u| run(u, None))
            .collect::<Result<_>>()?
    };

    let mut loss_curves = Vec::with_capacity(outcomes.len());
    let mut units = Vec::with_capacity(outcomes.len());
    for ((gop, patches), o) in layout.into_iter().zip(outcomes) {
        loss_curves.push(o.loss_curve);
        units.push(UnitModel {
            gop,
            patches,
            model: o.model,
        });
    }
    let bundle = ModelBundle {
        config: config.clone(),
        grid,
        channels: video.channels(),
        kind,
        units,
    };
    let reconstruction = bundle.render()?;
    let train_frames = (0..video.frames()).filter(|f| f % config.stride == 0).collect();
    Ok(FitReport {
        bundle,
        reconstruction,
        loss_curves,
        train_frames,
        elapsed: start.elapsed(),
    })
}

pub fn fit_video(video: &VideoTensor, config: &FitConfig) -> Result<FitReport> {
    fit_video_with(video, config, BiasKind::Hyper)
}
