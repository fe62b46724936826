//! Frame INR with per-frame biases supplied by a time-conditioned hypernetwork
//! (or, for baselines, by a lookup table).
//!
//! A block model owns the weights shared by every frame of one group of
//! pictures, one base bias row per patch, and a [`BiasSource`]. Evaluating a
//! [`Query`] `(patch, t)` resolves the per-layer biases for that patch and time
//! and runs the frame INR over a batch of spatial coordinates.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use super::rff::RffEncoder;
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// How the hypernetwork (or table) output combines with the base biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// `b + β(t)`
    Additive,
    /// `β(t)` alone
    Replace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InrArch {
    /// Affine maps in the frame INR, output layer included.
    pub layers: usize,
    pub hidden: usize,
    pub channels: usize,
    pub activation: ActivationKind,
    pub rff_size: usize,
    pub rff_variance: f64,
    pub latent_dim: usize,
    pub trunk_width: usize,
    pub trunk_depth: usize,
    pub bias_mode: BiasMode,
    /// Whether the output layer bias is also driven by the bias source.
    pub modulate_output: bool,
}

impl Default for InrArch {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 36,
            channels: 1,
            activation: ActivationKind::wire(),
            rff_size: 40,
            rff_variance: 5.0,
            latent_dim: 16,
            trunk_width: 64,
            trunk_depth: 2,
            bias_mode: BiasMode::Additive,
            modulate_output: false,
        }
    }
}

impl InrArch {
    pub fn validate(&self) -> Result<()> {
        self.activation.validate()?;
        if self.layers < 2 {
            return Err(Error::Config(format!(
                "frame INR needs at least 2 layers, got {}",
                self.layers
            )));
        }
        if self.hidden == 0 || self.channels == 0 || self.trunk_width == 0 || self.trunk_depth == 0 {
            return Err(Error::Config("network widths and depths must be positive".into()));
        }
        if self.rff_variance < 0.0 {
            return Err(Error::Config("rff variance must be non-negative".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every frame-INR layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let fan_in = if l == 0 { 2 } else { self.hidden };
                let fan_out = if l + 1 == self.layers {
                    self.channels
                } else {
                    self.hidden
                };
                (fan_in, fan_out)
            })
            .collect()
    }

    /// Number of leading layers whose bias is modulated over time.
    pub fn modulated_layers(&self) -> usize {
        if self.modulate_output {
            self.layers
        } else {
            self.layers - 1
        }
    }

    pub fn hyper_input_dim(&self) -> usize {
        2 * self.rff_size + self.latent_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `[out × in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

/// Weights shared across frames, plus one base bias row per patch.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInrParams {
    pub weights: Vec<Tensor>,
    /// `[patches × out_l]` per layer.
    pub biases: Vec<Tensor>,
}

impl FrameInrParams {
    pub fn patches(&self) -> usize {
        self.biases.first().map_or(0, Tensor::rows)
    }
}

/// Trunk on `[γ(t); z]` followed by one linear head per modulated layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasInrParams {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Dense>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperBias {
    pub psi: BiasInrParams,
    /// `[patches × latent_dim]`
    pub latents: Tensor,
    pub encoder: RffEncoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableLookup {
    /// Only stored times may be queried.
    Exact,
    /// Linear interpolation between the two nearest stored times, clamped at the ends.
    Linear,
    Nearest,
}

/// Free per-frame bias offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasTable {
    /// Sorted ascending.
    pub times: Vec<f64>,
    /// Per modulated layer, `[patches · times × out_l]`, row `patch * times.len() + k`.
    /// Stored unscaled; the effective offset is `OFFSET_SCALE` times the entry.
    pub offsets: Vec<Tensor>,
    pub lookup: TableLookup,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BiasSource {
    Hyper(HyperBias),
    Table(BiasTable),
}

/// A point in a block's normalized time for one of its patches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub patch: usize,
    pub t: f64,
}

const TIME_TOL: f64 = 1e-9;

/// Fixed multiplier on every bias offset (hypernetwork heads and table entries).
/// Adam moves each parameter by about the learning rate per step, so without it
/// a single step can shift a bias by far more than the width of a Gabor envelope.
pub const OFFSET_SCALE: f64 = 0.1;

/// First-layer Gabor weights are drawn so that `ω·bound·fan_in` equals this.
const GABOR_FIRST_PHASE: f64 = 20.0;

/// Hidden Gabor layers use the sine-network bound `√(6/fan_in)/ω` times this gain;
/// the envelope keeps most activations well below 1, so a larger spread is needed.
const GABOR_HIDDEN_GAIN: f64 = 4.0;

/// Fresh parameters for one block.
#[derive(Clone, Debug)]
pub struct InitParams {
    pub frame: FrameInrParams,
    pub psi: BiasInrParams,
    pub latents: Tensor,
    pub encoder: RffEncoder,
}

fn uniform_tensor<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = if bound > 0.0 {
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        (0..n).map(|_| dist.sample(rng)).collect()
    } else {
        vec![0.0; n]
    };
    Tensor::new(shape.to_vec(), data).expect("shape matches buffer")
}

/// Weight bound for frame-INR layer `l` with the given fan-in.
pub fn frame_weight_bound(activation: ActivationKind, layer: usize, fan_in: usize, last: bool) -> f64 {
    let base = 1.0 / (fan_in as f64).sqrt();
    match activation {
        ActivationKind::Sine { omega } if !last => {
            if layer == 0 {
                1.0 / fan_in as f64
            } else {
                (6.0 / fan_in as f64).sqrt() / omega
            }
        }
        ActivationKind::GaborWire { omega, .. } if !last => {
            if layer == 0 {
                GABOR_FIRST_PHASE / (omega * fan_in as f64)
            } else {
                GABOR_HIDDEN_GAIN * (6.0 / fan_in as f64).sqrt() / omega
            }
        }
        _ => base,
    }
}

pub fn init_params<R: Rng + ?Sized>(arch: &InrArch, patches: usize, rng: &mut R) -> InitParams {
    let dims = arch.layer_dims();
    let mut weights = Vec::with_capacity(dims.len());
    let mut biases = Vec::with_capacity(dims.len());
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let last = l + 1 == dims.len();
        let wb = frame_weight_bound(arch.activation, l, fan_in, last);
        weights.push(uniform_tensor(&[fan_out, fan_in], wb, rng));
        biases.push(uniform_tensor(&[patches, fan_out], 1.0 / (fan_in as f64).sqrt(), rng));
    }

    let mut trunk = Vec::with_capacity(arch.trunk_depth);
    let mut fan_in = arch.hyper_input_dim();
    for _ in 0..arch.trunk_depth {
        let bound = 1.0 / (fan_in as f64).sqrt();
        trunk.push(Dense {
            weight: uniform_tensor(&[arch.trunk_width, fan_in], bound, rng),
            bias: uniform_tensor(&[arch.trunk_width], bound, rng),
        });
        fan_in = arch.trunk_width;
    }
    let heads = dims[..arch.modulated_layers()]
        .iter()
        .map(|&(_, out)| Dense {
            weight: uniform_tensor(&[out, fan_in], 1.0 / (fan_in as f64).sqrt(), rng),
            bias: Tensor::zeros(&[out]),
        })
        .collect();

    let normal = Normal::new(0.0, 0.01).expect("valid std");
    let latents = Tensor::new(
        vec![patches, arch.latent_dim],
        (0..patches * arch.latent_dim).map(|_| normal.sample(rng)).collect(),
    )
    .expect("shape matches buffer");
    let encoder = RffEncoder::sample(arch.rff_size, arch.rff_variance, rng);
    InitParams {
        frame: FrameInrParams { weights, biases },
        psi: BiasInrParams { trunk, heads },
        latents,
        encoder,
    }
}

/// Runs the frame INR over `coords` once per bias row.
///
/// `coords` is `[n × 2]` (shared by every query) or `[Q·n × 2]`; each entry of
/// `biases` is `[Q × out_l]`. The result is `[Q·n × C]`, query-major.
pub fn frame_forward_graph(
    g: &mut Graph,
    activation: ActivationKind,
    weights: &[Var],
    biases: &[Var],
    coords: Var,
    group_len: usize,
) -> Result<Var> {
    if weights.len() != biases.len() {
        return Err(Error::dim(
            "frame_inr_forward",
            format!("{} weight matrices but {} bias sets", weights.len(), biases.len()),
        ));
    }
    let mut y = coords;
    for (l, (&w, &b)) in weights.iter().zip(biases).enumerate() {
        let pre = g.linear(y, w, None)?;
        let z = g.add_grouped(pre, b, group_len)?;
        y = if l + 1 == weights.len() {
            z
        } else {
            activation.apply(g, z)?
        };
    }
    Ok(y)
}

/// Frame INR output for `coords: [N × 2]` with explicit biases for every layer.
pub fn frame_inr_forward(
    coords: &Tensor,
    frame: &FrameInrParams,
    activation: ActivationKind,
    biases: &[Vec<f64>],
) -> Result<Tensor> {
    let mut g = Graph::new();
    let weights: Vec<Var> = frame.weights.iter().map(|w| g.constant(w.clone())).collect();
    let bias_vars = biases
        .iter()
        .map(|b| Tensor::new(vec![1, b.len()], b.clone()).map(|t| g.constant(t)))
        .collect::<Result<Vec<_>>>()?;
    let c = g.constant(coords.clone());
    let out = frame_forward_graph(&mut g, activation, &weights, &bias_vars, c, coords.rows())?;
    Ok(g.value(out).clone())
}

impl HyperBias {
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for d in self.psi.trunk.iter().chain(&self.psi.heads) {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out.push(&self.latents);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for d in self.psi.trunk.iter_mut().chain(self.psi.heads.iter_mut()) {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out.push(&mut self.latents);
        out
    }

    /// Per-head bias offsets for each query, `[Q × out_l]` per head.
    fn graph_offsets(&self, g: &mut Graph, vars: &[Var], queries: &[Query]) -> Result<Vec<Var>> {
        let depth = self.psi.trunk.len();
        let latents = vars[vars.len() - 1];
        let times: Vec<f64> = queries.iter().map(|q| q.t).collect();
        let gamma = g.constant(self.encoder.encode_batch(&times));
        let z = g.gather_rows(latents, queries.iter().map(|q| q.patch).collect())?;
        let mut h = g.concat_cols(gamma, z)?;
        for k in 0..depth {
            let pre = g.linear(h, vars[2 * k], Some(vars[2 * k + 1]))?;
            h = ActivationKind::Gelu.apply(g, pre)?;
        }
        (0..self.psi.heads.len())
            .map(|k| {
                let i = 2 * (depth + k);
                let raw = g.linear(h, vars[i], Some(vars[i + 1]))?;
                g.scale(raw, OFFSET_SCALE)
            })
            .collect()
    }

    /// Bias offsets `β^(l)(t)` for one patch, one vector per modulated layer.
    pub fn forward(&self, t: f64, patch: usize) -> Result<Vec<Vec<f64>>> {
        if patch >= self.latents.rows() {
            return Err(Error::Range(format!("patch {patch} of {}", self.latents.rows())));
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = self.tensors().into_iter().map(|t| g.constant(t.clone())).collect();
        let heads = self.graph_offsets(&mut g, &vars, &[Query { patch, t }])?;
        Ok(heads.iter().map(|&h| g.value(h).data().to_vec()).collect())
    }
}

/// Bias-INR output for time `t` and latent `z`, bypassing the per-patch latent table.
pub fn bias_inr_forward(t: f64, z: &[f64], psi: &BiasInrParams, encoder: &RffEncoder) -> Result<Vec<Vec<f64>>> {
    let hyper = HyperBias {
        psi: psi.clone(),
        latents: Tensor::new(vec![1, z.len()], z.to_vec())?,
        encoder: encoder.clone(),
    };
    hyper.forward(t, 0)
}

impl BiasTable {
    fn slot(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= TIME_TOL)
    }

    fn patches(&self) -> usize {
        self.offsets.first().map_or(0, |o| o.rows() / self.times.len().max(1))
    }

    /// Interpolation weights over stored slots for time `t`.
    fn weights_for(&self, t: f64) -> Result<Vec<(usize, f64)>> {
        if let Some(k) = self.slot(t) {
            return Ok(vec![(k, 1.0)]);
        }
        let n = self.times.len();
        match self.lookup {
            TableLookup::Exact => Err(Error::Contract(format!(
                "bias table has no entry at t = {t}; lookup tables cannot interpolate"
            ))),
            TableLookup::Nearest => {
                let k = (0..n)
                    .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
                    .ok_or_else(|| Error::Contract("empty bias table".into()))?;
                Ok(vec![(k, 1.0)])
            }
            TableLookup::Linear => {
                if n == 0 {
                    return Err(Error::Contract("empty bias table".into()));
                }
                if t <= self.times[0] {
                    return Ok(vec![(0, 1.0)]);
                }
                if t >= self.times[n - 1] {
                    return Ok(vec![(n - 1, 1.0)]);
                }
                let hi = self
                    .times
                    .iter()
                    .position(|&s| s > t)
                    .expect("t is inside the table range");
                let lo = hi - 1;
                let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
                Ok(vec![(lo, 1.0 - w), (hi, w)])
            }
        }
    }

    /// Offsets for one patch and time, one vector per modulated layer.
    pub fn lookup_offsets(&self, patch: usize, t: f64) -> Result<Vec<Vec<f64>>> {
        let slots = self.weights_for(t)?;
        let n = self.times.len();
        Ok(self
            .offsets
            .iter()
            .map(|o| {
                let mut v = vec![0.0; o.cols()];
                for &(k, w) in &slots {
                    for (a, b) in v.iter_mut().zip(o.row(patch * n + k)) {
                        *a += w * (b * OFFSET_SCALE);
                    }
                }
                v
            })
            .collect())
    }

    fn graph_offsets(&self, g: &mut Graph, vars: &[Var], queries: &[Query]) -> Result<Vec<Var>> {
        let n = self.times.len();
        let exact: Option<Vec<usize>> = queries
            .iter()
            .map(|q| self.slot(q.t).map(|k| q.patch * n + k))
            .collect();
        match exact {
            Some(rows) => vars
                .iter()
                .map(|&v| {
                    let picked = g.gather_rows(v, rows.clone())?;
                    g.scale(picked, OFFSET_SCALE)
                })
                .collect(),
            None => {
                // Interpolated lookups are evaluation-only; they carry no gradient.
                let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); self.offsets.len()];
                for q in queries {
                    for (acc, v) in per_layer.iter_mut().zip(self.lookup_offsets(q.patch, q.t)?) {
                        acc.extend(v);
                    }
                }
                per_layer
                    .into_iter()
                    .zip(&self.offsets)
                    .map(|(data, o)| Tensor::new(vec![queries.len(), o.cols()], data).map(|t| g.constant(t)))
                    .collect()
            }
        }
    }
}

/// All trainable state of one block plus its architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockModel {
    pub arch: InrArch,
    pub frame: FrameInrParams,
    pub bias: BiasSource,
}

impl BlockModel {
    pub fn new_hyper(arch: InrArch, init: InitParams) -> Self {
        Self {
            arch,
            frame: init.frame,
            bias: BiasSource::Hyper(HyperBias {
                psi: init.psi,
                latents: init.latents,
                encoder: init.encoder,
            }),
        }
    }

    /// Table-biased model with zero initial offsets at `times`.
    pub fn new_table(arch: InrArch, frame: FrameInrParams, times: Vec<f64>, lookup: TableLookup) -> Self {
        let patches = frame.patches();
        let offsets = arch.layer_dims()[..arch.modulated_layers()]
            .iter()
            .map(|&(_, out)| Tensor::zeros(&[patches * times.len(), out]))
            .collect();
        Self {
            arch,
            frame,
            bias: BiasSource::Table(BiasTable { times, offsets, lookup }),
        }
    }

    pub fn patches(&self) -> usize {
        self.frame.patches()
    }

    /// Trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.frame.weights.iter().chain(&self.frame.biases).collect();
        match &self.bias {
            BiasSource::Hyper(h) => out.extend(h.tensors()),
            BiasSource::Table(t) => out.extend(&t.offsets),
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self
            .frame
            .weights
            .iter_mut()
            .chain(self.frame.biases.iter_mut())
            .collect();
        match &mut self.bias {
            BiasSource::Hyper(h) => out.extend(h.tensors_mut()),
            BiasSource::Table(t) => out.extend(t.offsets.iter_mut()),
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Adds every tensor to `g` as a trainable leaf (or constant), in [`Self::tensors`] order.
    pub fn register(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.tensors()
            .into_iter()
            .map(|t| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect()
    }

    fn check_queries(&self, queries: &[Query]) -> Result<()> {
        let patches = self.patches();
        if let Some(q) = queries.iter().find(|q| q.patch >= patches) {
            return Err(Error::Range(format!("patch {} of {patches}", q.patch)));
        }
        if let BiasSource::Table(t) = &self.bias {
            if t.patches() != patches {
                return Err(Error::dim("bias_table", "table rows do not match patch count"));
            }
        }
        Ok(())
    }

    /// Effective per-layer bias matrices `[Q × out_l]` on the graph.
    fn graph_biases(&self, g: &mut Graph, vars: &[Var], queries: &[Query]) -> Result<Vec<Var>> {
        self.check_queries(queries)?;
        let layers = self.arch.layers;
        let patch_rows: Vec<usize> = queries.iter().map(|q| q.patch).collect();
        let source_vars = &vars[2 * layers..];
        let offsets = match &self.bias {
            BiasSource::Hyper(h) => h.graph_offsets(g, source_vars, queries)?,
            BiasSource::Table(t) => t.graph_offsets(g, source_vars, queries)?,
        };
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            let base = g.gather_rows(vars[layers + l], patch_rows.clone())?;
            let b = match (offsets.get(l), self.arch.bias_mode) {
                (Some(&off), BiasMode::Additive) => g.add(base, off)?,
                (Some(&off), BiasMode::Replace) => off,
                (None, _) => base,
            };
            out.push(b);
        }
        Ok(out)
    }

    /// Predictions `[Q·n × C]` for each query at the `n` coordinates in `coords`.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], coords: Var, queries: &[Query]) -> Result<Var> {
        let n = g.value(coords).rows();
        let biases = self.graph_biases(g, vars, queries)?;
        let weights = &vars[..self.arch.layers];
        frame_forward_graph(g, self.arch.activation, weights, &biases, coords, n)
    }

    /// Inference without gradient bookkeeping.
    pub fn predict(&self, coords: &Tensor, queries: &[Query]) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let c = g.constant(coords.clone());
        let out = self.forward(&mut g, &vars, c, queries)?;
        Ok(g.value(out).clone())
    }

    /// Bias offsets (not including base biases) for one patch at time `t`.
    pub fn offsets_at(&self, patch: usize, t: f64) -> Result<Vec<Vec<f64>>> {
        match &self.bias {
            BiasSource::Hyper(h) => h.forward(t, patch),
            BiasSource::Table(tab) => tab.lookup_offsets(patch, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_arch() -> InrArch {
        InrArch {
            hidden: 8,
            rff_size: 6,
            latent_dim: 3,
            trunk_width: 10,
            ..InrArch::default()
        }
    }

    fn coords(n: usize) -> Tensor {
        let data = (0..n).flat_map(|i| {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            [x, -x * 0.5]
        });
        Tensor::new(vec![n, 2], data.collect()).unwrap()
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let arch = small_arch();
        let mut init = init_params(&arch, 1, &mut ChaCha8Rng::seed_from_u64(0));
        for w in &mut init.frame.weights {
            w.data_mut().fill(0.0);
        }
        let out_bias = init.frame.biases[2].data()[0];
        let model = BlockModel::new_hyper(arch, init);
        let y = model.predict(&coords(5), &[Query { patch: 0, t: 0.3 }]).unwrap();
        assert!(y.data().iter().all(|&v| v == out_bias));
    }

    #[test]
    fn hand_evaluated_two_two_one_gabor() {
        let w1 = Tensor::matrix(&[vec![0.1, -0.2], vec![0.05, 0.3]]).unwrap();
        let w2 = Tensor::matrix(&[vec![0.7, -1.1]]).unwrap();
        let frame = FrameInrParams {
            weights: vec![w1, w2],
            biases: vec![Tensor::zeros(&[1, 2]), Tensor::zeros(&[1, 1])],
        };
        let biases = vec![vec![0.02, -0.01], vec![0.25]];
        let x = Tensor::matrix(&[vec![0.5, -0.25]]).unwrap();
        let act = ActivationKind::GaborWire {
            omega: 20.0,
            scale: 3.0,
        };
        let y = frame_inr_forward(&x, &frame, act, &biases).unwrap();

        let h = |z: f64| (20.0 * z).cos() * (-(3.0 * z) * (3.0 * z)).exp();
        let z1 = 0.1 * 0.5 - 0.2 * -0.25 + 0.02;
        let z2 = 0.05 * 0.5 + 0.3 * -0.25 - 0.01;
        let expected = 0.7 * h(z1) - 1.1 * h(z2) + 0.25;
        assert!((y.data()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn batched_queries_match_single_queries() {
        let arch = small_arch();
        let init = init_params(&arch, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let model = BlockModel::new_hyper(arch, init);
        let c = coords(7);
        let queries: Vec<Query> = (0..3)
            .flat_map(|p| [0.0, 0.5, 1.0].map(|t| Query { patch: p, t }))
            .collect();
        let batched = model.predict(&c, &queries).unwrap();
        for (qi, q) in queries.iter().enumerate() {
            let single = model.predict(&c, &[*q]).unwrap();
            assert_eq!(&batched.data()[qi * 7..(qi + 1) * 7], single.data());
        }
    }

    #[test]
    fn bias_injection_reproduces_plain_inr() {
        let arch = small_arch();
        let init = init_params(&arch, 1, &mut ChaCha8Rng::seed_from_u64(9));
        let model = BlockModel::new_hyper(arch.clone(), init);
        let c = coords(6);
        let t = 0.4;
        let offsets = model.offsets_at(0, t).unwrap();
        let mut biases: Vec<Vec<f64>> = model.frame.biases.iter().map(|b| b.data().to_vec()).collect();
        for (b, o) in biases.iter_mut().zip(&offsets) {
            for (x, y) in b.iter_mut().zip(o) {
                *x += y;
            }
        }
        let direct = frame_inr_forward(&c, &model.frame, arch.activation, &biases).unwrap();
        let via_model = model.predict(&c, &[Query { patch: 0, t }]).unwrap();
        assert!(direct.max_abs_diff(&via_model) < 1e-15);
    }

    #[test]
    fn heads_match_layers_and_vary_in_time() {
        for (layers, hidden, modulate_output) in [(2, 4, false), (3, 8, false), (4, 5, true)] {
            let arch = InrArch {
                layers,
                hidden,
                modulate_output,
                ..small_arch()
            };
            let init = init_params(&arch, 2, &mut ChaCha8Rng::seed_from_u64(11));
            let model = BlockModel::new_hyper(arch.clone(), init);
            let b0 = model.offsets_at(1, 0.0).unwrap();
            let b1 = model.offsets_at(1, 1.0).unwrap();
            assert_eq!(b0.len(), arch.modulated_layers());
            for (l, (&(_, out), (a, b))) in arch.layer_dims().iter().zip(b0.iter().zip(&b1)).enumerate() {
                assert_eq!(a.len(), out, "layer {l}");
                assert!(a.iter().zip(b).all(|(x, y)| x != y));
            }
            assert_eq!(b0, model.offsets_at(1, 0.0).unwrap());
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let arch = InrArch::default();
        let a = init_params(&arch, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let b = init_params(&arch, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let c = init_params(&arch, 2, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a.frame, b.frame);
        assert_eq!(a.psi, b.psi);
        assert_eq!(a.encoder, b.encoder);
        assert_ne!(a.frame, c.frame);
        let bound = frame_weight_bound(ActivationKind::wire(), 0, 2, false);
        assert!((bound - 0.1).abs() < 1e-15);
        assert!(a.frame.weights[0].data().iter().all(|v| v.abs() <= bound));
        let hidden = frame_weight_bound(ActivationKind::wire(), 1, 36, false);
        assert!((hidden - 4.0 * (6.0f64 / 36.0).sqrt() / 100.0).abs() < 1e-15);
        assert_eq!(frame_weight_bound(ActivationKind::wire(), 2, 36, true), 1.0 / 6.0);
        assert_eq!(
            frame_weight_bound(ActivationKind::gauss(), 0, 2, false),
            1.0 / 2f64.sqrt()
        );
    }

    #[test]
    fn table_lookup_modes() {
        let arch = InrArch {
            layers: 2,
            hidden: 2,
            ..small_arch()
        };
        let init = init_params(&arch, 1, &mut ChaCha8Rng::seed_from_u64(3));
        let mut model = BlockModel::new_table(arch, init.frame, vec![0.0, 0.5, 1.0], TableLookup::Linear);
        if let BiasSource::Table(t) = &mut model.bias {
            t.offsets[0] = Tensor::matrix(&[vec![0.0, 2.0], vec![4.0, 6.0], vec![8.0, 8.0]]).unwrap();
        }
        let close = |t: f64, want: [f64; 2]| {
            let got = model.offsets_at(0, t).unwrap();
            assert_eq!(got.len(), 1);
            for (g, w) in got[0].iter().zip(want) {
                assert!((g - OFFSET_SCALE * w).abs() < 1e-15, "t={t}: {got:?}");
            }
        };
        close(0.5, [4.0, 6.0]);
        close(0.25, [2.0, 4.0]);
        close(1.0, [8.0, 8.0]);
        if let BiasSource::Table(t) = &mut model.bias {
            t.lookup = TableLookup::Exact;
        }
        assert!(matches!(model.offsets_at(0, 0.25), Err(Error::Contract(_))));
        assert!(model.predict(&coords(3), &[Query { patch: 0, t: 0.25 }]).is_err());
        if let BiasSource::Table(t) = &mut model.bias {
            t.lookup = TableLookup::Nearest;
        }
        let got = model.offsets_at(0, 0.3).unwrap();
        assert_eq!(got, model.offsets_at(0, 0.5).unwrap());
    }
}
