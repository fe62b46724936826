//! Binary model bundle: `ACTINR1`, a little-endian length-prefixed JSON header,
//! then every unit's parameters as little-endian `f64` in partition order.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::FitConfig;
use super::fit::{BiasKind, ModelBundle, UnitModel};
use crate::error::{Error, Result};
use crate::inr::{init_params, BiasSource, BlockModel, HyperBias, RffEncoder, TableLookup};
use crate::video::PatchGrid;

pub const MAGIC: &[u8; 7] = b"ACTINR1";

#[derive(Serialize, Deserialize)]
struct GridHeader {
    frames: usize,
    height: usize,
    width: usize,
    patch: usize,
    gop: usize,
    overlap: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum UnitBias {
    Hyper,
    Table { lookup: TableLookup, times: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct UnitHeader {
    gop: usize,
    patches: Vec<usize>,
    bias: UnitBias,
    /// Number of `f64` values in this unit's payload.
    values: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: Map<String, Value>,
    grid: GridHeader,
    channels: usize,
    kind: BiasKind,
    units: Vec<UnitHeader>,
}

fn unit_values(model: &BlockModel) -> Vec<f64> {
    let mut out: Vec<f64> = model.tensors().iter().flat_map(|t| t.data().iter().copied()).collect();
    if let BiasSource::Hyper(h) = &model.bias {
        out.extend_from_slice(h.encoder.frequencies());
    }
    out
}

pub fn encode_bundle(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let g = &bundle.grid;
    let mut payloads = Vec::with_capacity(bundle.units.len());
    let units = bundle
        .units
        .iter()
        .map(|u| {
            let values = unit_values(&u.model);
            let bias = match &u.model.bias {
                BiasSource::Hyper(_) => UnitBias::Hyper,
                BiasSource::Table(t) => UnitBias::Table {
                    lookup: t.lookup,
                    times: t.times.clone(),
                },
            };
            let h = UnitHeader {
                gop: u.gop,
                patches: u.patches.clone(),
                bias,
                values: values.len(),
            };
            payloads.push(values);
            h
        })
        .collect();
    let header = Header {
        config: bundle.config.to_flat(),
        grid: GridHeader {
            frames: g.frames,
            height: g.height,
            width: g.width,
            patch: g.patch,
            gop: g.gop,
            overlap: g.overlap,
        },
        channels: bundle.channels,
        kind: bundle.kind,
        units,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Bundle(e.to_string()))?;
    let total: usize = payloads.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 8 * total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payloads.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Bundle(format!("truncated while reading {what}")))?;
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

fn rebuild_unit(config: &FitConfig, channels: usize, h: &UnitHeader, values: &[f64]) -> Result<BlockModel> {
    let arch = config.arch(channels);
    let init = init_params(&arch, h.patches.len(), &mut ChaCha8Rng::seed_from_u64(0));
    let mut model = match &h.bias {
        UnitBias::Hyper => BlockModel::new_hyper(arch, init),
        UnitBias::Table { lookup, times } => BlockModel::new_table(arch, init.frame, times.clone(), *lookup),
    };
    let mut rest = values;
    for t in model.tensors_mut() {
        let n = t.len();
        if rest.len() < n {
            return Err(Error::Bundle("unit payload shorter than its architecture".into()));
        }
        t.data_mut().copy_from_slice(&rest[..n]);
        rest = &rest[n..];
    }
    if let BiasSource::Hyper(HyperBias { encoder, .. }) = &mut model.bias {
        if rest.len() < config.rff_size {
            return Err(Error::Bundle(
                "unit payload is missing time-encoding frequencies".into(),
            ));
        }
        *encoder = RffEncoder::from_frequencies(rest[..config.rff_size].to_vec());
        rest = &rest[config.rff_size..];
    }
    if !rest.is_empty() {
        return Err(Error::Bundle(format!(
            "unit payload has {} unexpected values",
            rest.len()
        )));
    }
    Ok(model)
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    let mut pos = 0;
    if take(bytes, &mut pos, MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Bundle("bad magic".into()));
    }
    let len = u64::from_le_bytes(take(bytes, &mut pos, 8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Bundle("header length overflows".into()))?;
    let header: Header =
        serde_json::from_slice(take(bytes, &mut pos, len, "header")?).map_err(|e| Error::Bundle(e.to_string()))?;
    let config = FitConfig::default().apply_flat(&header.config)?;
    let gh = &header.grid;
    let grid = PatchGrid::new(gh.frames, gh.height, gh.width, gh.patch, gh.gop, gh.overlap)?;

    let mut units = Vec::with_capacity(header.units.len());
    for h in &header.units {
        if h.gop >= grid.gops || h.patches.iter().any(|&p| p >= grid.spatial_patches()) {
            return Err(Error::Bundle(format!("unit of group {} lies outside the grid", h.gop)));
        }
        let raw = take(bytes, &mut pos, h.values.saturating_mul(8), "unit payload")?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        units.push(UnitModel {
            gop: h.gop,
            patches: h.patches.clone(),
            model: rebuild_unit(&config, header.channels, h, &values)?,
        });
    }
    if pos != bytes.len() {
        return Err(Error::Bundle(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(ModelBundle {
        config,
        grid,
        channels: header.channels,
        kind: header.kind,
        units,
    })
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    std::fs::write(path, encode_bundle(bundle)?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    decode_bundle(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
