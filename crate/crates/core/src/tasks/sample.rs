//! Evaluation of a fitted model at arbitrary space-time positions.

use std::collections::BTreeMap;

use super::fit::{train_indices, ModelBundle};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::inr::Query;
use crate::video::{PatchGrid, VideoTensor};

/// A continuous query position. Pixel `j` spans `[j, j + 1)` (centre `j + 0.5`)
/// along `x` and `y`; frame `k` sits at `t = k`. The valid extent is
/// `[0, W] × [0, H] × [−0.5, T − 0.5]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Continuous version of the blending ramp at local position `u ∈ [0, P]`.
fn ramp(u: f64, p: usize, overlap: usize, has_prev: bool, has_next: bool) -> f64 {
    let o = overlap as f64;
    if overlap > 0 && has_prev && u < o {
        u / o
    } else if overlap > 0 && has_next && u > p as f64 - o {
        (p as f64 - u) / o
    } else {
        1.0
    }
}

/// Windows along one axis containing `v`: `(window, local position, weight)`.
fn axis_windows(v: f64, count: usize, grid: &PatchGrid) -> Vec<(usize, f64, f64)> {
    let (s, p) = (grid.stride() as f64, grid.patch as f64);
    let mut out = Vec::with_capacity(2);
    for k in 0..count {
        let u = v - k as f64 * s;
        let last = k + 1 == count;
        let inside = u >= 0.0 && (u < p || (last && u <= p));
        if inside {
            if grid.overlap == 0 {
                return vec![(k, u, 1.0)];
            }
            let w = ramp(u, grid.patch, grid.overlap, k > 0, !last);
            if w > 0.0 {
                out.push((k, u, w));
            }
        }
    }
    out
}

/// Groups of pictures contributing at time `t`: `(gop, normalized time, weight)`.
/// Between the last trained frame of one group and the first of the next, the
/// two groups' predictions are blended linearly.
fn time_segments(t: f64, grid: &PatchGrid, stride: usize) -> Vec<(usize, f64, f64)> {
    let tau = |g: usize| {
        let (t0, len) = grid.gop_span(g);
        if len <= 1 {
            0.0
        } else {
            (t - t0 as f64) / (len - 1) as f64
        }
    };
    let trained = |g: usize| {
        let (t0, len) = grid.gop_span(g);
        let idx = train_indices(t0, len, stride.max(1));
        match (idx.first(), idx.last()) {
            (Some(&a), Some(&b)) => ((t0 + a) as f64, (t0 + b) as f64),
            _ => (t0 as f64, (t0 + len - 1) as f64),
        }
    };
    for g in 0..grid.gops {
        let (first, last) = trained(g);
        if t <= last || (g == 0 && t < first) {
            return vec![(g, tau(g), 1.0)];
        }
        if g + 1 < grid.gops {
            let next = trained(g + 1).0;
            if t < next {
                let w = (t - last) / (next - last);
                return vec![(g, tau(g), 1.0 - w), (g + 1, tau(g + 1), w)];
            }
        }
    }
    let g = grid.gops - 1;
    vec![(g, tau(g), 1.0)]
}

/// Frames that fall between two groups' trained frames and so need blending.
pub(crate) fn seam_frames(bundle: &ModelBundle) -> Vec<usize> {
    (0..bundle.grid.frames)
        .filter(|&f| time_segments(f as f64, &bundle.grid, bundle.config.stride).len() > 1)
        .collect()
}

fn check_extent(p: &SamplePoint, grid: &PatchGrid) -> Result<()> {
    let (w, h, t) = (grid.width as f64, grid.height as f64, grid.frames as f64);
    let ok = (0.0..=w).contains(&p.x) && (0.0..=h).contains(&p.y) && (-0.5..=t - 0.5).contains(&p.t);
    if ok {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "point (x={}, y={}, t={}) lies outside [0, {w}] × [0, {h}] × [-0.5, {}]",
            p.x,
            p.y,
            p.t,
            t - 0.5
        )))
    }
}

/// Model output at each point, `points.len() × C` values clamped to `[0, 1]`.
pub fn sample_continuous(bundle: &ModelBundle, points: &[SamplePoint]) -> Result<Vec<f64>> {
    let grid = &bundle.grid;
    let c = bundle.channels;
    let pf = grid.patch as f64;
    let mut slot = vec![None; grid.block_count()];
    for (u, unit) in bundle.units.iter().enumerate() {
        for (row, &pi) in unit.patches.iter().enumerate() {
            slot[grid.block_index(unit.gop, pi)] = Some((u, row));
        }
    }

    // (unit, row, τ bits) → contributions (point, x, y, weight)
    type Contribs = Vec<(usize, f64, f64, f64)>;
    let mut groups: BTreeMap<(usize, usize, u64), Contribs> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        check_extent(p, grid)?;
        let times = time_segments(p.t, grid, bundle.config.stride);
        for (r, uy, wy) in axis_windows(p.y, grid.rows, grid) {
            for (cl, ux, wx) in axis_windows(p.x, grid.cols, grid) {
                let pi = r * grid.cols + cl;
                for &(g, tau, wt) in &times {
                    if wt <= 0.0 {
                        continue;
                    }
                    let (u, row) = slot[grid.block_index(g, pi)]
                        .ok_or_else(|| Error::Range(format!("no fitted block for patch {pi} of group {g}")))?;
                    let nx = (2.0 * ux - pf) / pf;
                    let ny = (2.0 * uy - pf) / pf;
                    groups
                        .entry((u, row, tau.to_bits()))
                        .or_default()
                        .push((i, nx, ny, wy * wx * wt));
                }
            }
        }
    }

    let mut acc = vec![0.0; points.len() * c];
    let mut weight = vec![0.0; points.len()];
    for ((u, row, tau), contribs) in groups {
        let coords = Tensor::new(
            vec![contribs.len(), 2],
            contribs.iter().flat_map(|&(_, x, y, _)| [x, y]).collect(),
        )?;
        let pred = bundle.units[u].model.predict(
            &coords,
            &[Query {
                patch: row,
                t: f64::from_bits(tau),
            }],
        )?;
        for (k, &(i, _, _, w)) in contribs.iter().enumerate() {
            weight[i] += w;
            for ch in 0..c {
                acc[i * c + ch] += w * pred.data()[k * c + ch];
            }
        }
    }
    for (i, &w) in weight.iter().enumerate() {
        if w <= 0.0 {
            return Err(Error::Assembly(format!("query {i} received no contribution")));
        }
        for ch in 0..c {
            acc[i * c + ch] = (acc[i * c + ch] / w).clamp(0.0, 1.0);
        }
    }
    Ok(acc)
}

/// Renders `times.len()` frames of `height × width` pixels covering the full
/// spatial extent of the fitted video.
pub fn render_grid(bundle: &ModelBundle, height: usize, width: usize, times: &[f64]) -> Result<VideoTensor> {
    let sx = bundle.grid.width as f64 / width as f64;
    let sy = bundle.grid.height as f64 / height as f64;
    let mut points = Vec::with_capacity(times.len() * height * width);
    for &t in times {
        for y in 0..height {
            for x in 0..width {
                points.push(SamplePoint {
                    x: (x as f64 + 0.5) * sx,
                    y: (y as f64 + 0.5) * sy,
                    t,
                });
            }
        }
    }
    let values = sample_continuous(bundle, &points)?;
    VideoTensor::new(times.len(), height, width, bundle.channels, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_windows_pick_one_patch() {
        let grid = PatchGrid::new(4, 32, 32, 16, 2, 0).unwrap();
        assert_eq!(axis_windows(15.9, grid.cols, &grid), vec![(0, 15.9, 1.0)]);
        assert_eq!(axis_windows(16.0, grid.cols, &grid), vec![(1, 0.0, 1.0)]);
        assert_eq!(axis_windows(32.0, grid.cols, &grid), vec![(1, 16.0, 1.0)]);
    }

    #[test]
    fn overlap_weights_sum_to_one() {
        let grid = PatchGrid::new(1, 40, 40, 16, 1, 4).unwrap();
        for i in 0..=400 {
            let v = i as f64 * 0.1;
            let ws = axis_windows(v, grid.cols, &grid);
            let total: f64 = ws.iter().map(|w| w.2).sum();
            assert!((total - 1.0).abs() < 1e-12, "v={v}: {ws:?}");
        }
    }

    #[test]
    fn gaps_between_groups_blend() {
        let grid = PatchGrid::new(8, 16, 16, 16, 4, 0).unwrap();
        assert_eq!(time_segments(2.0, &grid, 1), vec![(0, 2.0 / 3.0, 1.0)]);
        let seg = time_segments(3.25, &grid, 1);
        assert_eq!(seg.len(), 2);
        assert!((seg[0].2 - 0.75).abs() < 1e-12 && (seg[1].2 - 0.25).abs() < 1e-12);
        assert!((seg[0].1 - 3.25 / 3.0).abs() < 1e-12);
        assert!((seg[1].1 + 0.75 / 3.0).abs() < 1e-12);
        assert_eq!(time_segments(-0.5, &grid, 1)[0].0, 0);
        assert_eq!(time_segments(7.5, &grid, 1), vec![(1, 3.5 / 3.0, 1.0)]);
    }

    #[test]
    fn held_out_seam_frames_blend_trained_neighbours() {
        let grid = PatchGrid::new(16, 16, 16, 16, 8, 0).unwrap();
        let seg = time_segments(7.0, &grid, 2);
        assert_eq!(seg.len(), 2);
        assert!((seg[0].2 - 0.5).abs() < 1e-12 && (seg[1].2 - 0.5).abs() < 1e-12);
        assert_eq!(time_segments(6.0, &grid, 2), vec![(0, 6.0 / 7.0, 1.0)]);
        assert_eq!(time_segments(8.0, &grid, 2), vec![(1, 0.0, 1.0)]);
        assert_eq!(time_segments(15.0, &grid, 2), vec![(1, 1.0, 1.0)]);
    }
}
