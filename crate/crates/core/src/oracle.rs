//! Exact reference values for toy systems.
//!
//! * [`brute_force_value`]: minimum target value along the uncontrolled rollout.
//! * [`grid_brt`]: the same value at every node of a regular grid (d <= 3).
//! * [`exhaustive_lrf`]: filter maximizer over a dense deterministic ball set.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rollout, LatentSystem};
use crate::error::{Error, Result};
use crate::target::LatentTarget;
use crate::trajectory::{ensure_dim, LatentPoint};
use crate::value::ValueFunction;

pub const DEFAULT_ORACLE_HORIZON: usize = 50;
pub const MAX_GRID_DIM: usize = 3;
pub const MAX_GRID_NODES: usize = 10_000_000;

/// `min_{t <= T} l(z_t)` along the uncontrolled rollout from `z0`.
pub fn brute_force_value<S, L>(system: &S, z0: &LatentPoint, target: &L, horizon: usize) -> Result<f64>
where
    S: LatentSystem + ?Sized,
    L: LatentTarget + ?Sized,
{
    ensure_dim(system.dim(), z0.dim())?;
    if horizon == 0 {
        return target.eval(z0);
    }
    rollout(system, z0, horizon, None)?
        .iter()
        .try_fold(f64::INFINITY, |acc, z| Ok(acc.min(target.eval(z)?)))
}

/// The brute-force value wrapped as a [`ValueFunction`], so the exact value can
/// stand in for a trained network.
pub struct BruteForceValue<'a, S: ?Sized, L: ?Sized> {
    pub system: &'a S,
    pub target: &'a L,
    pub horizon: usize,
}

impl<S, L> ValueFunction for BruteForceValue<'_, S, L>
where
    S: LatentSystem + ?Sized,
    L: LatentTarget + ?Sized,
{
    fn input_dim(&self) -> usize {
        self.system.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        LatentPoint::new(z.to_vec())
            .and_then(|p| brute_force_value(self.system, &p, self.target, self.horizon))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Per-axis closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Node values on a regular grid, stored flat and row-major (axis 0 slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub bounds: Vec<AxisBounds>,
    pub resolution: Vec<usize>,
    pub horizon: usize,
    pub values: Vec<f64>,
}

impl ValueGrid {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn spacing(&self, axis: usize) -> f64 {
        let n = self.resolution[axis];
        if n > 1 {
            (self.bounds[axis].hi - self.bounds[axis].lo) / (n - 1) as f64
        } else {
            0.0
        }
    }

    /// Coordinates of the node with the given per-axis indices.
    pub fn node_at(&self, idx: &[usize]) -> LatentPoint {
        let coords = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| self.bounds[a].lo + i as f64 * self.spacing(a))
            .collect();
        LatentPoint::new(coords).expect("grid bounds are finite")
    }

    /// Per-axis indices of flat node `flat`.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        idx
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// All node coordinates in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = LatentPoint> + '_ {
        (0..self.len()).map(|k| self.node_at(&self.unflatten(k)))
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.flatten(idx)]
    }

    /// Multilinear interpolation, clamped to the grid box.
    pub fn interpolate(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0f64; d];
        for a in 0..d {
            let n = self.resolution[a];
            if n == 1 {
                continue;
            }
            let h = self.spacing(a);
            let f = ((z[a] - self.bounds[a].lo) / h).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = f - i as f64;
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (mask >> a) & 1 == 1;
                if up && self.resolution[a] == 1 {
                    w = 0.0;
                    break;
                }
                corner[a] = base[a] + usize::from(up);
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.value_at(&corner);
            }
        }
        acc
    }
}

impl ValueFunction for ValueGrid {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.interpolate(z)
    }
}

/// Brute-force value at every node of a regular grid. The sub-zero nodes are a
/// sampled backward reachable tube.
pub fn grid_brt<S, L>(
    system: &S,
    target: &L,
    bounds: &[AxisBounds],
    resolution: &[usize],
    horizon: usize,
) -> Result<ValueGrid>
where
    S: LatentSystem + ?Sized,
    L: LatentTarget + ?Sized,
{
    ensure_dim(system.dim(), bounds.len())?;
    ensure_dim(bounds.len(), resolution.len())?;
    if bounds.len() > MAX_GRID_DIM {
        return Err(Error::InvalidConfig(format!(
            "grid oracle supports at most {MAX_GRID_DIM} dimensions"
        )));
    }
    if resolution.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig("grid resolution must be positive".into()));
    }
    if bounds.iter().any(|b| !(b.lo <= b.hi) || !b.lo.is_finite() || !b.hi.is_finite()) {
        return Err(Error::InvalidConfig("grid bounds must satisfy lo <= hi".into()));
    }
    let total = resolution
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .filter(|&n| n <= MAX_GRID_NODES)
        .ok_or_else(|| Error::InvalidConfig(format!("grid exceeds {MAX_GRID_NODES} nodes")))?;
    let mut grid = ValueGrid {
        bounds: bounds.to_vec(),
        resolution: resolution.to_vec(),
        horizon,
        values: Vec::new(),
    };
    grid.values = (0..total)
        .into_par_iter()
        .map(|k| brute_force_value(system, &grid.node_at(&grid.unflatten(k)), target, horizon))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid)
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Deterministic dense set of `count` points in the closed `dim`-ball, preceded
/// by the origin. 1-D: evenly spaced. 2-D and 3-D: a low-discrepancy interior
/// fill plus an evenly spread boundary shell, since linear-like values peak on
/// the boundary.
pub fn dense_ball_points(dim: usize, radius: f64, count: usize) -> Result<Vec<LatentPoint>> {
    if dim == 0 || dim > MAX_GRID_DIM {
        return Err(Error::InvalidConfig(format!(
            "dense ball search supports 1..={MAX_GRID_DIM} dimensions"
        )));
    }
    let mut pts = Vec::with_capacity(count + 1);
    pts.push(vec![0.0; dim]);
    let golden = PI * (3.0 - 5f64.sqrt());
    if dim == 1 {
        for k in 0..count {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 1.0 };
            pts.push(vec![radius * (2.0 * t - 1.0)]);
        }
        return pts.into_iter().map(LatentPoint::new).collect();
    }
    let n = count as f64;
    let shell = if dim == 2 { 2.0 * PI * n.sqrt() } else { 4.0 * n.powf(2.0 / 3.0) };
    let shell = (shell.ceil() as usize).min(count / 2);
    let interior = count - shell;
    for k in 1..=interior as u64 {
        let p = if dim == 2 {
            let r = radius * (k as f64 / (interior + 1) as f64).sqrt();
            let th = k as f64 * golden;
            vec![r * th.cos(), r * th.sin()]
        } else {
            let r = radius * radical_inverse(k, 2).cbrt();
            let cos_t = 2.0 * radical_inverse(k, 3) - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = 2.0 * PI * radical_inverse(k, 5);
            vec![r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t]
        };
        pts.push(p);
    }
    for k in 0..shell {
        let p = if dim == 2 {
            let th = 2.0 * PI * k as f64 / shell as f64;
            vec![radius * th.cos(), radius * th.sin()]
        } else {
            let cos_t = 1.0 - 2.0 * (k as f64 + 0.5) / shell as f64;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = k as f64 * golden;
            vec![radius * sin_t * phi.cos(), radius * sin_t * phi.sin(), radius * cos_t]
        };
        pts.push(p);
    }
    pts.into_iter().map(LatentPoint::new).collect()
}

/// Reference maximizer of `vf(z + eps)` over the dense ball set; ties go to the
/// earliest point, so the origin wins when nothing improves on it.
pub fn exhaustive_lrf<V: ValueFunction + ?Sized>(
    vf: &V,
    z: &LatentPoint,
    radius: f64,
    count: usize,
) -> Result<LatentPoint> {
    ensure_dim(vf.input_dim(), z.dim())?;
    let mut pts = dense_ball_points(z.dim(), radius, count)?;
    let values: Vec<f64> = pts
        .par_iter()
        .map(|e| {
            let shifted: Vec<f64> = z.iter().zip(e.iter()).map(|(a, b)| a + b).collect();
            vf.value(&shifted)
        })
        .collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok(pts.swap_remove(best))
}

/// Agreement between a learned value and a grid oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// Fraction of nodes where both values fall on the same side of zero
    /// (`<= 0` counts as inside the tube).
    pub sign_agreement: f64,
    pub mae: f64,
    /// Mean absolute error over nodes with `|V| >= margin`.
    pub mae_margin: Option<f64>,
    pub margin: f64,
    pub nodes: usize,
    pub margin_nodes: usize,
}

pub fn compare_to_grid<V: ValueFunction + ?Sized>(vf: &V, grid: &ValueGrid, margin: f64) -> Result<OracleComparison> {
    ensure_dim(grid.dim(), vf.input_dim())?;
    let predictions: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| vf.value(&grid.node_at(&grid.unflatten(k))))
        .collect();
    let n = grid.len();
    let mut agree = 0usize;
    let mut abs_sum = 0.0;
    let (mut margin_sum, mut margin_nodes) = (0.0, 0usize);
    for (&truth, &pred) in grid.values.iter().zip(&predictions) {
        if (truth <= 0.0) == (pred <= 0.0) {
            agree += 1;
        }
        let err = (truth - pred).abs();
        abs_sum += err;
        if truth.abs() >= margin {
            margin_sum += err;
            margin_nodes += 1;
        }
    }
    Ok(OracleComparison {
        sign_agreement: agree as f64 / n as f64,
        mae: abs_sum / n as f64,
        mae_margin: (margin_nodes > 0).then(|| margin_sum / margin_nodes as f64),
        margin,
        nodes: n,
        margin_nodes,
    })
}
