//! Latent states, recorded trajectories, and the backward label recursions that
//! turn a per-step target sequence into value-regression targets.
//!
//! All label arithmetic is done in `f64`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the latent (embedding) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentPoint(Vec<f64>);

impl LatentPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("latent point"));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "latent dimension must be positive");
        Self(vec![0.0; dim])
    }

    /// The unit vector along axis `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut p = Self::zeros(dim);
        p.0[axis] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &LatentPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// Element-wise sum; fails on dimension mismatch.
    pub fn try_add(&self, other: &LatentPoint) -> Result<LatentPoint> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(LatentPoint(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Rounds every coordinate to the nearest `f32`, the storage precision of
    /// dataset files.
    pub fn to_storage_precision(&self) -> LatentPoint {
        LatentPoint(self.0.iter().map(|&c| c as f32 as f64).collect())
    }
}

impl Deref for LatentPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for LatentPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        LatentPoint::new(v)
    }
}

impl From<LatentPoint> for Vec<f64> {
    fn from(p: LatentPoint) -> Self {
        p.0
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// One recorded rollout `z_0..z_T` with its target values `l(z_0)..l(z_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<LatentPoint>,
    ell: Vec<f64>,
    tokens: Option<Vec<String>>,
    prompt_embedding: Option<LatentPoint>,
    response_embedding: Option<LatentPoint>,
}

impl Trajectory {
    pub fn new(states: Vec<LatentPoint>, ell: Vec<f64>) -> Result<Self> {
        if states.is_empty() || ell.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if states.len() != ell.len() {
            return Err(Error::InvalidConfig(format!(
                "trajectory has {} states but {} target values",
                states.len(),
                ell.len()
            )));
        }
        let dim = states[0].dim();
        for s in &states[1..] {
            ensure_dim(dim, s.dim())?;
        }
        if ell.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("target values"));
        }
        Ok(Self {
            states,
            ell,
            tokens: None,
            prompt_embedding: None,
            response_embedding: None,
        })
    }

    pub fn with_tokens(mut self, tokens: Vec<String>) -> Self {
        self.tokens = Some(tokens);
        self
    }

    /// Attaches pooled prompt/response embeddings (used by the coherence metric).
    pub fn with_embeddings(
        mut self,
        prompt: Option<LatentPoint>,
        response: Option<LatentPoint>,
    ) -> Result<Self> {
        for e in prompt.iter().chain(response.iter()) {
            ensure_dim(self.dim(), e.dim())?;
        }
        self.prompt_embedding = prompt;
        self.response_embedding = response;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Number of transitions `T`; the trajectory holds `T + 1` states.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &[LatentPoint] {
        &self.states
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    pub fn terminal_ell(&self) -> f64 {
        self.ell[self.ell.len() - 1]
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    pub fn prompt_embedding(&self) -> Option<&LatentPoint> {
        self.prompt_embedding.as_ref()
    }

    pub fn response_embedding(&self) -> Option<&LatentPoint> {
        self.response_embedding.as_ref()
    }

    /// The minimum target value over the whole trajectory (the value of `z_0`).
    pub fn min_ell(&self) -> f64 {
        self.ell.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Provenance recorded alongside every dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub dim: usize,
    pub source: String,
    pub layer_index: i64,
    pub target_name: String,
    pub pooling: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    header: DatasetHeader,
    trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn new(header: DatasetHeader, trajectories: Vec<Trajectory>) -> Result<Self> {
        if header.dim == 0 {
            return Err(Error::InvalidConfig("dataset dimension must be positive".into()));
        }
        for t in &trajectories {
            ensure_dim(header.dim, t.dim())?;
        }
        Ok(Self {
            header,
            trajectories,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Splits off the last `fraction` of trajectories (by dataset order).
    pub fn split_tail(&self, fraction: f64) -> (&[Trajectory], &[Trajectory]) {
        let n = self.trajectories.len();
        let held = ((n as f64) * fraction).floor() as usize;
        self.trajectories.split_at(n - held.min(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyLabelConfig {
    pub unsafe_threshold: f64,
}

impl Default for SafetyLabelConfig {
    fn default() -> Self {
        Self {
            unsafe_threshold: 0.0,
        }
    }
}

/// Suffix minima: `out[t] = min(ell[t..])`.
pub fn running_min_labels(ell: &[f64]) -> Result<Vec<f64>> {
    if ell.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut out = vec![0.0; ell.len()];
    let mut acc = f64::INFINITY;
    for (o, &l) in out.iter_mut().zip(ell).rev() {
        acc = acc.min(l);
        *o = acc;
    }
    Ok(out)
}

/// Discounted-min Bellman targets computed in one backward pass:
/// `V_T = l_T`, `V_t = (1 - gamma) l_t + gamma min(l_t, V_{t+1})`.
pub fn discounted_min_targets(ell: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidGamma(gamma));
    }
    let (&last, _) = ell.split_last().ok_or(Error::EmptyTrajectory)?;
    let mut out = vec![0.0; ell.len()];
    let mut next = last;
    *out.last_mut().unwrap() = last;
    for t in (0..ell.len() - 1).rev() {
        let l = ell[t];
        next = (1.0 - gamma) * l + gamma * l.min(next);
        out[t] = next;
    }
    Ok(out)
}

/// Broadcast of the terminal value `l(z_T)` to every step.
pub fn terminal_targets(ell: &[f64]) -> Result<Vec<f64>> {
    let &last = ell.last().ok_or(Error::EmptyTrajectory)?;
    Ok(vec![last; ell.len()])
}

/// Ground-truth outcome: the trajectory ends inside the (closed) failure set.
pub fn trajectory_is_unsafe(traj: &Trajectory, cfg: &SafetyLabelConfig) -> bool {
    traj.terminal_ell() <= cfg.unsafe_threshold
}
