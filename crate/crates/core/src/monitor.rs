//! Runtime monitoring: evaluate the value along a trajectory and flag the
//! first state at or below the threshold (inside the backward reachable tube).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectoryDataset};
use crate::value::{check_input, ValueFunction};

pub const DEFAULT_MONITOR_THRESHOLD: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub flagged: bool,
    pub first_flag_index: Option<usize>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl MonitorReport {
    /// Builds a report from precomputed values.
    pub fn from_values(values: Vec<f64>, threshold: f64) -> Self {
        let first_flag_index = values.iter().position(|&v| v <= threshold);
        Self {
            flagged: first_flag_index.is_some(),
            first_flag_index,
            threshold,
            values: Some(values),
        }
    }

    /// Drops the per-step values (the compact serialized form).
    pub fn without_values(mut self) -> Self {
        self.values = None;
        self
    }
}

pub fn monitor_trajectory<V: ValueFunction + ?Sized>(
    vf: &V,
    traj: &Trajectory,
    threshold: f64,
) -> Result<MonitorReport> {
    check_input(vf, traj.states()[0].coords())?;
    let values = traj.states().iter().map(|s| vf.value(s)).collect();
    Ok(MonitorReport::from_values(values, threshold))
}

/// Monitors every trajectory in parallel; output order follows the dataset.
pub fn monitor_dataset<V: ValueFunction + ?Sized>(
    vf: &V,
    dataset: &TrajectoryDataset,
    threshold: f64,
) -> Result<Vec<MonitorReport>> {
    dataset
        .trajectories()
        .par_iter()
        .map(|t| monitor_trajectory(vf, t, threshold))
        .collect()
}

/// Mean first-flag index over true positives (flagged and truly unsafe).
/// `None` when there are no true positives.
pub fn first_token_index_stat(reports: &[MonitorReport], truths: &[bool]) -> Result<Option<f64>> {
    if reports.len() != truths.len() {
        return Err(Error::InvalidConfig(format!(
            "{} reports but {} ground-truth labels",
            reports.len(),
            truths.len()
        )));
    }
    let hits: Vec<usize> = reports
        .iter()
        .zip(truths)
        .filter(|(_, &unsafe_)| unsafe_)
        .filter_map(|(r, _)| r.first_flag_index)
        .collect();
    if hits.is_empty() {
        return Ok(None);
    }
    Ok(Some(hits.iter().sum::<usize>() as f64 / hits.len() as f64))
}
