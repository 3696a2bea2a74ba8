//! Target functions whose sub-zero level set is the failure set.

use crate::error::{Error, Result};
use crate::trajectory::{ensure_dim, LatentPoint};

/// A target function evaluated directly on latent states.
pub trait LatentTarget: Sync {
    fn name(&self) -> &str;

    fn eval(&self, z: &LatentPoint) -> Result<f64>;

    /// `true` iff `z` lies in the closed failure set `{l <= 0}`.
    fn in_failure_set(&self, z: &LatentPoint) -> Result<bool> {
        Ok(self.eval(z)? <= 0.0)
    }
}

/// Maps an offensiveness probability `c` to `0.5 - c`.
pub fn classifier_target(score: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::InvalidProbability(score));
    }
    Ok(0.5 - score)
}

/// Signed distance to a closed disk: `||z - center|| - radius`.
pub fn disk_target(z: &LatentPoint, center: &LatentPoint, radius: f64) -> Result<f64> {
    ensure_dim(center.dim(), z.dim())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "disk radius must be positive, got {radius}"
        )));
    }
    Ok(z.distance(center) - radius)
}

/// Name recorded in dataset headers for classifier-scored data.
pub const CLASSIFIER_TARGET_NAME: &str = "classifier:0.5-c";

#[derive(Debug, Clone, PartialEq)]
pub struct DiskTarget {
    center: LatentPoint,
    radius: f64,
}

impl DiskTarget {
    pub fn new(center: LatentPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &LatentPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl LatentTarget for DiskTarget {
    fn name(&self) -> &str {
        "disk"
    }

    fn eval(&self, z: &LatentPoint) -> Result<f64> {
        disk_target(z, &self.center, self.radius)
    }
}
