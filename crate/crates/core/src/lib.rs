//! Reachability-based safety for discrete-time latent dynamical systems.
//!
//! A trajectory `z_0..z_T` of latent states carries a target margin `ell(z_t)`
//! whose non-positive values mark failure. The uncontrolled value
//! `V(z_t) = min_{tau >= t} ell(z_tau)` is non-positive exactly when the
//! trajectory will fail from `z_t` onward, so `{V <= 0}` is the backward
//! reachable tube (BRT) of the failure set.
//!
//! The crate learns `V` with a small MLP ([`valuenet`], [`train`]), uses it as
//! a runtime monitor ([`monitor`]), and as a least-restrictive steering filter
//! ([`steer`]). [`oracle`] provides exact references for low-dimensional toy
//! systems, and [`dynamics`] ships one such system.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod monitor;
pub mod oracle;
pub mod steer;
pub mod store;
pub mod target;
pub mod train;
pub mod trajectory;
pub mod value;
pub mod valuenet;

pub use dynamics::{rollout, step, LatentSystem, TwoAttractorSystem};
pub use error::{Error, Result};
pub use monitor::{monitor_dataset, monitor_trajectory, MonitorReport};
pub use steer::{lrf_control, steer_many, steered_rollout, SteeringConfig};
pub use target::{DiskTarget, LatentTarget};
pub use train::{train, TrainConfig, TrainMode};
pub use trajectory::{
    discounted_min_targets, running_min_labels, LatentPoint, Trajectory, TrajectoryDataset,
};
pub use value::ValueFunction;
pub use valuenet::ValueNetwork;
