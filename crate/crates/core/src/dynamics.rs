//! Deterministic latent dynamics `z' = f(z + u)` and the built-in toy system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::{DiskTarget, LatentTarget};
use crate::trajectory::{ensure_dim, DatasetHeader, LatentPoint, Trajectory, TrajectoryDataset};

/// A deterministic autonomous transition map on a `dim`-dimensional latent space.
pub trait LatentSystem: Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// The autonomous map `f(z)`. Must be bit-for-bit deterministic.
    fn transition(&self, z: &[f64]) -> Vec<f64>;
}

/// One controlled transition `f(z + u)`.
pub fn step<S: LatentSystem + ?Sized>(
    system: &S,
    z: &LatentPoint,
    u: &LatentPoint,
) -> Result<LatentPoint> {
    ensure_dim(system.dim(), z.dim())?;
    ensure_dim(system.dim(), u.dim())?;
    let perturbed: Vec<f64> = z.iter().zip(u.iter()).map(|(a, b)| a + b).collect();
    LatentPoint::new(system.transition(&perturbed))
}

/// Rolls `horizon` transitions forward from `z0`, returning `horizon + 1` states.
///
/// Without a policy the zero control is applied, so both paths are bit-identical.
pub fn rollout<S: LatentSystem + ?Sized>(
    system: &S,
    z0: &LatentPoint,
    horizon: usize,
    policy: Option<&dyn Fn(&LatentPoint) -> LatentPoint>,
) -> Result<Vec<LatentPoint>> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("rollout horizon must be at least 1".into()));
    }
    ensure_dim(system.dim(), z0.dim())?;
    let zero = LatentPoint::zeros(system.dim());
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(z0.clone());
    for t in 0..horizon {
        let z = &states[t];
        let next = match policy {
            Some(p) => step(system, z, &p(z)),
            None => step(system, z, &zero),
        };
        let next = next.map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { step: t + 1 },
            other => other,
        })?;
        states.push(next);
    }
    Ok(states)
}

/// Two point attractors with piecewise-linear contraction toward whichever is
/// nearer. The unsafe attractor is surrounded by a disk-shaped failure set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoAttractorSystem {
    safe_attractor: LatentPoint,
    unsafe_attractor: LatentPoint,
    contraction: f64,
    failure_radius: f64,
}

impl TwoAttractorSystem {
    pub const DEFAULT_CONTRACTION: f64 = 0.2;
    pub const DEFAULT_FAILURE_RADIUS: f64 = 0.3;

    pub fn new(
        safe_attractor: LatentPoint,
        unsafe_attractor: LatentPoint,
        contraction: f64,
        failure_radius: f64,
    ) -> Result<Self> {
        ensure_dim(safe_attractor.dim(), unsafe_attractor.dim())?;
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "contraction rate must lie in (0, 1), got {contraction}"
            )));
        }
        let separation = safe_attractor.distance(&unsafe_attractor);
        if separation == 0.0 {
            return Err(Error::InvalidConfig("attractors must be distinct".into()));
        }
        if !(failure_radius > 0.0 && failure_radius < 0.5 * separation) {
            return Err(Error::InvalidConfig(format!(
                "failure radius must lie in (0, {}), got {failure_radius}",
                0.5 * separation
            )));
        }
        Ok(Self {
            safe_attractor,
            unsafe_attractor,
            contraction,
            failure_radius,
        })
    }

    /// Attractors at `-e_1` and `+e_1` in `dim` dimensions.
    pub fn with_params(dim: usize, contraction: f64, failure_radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let unsafe_attractor = LatentPoint::basis(dim, 0);
        let safe_attractor =
            LatentPoint::new(unsafe_attractor.iter().map(|c| -c).collect())?;
        Self::new(safe_attractor, unsafe_attractor, contraction, failure_radius)
    }

    pub fn with_dim(dim: usize) -> Result<Self> {
        Self::with_params(dim, Self::DEFAULT_CONTRACTION, Self::DEFAULT_FAILURE_RADIUS)
    }

    pub fn safe_attractor(&self) -> &LatentPoint {
        &self.safe_attractor
    }

    pub fn unsafe_attractor(&self) -> &LatentPoint {
        &self.unsafe_attractor
    }

    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    pub fn failure_radius(&self) -> f64 {
        self.failure_radius
    }

    /// Signed distance to the failure disk around the unsafe attractor.
    pub fn failure_target(&self) -> DiskTarget {
        DiskTarget::new(self.unsafe_attractor.clone(), self.failure_radius)
            .expect("radius validated at construction")
    }

    /// The attractor that `z` contracts toward; equidistant points go to the
    /// unsafe one.
    pub fn active_attractor(&self, z: &[f64]) -> &LatentPoint {
        let d_unsafe = sq_dist(z, &self.unsafe_attractor);
        let d_safe = sq_dist(z, &self.safe_attractor);
        if d_unsafe <= d_safe {
            &self.unsafe_attractor
        } else {
            &self.safe_attractor
        }
    }
}

impl Default for TwoAttractorSystem {
    fn default() -> Self {
        Self::with_dim(2).expect("default parameters are valid")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl LatentSystem for TwoAttractorSystem {
    fn name(&self) -> &str {
        "two-attractor"
    }

    fn dim(&self) -> usize {
        self.safe_attractor.dim()
    }

    fn transition(&self, z: &[f64]) -> Vec<f64> {
        let a = self.active_attractor(z);
        z.iter()
            .zip(a.iter())
            .map(|(zi, ai)| zi + self.contraction * (ai - zi))
            .collect()
    }
}

/// Parameters for sampling a toy trajectory dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDatasetConfig {
    pub count: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Start states are drawn uniformly from `[lo, hi]^d`.
    pub bounds: (f64, f64),
    /// Cell width used to turn states into pseudo-tokens.
    pub token_cell: f64,
}

impl Default for ToyDatasetConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            horizon: 30,
            seed: 0,
            bounds: (-2.0, 2.0),
            token_cell: 0.25,
        }
    }
}

/// Pseudo-token for a toy state: the id of the grid cell containing its first
/// (at most) two coordinates.
pub fn toy_token(z: &[f64], cell: f64) -> String {
    let ids: Vec<String> = z
        .iter()
        .take(2)
        .map(|c| format!("{}", (c / cell).floor() as i64))
        .collect();
    format!("c{}", ids.join("_"))
}

/// Mean of `states` (response pooling).
pub fn mean_pool(states: &[LatentPoint]) -> Result<LatentPoint> {
    let first = states.first().ok_or(Error::EmptyTrajectory)?;
    let mut acc = vec![0.0; first.dim()];
    for s in states {
        ensure_dim(acc.len(), s.dim())?;
        for (a, c) in acc.iter_mut().zip(s.iter()) {
            *a += c;
        }
    }
    let n = states.len() as f64;
    LatentPoint::new(acc.into_iter().map(|a| a / n).collect())
}

/// Records a rollout as a dataset trajectory: states and targets are rounded to
/// storage precision, tokens come from [`toy_token`], and prompt/response
/// embeddings are `z_0` and the mean of `z_1..z_T`.
pub fn record_toy_trajectory(
    states: Vec<LatentPoint>,
    target: &dyn LatentTarget,
    token_cell: f64,
) -> Result<Trajectory> {
    let states: Vec<LatentPoint> = states.iter().map(|s| s.to_storage_precision()).collect();
    let ell = states
        .iter()
        .map(|s| target.eval(s).map(|l| l as f32 as f64))
        .collect::<Result<Vec<_>>>()?;
    let tokens = states[1..].iter().map(|s| toy_token(s, token_cell)).collect();
    let response = if states.len() > 1 {
        Some(mean_pool(&states[1..])?.to_storage_precision())
    } else {
        None
    };
    let prompt = Some(states[0].clone());
    Trajectory::new(states, ell)?
        .with_tokens(tokens)
        .with_embeddings(prompt, response)
}

/// Draws `count` start states uniformly from the configured box.
pub fn sample_starts(dim: usize, cfg: &ToyDatasetConfig) -> Result<Vec<LatentPoint>> {
    let (lo, hi) = cfg.bounds;
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!("empty start box [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count)
        .map(|_| LatentPoint::new((0..dim).map(|_| rng.random_range(lo..=hi)).collect()))
        .collect()
}

/// Samples a dataset of uncontrolled toy rollouts labelled with the failure
/// disk's signed distance.
pub fn generate_toy_dataset(
    system: &TwoAttractorSystem,
    cfg: &ToyDatasetConfig,
) -> Result<TrajectoryDataset> {
    let target = system.failure_target();
    let trajectories = sample_starts(system.dim(), cfg)?
        .iter()
        .map(|z0| {
            let states = rollout(system, z0, cfg.horizon, None)?;
            record_toy_trajectory(states, &target, cfg.token_cell)
        })
        .collect::<Result<Vec<_>>>()?;
    let header = DatasetHeader {
        dim: system.dim(),
        source: format!(
            "toy:{}:lambda={}:radius={}:seed={}",
            system.name(),
            system.contraction(),
            system.failure_radius(),
            cfg.seed
        ),
        layer_index: 0,
        target_name: target.name().to_string(),
        pooling: "mean".into(),
    };
    TrajectoryDataset::new(header, trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> LatentPoint {
        LatentPoint::new(c.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn step_examples() {
        let sys = TwoAttractorSystem::default();
        let zero = LatentPoint::zeros(2);
        let z = step(&sys, &p(&[0.0, 0.0]), &zero).unwrap();
        assert!(close(&z, &[0.2, 0.0], 1e-15));
        let z = step(&sys, &p(&[1.0, 0.0]), &zero).unwrap();
        assert_eq!(z.coords(), &[1.0, 0.0]);
        let z = step(&sys, &p(&[0.3, 0.0]), &p(&[-0.5, 0.0])).unwrap();
        assert!(close(&z, &[-0.36, 0.0], 1e-15));
    }

    #[test]
    fn step_rejects_dimension_mismatch() {
        let sys = TwoAttractorSystem::default();
        assert!(matches!(
            step(&sys, &p(&[0.0, 0.0, 0.0]), &LatentPoint::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(step(&sys, &p(&[0.0, 0.0]), &LatentPoint::zeros(3)).is_err());
    }

    #[test]
    fn rollout_examples() {
        let sys = TwoAttractorSystem::default();
        let xs: Vec<f64> = rollout(&sys, &p(&[0.5, 0.0]), 3, None)
            .unwrap()
            .iter()
            .map(|s| s[0])
            .collect();
        assert!(close(&xs, &[0.5, 0.6, 0.68, 0.744], 1e-12));
        assert_eq!(rollout(&sys, &p(&[0.1, 0.4]), 1, None).unwrap().len(), 2);
        let fixed = rollout(&sys, &p(&[-1.0, 0.0]), 5, None).unwrap();
        assert!(fixed.iter().all(|s| s.coords() == [-1.0, 0.0]));
        assert!(rollout(&sys, &p(&[0.0, 0.0]), 0, None).is_err());
    }

    #[test]
    fn zero_policy_is_bit_identical_to_autonomous() {
        let sys = TwoAttractorSystem::default();
        let zero = |_: &LatentPoint| LatentPoint::zeros(2);
        for z0 in [p(&[0.7, -1.3]), p(&[-0.0, 0.2]), p(&[-1.9, 1.9])] {
            let a = rollout(&sys, &z0, 25, None).unwrap();
            let b = rollout(&sys, &z0, 25, Some(&zero)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn contraction_factor_holds_within_a_basin() {
        let sys = TwoAttractorSystem::default();
        let states = rollout(&sys, &p(&[1.7, -0.9]), 10, None).unwrap();
        let a = sys.unsafe_attractor();
        for w in states.windows(2) {
            let ratio = w[1].distance(a) / w[0].distance(a);
            assert!((ratio - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn basin_dichotomy_on_start_grid() {
        let sys = TwoAttractorSystem::default();
        let target = sys.failure_target();
        for i in 0..21 {
            for j in 0..21 {
                let x = -2.0 + 0.2 * i as f64;
                let y = -2.0 + 0.2 * j as f64;
                if x.abs() < 1e-9 {
                    continue;
                }
                let states = rollout(&sys, &p(&[x, y]), 40, None).unwrap();
                let entered = states.iter().any(|s| target.eval(s).unwrap() < 0.0);
                assert_eq!(entered, x > 0.0, "start ({x}, {y})");
            }
        }
    }

    #[test]
    fn boundary_tie_goes_to_unsafe_attractor() {
        let sys = TwoAttractorSystem::default();
        assert_eq!(sys.active_attractor(&[0.0, 1.0]), sys.unsafe_attractor());
    }

    #[test]
    fn constructor_validates() {
        assert!(TwoAttractorSystem::with_params(2, 1.0, 0.3).is_err());
        assert!(TwoAttractorSystem::with_params(2, 0.2, 1.0).is_err());
        assert!(TwoAttractorSystem::with_params(0, 0.2, 0.3).is_err());
        assert!(TwoAttractorSystem::new(p(&[1.0, 0.0]), p(&[1.0, 0.0]), 0.2, 0.3).is_err());
        assert_eq!(TwoAttractorSystem::with_dim(16).unwrap().dim(), 16);
    }

    #[test]
    fn generated_dataset_is_consistent() {
        let sys = TwoAttractorSystem::default();
        let cfg = ToyDatasetConfig {
            count: 20,
            horizon: 10,
            seed: 3,
            ..Default::default()
        };
        let ds = generate_toy_dataset(&sys, &cfg).unwrap();
        assert_eq!(ds.len(), 20);
        for t in ds.trajectories() {
            assert_eq!(t.len(), 11);
            assert_eq!(t.tokens().unwrap().len(), 10);
            assert!(t.states().iter().flat_map(|s| s.iter()).all(|&c| c as f32 as f64 == c));
            assert!(t.ell().iter().all(|&l| l as f32 as f64 == l));
        }
        assert_eq!(ds, generate_toy_dataset(&sys, &cfg).unwrap());
    }

    #[test]
    fn tokens_name_cells() {
        assert_eq!(toy_token(&[0.1, -0.1], 0.25), "c0_-1");
        assert_eq!(toy_token(&[1.0, 0.0, 5.0], 0.25), "c4_0");
    }
}
