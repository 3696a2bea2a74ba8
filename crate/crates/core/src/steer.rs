//! Least-restrictive steering filter.
//!
//! While the value at the current state is above `alpha` the filter emits the
//! zero control. Otherwise it draws `K` perturbations uniformly from the
//! radius-`R` ball (plus the zero perturbation) and returns the one with the
//! highest value at `z + eps`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, LatentSystem};
use crate::error::{Error, Result};
use crate::trajectory::LatentPoint;
use crate::value::{check_input, ValueFunction};

/// Candidate lists at least this long are scored in parallel.
const PARALLEL_CANDIDATES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringConfig {
    pub alpha: f64,
    pub radius: f64,
    pub candidates: usize,
    pub include_zero: bool,
    pub seed: u64,
    pub steer_initial_state: bool,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            radius: 1.0,
            candidates: 64,
            include_zero: true,
            seed: 0,
            steer_initial_state: true,
        }
    }
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "steering radius must be positive, got {}",
                self.radius
            )));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidConfig("candidate count must be at least 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::NonFinite("steering threshold"));
        }
        Ok(())
    }
}

/// Uniform sample from the closed `dim`-ball of radius `radius`: a normalized
/// Gaussian direction scaled by `radius * U^(1/dim)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> LatentPoint {
    assert!(dim > 0 && radius > 0.0);
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let u: f64 = rng.random();
        let scale = radius * u.powf(1.0 / dim as f64) / norm;
        let coords: Vec<f64> = dir.iter().map(|c| c * scale).collect();
        let p = LatentPoint::new(coords).expect("finite by construction");
        // rounding can push the norm a hair past the radius
        if p.norm() <= radius {
            return p;
        }
    }
}

/// Outcome of one filter evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub control: LatentPoint,
    /// Value at the unperturbed state.
    pub value: f64,
    /// Value at `z + control`.
    pub value_after: f64,
    pub intervened: bool,
}

/// Scores `z + eps` for every candidate and returns the best index, ties going
/// to the lowest index.
fn argmax_candidate<V: ValueFunction + ?Sized>(vf: &V, z: &LatentPoint, candidates: &[LatentPoint]) -> (usize, f64) {
    let score = |eps: &LatentPoint| {
        let shifted: Vec<f64> = z.iter().zip(eps.iter()).map(|(a, b)| a + b).collect();
        vf.value(&shifted)
    };
    let values: Vec<f64> = if candidates.len() >= PARALLEL_CANDIDATES {
        candidates.par_iter().map(score).collect()
    } else {
        candidates.iter().map(score).collect()
    };
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Full filter evaluation at one state.
pub fn lrf_decide<V: ValueFunction + ?Sized, R: Rng + ?Sized>(
    vf: &V,
    z: &LatentPoint,
    cfg: &SteeringConfig,
    rng: &mut R,
) -> Result<FilterDecision> {
    cfg.validate()?;
    check_input(vf, z)?;
    let value = vf.value(z);
    if value > cfg.alpha {
        return Ok(FilterDecision {
            control: LatentPoint::zeros(z.dim()),
            value,
            value_after: value,
            intervened: false,
        });
    }
    let mut candidates = Vec::with_capacity(cfg.candidates + 1);
    if cfg.include_zero {
        candidates.push(LatentPoint::zeros(z.dim()));
    }
    for _ in 0..cfg.candidates {
        candidates.push(sample_ball(rng, z.dim(), cfg.radius));
    }
    let (best, value_after) = argmax_candidate(vf, z, &candidates);
    Ok(FilterDecision {
        control: candidates.swap_remove(best),
        value,
        value_after,
        intervened: true,
    })
}

/// The control `u` the filter applies at `z`.
pub fn lrf_control<V: ValueFunction + ?Sized, R: Rng + ?Sized>(
    vf: &V,
    z: &LatentPoint,
    cfg: &SteeringConfig,
    rng: &mut R,
) -> Result<LatentPoint> {
    Ok(lrf_decide(vf, z, cfg, rng)?.control)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeredRollout {
    pub states: Vec<LatentPoint>,
    /// One decision per transition (`states.len() - 1` entries).
    pub decisions: Vec<FilterDecision>,
}

impl SteeredRollout {
    pub fn interventions(&self) -> usize {
        self.decisions.iter().filter(|d| d.intervened).count()
    }
}

/// Rolls the controlled dynamics `z' = f(z + u)` forward with `u` chosen by the
/// filter at every state. The RNG is seeded from `cfg.seed`.
pub fn steered_rollout<S, V>(
    system: &S,
    vf: &V,
    z0: &LatentPoint,
    horizon: usize,
    cfg: &SteeringConfig,
) -> Result<SteeredRollout>
where
    S: LatentSystem + ?Sized,
    V: ValueFunction + ?Sized,
{
    cfg.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("rollout horizon must be at least 1".into()));
    }
    check_input(vf, z0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut decisions = Vec::with_capacity(horizon);
    states.push(z0.clone());
    for t in 0..horizon {
        let z = &states[t];
        let decision = if t == 0 && !cfg.steer_initial_state {
            let value = vf.value(z);
            FilterDecision {
                control: LatentPoint::zeros(z.dim()),
                value,
                value_after: value,
                intervened: false,
            }
        } else {
            lrf_decide(vf, z, cfg, &mut rng)?
        };
        let next = step(system, z, &decision.control).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { step: t + 1 },
            other => other,
        })?;
        decisions.push(decision);
        states.push(next);
    }
    Ok(SteeredRollout { states, decisions })
}

/// Steers one rollout per start in parallel. Start `i` uses seed
/// `cfg.seed + i`, so results do not depend on scheduling.
pub fn steer_many<S, V>(
    system: &S,
    vf: &V,
    starts: &[(LatentPoint, usize)],
    cfg: &SteeringConfig,
) -> Result<Vec<SteeredRollout>>
where
    S: LatentSystem + ?Sized,
    V: ValueFunction + ?Sized,
{
    starts
        .par_iter()
        .enumerate()
        .map(|(i, (z0, horizon))| {
            let cfg = SteeringConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            steered_rollout(system, vf, z0, *horizon, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rollout, TwoAttractorSystem};
    use crate::value::{ConstantValue, FnValue};

    fn p(c: &[f64]) -> LatentPoint {
        LatentPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn ball_samples_respect_radius_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [1, 2, 5, 64] {
            for _ in 0..500 {
                assert!(sample_ball(&mut rng, d, 0.7).norm() <= 0.7);
            }
        }
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|_| sample_ball(&mut r, 3, 1.0)).collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
        assert_ne!(draw(1), draw(2));
    }

    #[test]
    fn one_dimensional_ball_is_uniform_on_interval() {
        // U[-R, R] has mean 0 and variance R^2 / 3.
        let n = 100_000;
        let r = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..n).map(|_| sample_ball(&mut rng, 1, r)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sigma = (r * r / 3.0 / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * sigma, "mean {mean}");
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((var - r * r / 3.0).abs() < 0.02);
        let below_half = xs.iter().filter(|&&x| x.abs() <= r / 2.0).count() as f64 / n as f64;
        assert!((below_half - 0.5).abs() < 0.01);
    }

    #[test]
    fn pass_through_above_threshold() {
        let vf = FnValue::new(2, |z: &[f64]| z[0]);
        let cfg = SteeringConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = lrf_control(&vf, &p(&[0.5, 0.0]), &cfg, &mut rng).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn argmax_concentrates_on_ball_boundary() {
        let vf = FnValue::new(2, |z: &[f64]| z[0]);
        let cfg = SteeringConfig {
            alpha: 0.0,
            radius: 1.0,
            candidates: 4096,
            ..SteeringConfig::default()
        };
        let mut hits = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = lrf_control(&vf, &p(&[-0.2, 0.0]), &cfg, &mut rng).unwrap();
            assert!(u.norm() <= 1.0);
            if u[0] >= 0.95 {
                hits += 1;
            }
        }
        assert_eq!(hits, 50);
    }

    #[test]
    fn zero_candidate_prevents_degradation() {
        // value peaks at the current state, so every perturbation is worse
        let vf = FnValue::new(2, |z: &[f64]| -(z[0] * z[0] + z[1] * z[1]));
        let cfg = SteeringConfig {
            alpha: 1.0,
            radius: 0.5,
            candidates: 32,
            ..SteeringConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = lrf_decide(&vf, &p(&[0.0, 0.0]), &cfg, &mut rng).unwrap();
        assert!(d.intervened);
        assert!(d.control.is_zero());
        assert!(d.value_after >= d.value);
    }

    #[test]
    fn ties_break_toward_first_candidate() {
        let vf = ConstantValue { dim: 2, value: -1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = lrf_control(&vf, &p(&[0.1, 0.1]), &SteeringConfig::default(), &mut rng).unwrap();
        assert!(u.is_zero());

        let cfg = SteeringConfig {
            include_zero: false,
            ..SteeringConfig::default()
        };
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let u = lrf_control(&vf, &p(&[0.1, 0.1]), &cfg, &mut a).unwrap();
        assert_eq!(u, sample_ball(&mut b, 2, cfg.radius));
    }

    #[test]
    fn best_value_is_monotone_in_candidate_budget() {
        let vf = FnValue::new(2, |z: &[f64]| (3.0 * z[0]).sin() + z[1]);
        let mut last = f64::NEG_INFINITY;
        for k in [1, 2, 4, 8, 16, 64, 256] {
            let cfg = SteeringConfig {
                alpha: 10.0,
                radius: 0.8,
                candidates: k,
                include_zero: false,
                seed: 9,
                ..SteeringConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let d = lrf_decide(&vf, &p(&[0.0, 0.0]), &cfg, &mut rng).unwrap();
            assert!(d.value_after >= last);
            last = d.value_after;
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let vf = ConstantValue { dim: 2, value: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = p(&[0.0, 0.0]);
        for cfg in [
            SteeringConfig { radius: 0.0, ..Default::default() },
            SteeringConfig { candidates: 0, ..Default::default() },
        ] {
            assert!(lrf_control(&vf, &z, &cfg, &mut rng).is_err());
        }
        assert!(lrf_control(&vf, &p(&[0.0]), &SteeringConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn positive_value_leaves_rollout_untouched() {
        let sys = TwoAttractorSystem::default();
        let vf = ConstantValue { dim: 2, value: 1.0 };
        let cfg = SteeringConfig { alpha: 0.0, ..Default::default() };
        let z0 = p(&[0.3, -0.4]);
        let steered = steered_rollout(&sys, &vf, &z0, 15, &cfg).unwrap();
        assert_eq!(steered.states, rollout(&sys, &z0, 15, None).unwrap());
        assert_eq!(steered.interventions(), 0);
    }

    #[test]
    fn vanishing_radius_only_drifts_by_radius() {
        let sys = TwoAttractorSystem::default();
        let vf = FnValue::new(2, |z: &[f64]| -z[0]);
        let cfg = SteeringConfig {
            alpha: 10.0,
            radius: 1e-9,
            ..Default::default()
        };
        let steered = steered_rollout(&sys, &vf, &p(&[0.6, 0.2]), 20, &cfg).unwrap();
        let plain = rollout(&sys, &p(&[0.6, 0.2]), 20, None).unwrap();
        for w in steered.states.windows(2) {
            let free = step(&sys, &w[0], &LatentPoint::zeros(2)).unwrap();
            assert!(free.distance(&w[1]) <= 1e-9);
        }
        for (a, b) in steered.states.iter().zip(&plain) {
            assert!(a.distance(b) <= 5e-9);
        }
    }

    #[test]
    fn initial_state_can_be_exempt() {
        let sys = TwoAttractorSystem::default();
        let vf = ConstantValue { dim: 2, value: -1.0 };
        let cfg = SteeringConfig {
            steer_initial_state: false,
            include_zero: false,
            ..Default::default()
        };
        let out = steered_rollout(&sys, &vf, &p(&[0.3, 0.0]), 3, &cfg).unwrap();
        assert!(!out.decisions[0].intervened);
        assert!(out.decisions[0].control.is_zero());
        assert!(out.decisions[1..].iter().all(|d| d.intervened));
    }

    #[test]
    fn batch_matches_individual_rollouts() {
        let sys = TwoAttractorSystem::default();
        let vf = FnValue::new(2, |z: &[f64]| -z[0]);
        let cfg = SteeringConfig { seed: 9, ..Default::default() };
        let starts = vec![(p(&[0.3, 0.0]), 5), (p(&[0.1, 0.4]), 3)];
        let batch = steer_many(&sys, &vf, &starts, &cfg).unwrap();
        for (i, (z0, h)) in starts.iter().enumerate() {
            let one = SteeringConfig { seed: 9 + i as u64, ..cfg.clone() };
            assert_eq!(batch[i], steered_rollout(&sys, &vf, z0, *h, &one).unwrap());
        }
    }
}
