//! Plugging in your own dynamics and failure set. The monitor, filter and
//! oracles only see the `LatentSystem`, `LatentTarget` and `ValueFunction`
//! traits.

use latent_reach::dynamics::{rollout, LatentSystem};
use latent_reach::oracle::{brute_force_value, BruteForceValue};
use latent_reach::steer::{steered_rollout, SteeringConfig};
use latent_reach::target::LatentTarget;
use latent_reach::trajectory::LatentPoint;

/// A slowly decaying rotation about the origin.
struct Spiral;

impl LatentSystem for Spiral {
    fn name(&self) -> &str {
        "spiral"
    }

    fn dim(&self) -> usize {
        2
    }

    fn transition(&self, z: &[f64]) -> Vec<f64> {
        let (s, c) = 0.3f64.sin_cos();
        vec![0.97 * (c * z[0] - s * z[1]), 0.97 * (s * z[0] + c * z[1])]
    }
}

/// Failure: the half-plane `y > 1`.
struct Ceiling;

impl LatentTarget for Ceiling {
    fn name(&self) -> &str {
        "ceiling"
    }

    fn eval(&self, z: &LatentPoint) -> latent_reach::Result<f64> {
        Ok(1.0 - z[1])
    }
}

fn main() -> latent_reach::Result<()> {
    let z0 = LatentPoint::new(vec![1.4, 0.0])?;
    let horizon = 25;
    let free = rollout(&Spiral, &z0, horizon, None)?;
    let worst = free.iter().map(|z| Ceiling.eval(z)).collect::<Result<Vec<_>, _>>()?;
    println!("free rollout: min margin {:.3}", worst.iter().copied().fold(f64::INFINITY, f64::min));
    println!("V(z0) = {:.3}", brute_force_value(&Spiral, &z0, &Ceiling, horizon)?);

    let value = BruteForceValue { system: &Spiral, target: &Ceiling, horizon };
    let cfg = SteeringConfig { alpha: 0.05, radius: 0.15, candidates: 128, ..Default::default() };
    let steered = steered_rollout(&Spiral, &value, &z0, horizon, &cfg)?;
    let margins = steered.states.iter().map(|z| Ceiling.eval(z)).collect::<Result<Vec<_>, _>>()?;
    println!(
        "steered rollout: min margin {:.3} with {} interventions",
        margins.iter().copied().fold(f64::INFINITY, f64::min),
        steered.interventions()
    );
    Ok(())
}
