//! Least-restrictive steering: starts just inside the unsafe basin are pushed
//! across the boundary by the sampled filter, with the exact grid value as V.

use latent_reach::dynamics::{rollout, TwoAttractorSystem};
use latent_reach::oracle::{grid_brt, AxisBounds};
use latent_reach::steer::{steered_rollout, SteeringConfig};
use latent_reach::target::LatentTarget;
use latent_reach::trajectory::LatentPoint;

fn main() -> latent_reach::Result<()> {
    let system = TwoAttractorSystem::default();
    let target = system.failure_target();
    let bounds = vec![AxisBounds { lo: -2.0, hi: 2.0 }; 2];
    let value = grid_brt(&system, &target, &bounds, &[41, 41], 50)?;
    let cfg = SteeringConfig { alpha: 0.1, radius: 0.6, candidates: 256, ..Default::default() };

    println!("start        free l(z_T)  steered l(z_T)  interventions");
    for x in [0.05, 0.15, 0.25, 0.35] {
        let z0 = LatentPoint::new(vec![x, 0.2])?;
        let free = rollout(&system, &z0, 20, None)?;
        let steered = steered_rollout(&system, &value, &z0, 20, &cfg)?;
        println!(
            "({x:.2}, 0.20)  {:>11.4}  {:>14.4}  {:>13}",
            target.eval(free.last().unwrap())?,
            target.eval(steered.states.last().unwrap())?,
            steered.interventions()
        );
    }
    Ok(())
}
