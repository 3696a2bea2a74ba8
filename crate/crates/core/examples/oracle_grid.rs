//! Exact backward reachable tube of the two-attractor toy, drawn as a map.
//!
//! `#` marks grid nodes whose uncontrolled future enters the failure disk
//! (V <= 0); `.` marks nodes that stay safe.

use latent_reach::dynamics::TwoAttractorSystem;
use latent_reach::oracle::{brute_force_value, grid_brt, AxisBounds};
use latent_reach::trajectory::LatentPoint;

fn main() -> latent_reach::Result<()> {
    let system = TwoAttractorSystem::default();
    let target = system.failure_target();
    let bounds = vec![AxisBounds { lo: -2.0, hi: 2.0 }; 2];
    let grid = grid_brt(&system, &target, &bounds, &[21, 41], 50)?;

    for row in (0..41).rev() {
        let line: String = (0..21)
            .map(|col| if grid.value_at(&[col, row]) <= 0.0 { '#' } else { '.' })
            .collect();
        println!("{line}");
    }

    for z in [[0.5, 0.0], [-0.5, 1.0], [1.0, 0.0]] {
        let v = brute_force_value(&system, &LatentPoint::new(z.to_vec())?, &target, 50)?;
        println!("V({:?}) = {v:.4}", z);
    }
    Ok(())
}
