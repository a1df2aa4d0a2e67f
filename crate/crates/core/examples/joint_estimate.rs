//! Joint depth and reflectivity by coordinate ascent from a histogram
//! start, printing the objective after every outer iteration.
//!
//! ```bash
//! cargo run --example joint_estimate
//! ```

use splidar::estimators::{self, SolverConfig};
use splidar::model::{AcquisitionConfig, PixelScene, SbrConvention};
use splidar::rng::{substream, Purpose};
use splidar::simulator;

fn main() -> splidar::Result<()> {
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let scene = PixelScene::from_constraints(20.0, 2.0, 0.5, 6.3, acq, 0.2, SbrConvention::SignalEnergy)?;
    let ts = simulator::sample_draw(&scene, &mut substream(9, Purpose::Trial, &[0])).timestamps;
    let init = (estimators::coarse_init(&ts, &scene)?, 1.0);
    let j = estimators::joint_mle(&ts, &scene, init, &SolverConfig::default())?;
    println!("truth  tau {:.4} alpha {:.4}", scene.tau(), scene.alpha());
    println!("start  tau {:.4} alpha {:.4}", init.0, init.1);
    println!("joint  tau {:.4} alpha {:.4}", j.depth.value, j.reflectivity.value);
    println!("{} outer iterations, converged {}", j.outer_iterations, j.converged);
    for (i, l) in j.objective.iter().enumerate() {
        println!("  L[{i}] = {l:.6}");
    }
    Ok(())
}
