//! Depth from one low-SBR draw: bracketing search with known reflectivity
//! against the timestamp mean.
//!
//! ```bash
//! cargo run --example depth_search
//! ```

use splidar::estimators::{self, SolverConfig};
use splidar::model::{AcquisitionConfig, PixelScene, SbrConvention};
use splidar::rng::{substream, Purpose};
use splidar::simulator;

fn main() -> splidar::Result<()> {
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let scene = PixelScene::from_constraints(10.0, 0.5, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)?;
    let solver = SolverConfig::default();
    for trial in 0..5 {
        let ts = simulator::sample_draw(&scene, &mut substream(3, Purpose::Trial, &[trial])).timestamps;
        let tau_0 = estimators::coarse_init(&ts, &scene)?;
        let search = estimators::depth_mle_known_alpha(&ts, scene.alpha(), &scene, tau_0, &solver)?;
        let mean = estimators::depth_sample_mean(&ts, &scene)?;
        println!(
            "m = {:2}  init {tau_0:.3}  search {:.4} (bracket {:.4}..{:.4}, {} steps)  mean {:.4}",
            ts.len(),
            search.value,
            search.interval.0,
            search.interval.1,
            search.iterations,
            mean.value
        );
    }
    Ok(())
}
