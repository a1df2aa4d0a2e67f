//! Reflectivity with known depth by bisection on dL/dalpha, next to the
//! photon-count estimator.
//!
//! ```bash
//! cargo run --example reflectivity_search
//! ```

use splidar::estimators::{self, SolverConfig};
use splidar::model::{AcquisitionConfig, PixelScene, SbrConvention};
use splidar::rng::{substream, Purpose};
use splidar::simulator;

fn main() -> splidar::Result<()> {
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let solver = SolverConfig::default();
    for sbr in [0.5, 2.0, 10.0] {
        let scene = PixelScene::from_constraints(10.0, sbr, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)?;
        let ts = simulator::sample_draw(&scene, &mut substream(4, Purpose::Trial, &[0])).timestamps;
        let with = estimators::reflectivity_mle_known_tau(&ts, scene.tau(), &scene, &solver)?;
        let count = estimators::reflectivity_count_mle(ts.len(), &scene);
        println!(
            "sbr {sbr:>4}: m = {:2}  timestamps {:.4}{}  count {:.4}{}",
            ts.len(),
            with.value,
            if with.clamped { " (clamped)" } else { "" },
            count.value,
            if count.clamped { " (clamped)" } else { "" }
        );
    }
    Ok(())
}
