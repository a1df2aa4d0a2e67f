//! One pixel at photon level 10 and SBR 2: photon count, timestamps and
//! first-photon detections.
//!
//! ```bash
//! cargo run --example simulate_pixel
//! ```

use splidar::model::{AcquisitionConfig, PixelScene, SbrConvention};
use splidar::rng::{substream, Purpose};
use splidar::simulator::{self, SensorModel};

fn main() -> splidar::Result<()> {
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let scene = PixelScene::from_constraints(10.0, 2.0, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)?;
    println!(
        "S = {:.4}, b_lambda = {:.2e}, P_sig = {:.3}",
        scene.pulse().energy(),
        scene.b_lambda(),
        scene.signal_probability()
    );

    let mut rng = substream(1, Purpose::Trial, &[0]);
    let draw = simulator::sample_draw(&scene, &mut rng);
    println!("{} photons:", draw.m());
    for t in &draw.timestamps {
        println!("  {t:.4}");
    }

    let sensor = SensorModel {
        sigma_j: 0.05,
        ..SensorModel::default()
    };
    let first: Vec<String> = (0..8)
        .map(|_| match simulator::sample_first_photon(&scene, &sensor, &mut rng) {
            Some(t) => format!("{t:.3}"),
            None => "-".into(),
        })
        .collect();
    println!("first photons of 8 frames: {}", first.join(" "));
    Ok(())
}
