//! Simulates a 32x32 ramp scene for 10 frames and reconstructs it with
//! growing pooling windows. PGM maps go to the directory given as the
//! first argument, if any.
//!
//! ```bash
//! cargo run --release --example frame_reconstruction -- /tmp/maps
//! ```

use std::path::PathBuf;

use splidar::estimators::SolverConfig;
use splidar::experiments::{self, ReconstructionMode};
use splidar::io;
use splidar::simulator::{self, SensorModel};
use splidar::verify;

fn main() -> splidar::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let grid = verify::frame_scene()?;
    let stack = simulator::simulate_frames(&grid, &SensorModel::default(), 10, 7)?;
    println!("detections per pixel and frame: {:.3}", stack.valid_fraction());
    for window in [1, 5, 10] {
        for mode in [ReconstructionMode::Baseline, ReconstructionMode::Joint] {
            let rec = experiments::reconstruct_frames(&stack, window, mode, &SolverConfig::default())?;
            let m = &rec.metrics;
            println!(
                "window {window:>2} {:<8} depth RMSE {:.4}  reflectivity RMSE {:.4}  PSNR {:.2} dB  failures {}",
                mode.as_str(),
                m.depth_rmse,
                m.reflectivity_rmse,
                m.reflectivity_psnr,
                m.failures
            );
            if let (Some(dir), ReconstructionMode::Joint) = (&out, mode) {
                std::fs::create_dir_all(dir).map_err(|e| splidar::Error::Io { path: dir.clone(), source: e })?;
                let (w, h) = (stack.width(), stack.height());
                io::write_pgm16(&dir.join(format!("depth_w{window}.pgm")), w, h, &rec.tau, 0.0, stack.period())?;
                io::write_pgm16(&dir.join(format!("reflectivity_w{window}.pgm")), w, h, &rec.alpha, 0.0, 0.75)?;
            }
        }
    }
    Ok(())
}
