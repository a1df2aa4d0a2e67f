//! Writes a small frame stack and a PGM map, then reads both back.
//!
//! ```bash
//! cargo run --example stack_io
//! ```

use splidar::io;
use splidar::model::{AcquisitionConfig, PixelScene, SbrConvention, SceneGrid};
use splidar::simulator::{self, SensorModel};

fn main() -> splidar::Result<()> {
    let dir = std::env::temp_dir().join("splidar_stack_io");
    std::fs::create_dir_all(&dir).map_err(|e| splidar::Error::Io { path: dir.clone(), source: e })?;
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let scene = PixelScene::from_constraints(0.5, 1.0, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)?;
    let stack = simulator::simulate_frames(&SceneGrid::uniform(6, 4, &scene)?, &SensorModel::default(), 3, 5)?;

    let path = dir.join("stack.splf");
    io::write_stack(&stack, &path)?;
    let back = io::read_stack(&path)?;
    println!("{} -> {}x{}x{} frames, identical: {}", path.display(), back.width(), back.height(), back.n_frames, back.timestamps.iter().zip(&stack.timestamps).all(|(a, b)| a.to_bits() == b.to_bits()));
    println!("sidecar {}", io::sidecar_path(&path).display());

    let pgm = dir.join("frame0.pgm");
    io::write_pgm16(&pgm, stack.width(), stack.height(), stack.frame(0), 0.0, stack.period())?;
    let img = io::read_pgm(&pgm)?;
    println!("{} -> {}x{}, first row {:?}", pgm.display(), img.width, img.height, &img.values[..img.width]);
    Ok(())
}
