//! Link budget of the reference sensor at 30 m: signal and background
//! photons per cycle and per exposure for a few reflectances.
//!
//! ```bash
//! cargo run --example radiometric_preset
//! ```

use splidar::radiometric::{self, RadiometricParams};

fn main() -> splidar::Result<()> {
    let p = RadiometricParams::default();
    let n_r = p.repetitions() as f64;
    println!("photon energy {:.4e} J, illuminated area {:.3} m^2, {} cycles per exposure", p.photon_energy(), p.illuminated_area(), n_r);
    let gammas = [0.1, 0.4, 0.7, 1.0];
    let alpha = radiometric::radiometric_alpha(&p, &gammas)?;
    for (g, a) in gammas.iter().zip(&alpha) {
        let (b_bck, b_dc) = radiometric::background_energy(&p, *g, p.t_r)?;
        let b = p.eta * b_bck + b_dc;
        println!(
            "Gamma {g:.1}: alpha {a:.4e}/cycle, B {b:.4e}/cycle, per exposure signal {:.3} background {:.3}, SBR {:.2}",
            p.eta * a * n_r,
            b * n_r,
            p.eta * a / b
        );
    }
    Ok(())
}
