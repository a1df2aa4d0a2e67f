//! Adaptive Gauss-Kronrod integration of a narrow Gaussian over a wide
//! interval. Without a breakpoint at the peak the first rule never samples
//! it and reports zero.
//!
//! ```bash
//! cargo run --example adaptive_quadrature
//! ```

use splidar::quadrature::{self, QuadratureConfig};

fn main() -> splidar::Result<()> {
    let sigma = 1e-3;
    let f = |t: f64| (-0.5 * ((t - 3.3) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let cfg = QuadratureConfig::default();
    for breaks in [&[][..], &[3.3][..]] {
        let r = quadrature::integrate(f, 0.0, 10.0, breaks, &cfg)?;
        println!(
            "breakpoints {breaks:?}: {:.12} (error {:.1e}, {} subdivisions, {} evaluations)",
            r.value, r.error, r.subdivisions, r.evaluations
        );
    }
    Ok(())
}
