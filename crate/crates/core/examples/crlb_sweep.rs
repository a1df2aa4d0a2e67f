//! Count and timestamp bounds on reflectivity over the SBR grid, as CSV.
//!
//! ```bash
//! cargo run --example crlb_sweep > crlb.csv
//! ```

use splidar::crlb;
use splidar::quadrature::QuadratureConfig;
use splidar::verify;

fn main() -> splidar::Result<()> {
    let report = crlb::verify_bound_ordering(&verify::bound_scenes()?, &QuadratureConfig::default())?;
    print!("{}", crlb::to_csv(&report.rows));
    eprintln!("timestamp bound below count bound everywhere: {}", report.passed());
    Ok(())
}
