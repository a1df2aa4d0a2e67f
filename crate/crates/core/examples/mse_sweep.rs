//! MSE against SBR for both estimator pairs. The first argument sets the
//! trial count (default 1000).
//!
//! ```bash
//! cargo run --release --example mse_sweep -- 200
//! ```

use splidar::estimators::SolverConfig;
use splidar::experiments::{self, EstimatorPair, SweepSpec};

fn main() -> splidar::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    for pair in [EstimatorPair::Depth, EstimatorPair::Reflectivity] {
        let result = experiments::run_sweep(&SweepSpec::verification(pair, trials, 2024), &SolverConfig::default())?;
        println!("# {}", pair.as_str());
        print!("{}", experiments::sweep_csv(&result));
    }
    Ok(())
}
