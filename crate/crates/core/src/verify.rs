//! Acceptance checks. Each returns a [`CriterionOutcome`]; the `verify`
//! subcommand and the acceptance test target both run them.

use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

use crate::crlb;
use crate::error::Result;
use crate::estimators::{self, SolverConfig};
use crate::experiments::{
    self, EstimatorPair, ReconstructionMode, SweepSpec, VERIFICATION_SBRS,
};
use crate::model::{AcquisitionConfig, PixelScene, PulseShape, SbrConvention, SceneGrid};
use crate::quadrature::QuadratureConfig;
use crate::rng::{substream, Purpose};
use crate::simulator::{self, SensorModel};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CriterionOutcome {
    /// `[PASS] 3 name: detail`, without timing.
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {} {}: {}", self.id, self.name, self.detail)
    }
}

fn timed(
    id: u8,
    name: &'static str,
    limit: Duration,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok((ok, detail)) if elapsed <= limit => (ok, detail),
        Ok((_, detail)) => (false, format!("{detail}; took {elapsed:?}, limit {limit:?}")),
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
        elapsed,
    }
}

fn preset_scene(sbr: f64) -> Result<PixelScene> {
    SweepSpec::verification(EstimatorPair::Depth, 1, 0).scene(sbr)
}

/// Scenes of the bound check: the five-point SBR grid plus a noiseless
/// scene with the SBR = 1 pulse.
pub fn bound_scenes() -> Result<Vec<PixelScene>> {
    let mut scenes = VERIFICATION_SBRS
        .iter()
        .map(|&s| preset_scene(s))
        .collect::<Result<Vec<_>>>()?;
    scenes.push(preset_scene(1.0)?.with_b_lambda(0.0)?);
    Ok(scenes)
}

pub fn criterion_bound_ordering() -> CriterionOutcome {
    timed(1, "timestamp bound below count bound", Duration::from_secs(1), || {
        let report = crlb::verify_bound_ordering(&bound_scenes()?, &QuadratureConfig::default())?;
        let worst = report
            .rows
            .iter()
            .filter(|r| r.b_lambda > 0.0)
            .map(|r| r.report.ratio)
            .fold(0.0, f64::max);
        let noiseless = report.rows.last().map_or(f64::NAN, |r| r.report.ratio);
        let failing: Vec<String> = report.rows.iter().filter(|r| !r.passed).map(|r| r.detail.clone()).collect();
        Ok((
            report.passed(),
            if failing.is_empty() {
                format!("max ratio {worst:.6} over b>0, noiseless ratio {noiseless:.12}")
            } else {
                failing.join("; ")
            },
        ))
    })
}

pub fn criterion_noiseless_joint(seed: u64) -> CriterionOutcome {
    timed(2, "noiseless joint estimate is separable", Duration::from_secs(1), || {
        let scene = preset_scene(1.0)?.with_b_lambda(0.0)?;
        let solver = SolverConfig::default();
        let (mut worst, mut skipped) = (0.0f64, 0);
        for k in 0..100u64 {
            let mut rng = substream(seed, Purpose::Verify, &[2, k]);
            let ts = simulator::sample_draw(&scene, &mut rng).timestamps;
            if ts.is_empty() {
                skipped += 1;
                continue;
            }
            let init = (estimators::coarse_init(&ts, &scene)?, 1.0);
            let joint = estimators::joint_mle(&ts, &scene, init, &solver)?;
            let mean = estimators::depth_sample_mean(&ts, &scene)?.value;
            let count = estimators::reflectivity_count_mle(ts.len(), &scene).value;
            worst = worst
                .max((joint.depth.value - mean).abs())
                .max((joint.reflectivity.value - count).abs());
        }
        Ok((worst <= 1e-6, format!("max abs deviation {worst:.3e} over {} trials", 100 - skipped)))
    })
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

pub fn criterion_side_information(seed: u64) -> CriterionOutcome {
    timed(3, "side information lowers MSE", Duration::from_secs(300), || {
        let solver = SolverConfig::default();
        let mut ok = true;
        let mut parts = Vec::new();
        for pair in [EstimatorPair::Depth, EstimatorPair::Reflectivity] {
            let spec = SweepSpec::verification(pair, 1000, seed);
            let result = single_threaded(|| experiments::run_sweep(&spec, &solver))?;
            let ratios: Vec<f64> = result.rows.iter().map(|r| r.mse_without / r.mse_with).collect();
            let ordered = result.rows.iter().all(|r| r.mse_with <= r.mse_without);
            let widening = ratios[0] > ratios[ratios.len() - 1];
            ok &= ordered && widening;
            parts.push(format!(
                "{} ratios {}",
                pair.as_str(),
                ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/")
            ));
        }
        Ok((ok, parts.join(", ")))
    })
}

/// SBR at which consistency is checked: the most signal-dominated point
/// of the grid.
pub const CONSISTENCY_SBR: f64 = 10.0;

pub fn criterion_consistency(seed: u64) -> CriterionOutcome {
    timed(4, "MSE scales as 1/N_r", Duration::from_secs(300), || {
        let solver = SolverConfig::default();
        let mut ok = true;
        let mut parts = Vec::new();
        for pair in [EstimatorPair::Depth, EstimatorPair::Reflectivity] {
            let mut mses = [0.0; 2];
            for (j, n_r) in [1000u64, 4000].into_iter().enumerate() {
                let mut spec = SweepSpec::verification(pair, 1000, seed);
                spec.sbrs = vec![CONSISTENCY_SBR];
                spec.n_r = n_r;
                spec.photon_level = 10.0 * n_r as f64 / 1000.0;
                mses[j] = experiments::run_sweep(&spec, &solver)?.rows[0].mse_with;
            }
            let ratio = mses[0] / mses[1];
            ok &= (2.5..=6.0).contains(&ratio);
            parts.push(format!("{} {ratio:.2}x", pair.as_str()));
        }
        Ok((ok, format!("SBR {CONSISTENCY_SBR}: {}", parts.join(", "))))
    })
}

/// Pearson statistic for `counts` against Poisson(`mean`), pooling tail
/// cells until each expects at least 5. Returns (statistic, dof).
pub fn poisson_chi_square(counts: &[u64], mean: f64) -> (f64, usize) {
    let n = counts.len() as u64;
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0u64; max + 1];
    for &c in counts {
        observed[c as usize] += 1;
    }
    let law = Poisson::new(mean).expect("positive mean");
    let expect = |k: usize| n as f64 * law.pmf(k as u64);

    // cells: [0..=lo], lo+1, ..., hi-1, [hi..)
    let mut lo = 0;
    let mut acc = expect(0);
    while acc < 5.0 {
        lo += 1;
        acc += expect(lo);
    }
    let mut hi = max.max(lo + 1);
    let mut tail = n as f64 * (1.0 - (0..hi).map(|k| law.pmf(k as u64)).sum::<f64>());
    while tail < 5.0 && hi > lo + 1 {
        hi -= 1;
        tail += expect(hi);
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    cells.push(((0..=lo).map(|k| observed.get(k).copied().unwrap_or(0)).sum::<u64>() as f64, acc));
    for k in lo + 1..hi {
        cells.push((observed.get(k).copied().unwrap_or(0) as f64, expect(k)));
    }
    let obs_tail: u64 = observed.iter().skip(hi).sum();
    cells.push((obs_tail as f64, tail));
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len() - 1)
}

/// Kolmogorov–Smirnov distance between `sample` and `cdf`.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// CDF of a detected first-photon time: truncated Gaussian of width
/// `sqrt(sigma_t^2 + sigma_j^2)` with weight `P_sig`, uniform otherwise.
pub fn first_photon_cdf(scene: &PixelScene, sigma_j: f64) -> impl Fn(f64) -> f64 {
    let sigma = scene.pulse().width().hypot(sigma_j);
    let normal = Normal::new(scene.tau(), sigma).expect("positive width");
    let t_r = scene.period();
    let (lo, hi) = (normal.cdf(0.0), normal.cdf(t_r));
    let p = scene.signal_probability();
    move |t: f64| p * (normal.cdf(t) - lo) / (hi - lo) + (1.0 - p) * t / t_r
}

/// Jitter used in the first-photon fit.
pub const FIDELITY_SIGMA_J: f64 = 0.1;

pub fn criterion_simulator_fidelity(seed: u64) -> CriterionOutcome {
    timed(5, "simulator distributions", Duration::from_secs(30), || {
        let n = 100_000;
        let scene = preset_scene(5.0)?;
        let mut rng = substream(seed, Purpose::Verify, &[5, 0]);
        let counts: Vec<u64> = (0..n).map(|_| simulator::sample_count(&scene, &mut rng) as u64).collect();
        let (stat, dof) = poisson_chi_square(&counts, scene.photon_level());
        let critical = ChiSquared::new(dof as f64).expect("dof >= 1").inverse_cdf(0.99);

        let sensor = SensorModel {
            sigma_j: FIDELITY_SIGMA_J,
            ..SensorModel::default()
        };
        let mut rng = substream(seed, Purpose::Verify, &[5, 1]);
        let mut times: Vec<f64> = Vec::with_capacity(n);
        while times.len() < n {
            if let Some(t) = simulator::sample_first_photon(&scene, &sensor, &mut rng) {
                times.push(t);
            }
        }
        let d = ks_statistic(&mut times, first_photon_cdf(&scene, FIDELITY_SIGMA_J));
        let d_crit = ks_critical_1pct(n);
        Ok((
            stat < critical && d < d_crit,
            format!("chi2 {stat:.2} < {critical:.2} (dof {dof}), KS {d:.5} < {d_crit:.5}"),
        ))
    })
}

/// Random scene and timestamp set for derivative checks. At least one
/// timestamp lies within five widths of the pulse.
pub fn random_instance<R: Rng>(rng: &mut R) -> Result<(PixelScene, Vec<f64>)> {
    let acq = AcquisitionConfig::new(10.0, rng.random_range(100..5000), rng.random_range(0.2..=1.0))?;
    let pulse = PulseShape::new(rng.random_range(0.001..0.05), rng.random_range(0.1..0.6))?;
    let tau = rng.random_range(2.0..8.0);
    let scene = PixelScene::new(
        rng.random_range(0.1..2.0),
        tau,
        rng.random_range(1e-5..2e-3),
        pulse,
        acq,
    )?;
    let m = rng.random_range(1..30);
    loop {
        let ts = simulator::sample_timestamps(&scene, m, rng);
        if ts.iter().any(|t| (t - tau).abs() <= 5.0 * pulse.width()) {
            return Ok((scene, ts));
        }
    }
}

pub fn criterion_derivatives(seed: u64) -> CriterionOutcome {
    timed(6, "analytic derivatives", Duration::from_secs(1), || {
        let mut worst = 0.0f64;
        for k in 0..100u64 {
            let mut rng = substream(seed, Purpose::Verify, &[6, k]);
            let (scene, ts) = random_instance(&mut rng)?;
            let (alpha, tau) = (rng.random_range(0.05..3.0), rng.random_range(1.0..9.0));
            let h_tau = 1e-6 * scene.period();
            let fd_tau = (estimators::loglik(&ts, alpha, tau + h_tau, &scene)?
                - estimators::loglik(&ts, alpha, tau - h_tau, &scene)?)
                / (2.0 * h_tau);
            let an_tau = estimators::dloglik_dtau(&ts, alpha, tau, &scene)?;
            let h_alpha = 1e-6 * alpha;
            let fd_alpha = (estimators::loglik(&ts, alpha + h_alpha, tau, &scene)?
                - estimators::loglik(&ts, alpha - h_alpha, tau, &scene)?)
                / (2.0 * h_alpha);
            let an_alpha = estimators::dloglik_dalpha(&ts, alpha, tau, &scene)?;
            worst = worst
                .max((fd_tau - an_tau).abs() / an_tau.abs().max(1.0))
                .max((fd_alpha - an_alpha).abs() / an_alpha.abs().max(1.0));
        }
        Ok((worst <= 1e-5, format!("max relative error {worst:.3e} over 100 instances")))
    })
}

pub fn criterion_monotone_alpha(seed: u64) -> CriterionOutcome {
    timed(7, "dL/dalpha strictly decreasing", Duration::from_secs(1), || {
        let mut violations = 0;
        for k in 0..100u64 {
            let mut rng = substream(seed, Purpose::Verify, &[7, k]);
            let (scene, ts) = random_instance(&mut rng)?;
            let values = (0..=50)
                .map(|i| estimators::dloglik_dalpha(&ts, i as f64 * 0.1, scene.tau(), &scene))
                .collect::<Result<Vec<_>>>()?;
            if values.windows(2).any(|w| w[1] >= w[0]) {
                violations += 1;
            }
        }
        Ok((violations == 0, format!("{violations} of 100 instances not strictly decreasing on [0, 5]")))
    })
}

/// 32x32 scene for the frame pipeline check: reflectivity ramps over
/// columns, delay over rows, photon level 10 per frame at the centre
/// reflectivity with SBR 1.
pub fn frame_scene() -> Result<SceneGrid> {
    let (w, h) = (32, 32);
    let acq = AcquisitionConfig::new(10.0, 1000, 1.0)?;
    let centre = PixelScene::from_constraints(10.0, 1.0, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)?;
    let alpha = (0..w * h).map(|i| 0.25 + 0.5 * (i % w) as f64 / (w - 1) as f64).collect();
    let tau = (0..w * h).map(|i| 3.0 + 4.0 * (i / w) as f64 / (h - 1) as f64).collect();
    SceneGrid::new(w, h, alpha, tau, vec![centre.b_lambda(); w * h], *centre.pulse(), acq)
}

pub const FRAME_WINDOWS: [usize; 3] = [1, 5, 10];

pub fn frame_metrics(seed: u64) -> Result<Vec<experiments::ReconstructionMetrics>> {
    let stack = simulator::simulate_frames(&frame_scene()?, &SensorModel::default(), 10, seed)?;
    FRAME_WINDOWS
        .iter()
        .map(|&w| {
            experiments::reconstruct_frames(&stack, w, ReconstructionMode::Joint, &SolverConfig::default())
                .map(|r| r.metrics)
        })
        .collect()
}

pub fn criterion_frame_pipeline(seed: u64) -> CriterionOutcome {
    timed(8, "frame reconstruction improves with pooling", Duration::from_secs(60), || {
        let metrics = frame_metrics(seed)?;
        let depth: Vec<f64> = metrics.iter().map(|m| m.depth_rmse).collect();
        let refl: Vec<f64> = metrics.iter().map(|m| m.reflectivity_rmse).collect();
        let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ");
        Ok((
            decreasing(&depth) && decreasing(&refl),
            format!("depth RMSE {}, reflectivity RMSE {}", fmt(&depth), fmt(&refl)),
        ))
    })
}

/// Named output file held in memory.
pub type Artifact = (String, Vec<u8>);

/// Scatter trials per SBR in the verification artifacts.
pub const SCATTER_TRIALS: usize = 50;

/// Files written by `verify`: bound table, both sweeps and their scatter
/// sets, the consistency table and the frame metrics.
pub fn verify_artifacts(seed: u64) -> Result<Vec<Artifact>> {
    let solver = SolverConfig::default();
    let mut out: Vec<Artifact> = Vec::new();
    let bounds = crlb::verify_bound_ordering(&bound_scenes()?, &QuadratureConfig::default())?;
    out.push(("crlb.csv".into(), crlb::to_csv(&bounds.rows).into_bytes()));

    let mut consistency = String::from("pair,sbr,n_r,trials,mse_with,mse_without\n");
    for pair in [EstimatorPair::Depth, EstimatorPair::Reflectivity] {
        let name = pair.as_str();
        let sweep = experiments::run_sweep(&SweepSpec::verification(pair, 1000, seed), &solver)?;
        out.push((format!("sweep_{name}.csv"), experiments::sweep_csv(&sweep).into_bytes()));
        let scatter = experiments::run_sweep(&SweepSpec::verification(pair, SCATTER_TRIALS, seed), &solver)?;
        let rows = experiments::scatter_rows(&scatter);
        out.push((format!("scatter_{name}.csv"), experiments::scatter_csv(&rows).into_bytes()));
        for n_r in [1000u64, 4000] {
            let mut spec = SweepSpec::verification(pair, 1000, seed);
            spec.sbrs = vec![CONSISTENCY_SBR];
            spec.n_r = n_r;
            spec.photon_level = 10.0 * n_r as f64 / 1000.0;
            let row = &experiments::run_sweep(&spec, &solver)?.rows[0];
            consistency.push_str(&format!(
                "{name},{CONSISTENCY_SBR},{n_r},{},{},{}\n",
                row.trials, row.mse_with, row.mse_without
            ));
        }
    }
    out.push(("consistency.csv".into(), consistency.into_bytes()));

    let mut metrics = String::new();
    for m in frame_metrics(seed)? {
        metrics.push_str(&m.to_entries().to_text());
        metrics.push('\n');
    }
    out.push(("frame_metrics.txt".into(), metrics.into_bytes()));
    Ok(out)
}

/// First differing file between two artifact sets, if any.
pub fn first_difference(a: &[Artifact], b: &[Artifact]) -> Option<String> {
    if a.len() != b.len() {
        return Some(format!("{} files vs {}", a.len(), b.len()));
    }
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .map(|(x, _)| x.0.clone())
}

/// Builds the artifacts on one thread and on `threads` threads (at least
/// two) and compares them byte for byte. The multi-threaded set is
/// returned for writing.
pub fn criterion_reproducibility(seed: u64, threads: usize) -> (CriterionOutcome, Option<Vec<Artifact>>) {
    let mut kept = None;
    let outcome = timed(9, "byte-identical artifacts across thread counts", Duration::from_secs(600), || {
        let threads = threads.max(2);
        let serial = single_threaded(|| verify_artifacts(seed))?;
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| verify_artifacts(seed))?;
        let again = verify_artifacts(seed)?;
        let result = match first_difference(&serial, &parallel).or_else(|| first_difference(&parallel, &again)) {
            None => (true, format!("{} files identical single-threaded, multi-threaded and on rerun", serial.len())),
            Some(name) => (false, format!("{name} differs")),
        };
        kept = Some(parallel);
        Ok(result)
    });
    (outcome, kept)
}

/// All nine criteria, in order, and the artifacts written by `verify`.
pub fn run_all(seed: u64, threads: usize) -> (Vec<CriterionOutcome>, Option<Vec<Artifact>>) {
    let mut outcomes = run_numeric(seed);
    let (repro, artifacts) = criterion_reproducibility(seed, threads);
    outcomes.push(repro);
    (outcomes, artifacts)
}

/// All criteria except reproducibility.
pub fn run_numeric(seed: u64) -> Vec<CriterionOutcome> {
    vec![
        criterion_bound_ordering(),
        criterion_noiseless_joint(seed),
        criterion_side_information(seed),
        criterion_consistency(seed),
        criterion_simulator_fidelity(seed),
        criterion_derivatives(seed),
        criterion_monotone_alpha(seed),
        criterion_frame_pipeline(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_of_exact_expectations_is_small() {
        // counts laid out in proportion to the pmf
        let law = Poisson::new(10.0).unwrap();
        let mut counts = Vec::new();
        for k in 0..40u64 {
            let c = (100_000.0 * law.pmf(k)).round() as usize;
            counts.extend(std::iter::repeat_n(k, c));
        }
        let (stat, dof) = poisson_chi_square(&counts, 10.0);
        assert!(stat < 1.0, "{stat}");
        assert!(dof >= 10);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&mut v, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn mixture_cdf_endpoints() {
        let scene = preset_scene(5.0).unwrap();
        let f = first_photon_cdf(&scene, 0.1);
        assert!(f(0.0).abs() < 1e-12);
        assert!((f(10.0) - 1.0).abs() < 1e-12);
    }
}
