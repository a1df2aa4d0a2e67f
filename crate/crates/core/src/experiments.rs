//! Seeded Monte Carlo studies and per-pixel frame reconstruction.
//!
//! A sweep draws independent timestamp sets for each SBR value and compares
//! an estimator that is given the other parameter (the "with" estimator)
//! against the one that is not (the "without" estimator):
//!
//! | pair         | with                               | without            |
//! |--------------|------------------------------------|--------------------|
//! | depth        | bracketing search, true alpha      | timestamp mean     |
//! | reflectivity | bisection on dL/dalpha, true tau   | count estimator    |
//!
//! Trial `k` at SBR index `i` samples from sub-stream `(seed, i, k)`, so the
//! results do not depend on thread count or scheduling.

use std::str::FromStr;

use rayon::prelude::*;

use crate::config::KeyValues;
use crate::crlb;
use crate::error::{Error, Result};
use crate::estimators::{self, SolverConfig};
use crate::model::{AcquisitionConfig, PixelScene, SbrConvention};
use crate::quadrature::QuadratureConfig;
use crate::rng::{substream, Purpose};
use crate::rootfind::{self, Bisection};
use crate::simulator::{sample_draw, FrameStack};

/// SBR grid of the verification preset.
pub const VERIFICATION_SBRS: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorPair {
    Depth,
    Reflectivity,
}

impl EstimatorPair {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorPair::Depth => "depth",
            EstimatorPair::Reflectivity => "reflectivity",
        }
    }
}

impl FromStr for EstimatorPair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "depth" => Ok(EstimatorPair::Depth),
            "reflectivity" => Ok(EstimatorPair::Reflectivity),
            other => Err(format!("unknown pair `{other}` (expected depth or reflectivity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sbrs: Vec<f64>,
    pub photon_level: f64,
    pub n_r: u64,
    pub eta: f64,
    pub alpha: f64,
    pub tau: f64,
    pub sigma_t: f64,
    pub t_r: f64,
    pub trials: usize,
    pub seed: u64,
    pub pair: EstimatorPair,
}

pub const SWEEP_KEYS: &[&str] = &[
    "sbr",
    "photon_level",
    "n_r",
    "eta",
    "alpha",
    "tau",
    "sigma_t",
    "t_r",
    "trials",
    "seed",
    "pair",
];

impl SweepSpec {
    /// The verification preset: `t_r = 10`, `N_r = 1000`, `tau = 4`,
    /// `alpha = 0.5`, `sigma_t = 0.2`, photon level 10.
    pub fn verification(pair: EstimatorPair, trials: usize, seed: u64) -> Self {
        SweepSpec {
            sbrs: VERIFICATION_SBRS.to_vec(),
            photon_level: 10.0,
            n_r: 1000,
            eta: 1.0,
            alpha: 0.5,
            tau: 4.0,
            sigma_t: 0.2,
            t_r: 10.0,
            trials,
            seed,
            pair,
        }
    }

    pub fn from_entries(kv: &KeyValues) -> Result<Self> {
        kv.ensure_known(SWEEP_KEYS)?;
        let pair = kv
            .require_raw("pair")?
            .parse()
            .map_err(|reason| Error::Config {
                origin: kv.origin().to_string(),
                reason,
            })?;
        let spec = SweepSpec {
            sbrs: kv.get_list("sbr")?.ok_or_else(|| Error::MissingKey {
                key: "sbr".into(),
                origin: kv.origin().to_string(),
            })?,
            photon_level: kv.require("photon_level")?,
            n_r: kv.require("n_r")?,
            eta: kv.get_or("eta", 1.0)?,
            alpha: kv.require("alpha")?,
            tau: kv.require("tau")?,
            sigma_t: kv.require("sigma_t")?,
            t_r: kv.require("t_r")?,
            trials: kv.require("trials")?,
            seed: kv.require("seed")?,
            pair,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_entries(&self) -> KeyValues {
        let mut kv = KeyValues::new("sweep");
        kv.set_list("sbr", &self.sbrs);
        kv.set("photon_level", self.photon_level);
        kv.set("n_r", self.n_r);
        kv.set("eta", self.eta);
        kv.set("alpha", self.alpha);
        kv.set("tau", self.tau);
        kv.set("sigma_t", self.sigma_t);
        kv.set("t_r", self.t_r);
        kv.set("trials", self.trials);
        kv.set("seed", self.seed);
        kv.set("pair", self.pair.as_str());
        kv
    }

    pub fn validate(&self) -> Result<()> {
        if self.sbrs.is_empty() {
            return Err(Error::invalid("sbr", "list must not be empty"));
        }
        if let Some(bad) = self.sbrs.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid("sbr", format!("values must be > 0, got {bad}")));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        for sbr in &self.sbrs {
            self.scene(*sbr)?;
        }
        Ok(())
    }

    pub fn acquisition(&self) -> Result<AcquisitionConfig> {
        AcquisitionConfig::new(self.t_r, self.n_r, self.eta)
    }

    pub fn scene(&self, sbr: f64) -> Result<PixelScene> {
        PixelScene::from_constraints(
            self.photon_level,
            sbr,
            self.alpha,
            self.tau,
            self.acquisition()?,
            self.sigma_t,
            SbrConvention::SignalEnergy,
        )
    }
}

/// Estimates from one trial. Failed estimators leave NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub m: usize,
    pub truth: f64,
    pub est_with: f64,
    pub est_without: f64,
    /// Estimates before the constraint clamp.
    pub raw_with: f64,
    pub raw_without: f64,
    pub clamped: bool,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.est_with.is_nan() || self.est_without.is_nan()
    }
}

/// Runs both estimators of `pair` on one draw from `scene`.
pub fn run_trial(
    scene: &PixelScene,
    pair: EstimatorPair,
    seed: u64,
    sbr_index: usize,
    trial: usize,
    solver: &SolverConfig,
) -> TrialOutcome {
    let mut rng = substream(seed, Purpose::Trial, &[sbr_index as u64, trial as u64]);
    let draw = sample_draw(scene, &mut rng);
    let ts = &draw.timestamps;
    let m = ts.len();
    match pair {
        EstimatorPair::Depth => {
            let with = estimators::depth_mle_known_alpha(ts, scene.alpha(), scene, scene.tau(), solver)
                .ok()
                .filter(|r| r.converged);
            let without = estimators::depth_sample_mean(ts, scene).ok();
            let with_v = with.map_or(f64::NAN, |r| r.value);
            let without_v = without.map_or(f64::NAN, |r| r.value);
            TrialOutcome {
                m,
                truth: scene.tau(),
                est_with: with_v,
                est_without: without_v,
                raw_with: with_v,
                raw_without: without_v,
                clamped: false,
            }
        }
        EstimatorPair::Reflectivity => {
            let with = estimators::reflectivity_mle_known_tau(ts, scene.tau(), scene, solver)
                .ok()
                .filter(|r| r.converged);
            let without = estimators::reflectivity_count_mle(m, scene);
            let raw_without = estimators::reflectivity_count_unconstrained(m, scene);
            let with_v = with.map_or(f64::NAN, |r| r.value);
            // the unconstrained root of dL/dalpha lies below 0 exactly when clamped;
            // it is not computed, so the clamped value stands in
            TrialOutcome {
                m,
                truth: scene.alpha(),
                est_with: with_v,
                est_without: without.value,
                raw_with: with_v,
                raw_without,
                clamped: with.is_some_and(|r| r.clamped) || without.clamped,
            }
        }
    }
}

/// Mean squared deviation of `estimates` from `truth`.
pub fn mse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("estimates", "must not be empty"));
    }
    Ok(estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sbr: f64,
    /// The same scene's SBR under the pulse-energy convention `S/B`.
    pub sbr_pulse: f64,
    pub trials: usize,
    pub failures: usize,
    pub mse_with: f64,
    pub mse_without: f64,
    pub mse_with_unclamped: f64,
    pub mse_without_unclamped: f64,
    /// Bounds for the reflectivity pair, NaN for the depth pair.
    pub crlb_count: f64,
    pub crlb_timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    /// Per-SBR trial outcomes in trial order.
    pub outcomes: Vec<Vec<TrialOutcome>>,
}

pub fn run_sweep(spec: &SweepSpec, solver: &SolverConfig) -> Result<SweepResult> {
    spec.validate()?;
    solver.validate()?;
    let quad = QuadratureConfig::default();
    let mut rows = Vec::with_capacity(spec.sbrs.len());
    let mut outcomes = Vec::with_capacity(spec.sbrs.len());
    for (i, &sbr) in spec.sbrs.iter().enumerate() {
        let scene = spec.scene(sbr)?;
        let trials: Vec<TrialOutcome> = (0..spec.trials)
            .into_par_iter()
            .map(|k| run_trial(&scene, spec.pair, spec.seed, i, k, solver))
            .collect();
        let ok: Vec<&TrialOutcome> = trials.iter().filter(|t| !t.failed()).collect();
        let failures = trials.len() - ok.len();
        let collect = |f: fn(&TrialOutcome) -> f64| ok.iter().map(|t| f(t)).collect::<Vec<f64>>();
        let truth = trials[0].truth;
        let mse_or_nan = |v: Vec<f64>| mse(&v, truth).unwrap_or(f64::NAN);
        let (crlb_count, crlb_timestamp) = match spec.pair {
            EstimatorPair::Reflectivity => (
                crlb::crlb_count(&scene),
                crlb::crlb_timestamp(&scene, &quad)?.value,
            ),
            EstimatorPair::Depth => (f64::NAN, f64::NAN),
        };
        rows.push(SweepRow {
            sbr,
            sbr_pulse: scene.sbr_with(SbrConvention::PulseEnergy).value(),
            trials: spec.trials,
            failures,
            mse_with: mse_or_nan(collect(|t| t.est_with)),
            mse_without: mse_or_nan(collect(|t| t.est_without)),
            mse_with_unclamped: mse_or_nan(collect(|t| t.raw_with)),
            mse_without_unclamped: mse_or_nan(collect(|t| t.raw_without)),
            crlb_count,
            crlb_timestamp,
        });
        outcomes.push(trials);
    }
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        outcomes,
    })
}

pub const SWEEP_CSV_HEADER: &str = "sbr,sbr_pulse,trials,failures,mse_with,mse_without,crlb_count,crlb_timestamp";

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.sbr, r.sbr_pulse, r.trials, r.failures, r.mse_with, r.mse_without, r.crlb_count, r.crlb_timestamp
        ));
    }
    out
}

/// Same rows with MSEs of the unclamped estimates.
pub fn sweep_unclamped_csv(result: &SweepResult) -> String {
    let mut out = String::from("sbr,trials,failures,mse_with_unclamped,mse_without_unclamped\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sbr, r.trials, r.failures, r.mse_with_unclamped, r.mse_without_unclamped
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    pub sbr: f64,
    pub trial: usize,
    pub truth: f64,
    pub est_with: f64,
    pub est_without: f64,
}

pub const SCATTER_CSV_HEADER: &str = "sbr,trial,truth,est_with,est_without";

pub fn scatter_rows(result: &SweepResult) -> Vec<ScatterRow> {
    result
        .spec
        .sbrs
        .iter()
        .zip(&result.outcomes)
        .flat_map(|(&sbr, trials)| {
            trials.iter().enumerate().map(move |(k, t)| ScatterRow {
                sbr,
                trial: k,
                truth: t.truth,
                est_with: t.est_with,
                est_without: t.est_without,
            })
        })
        .collect()
}

pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from(SCATTER_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sbr, r.trial, r.truth, r.est_with, r.est_without
        ));
    }
    out
}

pub fn parse_scatter_csv(text: &str) -> Result<Vec<ScatterRow>> {
    let bad = |reason: String| Error::Config {
        origin: "scatter csv".into(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(SCATTER_CSV_HEADER) {
        return Err(bad("missing or wrong header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("row {}: expected 5 fields", i + 1)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {}: bad number `{s}`", i + 1)));
            Ok(ScatterRow {
                sbr: num(f[0])?,
                trial: f[1].parse().map_err(|_| bad(format!("row {}: bad trial", i + 1)))?,
                truth: num(f[2])?,
                est_with: num(f[3])?,
                est_without: num(f[4])?,
            })
        })
        .collect()
}

/// Per-pixel estimator used by [`reconstruct_frames`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionMode {
    /// Count estimate for a starting reflectivity, depth by bracketing
    /// search from the histogram peak, then reflectivity by bisection.
    Joint,
    /// Count estimate and timestamp mean.
    Baseline,
}

impl ReconstructionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReconstructionMode::Joint => "joint",
            ReconstructionMode::Baseline => "baseline",
        }
    }
}

impl FromStr for ReconstructionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "joint" => Ok(ReconstructionMode::Joint),
            "baseline" => Ok(ReconstructionMode::Baseline),
            other => Err(format!("unknown mode `{other}` (expected joint or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    pub window: usize,
    pub mode: ReconstructionMode,
    pub valid_pixels: usize,
    pub invalid_pixels: usize,
    /// Pixels where the depth search failed and the histogram peak was kept.
    pub failures: usize,
    /// RMSE of `tau / t_r` over valid pixels.
    pub depth_rmse: f64,
    /// RMSE of reflectivity divided by the largest true reflectivity,
    /// estimates clipped to `[0, 1]`.
    pub reflectivity_rmse: f64,
    pub reflectivity_psnr: f64,
}

impl ReconstructionMetrics {
    pub fn to_entries(&self) -> KeyValues {
        let mut kv = KeyValues::new("metrics");
        kv.set("window", self.window);
        kv.set("mode", self.mode.as_str());
        kv.set("valid_pixels", self.valid_pixels);
        kv.set("invalid_pixels", self.invalid_pixels);
        kv.set("failures", self.failures);
        kv.set("depth_rmse_normalized", self.depth_rmse);
        kv.set("reflectivity_rmse_normalized", self.reflectivity_rmse);
        kv.set("reflectivity_psnr_db", self.reflectivity_psnr);
        kv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Estimated delay per pixel, NaN where nothing was detected.
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub metrics: ReconstructionMetrics,
}

/// Per-cycle energy implied by `m` of `window` frames recording a photon,
/// `-ln(1 - m / window) / N_r`, with the firing fraction capped at
/// `1 - 1 / (2 window)` so a saturated pixel stays finite.
pub fn censored_energy(m: usize, window: usize, n_r: u64) -> f64 {
    let w = window as f64;
    let p = (m as f64 / w).min(1.0 - 0.5 / w);
    -(-p).ln_1p() / n_r as f64
}

/// Exposure that turns the reflectivity equation into the stationarity
/// condition of the first-photon likelihood of `window` frames with `m`
/// detections at per-cycle energy `lambda`:
///
/// ```text
/// N_eff = (W - m) N_r + m N_r (1/x - 1/(e^x - 1)),   x = N_r * lambda
/// ```
///
/// It tends to `W N_r` at low flux and to `(W - m) N_r` under saturation.
pub fn first_photon_exposure(m: usize, window: usize, n_r: u64, lambda: f64) -> f64 {
    let n_r = n_r as f64;
    let x = n_r * lambda;
    let f = if x < 1e-4 {
        0.5 - x / 12.0
    } else {
        1.0 / x - 1.0 / x.exp_m1()
    };
    (window - m) as f64 * n_r + m as f64 * n_r * f
}

/// Pseudo-count of the symmetric Beta(1 + a, 1 + a) prior on the signal
/// fraction of a saturated pixel.
pub const SIGNAL_FRACTION_PRIOR: f64 = 0.5;

/// Posterior mode of the signal fraction `p` of the detected timestamps
/// with known delay, `t ~ p s(t - tau)/S + (1 - p)/t_r`, under a symmetric
/// Beta(1 + `prior`, 1 + `prior`) prior. With `prior = 0` this is the
/// maximum-likelihood fraction, which reaches 0 or 1.
pub fn signal_fraction(timestamps: &[f64], tau: f64, scene: &PixelScene, prior: f64, solver: &SolverConfig) -> f64 {
    let u = 1.0 / scene.period();
    let energy = scene.pulse().energy();
    let f: Vec<f64> = timestamps.iter().map(|t| scene.pulse().value(t - tau) / energy).collect();
    let g = |p: f64| {
        f.iter().map(|fk| (fk - u) / (p * fk + (1.0 - p) * u)).sum::<f64>() + prior / p - prior / (1.0 - p)
    };
    let (lo, hi) = (1e-12, 1.0 - 1e-12);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo <= 0.0 {
        return if prior > 0.0 { lo } else { 0.0 };
    }
    if g_hi >= 0.0 {
        return if prior > 0.0 { hi } else { 1.0 };
    }
    let rule = Bisection {
        x_tol: solver.interval_tol,
        f_tol: 0.0,
        max_iter: solver.max_bisections,
    };
    rootfind::bisect(g, lo, hi, g_lo, g_hi, &rule).map_or(hi, |r| r.x)
}

/// Reflectivity of a pixel from its pooled first-photon timestamps with
/// known delay: the reflectivity equation is solved with the exposure of
/// [`first_photon_exposure`] evaluated at the current estimate, iterated to
/// a fixed point starting from the censored count estimate.
///
/// When every frame fired the likelihood can increase without bound in
/// reflectivity, so the estimate comes from the [`signal_fraction`] of the
/// timestamps instead, and is never below the censored count estimate.
pub fn first_photon_reflectivity(
    timestamps: &[f64],
    window: usize,
    tau: f64,
    scene: &PixelScene,
    solver: &SolverConfig,
) -> Result<estimators::EstimateReport> {
    let (m, n_r) = (timestamps.len(), scene.repetitions());
    let es = scene.system_energy();
    let b = scene.background_energy();
    let mut alpha = ((censored_energy(m, window, n_r) - b) / es).max(0.0);
    let mut report = estimators::EstimateReport {
        value: alpha,
        clamped: alpha == 0.0,
        iterations: 0,
        interval: (alpha, alpha),
        converged: false,
    };
    if m == window && b > 0.0 {
        let p = signal_fraction(timestamps, tau, scene, SIGNAL_FRACTION_PRIOR, solver);
        let from_fraction = p * b / ((1.0 - p) * es);
        return Ok(estimators::EstimateReport::closed_form(from_fraction.max(alpha), false));
    }
    for _ in 0..solver.max_outer {
        let exposure = first_photon_exposure(m, window, n_r, es * alpha + b).max(f64::MIN_POSITIVE);
        report = estimators::reflectivity_mle_with_exposure(timestamps, tau, scene, exposure, solver)?;
        let step = (report.value - alpha).abs();
        alpha = report.value;
        if !report.converged || step <= solver.outer_tol * alpha.max(1.0) {
            return Ok(report);
        }
    }
    report.converged = false;
    Ok(report)
}

struct PixelEstimate {
    tau: f64,
    alpha: f64,
    failed: bool,
}

fn reconstruct_pixel(
    ts: &[f64],
    window: usize,
    scene: &PixelScene,
    mode: ReconstructionMode,
    solver: &SolverConfig,
) -> Result<PixelEstimate> {
    match mode {
        ReconstructionMode::Baseline => {
            let energy = censored_energy(ts.len(), window, scene.repetitions());
            Ok(PixelEstimate {
                tau: estimators::depth_sample_mean(ts, scene)?.value,
                alpha: ((energy - scene.background_energy()) / scene.system_energy()).max(0.0),
                failed: false,
            })
        }
        ReconstructionMode::Joint => {
            let tau_0 = estimators::coarse_init(ts, scene)?;
            let alpha_0 = first_photon_reflectivity(ts, window, tau_0, scene, solver)?.value;
            let (tau, failed) = match estimators::depth_mle_known_alpha(ts, alpha_0, scene, tau_0, solver) {
                Ok(r) if alpha_0 > 0.0 => (r.value, false),
                _ => (tau_0, true),
            };
            let alpha = first_photon_reflectivity(ts, window, tau, scene, solver)?.value;
            Ok(PixelEstimate { tau, alpha, failed })
        }
    }
}

/// Pools each pixel's detections over the first `window` frames and
/// estimates depth and reflectivity, with `b_lambda` and the pulse taken
/// from the stack's ground truth. A frame records at most one photon, so
/// counts enter through the first-photon likelihood rather than the
/// Poisson count of a single long exposure.
pub fn reconstruct_frames(
    stack: &FrameStack,
    window: usize,
    mode: ReconstructionMode,
    solver: &SolverConfig,
) -> Result<Reconstruction> {
    if window == 0 || window > stack.n_frames {
        return Err(Error::invalid(
            "window",
            format!("must lie in [1, {}], got {window}", stack.n_frames),
        ));
    }
    solver.validate()?;
    let grid = &stack.grid;
    let n = grid.len();
    let per_pixel: Vec<Option<PixelEstimate>> = (0..n)
        .into_par_iter()
        .map(|p| -> Result<Option<PixelEstimate>> {
            let ts: Vec<f64> = (0..window)
                .map(|f| stack.frame(f)[p])
                .filter(|t| !t.is_nan())
                .collect();
            if ts.is_empty() {
                return Ok(None);
            }
            reconstruct_pixel(&ts, window, &grid.pixel_at(p), mode, solver).map(Some)
        })
        .collect::<Result<_>>()?;

    let t_r = grid.acq().period();
    let alpha_max = grid.alpha_map().iter().cloned().fold(0.0, f64::max);
    let alpha_scale = if alpha_max > 0.0 { alpha_max } else { 1.0 };
    let (mut depth_se, mut refl_se, mut valid, mut failures) = (0.0, 0.0, 0usize, 0usize);
    let mut tau = vec![f64::NAN; n];
    let mut alpha = vec![f64::NAN; n];
    for (p, est) in per_pixel.iter().enumerate() {
        let Some(est) = est else { continue };
        tau[p] = est.tau;
        alpha[p] = est.alpha;
        valid += 1;
        failures += est.failed as usize;
        depth_se += ((est.tau - grid.tau_map()[p]) / t_r).powi(2);
        let a = (est.alpha / alpha_scale).clamp(0.0, 1.0);
        refl_se += (a - grid.alpha_map()[p] / alpha_scale).powi(2);
    }
    let (depth_rmse, refl_mse) = if valid > 0 {
        ((depth_se / valid as f64).sqrt(), refl_se / valid as f64)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(Reconstruction {
        tau,
        alpha,
        metrics: ReconstructionMetrics {
            window,
            mode,
            valid_pixels: valid,
            invalid_pixels: n - valid,
            failures,
            depth_rmse,
            reflectivity_rmse: refl_mse.sqrt(),
            reflectivity_psnr: 10.0 * (1.0 / refl_mse).log10(),
        },
    })
}
