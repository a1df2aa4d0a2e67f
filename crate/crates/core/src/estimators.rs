//! Per-pixel maximum-likelihood estimators of depth (time delay) and
//! reflectivity.
//!
//! All estimators maximise the timestamp log-likelihood
//!
//! ```text
//! L(alpha, tau) = -N_r * eta * S * alpha + sum_k ln(eta * alpha * s(t_k - tau) + b_lambda)
//! ```
//!
//! over `alpha >= 0`, `0 < tau < t_r`, either jointly or with one parameter
//! known. The [`PixelScene`] argument supplies the acquisition constants,
//! the pulse and `b_lambda`; its own `alpha` and `tau` (the ground truth) are
//! never read here.

use crate::error::{Error, Result};
use crate::model::PixelScene;
use crate::rootfind::{self, Bisection, Expansion, SignChange};

/// Output of a single-parameter estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    /// The nonnegativity or interval constraint was active.
    pub clamped: bool,
    /// Bracket expansions plus bisection steps.
    pub iterations: usize,
    /// Interval the final root search ran on.
    pub interval: (f64, f64),
    pub converged: bool,
}

impl EstimateReport {
    pub fn closed_form(value: f64, clamped: bool) -> Self {
        EstimateReport {
            value,
            clamped,
            iterations: 0,
            interval: (value, value),
            converged: true,
        }
    }
}

/// Tuning for the bracketing and bisection searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Bisection stops once `|dL|` falls below this.
    pub derivative_tol: f64,
    /// Bisection stops once the bracket half-width falls below this
    /// fraction of its natural scale (`t_r` for depth, the upper bound for
    /// reflectivity).
    pub interval_tol: f64,
    pub max_bisections: usize,
    /// Depth bracket growth per expansion; `None` means `sigma_t / 4`.
    pub bracket_step: Option<f64>,
    pub max_expansions: usize,
    /// Sign change that ends the depth bracket expansion.
    pub crossing: SignChange,
    /// Initial upper end of the reflectivity bisection interval.
    pub b_init: f64,
    pub max_doublings: usize,
    /// Joint solver stops once both updates move less than this (relative
    /// to `t_r` for depth and to `max(1, alpha)` for reflectivity).
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            derivative_tol: 1e-9,
            interval_tol: 1e-10,
            max_bisections: 200,
            bracket_step: None,
            max_expansions: 10_000,
            crossing: SignChange::Any,
            b_init: 10.0,
            max_doublings: 40,
            outer_tol: 1e-9,
            max_outer: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("derivative_tol", self.derivative_tol),
            ("interval_tol", self.interval_tol),
            ("b_init", self.b_init),
            ("outer_tol", self.outer_tol),
            ("bracket_step", self.bracket_step.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("solver", format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_bisections == 0 || self.max_expansions == 0 || self.max_outer == 0 {
            return Err(Error::invalid("solver", "iteration limits must be >= 1"));
        }
        Ok(())
    }

    pub fn step_for(&self, scene: &PixelScene) -> f64 {
        self.bracket_step.unwrap_or(scene.pulse().width() / 4.0)
    }
}

/// Starting depth for the bracketing search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthInit {
    /// A known value, typically the ground truth when reproducing the
    /// verification experiments.
    Oracle(f64),
    /// Peak of the Gaussian-smoothed timestamp histogram.
    Coarse,
}

fn check_point(alpha: f64, tau: f64, scene: &PixelScene, m: usize) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid("alpha", format!("must be >= 0, got {alpha}")));
    }
    if !(tau > 0.0 && tau < scene.period()) {
        return Err(Error::invalid(
            "tau",
            format!("must lie in (0, {}), got {tau}", scene.period()),
        ));
    }
    if alpha == 0.0 && scene.b_lambda() == 0.0 && m > 0 {
        return Err(Error::DegenerateLikelihood { m });
    }
    Ok(())
}

fn loglik_raw(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> f64 {
    let eta = scene.acq().efficiency();
    let pulse = scene.pulse();
    let b = scene.b_lambda();
    let linear = -(scene.repetitions() as f64) * scene.system_energy() * alpha;
    let sum: f64 = if b == 0.0 {
        // log-space keeps far-tail timestamps finite
        let ln_amp = (eta * alpha).ln();
        timestamps
            .iter()
            .map(|&t| ln_amp + pulse.ln_value(t - tau))
            .sum()
    } else {
        timestamps
            .iter()
            .map(|&t| (eta * alpha * pulse.value(t - tau) + b).ln())
            .sum()
    };
    linear + sum
}

// Weight of the pulse in the flux at each timestamp; exactly 1 without
// background even where the pulse underflows.
fn signal_weight(amp_s: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        amp_s / (amp_s + b)
    }
}

fn dtau_raw(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> f64 {
    let amp = scene.acq().efficiency() * alpha;
    let pulse = scene.pulse();
    let inv_var = 1.0 / (pulse.width() * pulse.width());
    let b = scene.b_lambda();
    timestamps
        .iter()
        .map(|&t| {
            let x = t - tau;
            signal_weight(amp * pulse.value(x), b) * x * inv_var
        })
        .sum()
}

fn dalpha_raw(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> f64 {
    dalpha_exposure(timestamps, alpha, tau, scene, scene.repetitions() as f64)
}

fn dalpha_exposure(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene, exposure: f64) -> f64 {
    let eta = scene.acq().efficiency();
    let pulse = scene.pulse();
    let b = scene.b_lambda();
    let linear = -exposure * scene.system_energy();
    let sum: f64 = if b == 0.0 {
        timestamps.len() as f64 / alpha
    } else {
        timestamps
            .iter()
            .map(|&t| {
                let es = eta * pulse.value(t - tau);
                es / (alpha * es + b)
            })
            .sum()
    };
    linear + sum
}

/// Log-likelihood up to terms independent of `(alpha, tau)`.
pub fn loglik(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> Result<f64> {
    check_point(alpha, tau, scene, timestamps.len())?;
    Ok(loglik_raw(timestamps, alpha, tau, scene))
}

/// `dL/dtau`.
pub fn dloglik_dtau(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> Result<f64> {
    check_point(alpha, tau, scene, timestamps.len())?;
    Ok(dtau_raw(timestamps, alpha, tau, scene))
}

/// `dL/dalpha`. Strictly decreasing in `alpha` whenever there is at least
/// one detection. Without background this is `m / alpha - N_r eta S`, so
/// `alpha` must then be positive.
pub fn dloglik_dalpha(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> Result<f64> {
    check_point(alpha, tau, scene, timestamps.len())?;
    if alpha == 0.0 && scene.b_lambda() == 0.0 {
        return Err(Error::DegenerateLikelihood { m: 0 });
    }
    Ok(dalpha_raw(timestamps, alpha, tau, scene))
}

/// Noiseless depth MLE: the timestamp mean.
pub fn depth_sample_mean(timestamps: &[f64], scene: &PixelScene) -> Result<EstimateReport> {
    if timestamps.is_empty() {
        return Err(Error::NoDetections);
    }
    let mean = timestamps.iter().sum::<f64>() / timestamps.len() as f64;
    let (lo, hi) = open_period(scene);
    let value = mean.clamp(lo, hi);
    Ok(EstimateReport::closed_form(value, value != mean))
}

/// Photon-count reflectivity MLE, `max((m / N_r - B) / (eta S), 0)`.
pub fn reflectivity_count_mle(m: usize, scene: &PixelScene) -> EstimateReport {
    let unconstrained = reflectivity_count_unconstrained(m, scene);
    EstimateReport::closed_form(unconstrained.max(0.0), unconstrained < 0.0)
}

/// The count estimator before the nonnegativity clamp.
pub fn reflectivity_count_unconstrained(m: usize, scene: &PixelScene) -> f64 {
    (m as f64 / scene.repetitions() as f64 - scene.background_energy()) / scene.system_energy()
}

// Closed interval strictly inside (0, t_r) used as the depth search domain.
fn open_period(scene: &PixelScene) -> (f64, f64) {
    let t_r = scene.period();
    let eps = 1e-12 * t_r;
    (eps, t_r - eps)
}

/// Peak of the timestamp histogram (bins of `sigma_t / 2`) smoothed with a
/// Gaussian kernel of width `sigma_t`.
pub fn coarse_init(timestamps: &[f64], scene: &PixelScene) -> Result<f64> {
    if timestamps.is_empty() {
        return Err(Error::NoDetections);
    }
    let t_r = scene.period();
    let sigma = scene.pulse().width();
    let bin = sigma / 2.0;
    let n_bins = ((t_r / bin).ceil() as usize).max(1);
    let reach = (6.0 * sigma / bin).ceil() as isize;
    let mut smoothed = vec![0.0; n_bins];
    for &t in timestamps {
        let home = ((t / bin).floor() as isize).clamp(0, n_bins as isize - 1);
        for j in (home - reach).max(0)..=(home + reach).min(n_bins as isize - 1) {
            let center = (j as f64 + 0.5) * bin;
            let z = (t - center) / sigma;
            smoothed[j as usize] += (-0.5 * z * z).exp();
        }
    }
    let best = smoothed
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc })
        .0;
    let (lo, hi) = open_period(scene);
    Ok(((best as f64 + 0.5) * bin).clamp(lo, hi))
}

pub fn resolve_init(init: DepthInit, timestamps: &[f64], scene: &PixelScene) -> Result<f64> {
    match init {
        DepthInit::Oracle(tau) => Ok(tau),
        DepthInit::Coarse => coarse_init(timestamps, scene),
    }
}

/// Depth MLE with known reflectivity.
///
/// Starting from `tau_0`, the interval `[tau_0 - k*step, tau_0 + k*step]`
/// grows until `dL/dtau` has opposite signs at its ends, then the zero
/// crossing is located by bisection. When several crossings share the
/// final bracket, the one inside the outer slice nearest `tau_0` is kept.
/// With [`SignChange::Descending`] only brackets with `dL/dtau > 0` on the
/// left and `< 0` on the right are accepted, so the crossing is a local
/// maximum of the likelihood.
pub fn depth_mle_known_alpha(
    timestamps: &[f64],
    alpha: f64,
    scene: &PixelScene,
    tau_0: f64,
    solver: &SolverConfig,
) -> Result<EstimateReport> {
    solver.validate()?;
    if timestamps.is_empty() {
        return Err(Error::NoDetections);
    }
    check_point(alpha, tau_0, scene, timestamps.len())?;
    if alpha == 0.0 {
        // no pulse in the flux: the likelihood is flat in tau
        return Err(Error::BracketNotFound {
            tau_0,
            iterations: 0,
        });
    }

    let deriv = |tau: f64| dtau_raw(timestamps, alpha, tau, scene);
    let (lo, hi) = open_period(scene);
    let rule = Bisection {
        x_tol: solver.interval_tol * scene.period(),
        f_tol: solver.derivative_tol,
        max_iter: solver.max_bisections,
    };

    let f0 = deriv(tau_0);
    if f0 == 0.0 && solver.crossing == SignChange::Any && has_signal_support(timestamps, alpha, tau_0, scene) {
        return Ok(EstimateReport::closed_form(tau_0, false));
    }

    let bracket = match rootfind::expand_symmetric(
        deriv,
        tau_0,
        solver.step_for(scene),
        solver.max_expansions,
        lo,
        hi,
        solver.crossing,
    ) {
        Expansion::Found(br) => br,
        Expansion::NotFound { expansions } => {
            return Err(Error::BracketNotFound {
                tau_0,
                iterations: expansions,
            })
        }
    };

    let mut candidates = Vec::with_capacity(2);
    if solver.crossing.accepts(bracket.fa, bracket.f_inner_a) {
        candidates.extend(rootfind::bisect(
            deriv,
            bracket.a,
            bracket.inner_a,
            bracket.fa,
            bracket.f_inner_a,
            &rule,
        ));
    }
    if solver.crossing.accepts(bracket.f_inner_b, bracket.fb) {
        candidates.extend(rootfind::bisect(
            deriv,
            bracket.inner_b,
            bracket.b,
            bracket.f_inner_b,
            bracket.fb,
            &rule,
        ));
    }
    if candidates.is_empty() {
        candidates.extend(rootfind::bisect(deriv, bracket.a, bracket.b, bracket.fa, bracket.fb, &rule));
    }
    let root = candidates
        .into_iter()
        .min_by(|x, y| (x.x - tau_0).abs().total_cmp(&(y.x - tau_0).abs()))
        .expect("bracket endpoints have opposite signs");

    Ok(EstimateReport {
        value: root.x,
        clamped: false,
        iterations: bracket.expansions + root.iterations,
        interval: root.bracket,
        converged: root.converged,
    })
}

fn has_signal_support(timestamps: &[f64], alpha: f64, tau: f64, scene: &PixelScene) -> bool {
    let amp = scene.acq().efficiency() * alpha;
    timestamps
        .iter()
        .any(|&t| signal_weight(amp * scene.pulse().value(t - tau), scene.b_lambda()) > 0.0)
}

/// Reflectivity MLE with known depth.
///
/// `dL/dalpha` is strictly decreasing, so the constrained maximiser is 0
/// when the derivative at 0 is not positive and otherwise the unique root,
/// found by bisection on `(0, b)` with `b` doubled until the derivative is
/// negative there. Without background the root is `m / (N_r eta S)`.
pub fn reflectivity_mle_known_tau(
    timestamps: &[f64],
    tau: f64,
    scene: &PixelScene,
    solver: &SolverConfig,
) -> Result<EstimateReport> {
    reflectivity_mle_with_exposure(timestamps, tau, scene, scene.repetitions() as f64, solver)
}

/// [`reflectivity_mle_known_tau`] with the repetition count `N_r` in the
/// linear term replaced by a real-valued `exposure`.
pub fn reflectivity_mle_with_exposure(
    timestamps: &[f64],
    tau: f64,
    scene: &PixelScene,
    exposure: f64,
    solver: &SolverConfig,
) -> Result<EstimateReport> {
    solver.validate()?;
    if !(exposure.is_finite() && exposure > 0.0) {
        return Err(Error::invalid("exposure", format!("must be > 0, got {exposure}")));
    }
    if timestamps.is_empty() {
        return Ok(EstimateReport::closed_form(0.0, true));
    }
    let m = timestamps.len();
    if scene.b_lambda() == 0.0 {
        check_point(1.0, tau, scene, m)?;
        let value = m as f64 / (exposure * scene.system_energy());
        return Ok(EstimateReport::closed_form(value, false));
    }
    check_point(0.0, tau, scene, m)?;

    let deriv = |alpha: f64| dalpha_exposure(timestamps, alpha, tau, scene, exposure);
    let d0 = deriv(0.0);
    if d0 <= 0.0 {
        return Ok(EstimateReport::closed_form(0.0, true));
    }

    let mut upper = solver.b_init;
    let mut d_upper = deriv(upper);
    let mut doublings = 0;
    while d_upper >= 0.0 {
        if doublings == solver.max_doublings {
            return Ok(EstimateReport {
                value: upper,
                clamped: false,
                iterations: doublings,
                interval: (0.0, upper),
                converged: false,
            });
        }
        upper *= 2.0;
        d_upper = deriv(upper);
        doublings += 1;
    }

    let rule = Bisection {
        x_tol: solver.interval_tol * upper,
        f_tol: solver.derivative_tol,
        max_iter: solver.max_bisections,
    };
    let root = rootfind::bisect(deriv, 0.0, upper, d0, d_upper, &rule)
        .expect("d(0) > 0 > d(upper)");
    Ok(EstimateReport {
        value: root.x,
        clamped: false,
        iterations: doublings + root.iterations,
        interval: root.bracket,
        converged: root.converged,
    })
}

/// Result of [`joint_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub depth: EstimateReport,
    pub reflectivity: EstimateReport,
    /// Outer iterations that moved the estimate by more than the tolerance.
    pub outer_iterations: usize,
    pub converged: bool,
    /// Objective at the initial point and after every outer iteration.
    pub objective: Vec<f64>,
    /// Depth updates discarded because they lowered the objective.
    pub rejected_depth_steps: usize,
}

/// Joint CML by coordinate ascent: alternate the depth search (current
/// reflectivity known) and the reflectivity bisection (current depth known)
/// until neither moves. A depth step that would lower the objective is
/// discarded, so the objective never decreases.
pub fn joint_mle(
    timestamps: &[f64],
    scene: &PixelScene,
    init: (f64, f64),
    solver: &SolverConfig,
) -> Result<JointEstimate> {
    solver.validate()?;
    if timestamps.is_empty() {
        return Err(Error::NoDetections);
    }
    let (mut tau, mut alpha) = init;
    check_point(alpha, tau, scene, timestamps.len())?;
    if alpha == 0.0 && scene.b_lambda() == 0.0 {
        return Err(Error::DegenerateLikelihood { m: timestamps.len() });
    }

    let mut objective = vec![loglik_raw(timestamps, alpha, tau, scene)];
    let mut depth = EstimateReport::closed_form(tau, false);
    let mut reflectivity = EstimateReport::closed_form(alpha, alpha == 0.0);
    let mut productive = 0;
    let mut rejected = 0;
    let mut converged = false;

    for _ in 0..solver.max_outer {
        let mut tau_next = tau;
        if alpha > 0.0 {
            let report = depth_mle_known_alpha(timestamps, alpha, scene, tau, solver)?;
            if loglik_raw(timestamps, alpha, report.value, scene)
                >= loglik_raw(timestamps, alpha, tau, scene)
            {
                tau_next = report.value;
                depth = report;
            } else {
                rejected += 1;
            }
        }
        reflectivity = reflectivity_mle_known_tau(timestamps, tau_next, scene, solver)?;
        let alpha_next = reflectivity.value;
        objective.push(loglik_raw(timestamps, alpha_next, tau_next, scene));

        let still = (tau_next - tau).abs() <= solver.outer_tol * scene.period()
            && (alpha_next - alpha).abs() <= solver.outer_tol * alpha.max(1.0);
        tau = tau_next;
        alpha = alpha_next;
        if still {
            converged = true;
            break;
        }
        productive += 1;
    }
    depth.value = tau;

    Ok(JointEstimate {
        depth,
        reflectivity,
        outer_iterations: productive,
        converged,
        objective,
        rejected_depth_steps: rejected,
    })
}
