//! Cramér–Rao bounds for the two reflectivity estimators.
//!
//! The count-based estimator only sees `m`, so its bound is closed form:
//!
//! ```text
//! var >= (eta*S*alpha + B) / (N_r * eta^2 * S^2)
//! ```
//!
//! The timestamp-based estimator also sees arrival times and its Fisher
//! information is an integral over the period,
//!
//! ```text
//! var >= 1 / (N_r * eta^2 * integral_0^t_r s(t-tau)^2 / (eta*alpha*s(t-tau) + b_lambda) dt)
//! ```
//!
//! which is evaluated by adaptive quadrature. Cauchy–Schwarz gives
//! timestamp bound <= count bound with equality exactly when `b_lambda = 0`.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::PixelScene;
use crate::quadrature::{self, QuadratureConfig, QuadratureResult};

/// Count-based bound, `(eta*S*alpha + B) / (N_r eta^2 S^2)`.
pub fn crlb_count(scene: &PixelScene) -> f64 {
    let es = scene.system_energy();
    (es * scene.alpha() + scene.background_energy()) / (scene.repetitions() as f64 * es * es)
}

/// The same bound written as `(1 + 1/SBR) / (N_r * eta*S / alpha)`. Needs
/// `alpha > 0`; infinite SBR gives the noiseless value.
pub fn crlb_count_sbr_form(scene: &PixelScene) -> f64 {
    let inv_sbr = 1.0 / scene.sbr().value();
    (1.0 + inv_sbr) / (scene.repetitions() as f64 * scene.system_energy() / scene.alpha())
}

// Breakpoints around the pulse centre so the quadrature resolves the peak.
fn pulse_breakpoints(scene: &PixelScene) -> Vec<f64> {
    let (tau, sigma) = (scene.tau(), scene.pulse().width());
    let mut pts = vec![tau];
    for k in [1.0, 3.0, 6.0] {
        pts.push(tau - k * sigma);
        pts.push(tau + k * sigma);
    }
    pts
}

/// `integral_0^t_r s(t-tau)^2 / (eta*alpha*s(t-tau) + b_lambda) dt`.
pub fn timestamp_information_integral(
    scene: &PixelScene,
    quad: &QuadratureConfig,
) -> Result<QuadratureResult> {
    let amp = scene.acq().efficiency() * scene.alpha();
    let b = scene.b_lambda();
    if amp == 0.0 && b == 0.0 {
        return Err(Error::DegenerateLikelihood { m: 0 });
    }
    let pulse = *scene.pulse();
    let tau = scene.tau();
    let integrand = move |t: f64| {
        let s = pulse.value(t - tau);
        if b == 0.0 {
            s / amp
        } else {
            s * s / (amp * s + b)
        }
    };
    quadrature::integrate(integrand, 0.0, scene.period(), &pulse_breakpoints(scene), quad)
}

/// Timestamp-based bound and the quadrature behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestampBound {
    pub value: f64,
    /// Error estimate propagated to the bound.
    pub error: f64,
    pub integral: QuadratureResult,
}

/// Timestamp-based bound. Fails with [`Error::Quadrature`] when the
/// integral misses its tolerance.
pub fn crlb_timestamp(scene: &PixelScene, quad: &QuadratureConfig) -> Result<TimestampBound> {
    let integral = timestamp_information_integral(scene, quad)?;
    let eta = scene.acq().efficiency();
    let value = 1.0 / (scene.repetitions() as f64 * eta * eta * integral.value);
    let error = value * integral.error / integral.value;
    if !integral.converged || !value.is_finite() {
        return Err(Error::Quadrature { value, error });
    }
    Ok(TimestampBound {
        value,
        error,
        integral,
    })
}

/// Limit of the timestamp bound as `alpha -> 0` with `b_lambda > 0`:
/// `b_lambda / (N_r eta^2 integral s^2)` using the whole-line integral.
pub fn crlb_timestamp_zero_alpha_limit(scene: &PixelScene) -> f64 {
    let eta = scene.acq().efficiency();
    scene.b_lambda() / (scene.repetitions() as f64 * eta * eta * scene.pulse().squared_integral())
}

/// Fraction of the pulse energy falling outside `[0, t_r)`.
pub fn truncated_pulse_mass(scene: &PixelScene) -> f64 {
    let sigma = scene.pulse().width() * std::f64::consts::SQRT_2;
    let left = 0.5 * erfc(scene.tau() / sigma);
    let right = 0.5 * erfc((scene.period() - scene.tau()) / sigma);
    left + right
}

/// Both bounds for one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbReport {
    pub crlb_count: f64,
    pub crlb_count_sbr_form: f64,
    pub crlb_timestamp: f64,
    /// `crlb_timestamp / crlb_count`.
    pub ratio: f64,
    /// Quadrature error estimate on `crlb_timestamp`.
    pub quad_error: f64,
    pub truncated_mass: f64,
}

pub fn crlb_report(scene: &PixelScene, quad: &QuadratureConfig) -> Result<CrlbReport> {
    let count = crlb_count(scene);
    let ts = crlb_timestamp(scene, quad)?;
    Ok(CrlbReport {
        crlb_count: count,
        crlb_count_sbr_form: if scene.alpha() > 0.0 {
            crlb_count_sbr_form(scene)
        } else {
            f64::NAN
        },
        crlb_timestamp: ts.value,
        ratio: ts.value / count,
        quad_error: ts.error,
        truncated_mass: truncated_pulse_mass(scene),
    })
}

/// `(eta*S*alpha + B) * integral g^2 / (eta*S*alpha*g + b_lambda)` with `g`
/// the unit-energy pulse. Cauchy–Schwarz makes this at least 1 for a pulse
/// inside the period.
pub fn cauchy_schwarz_certificate(scene: &PixelScene, quad: &QuadratureConfig) -> Result<f64> {
    let signal = scene.signal_energy();
    let b = scene.b_lambda();
    if signal == 0.0 && b == 0.0 {
        return Err(Error::DegenerateLikelihood { m: 0 });
    }
    let sigma = scene.pulse().width();
    let tau = scene.tau();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let g = move |t: f64| {
        let z = (t - tau) / sigma;
        norm * (-0.5 * z * z).exp()
    };
    let integrand = move |t: f64| {
        let gt = g(t);
        if b == 0.0 {
            gt / signal
        } else {
            gt * gt / (signal * gt + b)
        }
    };
    let r = quadrature::integrate(integrand, 0.0, scene.period(), &pulse_breakpoints(scene), quad)?;
    if !r.converged {
        return Err(Error::Quadrature {
            value: r.value,
            error: r.error,
        });
    }
    Ok((signal + scene.background_energy()) * r.value)
}

/// Verdict on the bound ordering for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub sbr: f64,
    pub b_lambda: f64,
    pub report: CrlbReport,
    pub certificate: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// Checks, per scene, that the timestamp bound does not exceed the count
/// bound; that the gap exceeds ten times the relative quadrature tolerance
/// when `b_lambda > 0`; that the two agree to 1e-9 relative when
/// `b_lambda = 0`; and that the Cauchy–Schwarz certificate is at least 1.
pub fn verify_bound_ordering(scenes: &[PixelScene], quad: &QuadratureConfig) -> Result<BoundReport> {
    let tol = quad.rel_tol.max(f64::EPSILON);
    let rows = scenes
        .par_iter()
        .map(|scene| -> Result<BoundRow> {
            let report = crlb_report(scene, quad)?;
            let certificate = cauchy_schwarz_certificate(scene, quad)?;
            let rel_err = report.quad_error / report.crlb_timestamp;
            let (passed, detail) = if scene.b_lambda() > 0.0 {
                let gap = 1.0 - report.ratio;
                let ok = report.ratio <= 1.0 + rel_err && gap > 10.0 * tol && certificate >= 1.0;
                (ok, format!("ratio {:.12}, gap {gap:.3e}, certificate {certificate:.12}", report.ratio))
            } else {
                let dev = (report.ratio - 1.0).abs();
                let ok = dev <= 1e-9 && certificate >= 1.0 - 1e-9;
                (ok, format!("ratio {:.12}, |ratio - 1| {dev:.3e}", report.ratio))
            };
            Ok(BoundRow {
                sbr: scene.sbr().value(),
                b_lambda: scene.b_lambda(),
                report,
                certificate,
                passed,
                detail,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport { rows })
}

pub const CSV_HEADER: &str = "sbr,b_lambda,crlb_count,crlb_timestamp,ratio,quad_error";

/// CSV rows for a bound sweep.
pub fn to_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sbr,
            r.b_lambda,
            r.report.crlb_count,
            r.report.crlb_timestamp,
            r.report.ratio,
            r.report.quad_error
        ));
    }
    out
}
