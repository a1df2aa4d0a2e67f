//! Photon-flux model of a single-photon LiDAR pixel.
//!
//! A pixel observes an inhomogeneous Poisson process over each repetition
//! period `[0, t_r)` with rate
//!
//! ```text
//! lambda(t) = eta * alpha * s(t - tau) + b_lambda
//! s(t)      = S * N(t; 0, sigma_t^2)
//! ```
//!
//! Integrated over one period this gives the per-cycle energy
//! `Lambda = eta * alpha * S + B` with `B = b_lambda * t_r`; a frame of
//! `N_r` repetitions carries `N_r * Lambda` photons on average.

use std::f64::consts::PI;

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Pulse centres closer than this many widths to either end of the period
/// are reported as truncated.
pub const SUPPORT_WIDTHS: f64 = 5.0;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Gaussian laser pulse `s(t) = S * N(t; 0, sigma_t^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    energy: f64,
    width: f64,
}

impl PulseShape {
    pub fn new(energy: f64, width: f64) -> Result<Self> {
        check_positive("pulse energy S", energy)?;
        check_positive("pulse width sigma_t", width)?;
        Ok(PulseShape { energy, width })
    }

    /// Photons per cycle, `S`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Standard deviation `sigma_t`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Peak value `s(0)`.
    pub fn peak(&self) -> f64 {
        self.energy / (self.width * (2.0 * PI).sqrt())
    }

    /// `s(t)`.
    pub fn value(&self, t: f64) -> f64 {
        let z = t / self.width;
        self.peak() * (-0.5 * z * z).exp()
    }

    /// `ln s(t)`, finite even where `s(t)` underflows.
    pub fn ln_value(&self, t: f64) -> f64 {
        let z = t / self.width;
        self.peak().ln() - 0.5 * z * z
    }

    /// `ds/dt`.
    pub fn slope(&self, t: f64) -> f64 {
        -t / (self.width * self.width) * self.value(t)
    }

    /// `integral of s(t)^2 over the real line = S^2 / (2 sigma_t sqrt(pi))`.
    pub fn squared_integral(&self) -> f64 {
        self.energy * self.energy / (2.0 * self.width * PI.sqrt())
    }
}

/// Laser repetition and detector constants shared by all pixels of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    period: f64,
    repetitions: u64,
    efficiency: f64,
}

impl AcquisitionConfig {
    pub fn new(period: f64, repetitions: u64, efficiency: f64) -> Result<Self> {
        check_positive("repetition period t_r", period)?;
        if repetitions == 0 {
            return Err(Error::invalid("repetitions N_r", "must be >= 1"));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::invalid(
                "quantum efficiency eta",
                format!("must lie in (0, 1], got {efficiency}"),
            ));
        }
        Ok(AcquisitionConfig {
            period,
            repetitions,
            efficiency,
        })
    }

    /// `t_r`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// `N_r`.
    pub fn repetitions(&self) -> u64 {
        self.repetitions
    }

    /// `eta`.
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn with_repetitions(&self, repetitions: u64) -> Result<Self> {
        Self::new(self.period, repetitions, self.efficiency)
    }
}

/// Which energy ratio is called the signal-to-background ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SbrConvention {
    /// `eta * alpha * S / B`.
    #[default]
    SignalEnergy,
    /// `S / B`.
    PulseEnergy,
}

impl SbrConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            SbrConvention::SignalEnergy => "signal_energy",
            SbrConvention::PulseEnergy => "pulse_energy",
        }
    }
}

impl std::str::FromStr for SbrConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "signal_energy" => Ok(SbrConvention::SignalEnergy),
            "pulse_energy" => Ok(SbrConvention::PulseEnergy),
            other => Err(format!("unknown sbr convention `{other}`")),
        }
    }
}

/// Signal-to-background ratio. Noiseless scenes have no finite ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sbr {
    Finite(f64),
    Infinite,
}

impl Sbr {
    pub fn value(&self) -> f64 {
        match self {
            Sbr::Finite(v) => *v,
            Sbr::Infinite => f64::INFINITY,
        }
    }
}

/// Ground truth for one pixel plus the acquisition it is observed under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelScene {
    alpha: f64,
    tau: f64,
    b_lambda: f64,
    pulse: PulseShape,
    acq: AcquisitionConfig,
}

impl PixelScene {
    pub fn new(
        alpha: f64,
        tau: f64,
        b_lambda: f64,
        pulse: PulseShape,
        acq: AcquisitionConfig,
    ) -> Result<Self> {
        check_nonnegative("reflectivity alpha", alpha)?;
        check_nonnegative("background rate b_lambda", b_lambda)?;
        if !(tau > 0.0 && tau < acq.period()) {
            return Err(Error::invalid(
                "time delay tau",
                format!("must lie in (0, {}), got {tau}", acq.period()),
            ));
        }
        Ok(PixelScene {
            alpha,
            tau,
            b_lambda,
            pulse,
            acq,
        })
    }

    /// Solves the photon-level and SBR constraints for `S` and `b_lambda`.
    ///
    /// Under [`SbrConvention::SignalEnergy`] this means
    /// `eta*alpha*S + B = photon_level / N_r` and `eta*alpha*S / B = sbr`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_constraints(
        photon_level: f64,
        sbr: f64,
        alpha: f64,
        tau: f64,
        acq: AcquisitionConfig,
        sigma_t: f64,
        convention: SbrConvention,
    ) -> Result<Self> {
        for (name, v) in [("photon_level", photon_level), ("sbr", sbr), ("alpha", alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Infeasible(format!("{name} must be > 0, got {v}")));
            }
        }
        let per_cycle = photon_level / acq.repetitions() as f64;
        let eta = acq.efficiency();
        let (pulse_energy, background) = match convention {
            SbrConvention::SignalEnergy => {
                let background = per_cycle / (1.0 + sbr);
                let signal = per_cycle - background;
                (signal / (eta * alpha), background)
            }
            SbrConvention::PulseEnergy => {
                let background = per_cycle / (1.0 + eta * alpha * sbr);
                (sbr * background, background)
            }
        };
        if !(pulse_energy > 0.0 && background > 0.0) {
            return Err(Error::Infeasible(format!(
                "non-positive solution S = {pulse_energy}, B = {background}"
            )));
        }
        let pulse = PulseShape::new(pulse_energy, sigma_t)?;
        Self::new(alpha, tau, background / acq.period(), pulse, acq)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn b_lambda(&self) -> f64 {
        self.b_lambda
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn acq(&self) -> &AcquisitionConfig {
        &self.acq
    }

    pub fn period(&self) -> f64 {
        self.acq.period()
    }

    pub fn repetitions(&self) -> u64 {
        self.acq.repetitions()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.tau, self.b_lambda, self.pulse, self.acq)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.alpha, tau, self.b_lambda, self.pulse, self.acq)
    }

    pub fn with_b_lambda(&self, b_lambda: f64) -> Result<Self> {
        Self::new(self.alpha, self.tau, b_lambda, self.pulse, self.acq)
    }

    pub fn with_repetitions(&self, repetitions: u64) -> Result<Self> {
        let acq = self.acq.with_repetitions(repetitions)?;
        Self::new(self.alpha, self.tau, self.b_lambda, self.pulse, acq)
    }

    /// `eta * S`, the photons per cycle per unit reflectivity.
    pub fn system_energy(&self) -> f64 {
        self.acq.efficiency() * self.pulse.energy()
    }

    /// `eta * alpha * S`.
    pub fn signal_energy(&self) -> f64 {
        self.system_energy() * self.alpha
    }

    /// `B = b_lambda * t_r`.
    pub fn background_energy(&self) -> f64 {
        self.b_lambda * self.acq.period()
    }

    /// `Lambda = eta * alpha * S + B`. Warns when the pulse is truncated by
    /// the period boundaries, since the identity then only holds approximately.
    pub fn total_energy(&self) -> f64 {
        if !self.pulse_supported() {
            log::warn!(
                "pulse at tau = {} is within {SUPPORT_WIDTHS} widths of the period boundary",
                self.tau
            );
        }
        self.signal_energy() + self.background_energy()
    }

    /// Mean detections per frame, `N_r * Lambda`.
    pub fn photon_level(&self) -> f64 {
        self.acq.repetitions() as f64 * (self.signal_energy() + self.background_energy())
    }

    /// Whether `tau` lies in `[5 sigma_t, t_r - 5 sigma_t]`.
    pub fn pulse_supported(&self) -> bool {
        let margin = SUPPORT_WIDTHS * self.pulse.width();
        self.tau >= margin && self.tau <= self.acq.period() - margin
    }

    /// `lambda(t)` for `t` in `[0, t_r)`.
    pub fn flux_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.acq.period()) {
            return Err(Error::OutOfPeriod {
                t,
                t_r: self.acq.period(),
            });
        }
        Ok(self.flux_unchecked(t))
    }

    pub(crate) fn flux_unchecked(&self, t: f64) -> f64 {
        self.signal_energy() / self.pulse.energy() * self.pulse.value(t - self.tau)
            + self.b_lambda
    }

    /// SBR under the default convention, `eta * alpha * S / B`.
    pub fn sbr(&self) -> Sbr {
        self.sbr_with(SbrConvention::SignalEnergy)
    }

    pub fn sbr_with(&self, convention: SbrConvention) -> Sbr {
        let background = self.background_energy();
        if background == 0.0 {
            return Sbr::Infinite;
        }
        let numerator = match convention {
            SbrConvention::SignalEnergy => self.signal_energy(),
            SbrConvention::PulseEnergy => self.pulse.energy(),
        };
        Sbr::Finite(numerator / background)
    }

    /// Signal fraction of detections, `eta*alpha*S / Lambda`.
    pub fn signal_probability(&self) -> f64 {
        let total = self.signal_energy() + self.background_energy();
        if total == 0.0 {
            0.0
        } else {
            self.signal_energy() / total
        }
    }

    /// Depth `z = c * tau / 2`.
    pub fn depth(&self) -> f64 {
        delay_to_depth(self.tau)
    }
}

pub fn delay_to_depth(tau: f64) -> f64 {
    SPEED_OF_LIGHT * tau / 2.0
}

pub fn depth_to_delay(z: f64) -> f64 {
    2.0 * z / SPEED_OF_LIGHT
}

/// Keys accepted in a scene preset file.
pub const SCENE_KEYS: &[&str] = &[
    "t_r",
    "n_r",
    "eta",
    "alpha",
    "tau",
    "sigma_t",
    "photon_level",
    "sbr",
    "b_lambda",
    "sbr_convention",
];

/// Builds a pixel scene from preset entries. `eta` defaults to 1 and
/// exactly one of `sbr` or `b_lambda` must be given. Keys outside
/// [`SCENE_KEYS`] are not checked here; callers that accept only a scene
/// use [`scene_from_preset`].
pub fn scene_from_entries(kv: &KeyValues) -> Result<PixelScene> {
    let t_r: f64 = kv.require("t_r")?;
    let n_r: u64 = kv.require("n_r")?;
    let eta: f64 = kv.get_or("eta", 1.0)?;
    let alpha: f64 = kv.require("alpha")?;
    let tau: f64 = kv.require("tau")?;
    let sigma_t: f64 = kv.require("sigma_t")?;
    let level: f64 = kv.require("photon_level")?;
    let convention = match kv.raw("sbr_convention") {
        Some(raw) => raw.parse().map_err(|reason| Error::Config {
            origin: kv.origin().to_string(),
            reason,
        })?,
        None => SbrConvention::default(),
    };
    let acq = AcquisitionConfig::new(t_r, n_r, eta)?;
    match (kv.get::<f64>("sbr")?, kv.get::<f64>("b_lambda")?) {
        (Some(sbr), None) => {
            PixelScene::from_constraints(level, sbr, alpha, tau, acq, sigma_t, convention)
        }
        (None, Some(b_lambda)) => {
            let signal = level / n_r as f64 - b_lambda * t_r;
            if !(alpha > 0.0 && signal > 0.0) {
                return Err(Error::Infeasible(format!(
                    "photon level {level} leaves signal energy {signal} for alpha {alpha}"
                )));
            }
            let pulse = PulseShape::new(signal / (eta * alpha), sigma_t)?;
            PixelScene::new(alpha, tau, b_lambda, pulse, acq)
        }
        (Some(_), Some(_)) => Err(Error::Config {
            origin: kv.origin().to_string(),
            reason: "give either `sbr` or `b_lambda`, not both".into(),
        }),
        (None, None) => Err(Error::MissingKey {
            key: "sbr".into(),
            origin: kv.origin().to_string(),
        }),
    }
}

/// Parses a scene preset, rejecting unknown keys.
pub fn scene_from_preset(kv: &KeyValues) -> Result<PixelScene> {
    kv.ensure_known(SCENE_KEYS)?;
    scene_from_entries(kv)
}

/// Per-pixel ground truth over a `width x height` sensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
    tau: Vec<f64>,
    b_lambda: Vec<f64>,
    pulse: PulseShape,
    acq: AcquisitionConfig,
}

impl SceneGrid {
    pub fn new(
        width: usize,
        height: usize,
        alpha: Vec<f64>,
        tau: Vec<f64>,
        b_lambda: Vec<f64>,
        pulse: PulseShape,
        acq: AcquisitionConfig,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid", "width and height must be >= 1"));
        }
        let n = width * height;
        for (name, map) in [("alpha map", &alpha), ("tau map", &tau), ("b_lambda map", &b_lambda)]
        {
            if map.len() != n {
                return Err(Error::invalid(
                    "grid",
                    format!("{name} has {} entries, expected {n}", map.len()),
                ));
            }
        }
        for i in 0..n {
            PixelScene::new(alpha[i], tau[i], b_lambda[i], pulse, acq)?;
        }
        Ok(SceneGrid {
            width,
            height,
            alpha,
            tau,
            b_lambda,
            pulse,
            acq,
        })
    }

    /// Every pixel equal to `scene`.
    pub fn uniform(width: usize, height: usize, scene: &PixelScene) -> Result<Self> {
        let n = width * height;
        Self::new(
            width,
            height,
            vec![scene.alpha(); n],
            vec![scene.tau(); n],
            vec![scene.b_lambda(); n],
            scene.pulse,
            scene.acq,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha_map(&self) -> &[f64] {
        &self.alpha
    }

    pub fn tau_map(&self) -> &[f64] {
        &self.tau
    }

    pub fn b_lambda_map(&self) -> &[f64] {
        &self.b_lambda
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn acq(&self) -> &AcquisitionConfig {
        &self.acq
    }

    /// Scene at `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> PixelScene {
        self.pixel_at(row * self.width + col)
    }

    /// Scene at row-major index `idx`.
    pub fn pixel_at(&self, idx: usize) -> PixelScene {
        // Invariants were checked for every pixel in `new`.
        PixelScene {
            alpha: self.alpha[idx],
            tau: self.tau[idx],
            b_lambda: self.b_lambda[idx],
            pulse: self.pulse,
            acq: self.acq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn acq() -> AcquisitionConfig {
        AcquisitionConfig::new(10.0, 1000, 1.0).unwrap()
    }

    #[test]
    fn pulse_value_at_peak_and_symmetry() {
        let p = PulseShape::new(1.0, 0.2).unwrap();
        assert_relative_eq!(p.value(0.0), 1.994_711_402_007_164, max_relative = 1e-12);
        assert_eq!(p.value(0.2), p.value(-0.2));
        let p2 = PulseShape::new(2.0, 0.2).unwrap();
        assert_eq!(p2.value(0.0), 2.0 * p.value(0.0));
        assert!(p.value(3.0) > 0.0);
    }

    #[test]
    fn pulse_log_matches_value() {
        let p = PulseShape::new(0.3, 0.7).unwrap();
        for t in [-2.0, -0.1, 0.0, 0.4, 1.9] {
            assert_relative_eq!(p.ln_value(t), p.value(t).ln(), max_relative = 1e-12);
        }
        // far tail: value underflows, log stays finite
        assert_eq!(p.value(40.0), 0.0);
        assert!(p.ln_value(40.0).is_finite());
    }

    #[test]
    fn rejects_invalid_constants() {
        assert!(PulseShape::new(0.0, 1.0).is_err());
        assert!(PulseShape::new(1.0, -1.0).is_err());
        assert!(AcquisitionConfig::new(0.0, 1, 1.0).is_err());
        assert!(AcquisitionConfig::new(1.0, 0, 1.0).is_err());
        assert!(AcquisitionConfig::new(1.0, 1, 1.5).is_err());
        assert!(AcquisitionConfig::new(1.0, 1, 0.0).is_err());
        let p = PulseShape::new(1.0, 0.2).unwrap();
        assert!(PixelScene::new(0.5, 0.0, 0.0, p, acq()).is_err());
        assert!(PixelScene::new(0.5, 10.0, 0.0, p, acq()).is_err());
        assert!(PixelScene::new(-0.1, 4.0, 0.0, p, acq()).is_err());
        assert!(PixelScene::new(0.5, 4.0, -1.0, p, acq()).is_err());
    }

    #[test]
    fn flux_cases() {
        let p = PulseShape::new(1.0, 0.2).unwrap();
        let dark = PixelScene::new(0.0, 4.0, 0.03, p, acq()).unwrap();
        assert_eq!(dark.flux_at(1.0).unwrap(), 0.03);
        let clean = PixelScene::new(0.5, 4.0, 0.0, p, acq()).unwrap();
        assert_relative_eq!(
            clean.flux_at(4.0).unwrap(),
            0.5 / (0.2 * (2.0 * PI).sqrt()),
            max_relative = 1e-12
        );
        assert!(clean.flux_at(-0.1).is_err());
        assert!(clean.flux_at(10.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let p = PulseShape::new(0.01, 0.2).unwrap();
        let s = PixelScene::new(0.5, 4.0, 0.0005, p, acq()).unwrap();
        assert_relative_eq!(s.total_energy(), 0.01, max_relative = 1e-12);
        let bg = s.with_alpha(0.0).unwrap();
        assert_relative_eq!(bg.total_energy(), 0.005, max_relative = 1e-12);
        let sig = PixelScene::new(0.5, 4.0, 0.0, PulseShape::new(1.0, 0.2).unwrap(), acq())
            .unwrap();
        assert_relative_eq!(sig.total_energy(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sbr_cases() {
        let p = PulseShape::new(0.01, 0.2).unwrap();
        let s = PixelScene::new(0.5, 4.0, 0.0005, p, acq()).unwrap();
        assert_relative_eq!(s.sbr().value(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.sbr_with(SbrConvention::PulseEnergy).value(), 2.0, max_relative = 1e-12);
        assert_eq!(s.with_alpha(0.0).unwrap().sbr(), Sbr::Finite(0.0));
        assert_eq!(s.with_b_lambda(0.0).unwrap().sbr(), Sbr::Infinite);
    }

    #[test]
    fn constraints_examples() {
        let s = PixelScene::from_constraints(10.0, 1.0, 0.5, 4.0, acq(), 0.2, SbrConvention::SignalEnergy)
            .unwrap();
        assert_relative_eq!(s.signal_energy(), 0.005, max_relative = 1e-12);
        assert_relative_eq!(s.background_energy(), 0.005, max_relative = 1e-12);
        assert_relative_eq!(s.pulse().energy(), 0.01, max_relative = 1e-12);
        assert_relative_eq!(s.b_lambda(), 0.0005, max_relative = 1e-12);

        let s5 = PixelScene::from_constraints(10.0, 5.0, 0.5, 4.0, acq(), 0.2, SbrConvention::SignalEnergy)
            .unwrap();
        assert_relative_eq!(s5.signal_energy(), 0.01 * 5.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(s5.background_energy(), 0.01 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn pulse_energy_convention_round_trip() {
        let s = PixelScene::from_constraints(10.0, 3.0, 0.5, 4.0, acq(), 0.2, SbrConvention::PulseEnergy)
            .unwrap();
        assert_relative_eq!(s.sbr_with(SbrConvention::PulseEnergy).value(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(s.photon_level(), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn infeasible_constraints() {
        let c = SbrConvention::SignalEnergy;
        assert!(PixelScene::from_constraints(0.0, 1.0, 0.5, 4.0, acq(), 0.2, c).is_err());
        assert!(PixelScene::from_constraints(10.0, -1.0, 0.5, 4.0, acq(), 0.2, c).is_err());
        assert!(PixelScene::from_constraints(10.0, 1.0, 0.0, 4.0, acq(), 0.2, c).is_err());
    }

    #[test]
    fn preset_parsing() {
        let text = "t_r = 10\nn_r = 1000\nalpha = 0.5\ntau = 4\nsigma_t = 0.2\nphoton_level = 10\nsbr = 1\n";
        let s = scene_from_preset(&KeyValues::parse(text, "p").unwrap()).unwrap();
        assert_relative_eq!(s.b_lambda(), 0.0005, max_relative = 1e-12);

        let text_b = "t_r = 10\nn_r = 1000\nalpha = 0.5\ntau = 4\nsigma_t = 0.2\nphoton_level = 10\nb_lambda = 0.0005\n";
        let sb = scene_from_preset(&KeyValues::parse(text_b, "p").unwrap()).unwrap();
        assert_relative_eq!(sb.pulse().energy(), 0.01, max_relative = 1e-12);

        let unknown = format!("{text}colour = red\n");
        assert!(matches!(
            scene_from_preset(&KeyValues::parse(&unknown, "p").unwrap()),
            Err(Error::UnknownKey { .. })
        ));
        let missing = text.replace("t_r = 10\n", "");
        match scene_from_preset(&KeyValues::parse(&missing, "p").unwrap()) {
            Err(Error::MissingKey { key, .. }) => assert_eq!(key, "t_r"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_dimensions_checked() {
        let s = PixelScene::from_constraints(10.0, 1.0, 0.5, 4.0, acq(), 0.2, SbrConvention::SignalEnergy)
            .unwrap();
        let g = SceneGrid::uniform(3, 2, &s).unwrap();
        assert_eq!(g.pixel(1, 2), s);
        assert!(SceneGrid::new(2, 2, vec![0.5; 3], vec![4.0; 4], vec![0.0; 4], *s.pulse(), *s.acq())
            .is_err());
        assert!(SceneGrid::new(1, 1, vec![0.5], vec![11.0], vec![0.0], *s.pulse(), *s.acq()).is_err());
    }

    #[test]
    fn depth_delay_conversion() {
        assert_relative_eq!(depth_to_delay(delay_to_depth(1e-7)), 1e-7, max_relative = 1e-15);
        assert_relative_eq!(delay_to_depth(2.0 / SPEED_OF_LIGHT), 1.0, max_relative = 1e-15);
    }
}
