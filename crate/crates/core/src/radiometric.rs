//! Radiometric link budget turning a reflectance map into per-pixel signal
//! and background photon counts.
//!
//! ```text
//! alpha  = E0 / (h c / lambda) * 10^(-a * 2R) * Gamma / (8 f#^2) * W_p H_p / A_illum
//! B_bck  = W_bck / (h c / lambda) * 10^(-a * R) * Gamma / (8 f#^2) * W_p H_p * t_r
//! B_dc   = C_dc * t_r
//! B      = eta * B_bck + B_dc
//! ```
//!
//! `alpha` is then a photon count per cycle and the pulse has unit energy.
//! By default `a = alpha_atm / 10` with `R` in km (dB to decades); with
//! `raw_exponent` the attenuation is `10^(-alpha_atm * 2R)` taken literally.

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::model::SPEED_OF_LIGHT;

/// Pixel columns and rows of the reference SPAD array.
pub const SENSOR_COLUMNS: usize = 192;
pub const SENSOR_ROWS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiometricParams {
    /// Pulse energy, J.
    pub e0: f64,
    /// Wavelength, m.
    pub wavelength: f64,
    /// Planck constant, J s.
    pub planck: f64,
    /// Atmospheric attenuation, dB/km.
    pub alpha_atm: f64,
    /// Range, m.
    pub range: f64,
    pub f_number: f64,
    /// Pixel pitch, m.
    pub pixel_width: f64,
    pub pixel_height: f64,
    /// Focal length used to project the sensor onto the target, m.
    pub focal_length: f64,
    /// Illuminated area, m^2. `None` means the sensor footprint at `range`.
    pub a_illum: Option<f64>,
    /// Background radiation, W.
    pub w_bck: f64,
    /// Dark count rate, Hz.
    pub c_dc: f64,
    /// Jitter, s.
    pub sigma_j: f64,
    /// Pulse width, s.
    pub sigma_t: f64,
    pub eta: f64,
    /// Repetition period, s.
    pub t_r: f64,
    /// Exposure per frame, s.
    pub t_exp: f64,
    pub raw_exponent: bool,
}

impl Default for RadiometricParams {
    fn default() -> Self {
        RadiometricParams {
            e0: 1.219e-9,
            wavelength: 671e-9,
            planck: 6.626e-34,
            alpha_atm: 0.7,
            range: 30.0,
            f_number: 2.0,
            pixel_width: 9.2e-6,
            pixel_height: 9.2e-6,
            focal_length: 0.025,
            a_illum: None,
            w_bck: 2e-4,
            c_dc: 126.0,
            sigma_j: 220e-12,
            sigma_t: 1e-9,
            eta: 0.18,
            t_r: 1.0 / 2.25e6,
            t_exp: 1e-3,
            raw_exponent: false,
        }
    }
}

pub const RADIOMETRIC_KEYS: &[&str] = &[
    "e0",
    "wavelength",
    "planck",
    "alpha_atm",
    "range",
    "f_number",
    "pixel_width",
    "pixel_height",
    "focal_length",
    "a_illum",
    "w_bck",
    "c_dc",
    "sigma_j",
    "sigma_t",
    "eta",
    "t_r",
    "t_exp",
    "raw_exponent",
];

impl RadiometricParams {
    /// Defaults overridden by whichever [`RADIOMETRIC_KEYS`] are present.
    pub fn from_entries(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let p = RadiometricParams {
            e0: kv.get_or("e0", d.e0)?,
            wavelength: kv.get_or("wavelength", d.wavelength)?,
            planck: kv.get_or("planck", d.planck)?,
            alpha_atm: kv.get_or("alpha_atm", d.alpha_atm)?,
            range: kv.get_or("range", d.range)?,
            f_number: kv.get_or("f_number", d.f_number)?,
            pixel_width: kv.get_or("pixel_width", d.pixel_width)?,
            pixel_height: kv.get_or("pixel_height", d.pixel_height)?,
            focal_length: kv.get_or("focal_length", d.focal_length)?,
            a_illum: kv.get("a_illum")?,
            w_bck: kv.get_or("w_bck", d.w_bck)?,
            c_dc: kv.get_or("c_dc", d.c_dc)?,
            sigma_j: kv.get_or("sigma_j", d.sigma_j)?,
            sigma_t: kv.get_or("sigma_t", d.sigma_t)?,
            eta: kv.get_or("eta", d.eta)?,
            t_r: kv.get_or("t_r", d.t_r)?,
            t_exp: kv.get_or("t_exp", d.t_exp)?,
            raw_exponent: kv.get_or("raw_exponent", d.raw_exponent)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e0", self.e0),
            ("wavelength", self.wavelength),
            ("planck", self.planck),
            ("range", self.range),
            ("f_number", self.f_number),
            ("pixel_width", self.pixel_width),
            ("pixel_height", self.pixel_height),
            ("focal_length", self.focal_length),
            ("a_illum", self.a_illum.unwrap_or(1.0)),
            ("sigma_t", self.sigma_t),
            ("eta", self.eta),
            ("t_r", self.t_r),
            ("t_exp", self.t_exp),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        let nonnegative = [
            ("alpha_atm", self.alpha_atm),
            ("w_bck", self.w_bck),
            ("c_dc", self.c_dc),
            ("sigma_j", self.sigma_j),
        ];
        for (name, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if self.eta > 1.0 {
            return Err(Error::invalid("eta", format!("must be <= 1, got {}", self.eta)));
        }
        Ok(())
    }

    /// Energy of one photon, `h c / lambda`.
    pub fn photon_energy(&self) -> f64 {
        self.planck * SPEED_OF_LIGHT / self.wavelength
    }

    /// Sensor footprint projected to `range`.
    pub fn illuminated_area(&self) -> f64 {
        self.a_illum.unwrap_or_else(|| {
            let magnification = self.range / self.focal_length;
            (SENSOR_COLUMNS * SENSOR_ROWS) as f64
                * self.pixel_width
                * self.pixel_height
                * magnification
                * magnification
        })
    }

    /// `10^(-a * distance)` for a path of `distance` metres.
    pub fn transmission(&self, distance: f64) -> f64 {
        let exponent = if self.raw_exponent {
            self.alpha_atm * distance / 1000.0
        } else {
            self.alpha_atm / 10.0 * distance / 1000.0
        };
        10f64.powf(-exponent)
    }

    /// Laser cycles per exposure.
    pub fn repetitions(&self) -> u64 {
        (self.t_exp / self.t_r).round().max(1.0) as u64
    }
}

fn check_gamma(gamma: &[f64]) -> Result<()> {
    match gamma.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        Some(g) => Err(Error::invalid("reflectance Gamma", format!("must lie in [0, 1], got {g}"))),
        None => Ok(()),
    }
}

/// Signal photons per cycle for each reflectance value.
pub fn radiometric_alpha(params: &RadiometricParams, gamma: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    check_gamma(gamma)?;
    let scale = params.e0 / params.photon_energy() * params.transmission(2.0 * params.range)
        / (8.0 * params.f_number * params.f_number)
        * (params.pixel_width * params.pixel_height / params.illuminated_area());
    Ok(gamma.iter().map(|g| scale * g).collect())
}

/// Background and dark photons per cycle for one pixel, `(B_bck, B_dc)`.
pub fn background_energy(params: &RadiometricParams, gamma: f64, t_r: f64) -> Result<(f64, f64)> {
    params.validate()?;
    check_gamma(&[gamma])?;
    let b_bck = params.w_bck / params.photon_energy() * params.transmission(params.range) * gamma
        / (8.0 * params.f_number * params.f_number)
        * params.pixel_width
        * params.pixel_height
        * t_r;
    Ok((b_bck, params.c_dc * t_r))
}

/// Combined `B = eta * B_bck + B_dc`.
pub fn combined_background(params: &RadiometricParams, gamma: f64) -> Result<f64> {
    let (b_bck, b_dc) = background_energy(params, gamma, params.t_r)?;
    Ok(params.eta * b_bck + b_dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_and_linear_in_gamma() {
        let p = RadiometricParams::default();
        let a = radiometric_alpha(&p, &[0.0, 0.2, 0.4]).unwrap();
        assert_eq!(a[0], 0.0);
        assert_relative_eq!(a[2], 2.0 * a[1], max_relative = 1e-15);
        assert!(radiometric_alpha(&p, &[1.5]).is_err());
    }

    #[test]
    fn table_preset_independent_evaluation() {
        let p = RadiometricParams::default();
        // Written out term by term with the preset numbers.
        let photon = 6.626e-34 * 2.997_924_58e8 / 671e-9;
        let att2 = 10f64.powf(-0.07 * 0.06);
        let area = 192.0 * 128.0 * 9.2e-6 * 9.2e-6 * (30.0f64 / 0.025).powi(2);
        let expected = 1.219e-9 / photon * att2 * 0.7 / 32.0 * (9.2e-6 * 9.2e-6) / area;
        let a = radiometric_alpha(&p, &[0.7]).unwrap()[0];
        assert_relative_eq!(a, expected, max_relative = 1e-10);

        let t_r = 1.0 / 2.25e6;
        let att1 = 10f64.powf(-0.07 * 0.03);
        let b_expected = 2e-4 / photon * att1 * 0.7 / 32.0 * 9.2e-6 * 9.2e-6 * t_r;
        let (b_bck, b_dc) = background_energy(&p, 0.7, t_r).unwrap();
        assert_relative_eq!(b_bck, b_expected, max_relative = 1e-10);
        assert_relative_eq!(b_dc, 5.6e-5, max_relative = 1e-12);
    }

    #[test]
    fn raw_exponent_is_literal() {
        let p = RadiometricParams {
            raw_exponent: true,
            ..RadiometricParams::default()
        };
        assert_relative_eq!(p.transmission(60.0), 10f64.powf(-0.7 * 0.06), max_relative = 1e-14);
    }

    #[test]
    fn no_background_radiation() {
        let p = RadiometricParams {
            w_bck: 0.0,
            ..RadiometricParams::default()
        };
        assert_eq!(background_energy(&p, 0.5, p.t_r).unwrap().0, 0.0);
        assert_eq!(p.repetitions(), 2250);
    }
}
