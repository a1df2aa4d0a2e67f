//! Monte Carlo photon arrivals for one pixel and first-photon frame stacks
//! for a sensor.
//!
//! All-detection mode draws `M ~ Poisson(N_r * Lambda)` arrivals, each
//! i.i.d. from `lambda(t) / Lambda` on `[0, t_r)`. Sensor mode keeps only
//! the first detection per pixel per frame.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{PixelScene, SceneGrid};
use crate::rng::{substream, Purpose};

/// Photon count of one frame, Poisson with mean `N_r * Lambda`.
pub fn sample_count<R: Rng + ?Sized>(scene: &PixelScene, rng: &mut R) -> usize {
    let mean = scene.photon_level();
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize
}

// Gaussian draw around `center`, redrawn until it lands inside [0, t_r).
fn truncated_normal<R: Rng + ?Sized>(center: f64, sigma: f64, t_r: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(center, sigma).expect("positive width");
    loop {
        let t = normal.sample(rng);
        if (0.0..t_r).contains(&t) {
            return t;
        }
    }
}

fn uniform_period<R: Rng + ?Sized>(t_r: f64, rng: &mut R) -> f64 {
    loop {
        let t = rng.random::<f64>() * t_r;
        if t < t_r {
            return t;
        }
    }
}

/// `m` i.i.d. arrival times from `lambda(t) / Lambda`: signal with
/// probability `eta*alpha*S / Lambda`, otherwise uniform background.
pub fn sample_timestamps<R: Rng + ?Sized>(scene: &PixelScene, m: usize, rng: &mut R) -> Vec<f64> {
    let p_sig = scene.signal_probability();
    let t_r = scene.period();
    let sigma = scene.pulse().width();
    (0..m)
        .map(|_| {
            if rng.random::<f64>() < p_sig {
                truncated_normal(scene.tau(), sigma, t_r, rng)
            } else {
                uniform_period(t_r, rng)
            }
        })
        .collect()
}

/// A count and the arrival times that go with it.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampDraw {
    pub timestamps: Vec<f64>,
}

impl TimestampDraw {
    pub fn m(&self) -> usize {
        self.timestamps.len()
    }
}

pub fn sample_draw<R: Rng + ?Sized>(scene: &PixelScene, rng: &mut R) -> TimestampDraw {
    let m = sample_count(scene, rng);
    TimestampDraw {
        timestamps: sample_timestamps(scene, m, rng),
    }
}

/// How the recorded timestamp of a frame is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstPhotonMode {
    /// Detection with probability `1 - exp(-N_r Lambda)`, then one draw
    /// from the signal/noise mixture.
    #[default]
    Mixture,
    /// All `M` arrivals are drawn with a uniformly random cycle index and
    /// the earliest in absolute time is kept.
    OrderStatistic,
}

impl FirstPhotonMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FirstPhotonMode::Mixture => "mixture",
            FirstPhotonMode::OrderStatistic => "order_statistic",
        }
    }
}

impl std::str::FromStr for FirstPhotonMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mixture" => Ok(FirstPhotonMode::Mixture),
            "order_statistic" => Ok(FirstPhotonMode::OrderStatistic),
            other => Err(format!(
                "unknown first-photon mode `{other}` (expected mixture or order_statistic)"
            )),
        }
    }
}

/// Detector effects applied in sensor mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorModel {
    /// Timing jitter standard deviation, added to signal arrivals only.
    pub sigma_j: f64,
    pub mode: FirstPhotonMode,
    /// TDC bin width; recorded times snap to bin centres. 0 disables.
    pub tdc_bin: f64,
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_j.is_finite() && self.sigma_j >= 0.0) {
            return Err(Error::invalid("sigma_j", format!("must be >= 0, got {}", self.sigma_j)));
        }
        if !(self.tdc_bin.is_finite() && self.tdc_bin >= 0.0) {
            return Err(Error::invalid("tdc_bin", format!("must be >= 0, got {}", self.tdc_bin)));
        }
        Ok(())
    }

    fn quantize(&self, t: f64, t_r: f64) -> f64 {
        if self.tdc_bin == 0.0 {
            return t;
        }
        let q = ((t / self.tdc_bin).floor() + 0.5) * self.tdc_bin;
        if q < t_r {
            q
        } else {
            t
        }
    }
}

// One detected arrival time within the period, with jitter on signal photons.
fn sensor_arrival<R: Rng + ?Sized>(scene: &PixelScene, sigma_j: f64, rng: &mut R) -> f64 {
    let t_r = scene.period();
    if rng.random::<f64>() < scene.signal_probability() {
        let sigma = scene.pulse().width();
        loop {
            let jitter = if sigma_j > 0.0 {
                Normal::new(0.0, sigma_j).expect("positive jitter").sample(rng)
            } else {
                0.0
            };
            let t = Normal::new(scene.tau() + jitter, sigma)
                .expect("positive width")
                .sample(rng);
            if (0.0..t_r).contains(&t) {
                return t;
            }
        }
    } else {
        uniform_period(t_r, rng)
    }
}

/// First detection of one frame, `None` when nothing arrived.
pub fn sample_first_photon<R: Rng + ?Sized>(
    scene: &PixelScene,
    sensor: &SensorModel,
    rng: &mut R,
) -> Option<f64> {
    let t = match sensor.mode {
        FirstPhotonMode::Mixture => {
            let p_none = (-scene.photon_level()).exp();
            if rng.random::<f64>() < p_none {
                return None;
            }
            sensor_arrival(scene, sensor.sigma_j, rng)
        }
        FirstPhotonMode::OrderStatistic => {
            let m = sample_count(scene, rng);
            if m == 0 {
                return None;
            }
            let n_r = scene.repetitions();
            let mut best = (u64::MAX, f64::INFINITY);
            for _ in 0..m {
                let cycle = rng.random_range(0..n_r);
                let t = sensor_arrival(scene, sensor.sigma_j, rng);
                if (cycle, t) < best {
                    best = (cycle, t);
                }
            }
            best.1
        }
    };
    Some(sensor.quantize(t, scene.period()))
}

/// First-photon timestamps for `n_frames` exposures of a sensor. Entry
/// `(frame, row, col)` lives at `frame * width * height + row * width + col`
/// and is NaN when the pixel saw nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub grid: SceneGrid,
    pub sensor: SensorModel,
    pub n_frames: usize,
    pub seed: u64,
    pub timestamps: Vec<f64>,
}

impl FrameStack {
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn period(&self) -> f64 {
        self.grid.acq().period()
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let n = self.grid.len();
        &self.timestamps[frame * n..(frame + 1) * n]
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> Option<f64> {
        let t = self.frame(frame)[row * self.width() + col];
        (!t.is_nan()).then_some(t)
    }

    /// Fraction of (frame, pixel) entries holding a detection.
    pub fn valid_fraction(&self) -> f64 {
        let valid = self.timestamps.iter().filter(|t| !t.is_nan()).count();
        valid as f64 / self.timestamps.len() as f64
    }
}

/// Runs [`sample_first_photon`] for every pixel of every frame, each on its
/// own sub-stream `(seed, frame, row, col)`.
pub fn simulate_frames(
    grid: &SceneGrid,
    sensor: &SensorModel,
    n_frames: usize,
    seed: u64,
) -> Result<FrameStack> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    sensor.validate()?;
    let (w, n) = (grid.width(), grid.len());
    let timestamps = (0..n_frames * n)
        .into_par_iter()
        .map(|idx| {
            let (frame, pixel) = (idx / n, idx % n);
            let (row, col) = (pixel / w, pixel % w);
            let mut rng = substream(seed, Purpose::Frame, &[frame as u64, row as u64, col as u64]);
            sample_first_photon(&grid.pixel_at(pixel), sensor, &mut rng).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(FrameStack {
        grid: grid.clone(),
        sensor: *sensor,
        n_frames,
        seed,
        timestamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AcquisitionConfig, SbrConvention};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn preset(sbr: f64) -> PixelScene {
        let acq = AcquisitionConfig::new(10.0, 1000, 1.0).unwrap();
        PixelScene::from_constraints(10.0, sbr, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)
            .unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn count_moments() {
        let s = preset(1.0);
        let mut r = rng(1);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_count(&s, &mut r) as f64).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((9.9..=10.1).contains(&mean), "{mean}");
        assert!((9.5..=10.5).contains(&var), "{var}");
    }

    #[test]
    fn zero_rate_never_fires() {
        let s = preset(1.0).with_alpha(0.0).unwrap().with_b_lambda(0.0).unwrap();
        let mut r = rng(2);
        assert!((0..1000).all(|_| sample_count(&s, &mut r) == 0));
        let sensor = SensorModel::default();
        assert!((0..1000).all(|_| sample_first_photon(&s, &sensor, &mut r).is_none()));
    }

    #[test]
    fn noiseless_timestamp_mean() {
        let s = preset(1.0).with_b_lambda(0.0).unwrap();
        let ts = sample_timestamps(&s, 100_000, &mut rng(3));
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        assert!((mean - 4.0).abs() < 3.0 * 0.2 / (1e5f64).sqrt(), "{mean}");
        assert!(ts.iter().all(|t| (0.0..10.0).contains(t)));
    }

    #[test]
    fn mixture_window_fraction() {
        let s = preset(5.0);
        let ts = sample_timestamps(&s, 100_000, &mut rng(4));
        let near = ts.iter().filter(|t| (*t - 4.0).abs() <= 0.6).count() as f64 / 1e5;
        let p = s.signal_probability();
        let expected = p * 0.9973 + (1.0 - p) * (1.2 / 10.0);
        assert!((near - expected).abs() < 0.005, "{near} vs {expected}");
    }

    #[test]
    fn no_detection_rate() {
        let s = preset(1.0);
        let sensor = SensorModel::default();
        let mut r = rng(5);
        let n = 1_000_000;
        let misses = (0..n).filter(|_| sample_first_photon(&s, &sensor, &mut r).is_none()).count();
        // expected 45.4, Poisson sd 6.7
        assert!((20..=75).contains(&misses), "{misses}");
    }

    #[test]
    fn jitter_broadens_signal() {
        let s = preset(1.0).with_b_lambda(0.0).unwrap();
        let sensor = SensorModel {
            sigma_j: 0.15,
            ..SensorModel::default()
        };
        let mut r = rng(6);
        let ts: Vec<f64> = (0..50_000)
            .filter_map(|_| sample_first_photon(&s, &sensor, &mut r))
            .collect();
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        let var = ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / ts.len() as f64;
        assert!((var - 0.0625).abs() < 0.003, "{var}");
    }

    #[test]
    fn order_statistic_prefers_early_cycles() {
        let s = preset(1.0);
        let sensor = SensorModel {
            mode: FirstPhotonMode::OrderStatistic,
            ..SensorModel::default()
        };
        let mut r = rng(7);
        let detected = (0..20_000)
            .filter(|_| sample_first_photon(&s, &sensor, &mut r).is_some())
            .count();
        assert!(detected > 19_990);
    }

    #[test]
    fn tdc_quantizes_to_bin_centres() {
        let sensor = SensorModel {
            tdc_bin: 0.5,
            ..SensorModel::default()
        };
        assert_eq!(sensor.quantize(4.1, 10.0), 4.25);
        assert_eq!(sensor.quantize(0.0, 10.0), 0.25);
    }

    #[test]
    fn frames_deterministic_and_low_flux_fraction() {
        let acq = AcquisitionConfig::new(10.0, 1000, 1.0).unwrap();
        let scene = PixelScene::from_constraints(0.5, 1.0, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)
            .unwrap();
        let grid = SceneGrid::uniform(32, 32, &scene).unwrap();
        let sensor = SensorModel::default();
        let a = simulate_frames(&grid, &sensor, 20, 11).unwrap();
        let b = simulate_frames(&grid, &sensor, 20, 11).unwrap();
        assert_eq!(
            a.timestamps.iter().map(|t| t.to_bits()).collect::<Vec<_>>(),
            b.timestamps.iter().map(|t| t.to_bits()).collect::<Vec<_>>()
        );
        let expected = 1.0 - (-0.5f64).exp();
        assert!((a.valid_fraction() - expected).abs() < 0.02, "{}", a.valid_fraction());
        assert!(simulate_frames(&grid, &sensor, 0, 11).is_err());
    }
}
