//! On-disk formats: frame stacks, their metadata sidecars and PGM maps.
//!
//! A stack file is a 28-byte little-endian header
//!
//! ```text
//! magic "SPLF" | version u32 | width u32 | height u32 | n_frames u32 | t_r f64
//! ```
//!
//! followed by `n_frames * height * width` f64 timestamps, frame-major then
//! row-major, NaN where no photon was detected. The sidecar is a
//! [`KeyValues`] text file next to it (`<stack>.meta`) holding the seed,
//! sensor settings and ground-truth maps.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::model::{AcquisitionConfig, PulseShape, SceneGrid};
use crate::simulator::{FrameStack, SensorModel};

pub const MAGIC: &[u8; 4] = b"SPLF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

pub fn sidecar_path(stack: &Path) -> PathBuf {
    let mut name = stack.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn encode_stack(stack: &FrameStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * stack.timestamps.len());
    out.extend_from_slice(MAGIC);
    for v in [
        FORMAT_VERSION,
        stack.width() as u32,
        stack.height() as u32,
        stack.n_frames as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&stack.period().to_le_bytes());
    for t in &stack.timestamps {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

/// Decoded stack file: header fields and timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStack {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub t_r: f64,
    pub timestamps: Vec<f64>,
}

pub fn decode_stack(bytes: &[u8]) -> Result<RawStack> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptStack(format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::CorruptStack("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != FORMAT_VERSION {
        return Err(Error::CorruptStack(format!("unsupported version {version}")));
    }
    let (width, height, n_frames) = (word(2) as usize, word(3) as usize, word(4) as usize);
    let t_r = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let count = width * height * n_frames;
    if bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::CorruptStack(format!(
            "expected {} bytes for {width}x{height}x{n_frames}, found {}",
            HEADER_LEN + 8 * count,
            bytes.len()
        )));
    }
    let timestamps = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawStack {
        width,
        height,
        n_frames,
        t_r,
        timestamps,
    })
}

pub fn stack_sidecar(stack: &FrameStack) -> KeyValues {
    let g = &stack.grid;
    let mut kv = KeyValues::new("sidecar");
    kv.set("format_version", FORMAT_VERSION);
    kv.set("seed", stack.seed);
    kv.set("width", g.width());
    kv.set("height", g.height());
    kv.set("n_frames", stack.n_frames);
    kv.set("t_r", g.acq().period());
    kv.set("n_r", g.acq().repetitions());
    kv.set("eta", g.acq().efficiency());
    kv.set("pulse_energy", g.pulse().energy());
    kv.set("sigma_t", g.pulse().width());
    kv.set("sigma_j", stack.sensor.sigma_j);
    kv.set("first_photon_mode", stack.sensor.mode.as_str());
    kv.set("tdc_bin", stack.sensor.tdc_bin);
    kv.set_list("alpha_map", g.alpha_map());
    kv.set_list("tau_map", g.tau_map());
    kv.set_list("b_lambda_map", g.b_lambda_map());
    kv
}

fn parse_mode(kv: &KeyValues) -> Result<crate::simulator::FirstPhotonMode> {
    kv.require_raw("first_photon_mode")?
        .parse()
        .map_err(|reason| Error::Config {
            origin: kv.origin().to_string(),
            reason,
        })
}

/// Rebuilds a stack from its decoded file and sidecar.
pub fn assemble_stack(raw: RawStack, kv: &KeyValues) -> Result<FrameStack> {
    let width: usize = kv.require("width")?;
    let height: usize = kv.require("height")?;
    let n_frames: usize = kv.require("n_frames")?;
    let t_r: f64 = kv.require("t_r")?;
    if (width, height, n_frames) != (raw.width, raw.height, raw.n_frames)
        || t_r.to_bits() != raw.t_r.to_bits()
    {
        return Err(Error::CorruptStack("header disagrees with sidecar".into()));
    }
    let acq = AcquisitionConfig::new(t_r, kv.require("n_r")?, kv.require("eta")?)?;
    let pulse = PulseShape::new(kv.require("pulse_energy")?, kv.require("sigma_t")?)?;
    let map = |key: &str| -> Result<Vec<f64>> {
        kv.get_list(key)?.ok_or_else(|| Error::MissingKey {
            key: key.to_string(),
            origin: kv.origin().to_string(),
        })
    };
    let grid = SceneGrid::new(
        width,
        height,
        map("alpha_map")?,
        map("tau_map")?,
        map("b_lambda_map")?,
        pulse,
        acq,
    )?;
    let sensor = SensorModel {
        sigma_j: kv.require("sigma_j")?,
        mode: parse_mode(kv)?,
        tdc_bin: kv.require("tdc_bin")?,
    };
    if let Some(bad) = raw
        .timestamps
        .iter()
        .find(|t| !t.is_nan() && !(**t >= 0.0 && **t < t_r))
    {
        return Err(Error::CorruptStack(format!("timestamp {bad} outside [0, {t_r})")));
    }
    Ok(FrameStack {
        grid,
        sensor,
        n_frames,
        seed: kv.require("seed")?,
        timestamps: raw.timestamps,
    })
}

pub fn write_stack(stack: &FrameStack, path: &Path) -> Result<()> {
    fs::write(path, encode_stack(stack)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, stack_sidecar(stack).to_text()).map_err(|e| Error::io(side, e))
}

pub fn read_stack(path: &Path) -> Result<FrameStack> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = decode_stack(&bytes)?;
    let kv = KeyValues::load(&sidecar_path(path))?;
    assemble_stack(raw, &kv)
}

/// Grayscale image as values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Reads an 8- or 16-bit PGM, scaling full white to 1.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let luma = img.to_luma16();
    Ok(GrayImage {
        width: luma.width() as usize,
        height: luma.height() as usize,
        values: luma.pixels().map(|p| p.0[0] as f64 / u16::MAX as f64).collect(),
    })
}

/// Writes `values` as a 16-bit PGM mapping `[lo, hi]` linearly onto
/// `[0, 65535]`. Values outside are clipped and NaN becomes 0.
pub fn write_pgm16(path: &Path, width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data: Vec<u16> = values
        .iter()
        .map(|&v| {
            if v.is_nan() {
                0
            } else {
                (((v - lo) / span).clamp(0.0, 1.0) * u16::MAX as f64).round() as u16
            }
        })
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Error::invalid("image", "value count does not match dimensions"))?;
    buf.save_with_format(path, ImageFormat::Pnm).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PixelScene, SbrConvention};
    use crate::simulator::simulate_frames;

    fn small_stack() -> FrameStack {
        let acq = AcquisitionConfig::new(10.0, 1000, 1.0).unwrap();
        let scene = PixelScene::from_constraints(1.0, 1.0, 0.5, 4.0, acq, 0.2, SbrConvention::SignalEnergy)
            .unwrap();
        let grid = SceneGrid::uniform(4, 3, &scene).unwrap();
        simulate_frames(&grid, &SensorModel::default(), 2, 9).unwrap()
    }

    #[test]
    fn stack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.splf");
        let stack = small_stack();
        write_stack(&stack, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, HEADER_LEN + 4 * 3 * 2 * 8);
        let back = read_stack(&path).unwrap();
        assert_eq!(back.grid, stack.grid);
        assert_eq!(back.seed, 9);
        let bits = |s: &FrameStack| s.timestamps.iter().map(|t| t.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&stack));
    }

    #[test]
    fn corrupt_headers_rejected() {
        let mut bytes = encode_stack(&small_stack());
        assert!(decode_stack(&bytes[..10]).is_err());
        bytes[4] = 9;
        assert!(matches!(decode_stack(&bytes), Err(Error::CorruptStack(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_stack(&bytes), Err(Error::CorruptStack(_))));
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let vals = vec![0.0, 0.25, 0.5, 1.0, f64::NAN, 2.0];
        write_pgm16(&path, 3, 2, &vals, 0.0, 1.0).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        let expected = [0.0, 0.25, 0.5, 1.0, 0.0, 1.0];
        for (a, b) in img.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn reads_8bit_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        fs::write(&path, bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.values, vec![0.0, 1.0]);
    }
}
