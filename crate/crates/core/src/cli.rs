//! Command-line front end. The `splidar` binary calls [`run`].
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! verification failure, 4 I/O error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::KeyValues;
use crate::crlb;
use crate::error::{Error, Result};
use crate::estimators::SolverConfig;
use crate::experiments::{self, ReconstructionMode, SweepSpec};
use crate::io;
use crate::manifest::{sha256_hex, RunManifest};
use crate::model::{self, AcquisitionConfig, PixelScene, PulseShape, SceneGrid, SCENE_KEYS};
use crate::quadrature::QuadratureConfig;
use crate::radiometric::{self, RadiometricParams, RADIOMETRIC_KEYS};
use crate::simulator::{self, FirstPhotonMode, SensorModel};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "splidar", version, about = "Single-photon lidar simulation and per-pixel estimation")]
pub struct Cli {
    /// Master seed. Overrides any seed in the input file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a first-photon frame stack.
    Sim {
        /// Scene file or a previous sim manifest.
        #[arg(long)]
        config: PathBuf,
        /// Frame count, overriding `n_frames` in the file.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Monte Carlo MSE sweep over SBR.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Per-trial estimates for scatter plots.
    Scatter {
        #[arg(long)]
        spec: PathBuf,
        /// Trials per SBR, overriding the `--spec` file.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Reflectivity bounds over a scene grid. Fails if the timestamp bound
    /// is not below the count bound.
    Crlb {
        /// Grid file; the built-in SBR grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Per-pixel depth and reflectivity maps from a frame stack.
    Reconstruct {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long, default_value_t = 1)]
        window: usize,
        #[arg(long, default_value = "joint")]
        mode: ReconstructionMode,
    },
    /// Run the acceptance checks and write their artifacts.
    Verify {
        /// Subset of criteria, e.g. `1,2,6`.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Quadrature { .. }
        | Error::DegenerateLikelihood { .. }
        | Error::BracketNotFound { .. }
        | Error::NoDetections => EXIT_VERIFY,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Sim { config, frames } => cmd_sim(cli, config, *frames),
        Command::Sweep { spec } => cmd_sweep(cli, spec),
        Command::Scatter { spec, trials } => cmd_scatter(cli, spec, *trials),
        Command::Crlb { grid } => cmd_crlb(cli, grid.as_deref()),
        Command::Reconstruct { stack, window, mode } => cmd_reconstruct(cli, stack, *window, *mode),
        Command::Verify { criteria } => cmd_verify(cli, criteria),
    }
}

/// Loads a configuration file, unwrapping it if it is a manifest.
pub fn load_config(path: &Path) -> Result<(KeyValues, Option<u64>)> {
    Ok(RunManifest::config_of(KeyValues::load(path)?))
}

fn config_error(kv: &KeyValues, reason: impl Into<String>) -> Error {
    Error::Config {
        origin: kv.origin().to_string(),
        reason: reason.into(),
    }
}

/// Keys of a sim file besides the scene or radiometric ones.
pub const SIM_KEYS: &[&str] = &[
    "model",
    "width",
    "height",
    "n_frames",
    "seed",
    "sigma_j",
    "first_photon_mode",
    "tdc_bin",
    "reflectance_pgm",
    "depth_pgm",
    "tau_min",
    "tau_max",
    "z_min",
    "z_max",
    "gamma",
];

/// Everything `sim` needs, resolved from a sim file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub grid: SceneGrid,
    pub sensor: SensorModel,
    pub n_frames: usize,
    /// Resolved entries, with image paths made absolute.
    pub resolved: KeyValues,
}

fn resolve_path(kv: &mut KeyValues, key: &str, base: &Path) -> Result<Option<PathBuf>> {
    let Some(raw) = kv.raw(key) else {
        return Ok(None);
    };
    let path = base.join(raw);
    let path = fs::canonicalize(&path).map_err(|e| Error::io(&path, e))?;
    kv.set(key, path.display());
    Ok(Some(path))
}

fn read_map(path: &Path, width: usize, height: usize, what: &str) -> Result<Vec<f64>> {
    let img = io::read_pgm(path)?;
    if (img.width, img.height) != (width, height) {
        return Err(Error::Config {
            origin: path.display().to_string(),
            reason: format!(
                "{what} image is {}x{}, scene is {width}x{height}",
                img.width, img.height
            ),
        });
    }
    Ok(img.values)
}

/// Delay per pixel: from the depth image mapped onto `[tau_min, tau_max]`
/// or onto `[z_min, z_max]` metres (delay `2z/c`), else `fallback`.
fn delay_map(kv: &KeyValues, depth: Option<&Path>, w: usize, h: usize, fallback: f64) -> Result<Vec<f64>> {
    let Some(path) = depth else {
        return Ok(vec![fallback; w * h]);
    };
    let d = read_map(path, w, h, "depth")?;
    let pair = |lo: &str, hi: &str| -> Result<Option<(f64, f64)>> {
        match (kv.get::<f64>(lo)?, kv.get::<f64>(hi)?) {
            (Some(a), Some(b)) => Ok(Some((a, b))),
            (None, None) => Ok(None),
            _ => Err(config_error(kv, format!("give both `{lo}` and `{hi}`"))),
        }
    };
    if let Some((lo, hi)) = pair("tau_min", "tau_max")? {
        return Ok(d.iter().map(|v| lo + v * (hi - lo)).collect());
    }
    if let Some((lo, hi)) = pair("z_min", "z_max")? {
        return Ok(d.iter().map(|v| model::depth_to_delay(lo + v * (hi - lo))).collect());
    }
    Err(config_error(kv, "depth_pgm needs `tau_min`/`tau_max` or `z_min`/`z_max`"))
}

/// Builds the scene grid and sensor from a sim file. Image paths are
/// relative to `base`.
///
/// With `model = flux` (default) the scene keys describe the reference
/// pixel; a reflectance image scales its `alpha` per pixel. With
/// `model = radiometric` reflectivity and background follow from the
/// link budget, times are in seconds and the pulse has unit energy.
pub fn sim_setup(kv: &KeyValues, base: &Path) -> Result<SimSetup> {
    let mut resolved = kv.clone();
    let radiometric = match kv.raw("model").unwrap_or("flux") {
        "flux" => false,
        "radiometric" => true,
        other => return Err(config_error(kv, format!("unknown model `{other}` (expected flux or radiometric)"))),
    };
    let model_keys = if radiometric { RADIOMETRIC_KEYS } else { SCENE_KEYS };
    let allowed: Vec<&str> = SIM_KEYS.iter().chain(model_keys).copied().collect();
    kv.ensure_known(&allowed)?;

    let width: usize = kv.get_or("width", 32)?;
    let height: usize = kv.get_or("height", 32)?;
    let n_frames: usize = kv.get_or("n_frames", 10)?;
    let reflectance = resolve_path(&mut resolved, "reflectance_pgm", base)?;
    let depth = resolve_path(&mut resolved, "depth_pgm", base)?;
    let mode: FirstPhotonMode = kv
        .raw("first_photon_mode")
        .unwrap_or("mixture")
        .parse()
        .map_err(|reason| config_error(kv, reason))?;
    let n = width * height;
    let gamma = match &reflectance {
        Some(p) => read_map(p, width, height, "reflectance")?,
        None => vec![kv.get_or("gamma", 1.0)?; n],
    };

    let (grid, sigma_j) = if radiometric {
        let params = RadiometricParams::from_entries(kv)?;
        let alpha = radiometric::radiometric_alpha(&params, &gamma)?;
        let b_lambda = gamma
            .iter()
            .map(|&g| radiometric::combined_background(&params, g).map(|b| b / params.t_r))
            .collect::<Result<Vec<_>>>()?;
        let tau = delay_map(kv, depth.as_deref(), width, height, model::depth_to_delay(params.range))?;
        let acq = AcquisitionConfig::new(params.t_r, params.repetitions(), params.eta)?;
        let pulse = PulseShape::new(1.0, params.sigma_t)?;
        (SceneGrid::new(width, height, alpha, tau, b_lambda, pulse, acq)?, params.sigma_j)
    } else {
        let scene: PixelScene = model::scene_from_entries(kv)?;
        let alpha = gamma.iter().map(|g| scene.alpha() * g).collect();
        let tau = delay_map(kv, depth.as_deref(), width, height, scene.tau())?;
        let grid = SceneGrid::new(
            width,
            height,
            alpha,
            tau,
            vec![scene.b_lambda(); n],
            *scene.pulse(),
            *scene.acq(),
        )?;
        (grid, kv.get_or("sigma_j", 0.0)?)
    };
    let sensor = SensorModel {
        sigma_j,
        mode,
        tdc_bin: kv.get_or("tdc_bin", 0.0)?,
    };
    sensor.validate()?;
    Ok(SimSetup {
        grid,
        sensor,
        n_frames,
        resolved,
    })
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn pick_seed(flag: Option<u64>, manifest: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(manifest).or(file).unwrap_or(verify::DEFAULT_SEED)
}

fn cmd_sim(cli: &Cli, config: &Path, frames: Option<usize>) -> Result<i32> {
    let (kv, manifest_seed) = load_config(config)?;
    let mut setup = sim_setup(&kv, base_dir(config))?;
    let seed = pick_seed(cli.seed, manifest_seed, kv.get("seed")?);
    if let Some(f) = frames {
        setup.n_frames = f;
    }
    setup.resolved.set("n_frames", setup.n_frames);
    setup.resolved.set("seed", seed);
    let stack = simulator::simulate_frames(&setup.grid, &setup.sensor, setup.n_frames, seed)?;

    let name = "stack.splf";
    let files = vec![
        (name.to_string(), io::encode_stack(&stack)),
        (
            io::sidecar_path(Path::new(name)).display().to_string(),
            io::stack_sidecar(&stack).to_text().into_bytes(),
        ),
    ];
    RunManifest::new("sim", Some(seed), setup.resolved).write_all(&cli.out, &files)?;
    println!(
        "wrote {} ({}x{}x{} frames, {:.3} valid)",
        cli.out.join(name).display(),
        stack.width(),
        stack.height(),
        stack.n_frames,
        stack.valid_fraction()
    );
    Ok(EXIT_OK)
}

fn load_spec(cli: &Cli, path: &Path) -> Result<SweepSpec> {
    let (mut kv, manifest_seed) = load_config(path)?;
    if let Some(seed) = cli.seed.or(manifest_seed) {
        kv.set("seed", seed);
    }
    SweepSpec::from_entries(&kv)
}

fn cmd_sweep(cli: &Cli, spec_path: &Path) -> Result<i32> {
    let spec = load_spec(cli, spec_path)?;
    let result = experiments::run_sweep(&spec, &SolverConfig::default())?;
    let files = vec![
        ("sweep.csv".to_string(), experiments::sweep_csv(&result).into_bytes()),
        (
            "sweep_unclamped.csv".to_string(),
            experiments::sweep_unclamped_csv(&result).into_bytes(),
        ),
    ];
    RunManifest::new("sweep", Some(spec.seed), spec.to_entries()).write_all(&cli.out, &files)?;
    for row in &result.rows {
        println!(
            "sbr {:>5}: mse_with {:.6e} mse_without {:.6e} failures {}",
            row.sbr, row.mse_with, row.mse_without, row.failures
        );
    }
    Ok(EXIT_OK)
}

fn cmd_scatter(cli: &Cli, spec_path: &Path, trials: Option<usize>) -> Result<i32> {
    let mut spec = load_spec(cli, spec_path)?;
    if let Some(t) = trials {
        spec.trials = t;
        spec.validate()?;
    }
    let result = experiments::run_sweep(&spec, &SolverConfig::default())?;
    let rows = experiments::scatter_rows(&result);
    let files = vec![("scatter.csv".to_string(), experiments::scatter_csv(&rows).into_bytes())];
    RunManifest::new("scatter", Some(spec.seed), spec.to_entries()).write_all(&cli.out, &files)?;
    println!("wrote {} rows to {}", rows.len(), cli.out.join("scatter.csv").display());
    Ok(EXIT_OK)
}

/// Keys of a bound grid file: the scene keys, with `sbr` or `b_lambda`
/// given as a list.
pub const GRID_KEYS: &[&str] = &[
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
    "include_noiseless",
    "rel_tol",
];

/// Scenes listed by a grid file. Each `sbr` (or `b_lambda`) entry gives
/// one scene; `include_noiseless = true` appends the first scene with
/// the background removed.
pub fn grid_scenes(kv: &KeyValues) -> Result<Vec<PixelScene>> {
    kv.ensure_known(GRID_KEYS)?;
    let key = if kv.contains("sbr") { "sbr" } else { "b_lambda" };
    let values: Vec<f64> = kv.get_list(key)?.unwrap_or_default();
    if values.is_empty() {
        return Err(config_error(kv, "grid needs a nonempty `sbr` or `b_lambda` list"));
    }
    let mut scenes = Vec::with_capacity(values.len() + 1);
    for v in values {
        let mut one = kv.clone();
        one.set(key, v);
        scenes.push(model::scene_from_entries(&one)?);
    }
    if kv.get_or("include_noiseless", false)? {
        scenes.push(scenes[0].with_b_lambda(0.0)?);
    }
    Ok(scenes)
}

fn cmd_crlb(cli: &Cli, grid: Option<&Path>) -> Result<i32> {
    let mut quad = QuadratureConfig::default();
    let (scenes, config) = match grid {
        Some(path) => {
            let (kv, _) = load_config(path)?;
            if let Some(tol) = kv.get("rel_tol")? {
                quad.rel_tol = tol;
            }
            (grid_scenes(&kv)?, kv)
        }
        None => {
            let mut kv = KeyValues::new("default grid");
            kv.set("grid", "builtin");
            (verify::bound_scenes()?, kv)
        }
    };
    quad.validate()?;
    let report = crlb::verify_bound_ordering(&scenes, &quad)?;
    let files = vec![("crlb.csv".to_string(), crlb::to_csv(&report.rows).into_bytes())];
    RunManifest::new("crlb", None, config).write_all(&cli.out, &files)?;
    for row in &report.rows {
        let tag = if row.passed { "ok" } else { "VIOLATION" };
        println!("sbr {:>8.4} b_lambda {:.4e}: {tag} {}", row.sbr, row.b_lambda, row.detail);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_reconstruct(cli: &Cli, stack_path: &Path, window: usize, mode: ReconstructionMode) -> Result<i32> {
    let bytes = fs::read(stack_path).map_err(|e| Error::io(stack_path, e))?;
    let raw = io::decode_stack(&bytes)?;
    let stack = io::assemble_stack(raw, &KeyValues::load(&io::sidecar_path(stack_path))?)?;
    let rec = experiments::reconstruct_frames(&stack, window, mode, &SolverConfig::default())?;
    let (w, h) = (stack.width(), stack.height());

    let t_r = stack.period();
    let alpha_hi = stack.grid.alpha_map().iter().cloned().fold(0.0, f64::max);
    let alpha_hi = if alpha_hi > 0.0 {
        alpha_hi
    } else {
        rec.alpha.iter().cloned().filter(|a| a.is_finite()).fold(1.0, f64::max)
    };
    let dir = &cli.out;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for (name, values, hi) in [("depth.pgm", &rec.tau, t_r), ("reflectivity.pgm", &rec.alpha, alpha_hi)] {
        let path = dir.join(name);
        io::write_pgm16(&path, w, h, values, 0.0, hi)?;
        files.push((name.to_string(), fs::read(&path).map_err(|e| Error::io(&path, e))?));
    }
    files.push(("metrics.txt".to_string(), rec.metrics.to_entries().to_text().into_bytes()));

    let mut config = KeyValues::new("reconstruct");
    config.set("stack", stack_path.display());
    config.set("stack_sha256", sha256_hex(&bytes));
    config.set("window", window);
    config.set("mode", mode.as_str());
    config.set("depth_pgm_scale", format!("0 -> 0, 65535 -> {t_r}"));
    config.set("reflectivity_pgm_scale", format!("0 -> 0, 65535 -> {alpha_hi}"));
    RunManifest::new("reconstruct", Some(stack.seed), config).write_all(dir, &files)?;
    let m = &rec.metrics;
    println!(
        "window {window} {}: {} valid, {} invalid, {} failures, depth RMSE {:.6}, reflectivity RMSE {:.6}, PSNR {:.3} dB",
        mode.as_str(),
        m.valid_pixels,
        m.invalid_pixels,
        m.failures,
        m.depth_rmse,
        m.reflectivity_rmse,
        m.reflectivity_psnr
    );
    Ok(EXIT_OK)
}

fn cmd_verify(cli: &Cli, criteria: &[u8]) -> Result<i32> {
    let seed = cli.seed.unwrap_or(verify::DEFAULT_SEED);
    if let Some(bad) = criteria.iter().find(|c| !(1..=9).contains(*c)) {
        return Err(Error::invalid("criteria", format!("must lie in 1..=9, got {bad}")));
    }
    let wanted = |id: u8| criteria.is_empty() || criteria.contains(&id);
    let numeric: [(u8, fn(u64) -> verify::CriterionOutcome); 8] = [
        (1, |_| verify::criterion_bound_ordering()),
        (2, verify::criterion_noiseless_joint),
        (3, verify::criterion_side_information),
        (4, verify::criterion_consistency),
        (5, verify::criterion_simulator_fidelity),
        (6, verify::criterion_derivatives),
        (7, verify::criterion_monotone_alpha),
        (8, verify::criterion_frame_pipeline),
    ];
    let mut outcomes = Vec::new();
    for (id, f) in numeric {
        if wanted(id) {
            let o = f(seed);
            println!("{}", o.line());
            outcomes.push(o);
        }
    }
    let mut files = Vec::new();
    if wanted(9) {
        let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
        let (o, artifacts) = verify::criterion_reproducibility(seed, threads);
        println!("{}", o.line());
        outcomes.push(o);
        files.extend(artifacts.unwrap_or_default());
    }
    let report: String = outcomes.iter().map(|o| o.line() + "\n").collect();
    files.push(("verify.txt".to_string(), report.into_bytes()));

    let mut config = KeyValues::new("verify");
    let ids: Vec<u8> = (1..=9).filter(|&i| wanted(i)).collect();
    config.set_list("criteria", &ids);
    RunManifest::new("verify", Some(seed), config).write_all(&cli.out, &files)?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}
