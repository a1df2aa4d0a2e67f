use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use splidar::config::KeyValues;
use splidar::io;
use splidar::manifest::sha256_hex;

const BIN: &str = env!("CARGO_BIN_EXE_splidar");

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn splidar")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> KeyValues {
    KeyValues::load(&dir.join("manifest.txt")).unwrap()
}

#[test]
fn sim_is_deterministic_and_sized() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let conf = presets().join("scene_flat.conf");
    for dir in [&a, &b] {
        let out = run(&["--out", path(dir), "sim", "--config", path(&conf)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["stack.splf", "stack.splf.meta", "manifest.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let stack = fs::read(a.join("stack.splf")).unwrap();
    assert_eq!(stack.len(), io::HEADER_LEN + 32 * 32 * 10 * 8);
    let m = manifest(&a);
    assert_eq!(m.raw("output.stack.splf.sha256").unwrap(), sha256_hex(&stack));

    // the manifest is itself a valid configuration
    let c = tmp.path().join("c");
    let out = run(&["--out", path(&c), "sim", "--config", path(&a.join("manifest.txt"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(c.join("stack.splf")).unwrap(), stack);
}

#[test]
fn sim_thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = presets().join("scene_flat.conf");
    let mut stacks = Vec::new();
    for threads in ["1", "4"] {
        let dir = tmp.path().join(threads);
        let out = run(&["--threads", threads, "--seed", "3", "--out", path(&dir), "sim", "--config", path(&conf)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stacks.push(fs::read(dir.join("stack.splf")).unwrap());
    }
    assert_eq!(stacks[0], stacks[1]);
}

#[test]
fn sim_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(presets().join("scene_flat.conf")).unwrap();
    let missing = write(
        tmp.path(),
        "missing.conf",
        &text.lines().filter(|l| !l.starts_with("t_r")).collect::<Vec<_>>().join("\n"),
    );
    let out = run(&["--out", path(&tmp.path().join("o")), "sim", "--config", path(&missing)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("t_r"), "{}", stderr(&out));

    let unknown = write(tmp.path(), "unknown.conf", &format!("{text}\ncolour = red\n"));
    let out = run(&["--out", path(&tmp.path().join("o")), "sim", "--config", path(&unknown)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"));

    let out = run(&["sim", "--config", path(&tmp.path().join("absent.conf"))]);
    assert_eq!(code(&out), 4);
}

#[test]
fn sim_reads_pgm_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let (w, h) = (8, 4);
    let ramp: Vec<f64> = (0..w * h).map(|i| (i % w) as f64 / (w - 1) as f64).collect();
    io::write_pgm16(&tmp.path().join("gamma.pgm"), w, h, &ramp, 0.0, 1.0).unwrap();
    io::write_pgm16(&tmp.path().join("depth.pgm"), w, h, &vec![0.5; w * h], 0.0, 1.0).unwrap();
    let conf = write(
        tmp.path(),
        "scene.conf",
        "width = 8\nheight = 4\nn_frames = 2\nphoton_level = 1\nsbr = 1\nn_r = 1000\nalpha = 1\n\
         tau = 4\nsigma_t = 0.2\nt_r = 10\nreflectance_pgm = gamma.pgm\ndepth_pgm = depth.pgm\n\
         tau_min = 2\ntau_max = 6\n",
    );
    let out_dir = tmp.path().join("o");
    let out = run(&["--out", path(&out_dir), "sim", "--config", path(&conf)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stack = io::read_stack(&out_dir.join("stack.splf")).unwrap();
    let alpha = stack.grid.alpha_map();
    assert!(alpha[0].abs() < 1e-4 && (alpha[w - 1] - 1.0).abs() < 1e-4);
    assert!(stack.grid.tau_map().iter().all(|t| (t - 4.0).abs() < 1e-4));

    let wrong = write(tmp.path(), "wrong.conf", &fs::read_to_string(&conf).unwrap().replace("width = 8", "width = 9"));
    let out = run(&["--out", path(&out_dir), "sim", "--config", path(&wrong)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn radiometric_sim_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        path(tmp.path()),
        "sim",
        "--config",
        path(&presets().join("scene_radiometric.conf")),
        "--frames",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stack = io::read_stack(&tmp.path().join("stack.splf")).unwrap();
    assert_eq!(stack.n_frames, 2);
    assert!(stack.period() < 1e-6);
}

#[test]
fn sweep_preset_and_seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "small.conf",
        &fs::read_to_string(presets().join("sweep_reflectivity.conf"))
            .unwrap()
            .replace("trials = 1000", "trials = 20"),
    );
    let dir = tmp.path().join("o");
    let out = run(&["--seed", "7", "--out", path(&dir), "sweep", "--spec", path(&spec)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sbr,sbr_pulse,trials,failures,mse_with,mse_without,crlb_count,crlb_timestamp");
    assert_eq!(lines.len(), 6);
    let m = manifest(&dir);
    assert_eq!(m.raw("seed"), Some("7"));
    assert_eq!(m.raw("config.seed"), Some("7"));

    let empty = write(tmp.path(), "empty.conf", &fs::read_to_string(&spec).unwrap().replace("sbr = 0.5, 1, 2, 5, 10", "sbr ="));
    let out = run(&["--out", path(&dir), "sweep", "--spec", path(&empty)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn scatter_has_row_per_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--out", path(tmp.path()), "scatter", "--spec", path(&presets().join("scatter.conf"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("scatter.csv")).unwrap();
    assert_eq!(text.lines().count(), 251);
    let rows = splidar::experiments::parse_scatter_csv(&text).unwrap();
    assert_eq!(splidar::experiments::scatter_csv(&rows), text);
}

#[test]
fn crlb_default_grid_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--out", path(tmp.path()), "crlb"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("crlb.csv")).unwrap();
    let mut noiseless = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(f[4] <= 1.0 + 1e-9, "{line}");
        if f[1] == 0.0 {
            noiseless += 1;
            assert!((f[4] - 1.0).abs() < 1e-9, "{line}");
        }
    }
    assert_eq!(noiseless, 1);

    let dir = tmp.path().join("grid");
    let out = run(&["--out", path(&dir), "crlb", "--grid", path(&presets().join("crlb_grid.conf"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.join("crlb.csv")).unwrap().lines().count(), 7);

    let bad = write(tmp.path(), "bad.conf", "sbr = 1, two\nphoton_level = 10\n");
    let out = run(&["--out", path(&dir), "crlb", "--grid", path(&bad)]);
    assert_eq!(code(&out), 2);
    let garbage = write(tmp.path(), "garbage.conf", "this is not a grid\n");
    let out = run(&["--out", path(&dir), "crlb", "--grid", path(&garbage)]);
    assert_eq!(code(&out), 2);
}

fn simulate(dir: &Path) -> PathBuf {
    let out = run(&["--out", path(dir), "sim", "--config", path(&presets().join("scene_flat.conf"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("stack.splf")
}

#[test]
fn reconstruct_modes_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let stack = simulate(&tmp.path().join("sim"));
    for mode in ["joint", "baseline"] {
        let dir = tmp.path().join(mode);
        let out = run(&["--out", path(&dir), "reconstruct", "--stack", path(&stack), "--window", "10", "--mode", mode]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        for name in ["depth.pgm", "reflectivity.pgm", "metrics.txt", "manifest.txt"] {
            assert!(dir.join(name).exists(), "{mode}: {name}");
        }
        let depth = io::read_pgm(&dir.join("depth.pgm")).unwrap();
        assert_eq!((depth.width, depth.height), (32, 32));
        assert!(manifest(&dir).raw("config.depth_pgm_scale").is_some());
    }

    let out = run(&["--out", path(&tmp.path().join("x")), "reconstruct", "--stack", path(&stack), "--window", "11"]);
    assert_eq!(code(&out), 2);

    let mut bytes = fs::read(&stack).unwrap();
    bytes[0] = b'X';
    let bad = tmp.path().join("bad.splf");
    fs::write(&bad, &bytes).unwrap();
    fs::copy(io::sidecar_path(&stack), io::sidecar_path(&bad)).unwrap();
    let out = run(&["--out", path(&tmp.path().join("x")), "reconstruct", "--stack", path(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("magic"));
}

#[test]
fn flat_reconstruction_has_no_spatial_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let stack = simulate(&tmp.path().join("sim"));
    let dir = tmp.path().join("rec");
    let out = run(&["--out", path(&dir), "reconstruct", "--stack", path(&stack), "--window", "10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let img = io::read_pgm(&dir.join("reflectivity.pgm")).unwrap();
    let n = img.values.len() as f64;
    let mean = img.values.iter().sum::<f64>() / n;
    let sd = (img.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    // column means of independent pixels scatter by sd / sqrt(rows)
    let cols: Vec<f64> = (0..img.width)
        .map(|c| (0..img.height).map(|r| img.values[r * img.width + c]).sum::<f64>() / img.height as f64)
        .collect();
    let col_mean = cols.iter().sum::<f64>() / cols.len() as f64;
    let col_sd = (cols.iter().map(|v| (v - col_mean).powi(2)).sum::<f64>() / cols.len() as f64).sqrt();
    let expected = sd / (img.height as f64).sqrt();
    assert!(col_sd < 1.5 * expected && col_sd > 0.5 * expected, "{col_sd} vs {expected}");
}

#[test]
fn verify_subset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let out = run(&["--threads", threads, "--out", path(&dir), "verify", "--criteria", "1,2,6,7"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        outputs.push((fs::read(dir.join("verify.txt")).unwrap(), fs::read(dir.join("manifest.txt")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let report = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.lines().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn usage_and_io_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["verify", "--criteria", "12"])), 2);
    assert_eq!(code(&run(&["--threads", "0", "crlb"])), 2);
    let tmp = tempfile::tempdir().unwrap();
    let blocker = write(tmp.path(), "file", "");
    let out = run(&["--out", path(&blocker.join("sub")), "crlb"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}
