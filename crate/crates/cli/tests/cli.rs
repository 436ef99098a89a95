//! End-to-end runs of the `eyeshift` binary on synthetic data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eyeshift::io::{decode_ppm, format_record, parse_records, PhiRecord};
use eyeshift::{EyeRegionModel, ParameterVector, Vec3};

const BIN: &str = env!("CARGO_BIN_EXE_eyeshift");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Asset plus a config for a `width x height` camera at the standard framing.
    fn new(width: usize, extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ws = Self { dir };
        ws.ok(&["make-asset", "--out", &ws.path("asset"), "--texture-size", "128"]);
        let height = width * 3 / 4;
        let f = 700.0 * width as f64 / 256.0;
        let config = format!(
            "asset = \"asset\"\noutput = \"out\"\nframes = \"frames/f_###.ppm\"\nlandmarks = \"landmarks.txt\"\n{extra}\n\
             [camera]\nfx = {f}\nfy = {f}\ncx = {}\ncy = {}\nwidth = {width}\nheight = {height}\n",
            width as f64 / 2.0,
            height as f64 / 2.0
        );
        std::fs::write(ws.dir.path().join("run.toml"), config).unwrap();
        ws
    }

    fn path(&self, rel: &str) -> String {
        self.dir.path().join(rel).to_string_lossy().into_owned()
    }

    fn config(&self) -> String {
        self.path("run.toml")
    }

    fn run_with(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(BIN);
        cmd.args(args).env("RUST_LOG", "warn");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_with(args, &[])
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.dir.path().join(rel)).unwrap()
    }

    fn write(&self, rel: &str, text: &str) -> String {
        let p = self.path(rel);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn model(&self) -> EyeRegionModel {
        EyeRegionModel::load(Path::new(&self.path("asset"))).unwrap()
    }

    fn synth_records(&self, phis: &[ParameterVector]) {
        let text: String = phis
            .iter()
            .enumerate()
            .map(|(frame, phi)| format_record(&PhiRecord { frame, phi: phi.clone() }))
            .collect();
        let path = self.write("gt_in.txt", &text);
        self.ok(&["synth", "--config", &self.config(), "--phi", &path]);
    }

    fn frames(&self, dir: &str) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(self.dir.path().join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    }
}

fn subject() -> ParameterVector {
    let mut phi = ParameterVector {
        translation: [3.0, -2.0, -420.0],
        ..ParameterVector::default()
    };
    phi.shape[0] = 0.5;
    phi.shape[3] = -0.7;
    phi.texture[1] = 0.4;
    phi.pitch = 6f64.to_radians();
    phi.yaw = -9f64.to_radians();
    phi.lid = phi.pitch;
    phi
}

fn gaze_error_deg(model: &EyeRegionModel, a: &ParameterVector, b: &ParameterVector) -> f64 {
    let ga = model.eyeball_orientations(a).map(|r| r * Vec3::z());
    let gb = model.eyeball_orientations(b).map(|r| r * Vec3::z());
    0.5 * (0..2).map(|i| ga[i].angle(&gb[i]).to_degrees()).sum::<f64>()
}

#[test]
fn synth_grid_sweep() {
    let ws = Workspace::new(128, "");
    ws.ok(&["synth", "--config", &ws.config(), "--grid", "0,0,-20,20,5"]);
    let frames = ws.frames("frames");
    assert_eq!(frames.len(), 9);
    let log = ws.read("out/synth.txt");
    let yaws: Vec<&str> = log.lines().skip(1).map(|l| l.split_whitespace().nth(2).unwrap()).collect();
    assert_eq!(yaws, ["-20", "-15", "-10", "-5", "0", "5", "10", "15", "20"]);
    let truth = parse_records(&ws.read("out/ground_truth.txt")).unwrap();
    for (r, want) in truth.iter().zip(-4..=4) {
        assert_eq!(r.phi.yaw, (5.0 * want as f64).to_radians());
        assert_eq!(r.phi.pitch, 0.0);
    }
    let images: Vec<Vec<u8>> = frames.iter().map(|p| std::fs::read(p).unwrap()).collect();
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            assert_ne!(images[i], images[j], "frames {i} and {j} are identical");
        }
    }
    assert_eq!(ws.read("landmarks.txt").lines().count(), 9);
}

#[test]
fn synth_is_deterministic() {
    let ws = Workspace::new(64, "");
    ws.synth_records(&[subject(), subject()]);
    let frames = ws.frames("frames");
    assert_eq!(std::fs::read(&frames[0]).unwrap(), std::fs::read(&frames[1]).unwrap());
}

#[test]
fn fit_recovers_gaze_and_warm_starts() {
    let ws = Workspace::new(256, "");
    ws.synth_records(&[subject(), subject()]);
    ws.ok(&["fit", "--config", &ws.config()]);
    let fitted = parse_records(&ws.read("out/phi.txt")).unwrap();
    assert_eq!(fitted.len(), 2);
    let model = ws.model();
    let err = gaze_error_deg(&model, &fitted[0].phi, &subject());
    assert!(err < 2.0, "gaze error {err} deg");
    let timings = ws.read("out/timings_fit.txt");
    let second: Vec<&str> = timings.lines().nth(2).unwrap().split_whitespace().collect();
    assert_eq!(second[0], "1");
    let iterations: usize = second[2].parse().unwrap();
    assert!(iterations <= 2, "warm-started frame took {iterations} iterations");
    let trace = ws.read("out/trace.txt");
    assert!(trace.contains("# frame 0") && trace.contains("# frame 1"));
}

#[test]
fn missing_landmarks_carry_the_previous_fit() {
    let ws = Workspace::new(128, "[fit]\nmax_iterations = 3\n");
    ws.synth_records(&[subject(), subject(), subject()]);
    let text = ws.read("landmarks.txt");
    let kept: String = text.lines().filter(|l| !l.starts_with("1 ")).map(|l| format!("{l}\n")).collect();
    ws.write("landmarks.txt", &kept);
    ws.ok(&["fit", "--config", &ws.config()]);
    let fitted = parse_records(&ws.read("out/phi.txt")).unwrap();
    assert_eq!(fitted.iter().map(|r| r.frame).collect::<Vec<_>>(), [0, 1, 2]);
    assert_eq!(fitted[1].phi, fitted[0].phi);
}

#[test]
fn redirect_targets_and_pass_through() {
    let ws = Workspace::new(128, "[fit]\nmax_iterations = 6\n");
    ws.synth_records(&[subject(), subject(), subject()]);
    ws.ok(&["fit", "--config", &ws.config()]);
    // Frame 2 has no target and must come through unchanged.
    let targets = ws.write("targets.txt", "0 0 0 1000000\n1 120 -60 0\n");
    ws.ok(&["redirect", "--config", &ws.config(), "--targets", &targets]);
    let inputs = ws.frames("frames");
    let outputs = ws.frames("out/redirected");
    assert_eq!(inputs.len(), outputs.len());
    assert_eq!(std::fs::read(&inputs[2]).unwrap(), std::fs::read(&outputs[2]).unwrap());
    assert_ne!(std::fs::read(&inputs[1]).unwrap(), std::fs::read(&outputs[1]).unwrap());
    let log = ws.read("out/redirect.txt");
    let far: Vec<&str> = log.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(far[1], "redirected");
    let vergence: f64 = far[5].parse().unwrap();
    assert!(vergence.abs() < 0.01, "vergence {vergence} deg for a faraway target");
    assert!(log.lines().nth(3).unwrap().contains("passed-through"));
    let redirected = parse_records(&ws.read("out/phi_redirected.txt")).unwrap();
    assert_eq!(redirected.len(), 2);
}

#[test]
fn identity_targets_only_touch_the_eyes() {
    let ws = Workspace::new(128, "[fit]\nmax_iterations = 4\n");
    ws.synth_records(&[subject()]);
    ws.ok(&["fit", "--config", &ws.config()]);
    let phi = parse_records(&ws.read("out/phi.txt")).unwrap().remove(0).phi;
    let model = ws.model();
    // A point 2 m along the fitted gaze of the left eye, with matching vergence.
    let angles = model.eyeball_orientations(&phi);
    let centers = model.eyeball_centers(&phi);
    let hit = |i: usize| centers[i] + angles[i] * Vec3::z() * 2000.0;
    let target = 0.5 * (hit(0) + hit(1));
    let targets = ws.write("targets.txt", &format!("0 {} {} {}\n", target.x, target.y, target.z));
    ws.ok(&["redirect", "--config", &ws.config(), "--targets", &targets]);
    let input = decode_ppm(&std::fs::read(&ws.frames("frames")[0]).unwrap()).unwrap();
    let output = decode_ppm(&std::fs::read(&ws.frames("out/redirected")[0]).unwrap()).unwrap();
    let scene = model.pose_scene(&phi, std::sync::Arc::new(model.texture_sample(&phi.texture).unwrap())).unwrap();
    let camera = eyeshift::Camera::new(350.0, 350.0, 64.0, 48.0, 128, 96).unwrap();
    let raster = eyeshift::Renderer::default().render(&scene, &camera).unwrap();
    let near_eye = |x: usize, y: usize| {
        (y.saturating_sub(4)..(y + 5).min(96)).any(|yy| (x.saturating_sub(4)..(x + 5).min(128)).any(|xx| raster.part(xx, yy).is_eye()))
    };
    let mut changed = 0;
    for y in 0..96 {
        for x in 0..128 {
            if !near_eye(x, y) && input.get(x, y) != output.get(x, y) {
                changed += 1;
            }
        }
    }
    assert_eq!(changed, 0);
}

#[test]
fn end_to_end_runs_are_deterministic() {
    let ws = Workspace::new(96, "[fit]\nmax_iterations = 4\n");
    ws.synth_records(&[subject(), subject()]);
    let targets = ws.write("targets.txt", "0 50 -40 0\n1 -80 30 0\n");
    let mut runs = Vec::new();
    for threads in ["1", "2"] {
        let env = [("EYESHIFT_THREADS", threads)];
        for cmd in [vec!["fit", "--config", &ws.config()], vec!["redirect", "--config", &ws.config(), "--targets", &targets]] {
            assert!(ws.run_with(&cmd, &env).status.success());
        }
        let mut files: Vec<Vec<u8>> = ["phi.txt", "trace.txt", "redirect.txt", "phi_redirected.txt"]
            .iter()
            .map(|f| std::fs::read(ws.dir.path().join("out").join(f)).unwrap())
            .collect();
        files.extend(ws.frames("out/redirected").iter().map(|p| std::fs::read(p).unwrap()));
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new(64, "");
    // No frames yet.
    ws.write("landmarks.txt", "");
    assert_eq!(ws.run(&["fit", "--config", &ws.config()]).status.code(), Some(1));
    assert_eq!(ws.run(&["fit", "--config", &ws.path("missing.toml")]).status.code(), Some(1));
    let bad_threads = ws.run_with(&["fit", "--config", &ws.config()], &[("EYESHIFT_THREADS", "zero")]);
    assert_eq!(bad_threads.status.code(), Some(1));
    assert_eq!(ws.run(&["synth", "--config", &ws.config()]).status.code(), Some(1));
    assert_eq!(ws.run(&["synth", "--config", &ws.config(), "--grid", "1,2"]).status.code(), Some(1));

    // A head placed behind the camera cannot be fitted.
    ws.synth_records(&[subject()]);
    let text = ws.read("landmarks.txt");
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    let moved: Vec<String> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| if i > 50 && (i - 51) % 3 == 2 { (-t.parse::<f64>().unwrap()).to_string() } else { t.clone() })
        .collect();
    ws.write("landmarks.txt", &(moved.join(" ") + "\n"));
    assert_eq!(ws.run(&["fit", "--config", &ws.config()]).status.code(), Some(2));
}

#[test]
fn selftest_passes_on_a_generated_asset() {
    let ws = Workspace::new(128, "");
    let out = ws.run(&["selftest", "--config", &ws.config()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("5/5 checks passed"));
}
