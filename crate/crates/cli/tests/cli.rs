use std::path::Path;
use std::process::{Command, Output};

use axialconv::{ExperimentConfig, Image64, TensorFile};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axialconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn image(path: &Path) -> Image64 {
    TensorFile::read(path).unwrap().to_image().unwrap()
}

const SMALL: [&str; 8] = ["--rows", "40", "--cols", "24", "--m-r", "3", "--n-r", "4"];

#[test]
fn simulate_then_deconvolve_from_manifest_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let mut args = vec!["simulate", "--out-dir", p(&a), "--seed", "9"];
    args.extend(SMALL);
    ok(&args);
    for f in ["trf.axim", "rf.axim", "kernels.axim", "manifest.txt"] {
        assert!(a.join(f).exists(), "{f}");
    }
    ok(&["deconvolve", "--manifest", p(&a.join("manifest.txt")), "--iters", "20"]);

    // a second run driven only by a copy of the manifest, redirected elsewhere
    let b = d.path().join("b");
    let text = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    let mut cfg = ExperimentConfig::from_manifest(&text).unwrap();
    cfg.out_dir = b.clone();
    let m2 = d.path().join("m2.txt");
    std::fs::write(&m2, cfg.to_manifest()).unwrap();
    ok(&["simulate", "--manifest", p(&m2)]);
    ok(&["deconvolve", "--manifest", p(&m2), "--iters", "20"]);
    for f in ["trf.axim", "rf.axim", "kernels.axim", "recon.axim", "recon.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let csv = std::fs::read_to_string(a.join("recon.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,objective,step"));
    let obj: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(obj.len(), 20);
    assert!(obj.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn noiseless_simulation_matches_forward_model() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out-dir", p(d.path()), "--snr-db", "inf", "--pad-mode", "replicate"];
    args.extend(SMALL);
    ok(&args);
    let text = std::fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    assert!(text.contains("snr_db=inf") && text.contains("pad_mode=replicate"));
    let cfg = ExperimentConfig::from_manifest(&text).unwrap();
    let model = axialconv::ForwardModel::new(cfg.make_stack().unwrap(), cfg.pad_mode).unwrap();
    let trf = image(&d.path().join("trf.axim"));
    assert_eq!(image(&d.path().join("rf.axim")), model.apply(&trf).unwrap());
}

#[test]
fn kernels_command_shapes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("k.axim");
    let pgm = d.path().join("k.pgm");
    ok(&["kernels", "--config", "trf1", "--out", p(&out), "--preview", p(&pgm)]);
    let t = TensorFile::read(&out).unwrap();
    assert_eq!(t.dims, vec![2480, 19, 101]);
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n2039 19\n255\n"));

    ok(&["kernels", "--rows", "6", "--cols", "5", "--m-r", "0", "--n-r", "0", "--out", p(&out)]);
    let t = TensorFile::read(&out).unwrap();
    assert_eq!((t.dims.clone(), t.data), (vec![6, 1, 1], vec![1.0; 6]));

    ok(&["kernels", "--rows", "30", "--m-r", "2", "--n-r", "3", "--sigma1", "1.5", "--sigma2", "1.5", "--out", p(&out)]);
    let t = TensorFile::read(&out).unwrap();
    let per = 5 * 7;
    let first = &t.data[..per];
    assert!(t.data.chunks(per).all(|c| c == first));
}

#[test]
fn invariant_baseline_equals_variant_for_constant_width() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out-dir", p(d.path()), "--sigma1", "1.2", "--sigma2", "1.2"];
    args.extend(SMALL);
    ok(&args);
    let dir = p(d.path());
    ok(&["deconvolve", "--out-dir", dir, "--iters", "15"]);
    ok(&["deconvolve", "--out-dir", dir, "--iters", "15", "--invariant-kernel"]);
    ok(&["deconvolve", "--out-dir", dir, "--iters", "15", "--invariant-kernel", "3", "--out", p(&d.path().join("row3.axim"))]);
    let av = image(&d.path().join("recon.axim"));
    assert_eq!(av, image(&d.path().join("recon-ai.axim")));
    assert_eq!(av, image(&d.path().join("row3.axim")));
}

#[test]
fn bmode_and_metrics() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out-dir", p(d.path())];
    args.extend(SMALL);
    ok(&args);
    let rf = d.path().join("rf.axim");
    let trf = d.path().join("trf.axim");
    let pgm = d.path().join("rf.pgm");
    ok(&["bmode", p(&rf), "--out", p(&pgm)]);
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n24 40\n255\n"));
    assert_eq!(bytes.len(), "P5\n24 40\n255\n".len() + 40 * 24);

    let same = ok(&["metrics", p(&trf), p(&trf)]);
    assert!(same.starts_with("nrmse=0.000000e0 psnr=300"), "{same}");
    let diff = ok(&["metrics", p(&trf), p(&rf)]);
    assert!(diff.starts_with("nrmse=") && diff.contains(" psnr="));
}

#[test]
fn verify_passes_with_exit_zero() {
    let out = ok(&["--threads", "2", "verify", "--instances", "5", "--seed", "3"]);
    assert!(out.contains("PASS   adjoint-dot-product"));
    assert!(out.trim_end().ends_with("overall: PASS"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--pad-mode", "mirror"]).status.code(), Some(2));
    assert_eq!(run(&["bmode", "/nonexistent/x.axim", "--out", "/tmp/x.pgm"]).status.code(), Some(2));
    assert_eq!(run(&["kernels", "--rows", "8", "--m-r", "9", "--n-r", "0", "--sigma1", "-1", "--out", "/tmp/k.axim"]).status.code(), Some(2));
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.axim");
    std::fs::write(&bad, b"not a tensor").unwrap();
    let out = run(&["metrics", p(&bad), p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AXIM"));
}
