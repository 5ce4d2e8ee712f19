use hyperdamp::words::{count_words, WordParameters};
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hyperdamp"));
    cmd.env("HYPERDAMP_SINGLE_THREAD", "1");
    if let Some(text) = config {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.arg("--out").arg(dir.join("out")).args(args);
    cmd.output().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn negative_refinement_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), Some("[surface]\nrefinement = -1\n"), &["surface", "info"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surface.refinement"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_keys_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), Some("[surface]\nlevel = 2\n"), &["surface", "info"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn surface_info_reports_gauss_bonnet_area() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), Some("[surface]\nrefinement = 2\n"), &["surface", "info"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/surface.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let area = doc["data"]["area"].as_f64().unwrap();
    let four_pi = 4.0 * std::f64::consts::PI;
    assert!((area - four_pi).abs() < 0.01 * four_pi);
    assert_eq!(doc["data"]["genus"], 2);
    assert_eq!(doc["data"]["mesh"]["euler_characteristic"], -2);
    assert_eq!(doc["meta"]["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(doc["data"]["generators"].as_array().unwrap().len(), 4);
}

#[test]
fn words_bound_matches_count_words() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        None,
        &["words", "bound", "--rho", "0.9", "--alpha", "0.0625", "--kmin", "4", "--kmax", "40"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("out/words_bound.csv")).unwrap();
    assert!(text.starts_with("# hyperdamp "));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "h,n0,z_count,q_count,x_count,scaled");
    assert_eq!(lines.len(), 1 + 37);
    for (k, line) in (4..=40).zip(&lines[1..]) {
        let f: Vec<&str> = line.split(',').collect();
        let h = 0.5f64.powi(k);
        assert_eq!(f[0].parse::<f64>().unwrap(), h);
        let p = WordParameters::new(h, 0.9, 0.0625).unwrap();
        let c = count_words(&p).unwrap();
        assert_eq!(f[1].parse::<u64>().unwrap(), p.n0);
        assert_eq!(f[2], c.z_count.to_string());
        assert_eq!(f[3], c.q_count.to_string());
        assert_eq!(f[4], c.x_count.to_string());
    }
}

#[test]
fn spectrum_output_is_deterministic() {
    let cfg = "[surface]\nrefinement = 2\n[damping]\npreset = \"axis_avoiding_bump\"\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(dir.path(), Some(cfg), &["spectrum", "solve"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["eigenvalues.csv", "spectrum_summary.json"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let text = std::fs::read_to_string(a.path().join("out/eigenvalues.csv")).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "re,im,residual,multiplicity,paired_index");
    for line in &lines[1..] {
        let im: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(im <= 1e-6);
    }
}

#[test]
fn wave_evolve_emits_trace_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[surface]\nrefinement = 2\n[damping]\nconstant = 0.3\n[wave]\nt_final = 10.0\nlambda_cut = 10.0\n";
    let out = run(dir.path(), Some(cfg), &["wave", "evolve"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    let energies: Vec<f64> = data_lines(&csv)[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
    let svg = std::fs::read_to_string(dir.path().join("out/energy.svg")).unwrap();
    assert!(svg.starts_with("<!-- hyperdamp "));
    assert!(svg.contains("<polyline"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/wave_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["data"]["gamma_oracle"].as_f64(), Some(0.6));
    assert_eq!(summary["data"]["nonincreasing"], true);
}

#[test]
fn control_check_finds_the_avoided_axis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[damping]\npreset = \"axis_avoiding_bump\"\n[flow]\nradial = 1\nangular = 4\ndirections = 4\n";
    let out = run(dir.path(), Some(cfg), &["control", "check"]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/control.json")).unwrap()).unwrap();
    assert_eq!(doc["data"]["controlled"], false);
    assert!(doc["data"]["witness"].is_object());
}

#[test]
fn formats_filter_emission() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[surface]\nrefinement = 1\n[output]\nformats = [\"csv\"]\n";
    let out = run(dir.path(), Some(cfg), &["resolvent", "scan"]);
    assert!(out.status.success());
    assert!(dir.path().join("out/resolvent.csv").exists());
    assert!(!dir.path().join("out/resolvent.svg").exists());
}

#[test]
fn verify_rejects_unknown_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), None, &["verify", "all", "--only", "11"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), None, &["verify", "all", "--only", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("criterion 10") && stdout.contains("PASS"));
    assert!(dir.path().join("out/acceptance.json").exists());
}
