use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lyapdim");

const CANTOR: &str = r#"
command = "dimension"

[system]
kind = "cantor-repeller"
slopes = [3.0, 3.0]

[measure]
kind = "bernoulli"
p = [0.5, 0.5]
"#;

fn lyapdim(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cantor_dimension_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = lyapdim(tmp.path(), CANTOR, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("dimension.csv")).unwrap();
    let mut lines = csv.split("\r\n");
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("lyapunov"), "0.630929754");
    assert_eq!(col("bowen_root"), "0.630929754");
    assert!(col("bowen_gap").parse::<f64>().unwrap() < 1e-6);
    assert_eq!(lines.next(), Some(""));
}

#[test]
fn reruns_are_byte_identical_and_hash_their_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = format!("{CANTOR}\n[dimension]\nmethods = [\"lyapunov\", \"local\"]\nlocal_samples = 20\n");
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let o = lyapdim(tmp.path(), &config, &["--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        (fs::read(out.join("dimension.csv")).unwrap(), manifest)
    };
    let (a, ma) = run("a", "9");
    let (b, mb) = run("b", "9");
    let (c, mc) = run("c", "10");
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert_eq!(ma["seed"], 9);
    assert_eq!(ma["input_sha256"].as_str().unwrap().len(), 64);
    assert_ne!(ma["input_sha256"], mc["input_sha256"]);
    assert_ne!(a, c);
}

#[test]
fn negative_epsilon_exits_2_and_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"
command = "horseshoe-approx"
out = "unused"

[system]
kind = "linear-horseshoe"
expansion = 3.0
contraction = 0.25

[measure]
kind = "bernoulli"
p = [0.7, 0.3]

[horseshoe_approx]
n = [10, 20]
epsilon = -0.05
"#;
    let o = lyapdim(tmp.path(), config, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horseshoe_approx.epsilon"), "{}", stderr(&o));
    assert!(!tmp.path().join("unused").exists());
}

#[test]
fn unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lyapdim(tmp.path(), &format!("{CANTOR}\n[dimension]\nmethod = [\"box\"]\n"), &["--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension.method"), "{}", stderr(&o));
}

#[test]
fn infeasible_computations_exit_3_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // the Bowen equation is not posed on the horseshoe
    let config = r#"
command = "dimension"

[system]
kind = "linear-horseshoe"
expansion = 3.0
contraction = 0.25

[measure]
kind = "bernoulli"
p = [0.5, 0.5]
"#;
    let o = lyapdim(tmp.path(), config, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = lyapdim(tmp.path(), CANTOR, &["--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_4() {
    let o = Command::new(BIN)
        .args(["--config", "/nonexistent/lyapdim.toml", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn geometric_check_flag_adds_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = r#"
command = "horseshoe-approx"

[system]
kind = "linear-horseshoe"
expansion = 3.0
contraction = 0.25

[measure]
kind = "bernoulli"
p = [0.5, 0.5]

[horseshoe_approx]
n = [1, 2]
epsilon = 1.0
geometric_points = 65536
"#;
    let o = lyapdim(tmp.path(), config, &["--out", out.to_str().unwrap(), "--geometric-check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = fs::read_to_string(out.join("geometric_check.csv")).unwrap();
    assert_eq!(g.lines().count(), 3, "{g}");
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"geometric_check\": true"), "{manifest}");
}

#[test]
fn pressure_curve_on_the_doubling_map() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = r#"
command = "pressure-curve"

[system]
kind = "expanding-circle-map"
degree = 2

[pressure_curve]
t = [0.0, 0.5, 1.0]
methods = ["sft-exact"]
"#;
    let o = lyapdim(tmp.path(), config, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = fs::read_to_string(out.join("pressure_curve.csv")).unwrap();
    assert!(curve.contains("sft-exact,0,0.693147181,"), "{curve}");
    assert!(curve.contains("sft-exact,0.5,0.34657359,"), "{curve}");
    assert!(curve.contains("sft-exact,1,0,"), "{curve}");
    let roots = fs::read_to_string(out.join("bowen_root.csv")).unwrap();
    assert!(roots.contains("sft-exact,true,ok,1,"), "{roots}");
}
