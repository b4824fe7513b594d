//! End-to-end acceptance run: every criterion is checked through the
//! command-line tool alone, with its tolerance and its runtime budget, and
//! reported on one PASS/FAIL line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_lyapdim");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

/// Runs the tool and returns its exit code.
fn run(name: &str, out: &Path, extra: &[&str]) -> i32 {
    let status = Command::new(BIN)
        .arg("--config")
        .arg(config(name))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawning the tool");
    if !status.status.success() {
        eprintln!("{name}: {}", String::from_utf8_lossy(&status.stderr));
    }
    status.status.code().unwrap_or(-1)
}

type Row = BTreeMap<String, String>;

fn rows(path: &Path) -> Vec<Row> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().map(String::from).zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn num(row: &Row, key: &str) -> f64 {
    row.get(key)
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("column {key} in {row:?}"))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { passed: ok, detail }
}

fn criterion(id: usize, title: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    let passed = outcome.passed && in_time;
    println!(
        "criterion {id} {}: {title}: {} [{:.2}s of {}s]",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    passed
}

fn bowen_identity(dir: &Path) -> Outcome {
    let pairs = [
        "cantor-half",
        "cantor-skew",
        "torus-uniform",
        "torus-skew",
        "planar-half",
        "planar-skew",
    ];
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for p in pairs {
        let out = dir.join(format!("bowen-{p}"));
        ok &= run(&format!("bowen-{p}"), &out, &[]) == 0;
        let r = &rows(&out.join("dimension.csv"))[0];
        worst = worst.max(num(r, "bowen_gap")).max((num(r, "bowen_root") - num(r, "lyapunov")).abs());
    }
    let cantor = num(&rows(&dir.join("bowen-cantor-half/dimension.csv"))[0], "lyapunov");
    let torus = num(&rows(&dir.join("bowen-torus-uniform/dimension.csv"))[0], "lyapunov");
    let anchors = (cantor - 2f64.ln() / 3f64.ln()).abs() < 1e-6 && (torus - 2.0).abs() < 1e-6;
    check(
        ok && worst <= 1e-6 && anchors,
        format!("worst |root - dim_L| = {worst:.2e} (tol 1e-6) over 6 pairs"),
    )
}

fn caratheodory(dir: &Path) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, tol) in [
        ("cantor-half", 0.05),
        ("cantor-skew", 0.05),
        ("planar-half", 0.08),
        ("planar-skew", 0.08),
    ] {
        let out = dir.join(format!("caratheodory-{p}"));
        ok &= run(&format!("caratheodory-{p}"), &out, &[]) == 0;
        let r = &rows(&out.join("dimension.csv"))[0];
        let gap = (num(r, "caratheodory") - num(r, "lyapunov")).abs();
        ok &= gap <= tol;
        parts.push(format!("{p} {gap:.4} (tol {tol})"));
    }
    check(ok, parts.join(", "))
}

fn pressure_oracle(dir: &Path) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for name in ["pressure-cantor", "pressure-torus"] {
        let out = dir.join(name);
        ok &= run(name, &out, &[]) == 0;
        let curve = rows(&out.join("pressure_curve.csv"));
        for t in ["0", "0.3", "0.63", "1"] {
            let at = |m: &str| {
                curve
                    .iter()
                    .find(|r| r["method"] == m && r["t"] == t)
                    .map(|r| num(r, "pressure"))
                    .expect("t on the grid")
            };
            worst = worst.max((at("separated-set") - at("sft-exact")).abs());
        }
    }
    let roots = rows(&dir.join("pressure-torus/bowen_root.csv"));
    let root = roots
        .iter()
        .find(|r| r["method"] == "separated-set")
        .map(|r| num(r, "root"))
        .unwrap_or(f64::NAN);
    ok &= worst <= 0.05 && (root - 2.0).abs() <= 0.03;
    check(
        ok,
        format!("worst |separated - exact| = {worst:.4} (tol 0.05); torus root {root:.4} (2 +- 0.03)"),
    )
}

fn ledrappier_young(dir: &Path) -> Outcome {
    let out = dir.join("horseshoe-geometry");
    let ok = run("horseshoe-geometry", &out, &[]) == 0;
    let g = &rows(&out.join("geometric_check.csv"))[0];
    let (total, unstable, stable) = (num(g, "total"), num(g, "unstable"), num(g, "stable"));
    let target = 2f64.ln() / 3f64.ln() + 0.5;
    let pass = ok
        && (total - target).abs() <= 0.05
        && (unstable - 2f64.ln() / 3f64.ln()).abs() <= 0.02
        && (stable - 0.5).abs() <= 0.02
        && (unstable + stable - total).abs() <= 0.05;
    check(
        pass,
        format!("total {total:.4} (1.130930 +- 0.05), unstable {unstable:.4} (+- 0.02), stable {stable:.4} (+- 0.02)"),
    )
}

fn horseshoe_gaps(dir: &Path) -> Outcome {
    let out = dir.join("horseshoe-approx");
    let ok = run("horseshoe-approx", &out, &[]) == 0;
    let r = rows(&out.join("convergence.csv"));
    let (g10, g20) = (num(&r[0], "gap"), num(&r[1], "gap"));
    let (e10, e20) = (num(&r[0], "entropy_gap"), num(&r[1], "entropy_gap"));
    let pass = ok
        && r[0]["n"] == "10"
        && r[1]["n"] == "20"
        && (g10 - 0.215566).abs() <= 1e-4
        && (g20 - 0.034929).abs() <= 1e-3
        && g20 < g10
        && e20 < e10;
    check(
        pass,
        format!("gaps {g10:.6} (0.215566 +- 1e-4), {g20:.6} (0.034929 +- 1e-3); entropy gaps {e10:.4} > {e20:.4}"),
    )
}

fn invariant_suite(dir: &Path) -> Outcome {
    let out = dir.join("verify");
    let code = run("verify", &out, &[]);
    let checks = rows(&out.join("checks.csv"));
    let failed = checks.iter().filter(|r| r["passed"] != "true").count();
    let kinds = [
        "phi-super-additivity",
        "pressure-decreasing",
        "box-chain",
        "qr-vs-svd",
        "exponent-exactness",
    ];
    let covered = kinds.iter().all(|k| checks.iter().any(|r| r["check"] == *k));
    check(
        code == 0 && failed == 0 && covered && !checks.is_empty(),
        format!("{} checks, {failed} failed, exit code {code}", checks.len()),
    )
}

fn csv_bodies(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}

fn determinism(dir: &Path) -> Outcome {
    let experiments = [
        "lyapunov-circle",
        "local-cantor",
        "box-torus-measure",
        "pressure-torus",
        "caratheodory-cantor-skew",
        "horseshoe-approx",
        "verify",
    ];
    let mut mismatched = Vec::new();
    for name in experiments {
        let mut bodies = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.join(format!("{name}-t{threads}"));
            if run(name, &out, &["--threads", threads]) != 0 {
                mismatched.push(format!("{name} failed"));
            }
            bodies.push(csv_bodies(&out));
        }
        if bodies[0].is_empty() || bodies[0] != bodies[1] {
            mismatched.push(name.to_string());
        }
    }
    check(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} experiments byte-identical at 1 and 4 threads", experiments.len())
        } else {
            format!("differing: {mismatched:?}")
        },
    )
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "Bowen equation root equals the Lyapunov dimension", secs(1), || bowen_identity(dir)),
        criterion(2, "Caratheodory dimension of typical sets equals the Lyapunov dimension", secs(120), || {
            caratheodory(dir)
        }),
        criterion(3, "separated-set pressure agrees with the exact SFT pressure", secs(300), || {
            pressure_oracle(dir)
        }),
        criterion(4, "horseshoe box dimension splits into its slices", secs(120), || ledrappier_young(dir)),
        criterion(5, "horseshoe dimension gaps shrink with the block length", secs(30), || horseshoe_gaps(dir)),
        criterion(6, "invariant suite has no failures", secs(120), || invariant_suite(dir)),
        criterion(7, "CSV bodies do not depend on the thread count", secs(600), || determinism(dir)),
    ];
    let failed: Vec<usize> = (1..=results.len()).filter(|i| !results[i - 1]).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
