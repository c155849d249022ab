use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use homographic::analysis::{find_central_configs, ConfigType};
use homographic::bipolar::{eta_from_bipolar, BipolarPoint, Sign};
use homographic::model::{config_measure_eta, Alpha, Masses};
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homographic"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn simulate_config() -> Value {
    json!({
        "masses": [1.0, 2.0, 3.0],
        "alpha": 1.0,
        "simulate": {
            "initial": { "reduced": {
                "r": 1.0, "phi": 0.0, "eta": [0.2, 0.9],
                "rdot": 0.0, "phidot": 3.5, "etadot": [0.05, -0.02]
            } },
            "tspan": [0.0, 1.0],
            "samples": 51
        }
    })
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &simulate_config());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 52);
    let meta_a = std::fs::read(dir.path().join("a.csv.meta.json")).unwrap();
    let meta_b = std::fs::read(dir.path().join("b.csv.meta.json")).unwrap();
    let meta: Value = serde_json::from_slice(&meta_a).unwrap();
    assert!(meta.get("config_hash").is_some(), "{meta}");
    assert_eq!(meta["config_hash"], serde_json::from_slice::<Value>(&meta_b).unwrap()["config_hash"]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", &simulate_config());
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--tspan", "0,0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let t: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((t - 0.5).abs() < 1e-15);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate_config();
    cfg["simulate"]["tolerance"] = json!(1e-9);
    let path = write_config(dir.path(), "bad.json", &cfg);
    let o = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_block_is_a_config_error() {
    let o = run(&["contour-scan", "--masses", "1,1,1", "--alpha", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn homothetic_collapse_exits_with_collision() {
    // released from rest in the Lagrange shape
    let m = Masses::new(1.0, 2.0, 3.0).unwrap();
    let eta = eta_from_bipolar(&m, BipolarPoint::new(1.0, 1.0), Sign::Plus).unwrap();
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate_config();
    cfg["simulate"]["initial"] = json!({ "reduced": {
        "r": 1.0, "phi": 0.0, "eta": [eta.re, eta.im], "rdot": 0.0, "phidot": 0.0, "etadot": [0.0, 0.0]
    } });
    cfg["simulate"]["tspan"] = json!([0.0, 5.0]);
    let path = write_config(dir.path(), "collapse.json", &cfg);
    let out = dir.path().join("collapse.csv");
    let o = run(&["simulate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // the samples before the collision are kept
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() > 2);
}

#[test]
fn seed_at_a_critical_point_exits_4() {
    let m = Masses::equal();
    let a = Alpha::new(2.0).unwrap();
    let set = find_central_configs(&m, a).unwrap();
    let lag = set.configs.iter().find(|c| c.kind == ConfigType::Lagrange).unwrap();
    let eta = lag.point().eta();
    let level = config_measure_eta(&m, a, eta).unwrap();
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "masses": [1.0, 1.0, 1.0],
        "alpha": 2.0,
        "contour": { "mu_level": level, "seed": [eta.re, eta.im] }
    });
    let path = write_config(dir.path(), "crit.json", &cfg);
    let o = run(&["contour-scan", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn contour_scan_reports_spread_in_footer() {
    let o = run(&["contour-scan", "--masses", "1,1,1", "--alpha", "2", "--mu-level", "3.5", "--C", "0", "--v", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("s,x,y,r1,r2,mu,F,F_minus_half"));
    let footer = text.lines().last().unwrap().strip_prefix("# ").unwrap();
    let footer: Value = serde_json::from_str(footer).unwrap();
    assert_eq!(footer["closed"], json!(true));
    assert!(footer["f_spread"].as_f64().unwrap() > 1e-6);
    assert!(footer["max_mu_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn low_precision_is_rejected_with_exit_5() {
    let o = run(&["verify-proof", "--masses", "1,2,3", "--alpha", "1", "--mu-tilde", "40", "--digits", "16"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn verify_proof_strong_force_passes() {
    let o = run(&["verify-proof", "--masses", "1,2,3", "--alpha", "2", "--mu-tilde", "20", "--C", "1", "--v", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let report = if report.is_array() { report[0].clone() } else { report };
    assert_eq!(report["passed"], json!(true));
}

#[test]
fn central_configs_lists_five() {
    let o = run(&["central-configs", "--masses", "1,2,3", "--alpha", "1"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let list = v.get("configs").unwrap_or(&v).as_array().unwrap().clone();
    assert_eq!(list.len(), 5);
}

#[test]
fn reduce_round_trips_through_json() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "masses": [1.0, 2.0, 3.0],
        "alpha": 1.0,
        "reduce": { "state": { "reduced": {
            "r": 1.2, "phi": 0.4, "eta": [0.3, 0.7], "rdot": 0.1, "phidot": 0.9, "etadot": [0.02, 0.05]
        } } }
    });
    let path = write_config(dir.path(), "reduce.json", &cfg);
    let o = run(&["reduce", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
