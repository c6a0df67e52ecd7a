use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
[domain]
kind = "disk"
radius = 1.0
resolution = 64

[vortex]
kappa = [1.0]
z = [[0.05, -0.03]]

[solver]
eps = [0.1, 0.07, 0.05]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vortexreg"));
    c.env_remove("VORTEXREG_OUT");
    c
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn pipeline(cfg: &Path, out: &Path) -> Output {
    bin().arg("--out").arg(out).arg("pipeline").arg(cfg).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn failed_stage(out: &Path) -> (String, String) {
    let log = json(&out.join("run_log.json"));
    let s = log["stages"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["ok"] == false)
        .expect("a failed stage");
    (s["stage"].as_str().unwrap().into(), s["error_code"].as_str().unwrap().into())
}

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    k.sort();
    k
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn nonzero_flux_is_reported() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL.replace("[vortex]", "[flow]\nsamples = [[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]\n\n[vortex]");
    let cfg = write_cfg(tmp.path(), "flux.cfg", &text);
    let out = tmp.path().join("out");
    let o = pipeline(&cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(failed_stage(&out), ("background".into(), "FLUX_NONZERO".into()));
}

#[test]
fn large_eps_has_no_core_radius() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "big.cfg", &SMALL.replace("[0.1, 0.07, 0.05]", "[0.5]"));
    let out = tmp.path().join("out");
    let o = pipeline(&cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(failed_stage(&out), ("ansatz".into(), "BRACKET_SIGN".into()));
    // Artifacts of the earlier stages are still there.
    assert!(out.join("critical_point.json").exists());
}

#[test]
fn unknown_keys_stop_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "typo.cfg", &format!("{SMALL}\nmax_iters = 3\n"));
    let out = tmp.path().join("out");
    assert_eq!(pipeline(&cfg, &out).status.code(), Some(3));
    assert_eq!(failed_stage(&out), ("config".into(), "CONFIG".into()));
}

fn strip_clock(v: &mut Value) {
    if let Some(o) = v.as_object_mut() {
        o.remove("wall_clock_seconds");
    }
}

#[test]
fn reports_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "small.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&cfg, &a);
    let o = bin().arg("--jobs").arg("1").arg("--out").arg(&b).arg("pipeline").arg(&cfg).output().unwrap();
    assert!(o.status.code().is_some());
    let mut files = vec![
        PathBuf::from("profile.json"),
        "critical_point.json".into(),
        "verification.json".into(),
        "study.csv".into(),
        "critical_trajectory.csv".into(),
    ];
    for e in ["0.1", "0.07", "0.05"] {
        for f in ["ansatz_params.json", "solve_report.json", "w.csv", "u.csv"] {
            files.push(Path::new(&format!("eps_{e}")).join(f));
        }
    }
    for f in files {
        let (x, y) = (a.join(&f), b.join(&f));
        if f.extension().unwrap() == "json" {
            let (mut x, mut y) = (json(&x), json(&y));
            strip_clock(&mut x);
            strip_clock(&mut y);
            assert_eq!(x, y, "{}", f.display());
        } else {
            assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{}", f.display());
        }
    }
}

#[test]
fn outputs_follow_the_documented_layout() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("out");
    pipeline(&cfg, &out);

    assert_eq!(header(&out.join("profile.csv")), "r,phi,dphi");
    assert_eq!(
        keys(&json(&out.join("profile.json"))),
        ["I_p", "I_p1", "p", "phi_prime_1", "pohozaev_residuals", "r0", "schema_version", "steps"]
    );
    let cp = json(&out.join("critical_point.json"));
    for k in ["Z_star", "grad_norm", "hessian_eigs", "class", "schema_version"] {
        assert!(cp.get(k).is_some(), "{k}");
    }
    assert_eq!(header(&out.join("critical_trajectory.csv")), "iteration,value,grad_norm,x1,y1");
    assert_eq!(
        header(&out.join("study.csv")),
        "eps,circulation_err,core_radius_over_eps,dist_to_Zstar,energy_residual"
    );
    let study = fs::read_to_string(out.join("study.csv")).unwrap();
    assert_eq!(study.lines().count(), 4);
    for line in study.lines().skip(1) {
        assert_eq!(line.split(',').filter(|v| v.parse::<f64>().is_ok()).count(), 5, "{line}");
    }
    let v = json(&out.join("verification.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["eps"].as_array().unwrap().len(), 3);
    assert_eq!(v["energy_residual"].as_array().unwrap().len(), 3);
    assert!(v["checks"].as_array().unwrap().len() >= 5);
    for e in ["0.1", "0.07", "0.05"] {
        let dir = out.join(format!("eps_{e}"));
        for f in ["w.csv", "u.csv", "ansatz.csv"] {
            assert_eq!(header(&dir.join(f)), "nx,ny,x0,y0,dx,dy", "{f}");
        }
        let r = json(&dir.join("solve_report.json"));
        for k in ["schema_version", "converged", "iterations", "residual_norm", "cores", "wall_clock_seconds"] {
            assert!(r.get(k).is_some(), "{k}");
        }
        assert!(json(&dir.join("ansatz_params.json")).get("s").is_some());
    }
}

#[test]
fn bundled_example_runs_end_to_end() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/disk_single.cfg");
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = pipeline(&cfg, &out);
    let log = json(&out.join("run_log.json"));
    assert!(log["stages"].as_array().unwrap().iter().all(|s| s["ok"] == true), "{log}");
    let v = json(&out.join("verification.json"));
    let pass = v["pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 1 }));
    let checks = v["checks"].as_array().unwrap();
    let by_name = |n: &str| checks.iter().find(|c| c["name"] == n).unwrap()["pass"].as_bool().unwrap();
    // Geometry and solver checks hold on the 256 grid.
    for n in ["newton_iterations", "circulation_error_decreasing", "centroid_distance_cells", "core_radius_ratio_spread"] {
        assert!(by_name(n), "{n}");
    }
}

#[test]
fn stages_run_on_each_others_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "small.cfg", SMALL);
    let run = |args: &[&str], out: &Path| {
        let mut c = bin();
        c.arg("--out").arg(out).args(args);
        c.output().unwrap()
    };
    let c = cfg.to_str().unwrap();
    let cp = tmp.path().join("cp");
    assert_eq!(run(&["critical-points", "--config", c], &cp).status.code(), Some(0));
    let crit = cp.join("critical_point.json");
    let sol = tmp.path().join("sol");
    let o = run(&["solve", "--config", c, "--critical", crit.to_str().unwrap()], &sol);
    assert_eq!(o.status.code(), Some(0));
    let ver = tmp.path().join("ver");
    let o = run(
        &["verify", "--config", c, "--run-dir", sol.to_str().unwrap(), "--critical", crit.to_str().unwrap()],
        &ver,
    );
    let whole = tmp.path().join("whole");
    assert_eq!(o.status.code(), pipeline(&cfg, &whole).status.code());
    assert_eq!(json(&ver.join("verification.json")), json(&whole.join("verification.json")));

    // Restarting from a converged field takes at most one step.
    let w = sol.join("eps_0.05/w.csv");
    let again = tmp.path().join("again");
    let o = run(
        &["solve", "--config", c, "--eps", "0.05", "--seed", "file", "--seed-file", w.to_str().unwrap(), "--critical", crit.to_str().unwrap()],
        &again,
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&again.join("eps_0.05/solve_report.json"))["iterations"].as_u64().unwrap() <= 1);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("env-out");
    let o = bin().env("VORTEXREG_OUT", &root).args(["profile", "--p", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(root.join("profile.json").exists());
    // The flag wins over the environment.
    let flag = tmp.path().join("flag-out");
    bin().env("VORTEXREG_OUT", &root).arg("--out").arg(&flag).args(["profile", "--p", "3"]).output().unwrap();
    assert!(flag.join("profile.json").exists());
    assert_eq!(json(&root.join("profile.json"))["p"], 2.0);
}

#[test]
fn seed_zero_stays_trivial() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "small.cfg", SMALL);
    let out = tmp.path().join("out");
    let o = bin()
        .arg("--out")
        .arg(&out)
        .args(["solve", "--seed", "zero", "--eps", "0.1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r = json(&out.join("eps_0.1/solve_report.json"));
    assert_eq!(r["max_w"], 0.0);
    assert!(r["cores"].as_array().unwrap().is_empty());
}
