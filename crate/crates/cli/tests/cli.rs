use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starkecho"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn artifacts(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let n = p.file_name().unwrap().to_string_lossy();
            n.starts_with(prefix) && !n.contains(".meta.")
        })
        .collect();
    v.sort();
    v
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn unknown_command_is_a_usage_error() {
    let o = run(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_scenario_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "pathways",
        "--scenario",
        "does-not-exist.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let j = stderr_json(&o);
    assert_eq!(j["error"], "io");
    assert_eq!(j["exit_code"], 4);
}

#[test]
fn schema_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(starkecho::scenario::bundled_json("forward").unwrap()).unwrap();
    v["material"]["unexpected"] = serde_json::json!(1);
    let path = dir.path().join("bad.json");
    fs::write(&path, v.to_string()).unwrap();
    let o = run(&[
        "pathways",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "schema");
}

#[test]
fn pathways_csv_columns_and_backward_directions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["pathways", "--scenario", "bundled:backward", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = artifacts(dir.path(), "pathways-");
    assert_eq!(files.len(), 1);
    let rows = csv_rows(&files[0]);
    assert_eq!(
        rows[0],
        ["label", "kind", "emission_time_us", "direction", "relative_phase_rad", "silencing_factor"]
    );
    let dir_of = |label: &str| {
        rows.iter()
            .find(|r| r[0] == label)
            .unwrap_or_else(|| panic!("{label} missing"))[3]
            .clone()
    };
    assert_eq!(dir_of("SE_02356"), "-1");
    assert_eq!(dir_of("4LE_026"), "1");
    assert_eq!(dir_of("4LE_035"), "-1");
    assert_eq!(dir_of("4LE_056"), "-1");
}

#[test]
fn swapped_backward_lists_silenced_025() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(starkecho::scenario::bundled_json("backward").unwrap()).unwrap();
    v["sequence"]["builder"]["options"]["swap_late_controls"] = serde_json::json!(true);
    let path = dir.path().join("swapped.json");
    fs::write(&path, v.to_string()).unwrap();
    let o = run(&[
        "pathways",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&artifacts(&dir.path().join("o"), "pathways-")[0]);
    let r = rows.iter().find(|r| r[0] == "4LE_025").expect("4LE_025 row");
    assert_eq!(r[3], "-1");
    assert!(r[5].parse::<f64>().unwrap() < 0.01);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = ["simulate", "--scenario", "bundled:forward", "--seed", "4"];
    let o = bin().args(common).args(["--out", a.to_str().unwrap(), "--threads", "1"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin().args(common).args(["--out", b.to_str().unwrap(), "--threads", "3"]).output().unwrap();
    assert!(o.status.success());
    let fa = artifacts(&a, "simulate-");
    let fb = artifacts(&b, "simulate-");
    assert_eq!(fa.len(), 2);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let rows = csv_rows(fa.iter().find(|p| p.extension().unwrap() == "csv").unwrap());
    assert_eq!(rows[0], ["time_us", "fwd_re", "fwd_im", "bwd_re", "bwd_im"]);
    // a different seed is a different artifact
    let c = dir.path().join("c");
    let o = run(&["simulate", "--scenario", "bundled:forward", "--seed", "5", "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(artifacts(&c, "simulate-")[0].file_name(), fa[0].file_name());
}

#[test]
fn simulate_peak_summary_has_the_stark_echo() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--scenario", "bundled:forward", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let p = artifacts(dir.path(), "simulate-")
        .into_iter()
        .find(|p| p.to_string_lossy().ends_with(".peaks.json"))
        .unwrap();
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    let peaks = j["peaks"].as_array().unwrap();
    assert!(peaks
        .iter()
        .any(|p| p["transition"] == "a" && p["direction"] == 1 && (p["time_us"].as_f64().unwrap() - 32.0).abs() <= 0.01));
}

#[test]
fn efficiency_and_cavity_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(run(&["efficiency", "--scenario", "bundled:forward", "--out", out]).status.success());
    assert!(run(&["cavity-opt", "--scenario", "bundled:forward", "--out", out]).status.success());
    let eff = artifacts(dir.path(), "efficiency-");
    let table = csv_rows(eff.iter().find(|p| p.extension().unwrap() == "csv").unwrap());
    assert_eq!(table[0], ["d", "eta_fwd", "eta_bwd", "eta_total"]);
    let at2 = table.iter().find(|r| r[0] == "2.0").unwrap();
    let fwd: f64 = at2[1].parse().unwrap();
    assert!((fwd - 4.0 * (-2.0f64).exp()).abs() < 1e-12);
    let cav = csv_rows(&artifacts(dir.path(), "cavity-opt-")[0]);
    assert_eq!(cav[0], ["d", "R1_opt", "eta_max"]);
}

#[test]
fn fit_and_fidelity_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("decay.csv");
    let mut text = String::from("x,y\n");
    for i in 0..12 {
        let b = 3.0 * i as f64;
        let y = starkecho::analytic::decay_factor(0.0, 21.9, 11.0, 0.0, b).unwrap();
        text.push_str(&format!("{b},{y}\n"));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--model",
        "eq5-excited",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&artifacts(&out, "fit-")[0]).unwrap()).unwrap();
    let g35 = r["parameters"][1]["value"].as_f64().unwrap();
    assert!((g35 - 21.9).abs() < 1e-3, "{g35}");

    let q = dir.path().join("q.json");
    fs::write(&q, r#"{"s_e":60.5,"n_e":1,"s_l":30,"n_l":1,"v_0":0.94,"v_90":0.972}"#).unwrap();
    let o = run(&["fidelity", "--input", q.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&artifacts(&out, "fidelity-")[0]).unwrap()).unwrap();
    assert!((r["f_e"]["value"].as_f64().unwrap() - 0.984).abs() < 5e-4);
}

#[test]
fn flat_stark_sweep_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    fs::write(&data, "x,y\n0,1\n2,1\n4,1\n6,1\n8,1\n").unwrap();
    let o = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--model",
        "stark",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "numerical");
}

#[test]
fn reproduce_reports_total_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "--only", "1,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] criterion  1 total fidelity: F_T forward 97.7167%"), "{stdout}");
    let r: serde_json::Value =
        serde_json::from_slice(&fs::read(&artifacts(dir.path(), "reproduce-")[0]).unwrap()).unwrap();
    assert_eq!(r["criteria"].as_array().unwrap().len(), 2);
    let o = run(&["reproduce", "--only", "11", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
