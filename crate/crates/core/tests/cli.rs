use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmap"))
        .args(args)
        .env_remove("QMAP_THREADS")
        .output()
        .expect("qmap runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data lines of a CSV: everything after the `#` preamble and the header.
fn data_lines(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines.next().unwrap().to_string();
    (header, lines.map(str::to_string).collect())
}

#[test]
fn help_exits_zero() {
    let o = qmap(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["classical", "spectrum", "sweep", "scaling", "ergodicity"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qmap(&["spectrum", "--bogus"]).status.code(), Some(2));
    assert_eq!(qmap(&[]).status.code(), Some(2));
    let o = qmap(&["sweep", "--variant", "regular", "--N", "511"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("even"), "{}", stderr(&o));
}

#[test]
fn invalid_config_reports_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"command":"scaling","family":{"variant":"chaotic"},"N_list":[64,128],"r_step":0,"samples":5}"#,
    )
    .unwrap();
    let o = qmap(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for field in ["N_list:", "r_step:", "samples:"] {
        assert!(err.contains(field), "{field} not reported: {err}");
    }

    fs::write(&cfg, r#"{"command":"spectrum","family":{"variant":"chaotic"},"N":8,"extra":1}"#).unwrap();
    let o = qmap(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("extra"));

    fs::write(&cfg, "not json").unwrap();
    assert_eq!(qmap(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_qmap"))
        .args(["spectrum", "--variant", "chaotic", "--N", "8", "--out", "/nonexistent/never"])
        .env("QMAP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = qmap(&["spectrum", "--variant", "chaotic", "--N", "8", "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("file"));
}

#[test]
fn spectrum_run_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec");
    let o = qmap(&["spectrum", "--variant", "chaotic", "--r", "1.5", "--N", "64", "--out", out.to_str().unwrap(), "--emit-plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = data_lines(&out.join("spectrum.csv"));
    assert_eq!(header, "r,level,eigenphase");
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.starts_with("1.5000000000000000e0,")));
    let phases: Vec<f64> = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(phases.windows(2).all(|w| w[0] <= w[1]));

    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(text.starts_with("# qmap "));
    assert!(text.contains("# spec: {") && text.contains("\"command\":\"spectrum\""));
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("'spectrum.csv'"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(
            r#"{{"command":"sweep","family":{{"variant":"regular","r":0}},"N":16,"r_max":0.5,"out":{:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = qmap(&["--config", cfg.to_str().unwrap(), "sweep", "--r-max", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = data_lines(&out.join("spectrum.csv"));
    assert_eq!(header, "r,level,eigenphase");
    // r = 0, 0.05, ..., 0.2
    assert_eq!(rows.len(), 5 * 16);
    let sweep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["spec"]["r_max"], 0.2);
    assert_eq!(sweep["result"]["N"], 16);

    let o = qmap(&["--config", cfg.to_str().unwrap(), "scaling"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scaling_run_reports_all_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2");
    let o = qmap(&[
        "scaling", "--variant", "chaotic", "--N", "8,16,32,64", "--r0", "0", "--r1", "1",
        "--out", out.to_str().unwrap(), "--emit-plot",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = data_lines(&out.join("shifts.csv"));
    assert_eq!(header, "N,h,mean_sq_shift_spacing_units");
    let ns: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["8", "16", "32", "64"]);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let names: Vec<&str> = fit["result"]["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["model"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["power_law", "constant", "log_model"]);
    for m in fit["result"]["models"].as_array().unwrap() {
        assert!(m["residual_sum"].as_f64().unwrap() >= 0.0);
    }
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("'shifts.csv'"));
}

#[test]
fn ergodicity_and_classical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("erg");
    let o = qmap(&["ergodicity", "--variant", "chaotic", "--N", "16,32", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = data_lines(&out.join("ergodicity.csv"));
    assert_eq!(header, "N,variance,F_infinity");
    assert_eq!(rows.len(), 2);
    let curve = fs::read_to_string(out.join("f_curve.csv")).unwrap();
    assert!(curve.contains("\nT,F\n") && curve.contains("# N=16") && curve.contains("# N=32"));

    let out = dir.path().join("cl");
    let o = qmap(&[
        "classical", "--variant", "chaotic", "--N", "32", "--samples", "10000", "--t-max", "10",
        "--t-range", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = data_lines(&out.join("correlator.csv"));
    assert_eq!(header, "t,C_classical,f_quantum");
    assert_eq!(rows.len(), 11);
    assert!(rows[3].split(',').nth(2).is_some_and(|f| !f.is_empty()));
    assert!(rows[4].ends_with(','));
}
