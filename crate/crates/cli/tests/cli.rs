use std::path::Path;
use std::process::{Command, Output};

use carnot_qr_cli::config::RunConfig;
use carnot_qr_cli::plot::{emit_plot, Plot};
use serde_json::Value;

fn carnot_qr(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot-qr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn dilatation_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["dilatation", "--map", "winding", "--point", "0.5,-0.2,0.1", "--seed", "3"];
    let a = carnot_qr(&dir.path().join("a"), &args);
    let b = carnot_qr(&dir.path().join("b"), &args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let ja = std::fs::read(dir.path().join("a/dilatation.json")).unwrap();
    let jb = std::fs::read(dir.path().join("b/dilatation.json")).unwrap();
    assert_eq!(ja, jb);
    assert!(dir.path().join("a/dilatation.csv").exists());
    assert!(dir.path().join("a/dilatation.svg").exists());
}

#[test]
fn ball_box_reports_expected_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = carnot_qr(dir.path(), &["ball-box", "--samples", "20000", "--ladder", "3", "--r0", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&std::fs::read(dir.path().join("ball-box.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["Q_expected"], 4);
    assert_eq!(doc["command"], "ball-box");
    assert!(doc["config"].get("out").is_none());
}

#[test]
fn flagged_analysis_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // The winding map has no Pansu differential on its branch axis.
    let o = carnot_qr(dir.path(), &["pansu", "--map", "winding", "--point", "0,0,0.3"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(carnot_qr(dir.path(), &["dilatation", "--map", "nonsense"]).status.code(), Some(1));
    assert_eq!(carnot_qr(dir.path(), &["dilatation", "--r0", "-1"]).status.code(), Some(1));
}

#[test]
fn config_rejects_unknown_keys() {
    assert!(RunConfig::from_toml("command = \"ball-box\"\nr0 = 0.5\n").is_ok());
    let err = RunConfig::from_toml("radius = 2\n").unwrap_err();
    assert!(err.to_string().contains("radius"), "{err}");
}

#[test]
fn log_log_plot_reports_slope() {
    let x = vec![1.0, 0.5, 0.25, 0.125];
    let y: Vec<f64> = x.iter().map(|r: &f64| 3.0 * r.powi(4)).collect();
    let svg = emit_plot(&Plot::log_log("volumes", "r", "V", x, y)).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("slope = 4.0000"), "{svg}");
}

#[test]
fn degenerate_plots() {
    let one = emit_plot(&Plot::log_log("one", "r", "V", vec![0.5], vec![2.0])).unwrap();
    assert!(!one.contains("slope"));
    assert!(emit_plot(&Plot::log_log("none", "r", "V", vec![0.0], vec![-1.0])).is_none());
}
