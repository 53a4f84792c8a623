//! Runs `carnot-qr suite --seed 7` twice, prints one line per criterion and
//! fails when any criterion is red or the two JSON reports differ.

use std::path::Path;
use std::process::{Command, ExitCode};

use serde_json::Value;

fn run_suite(out: &Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_carnot-qr"))
        .args(["suite", "--seed", "7", "--format", "json", "--out"])
        .arg(out)
        .status()
        .expect("suite binary runs");
    let json = std::fs::read(out.join("suite.json")).expect("suite.json written");
    (status.code().unwrap_or(-1), json)
}

fn brief(id: u64, m: &Value) -> String {
    let get = |k: &str| m.get(k).cloned().unwrap_or(Value::Null);
    match id {
        3 => format!("slope {}", get("fitted_slope")),
        4 => format!(
            "homogeneity {:.2e}, invariance {:.2e}",
            get("max_homogeneity_defect").as_f64().unwrap_or(f64::NAN),
            get("max_invariance_defect").as_f64().unwrap_or(f64::NAN)
        ),
        10 => format!("flagged {}, beyond 0.2: {}", get("flagged"), get("false_positives_beyond_0.2")),
        11 => format!("gap {:.4}, multiplicity-2 targets {}", get("gap").as_f64().unwrap_or(f64::NAN), get("targets_with_multiplicity_2")),
        12 => {
            let ks: Vec<String> = get("winding_ladder")
                .as_array()
                .map(|a| a.iter().map(|r| format!("{:.4}", r["k"].as_f64().unwrap_or(f64::NAN))).collect())
                .unwrap_or_default();
            format!("winding K ladder [{}], spread {:.3}", ks.join(", "), get("winding_spread").as_f64().unwrap_or(f64::NAN))
        }
        _ => m.get("error").map(|e| format!("error: {e}")).unwrap_or_default(),
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let (code1, first) = run_suite(&dir.path().join("run1"));
    let (code2, second) = run_suite(&dir.path().join("run2"));
    let doc: Value = serde_json::from_slice(&first).expect("suite.json parses");
    let criteria = doc["result"]["criteria"].as_array().expect("criteria array");

    let mut failed = 0;
    for c in criteria {
        let id = c["id"].as_u64().expect("criterion id");
        let mut passed = c["passed"].as_bool() == Some(true);
        let mut note = brief(id, &c["measured"]);
        if id == 13 {
            passed &= first == second;
            note = format!("two runs byte-identical: {} ({} bytes)", first == second, first.len());
        }
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2}: {}  {}  {note}",
            if passed { "PASS" } else { "FAIL" },
            c["name"].as_str().unwrap_or("")
        );
    }
    if criteria.len() != 13 {
        println!("expected 13 criteria, found {}", criteria.len());
        failed += 1;
    }
    let expected_code = if failed == 0 { 0 } else { 2 };
    if code1 != expected_code || code2 != expected_code {
        println!("unexpected exit codes {code1} and {code2}");
        failed += 1;
    }
    println!("acceptance: {} of 13 criteria pass", 13 - failed.min(13));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
