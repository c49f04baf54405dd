use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn dsrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsrefine"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = dsrefine(&["validate", path(&data("plant.json"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(report(&ok)["verdict"], true);

    let dir = tempfile::tempdir().unwrap();
    let bad_b = dir.path().join("bad_b.json");
    std::fs::write(
        &bad_b,
        r#"{"E": [[1,0],[0,1]], "A": [[1,0],[0,1]], "B": [[1,1],[1,1]], "C": [[1,0]]}"#,
    )
    .unwrap();
    let out = dsrefine(&["validate", path(&bad_b)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["rank_b_ok"], false);

    let malformed = dir.path().join("malformed.json");
    std::fs::write(&malformed, "{\"E\": [[1, 0]").unwrap();
    assert_eq!(
        dsrefine(&["validate", path(&malformed)]).status.code(),
        Some(2)
    );

    let non_numeric = dir.path().join("nan.json");
    std::fs::write(
        &non_numeric,
        r#"{"E": [["a"]], "A": [[1]], "B": [[1]], "C": [[1]]}"#,
    )
    .unwrap();
    let out = dsrefine(&["validate", path(&non_numeric)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E[0][0]"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(dsrefine(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        dsrefine(&[
            "--tol-residual",
            "-1",
            "validate",
            path(&data("plant.json"))
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn check_sim_accepts_reference_relation() {
    let out = dsrefine(&[
        "check-sim",
        path(&data("abstraction.json")),
        path(&data("plant.json")),
        path(&data("relation.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["verdict"], true);
}

#[test]
fn check_sim_rejects_perturbed_relation() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    std::fs::write(&rel, r#"{"H": [[0, 0, 1], [0, 0.9, -1]]}"#).unwrap();
    let out = dsrefine(&[
        "check-sim",
        path(&data("abstraction.json")),
        path(&data("plant.json")),
        path(&rel),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["step_match"], false);
    assert!((r["witness"]["residual"].as_f64().unwrap() - 0.1).abs() < 1e-9);
}

#[test]
fn check_wellposed_reports_ranks() {
    let out = dsrefine(&[
        "check-wellposed",
        path(&data("abstraction.json")),
        path(&data("controller.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["rank_lhs"], 3);
    assert_eq!(r["rank_aug"], 3);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"Ec": [], "Ac": [], "Bc": []}"#).unwrap();
    let out = dsrefine(&["check-wellposed", path(&data("plant.json")), path(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["uniqueness_ok"], false);
}

#[test]
fn to_dv_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("dv.json");
    let out = dsrefine(&["to-dv", path(&data("plant.json")), "-o", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let dv = dsrefine::io::load_dv(&out_path).unwrap();
    let sys = dsrefine::io::load_system(data("plant.json")).unwrap();
    assert!(dsrefine::check_dv_consistency(&sys, &dv, &Default::default()).unwrap());
}

fn refine_into(dir: &Path) -> PathBuf {
    let rc = dir.join("refined.json");
    let out = dsrefine(&[
        "refine",
        path(&data("plant.json")),
        path(&data("abstraction.json")),
        path(&data("relation.json")),
        path(&data("controller.json")),
        "-o",
        path(&rc),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    rc
}

#[test]
fn refine_then_simulate_from_origin_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let rc = refine_into(dir.path());
    let csv = dir.path().join("traj.csv");
    let out = dsrefine(&[
        "simulate",
        path(&data("plant.json")),
        path(&rc),
        "--x0",
        "0,0,0",
        "--steps",
        "5",
        "--csv",
        path(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u1,x1,x2,x3,y1"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for (t, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], t.to_string());
        for (j, c) in cells[1..].iter().enumerate() {
            if t == 5 && j == 0 {
                assert_eq!(*c, "");
            } else {
                assert_eq!(c.parse::<f64>().unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn refined_and_abstract_outputs_agree_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let rc = refine_into(dir.path());
    let refined = dsrefine(&[
        "simulate",
        path(&data("plant.json")),
        path(&rc),
        "--x0=1,1,1",
        "--steps",
        "20",
    ]);
    assert_eq!(refined.status.code(), Some(0));
    // H (1, 1, 1) = (1, 0)
    let abs = dsrefine(&[
        "simulate",
        path(&data("abstraction.json")),
        path(&data("controller.json")),
        "--x0=1,0",
        "--steps",
        "20",
    ]);
    assert_eq!(abs.status.code(), Some(0));
    let (ry, ay) = (report(&refined)["y"].clone(), report(&abs)["y"].clone());
    let (ry, ay) = (ry.as_array().unwrap(), ay.as_array().unwrap());
    assert_eq!(ry.len(), 21);
    for (a, b) in ry.iter().zip(ay) {
        assert!((a[0].as_f64().unwrap() - b[0].as_f64().unwrap()).abs() <= 1e-8);
    }
}

#[test]
fn batch_simulation_writes_one_csv_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let rc = refine_into(dir.path());
    let csv = dir.path().join("run.csv");
    let out = dsrefine(&[
        "simulate",
        path(&data("plant.json")),
        path(&rc),
        "--points",
        path(&data("points.json")),
        "--steps",
        "4",
        "--csv",
        path(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["runs"].as_array().unwrap().len(), 3);
    for i in 0..3 {
        assert!(dir.path().join(format!("run_{i}.csv")).exists());
    }
}

#[test]
fn start_outside_initial_set_is_refused() {
    let out = dsrefine(&[
        "simulate",
        path(&data("plant.json")),
        path(&data("controller.json")),
        "--x0",
        "2,0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the initial set"));
}

#[test]
fn refine_with_bad_relation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    std::fs::write(&rel, r#"{"H": [[0, 0, 1], [0, 0.9, -1]]}"#).unwrap();
    let out = dsrefine(&[
        "refine",
        path(&data("plant.json")),
        path(&data("abstraction.json")),
        path(&rel),
        path(&data("controller.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("relation rejected"));
}

#[test]
fn builtin_reference_case_passes() {
    let out = dsrefine(&["verify-example4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], true);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 7);
    assert!(checks.iter().all(|c| c["pass"] == true));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(
        stderr.lines().filter(|l| l.starts_with("[PASS]")).count(),
        checks.len()
    );
}
