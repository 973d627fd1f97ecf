use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdry-geom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_of(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--json", &p]);
    let o = run(&full);
    let v = serde_json::from_str(&fs::read_to_string(&path).expect("report written")).unwrap();
    (code(&o), v)
}

#[test]
fn hemisphere_cheap_suites_pass() {
    let (c, r) = json_of(&["verify", "--model", "hemisphere", "--suite", "gauss-codazzi,weyl-boundary,fermi"]);
    assert_eq!(c, 0);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], true);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for ch in checks {
        assert!(!ch["anchor"].as_str().unwrap().is_empty());
        assert_eq!(ch["pass"], true, "{ch}");
    }
}

#[test]
fn umbilic_checks_skip_on_generic_model() {
    let (c, r) = json_of(&["verify", "--model", "perturbed_flat", "--suite", "weyl-boundary"]);
    assert_eq!(c, 0);
    for ch in r["checks"].as_array().unwrap() {
        assert!(ch["skipped"].as_str().unwrap().starts_with("precondition"));
    }
}

#[test]
fn asymmetric_metric_file_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"name":"bad","coords":["r","a","b","c"],"domain":[[0,1],[0,1],[0,1],[0,1]],
            "g":[["1","0","0","0"],["0.1","1","0","0"],["0","0","1","0"],["0","0","0","1"]],
            "boundary_axis":0}"#,
    )
    .unwrap();
    let o = run(&["verify", "--metric-file", path.to_str().unwrap(), "--suite", "fermi"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn metric_file_with_model_reference() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(&path, r#"{"model":"flat_ball_collar","params":{}}"#).unwrap();
    let o = run(&["verify", "--metric-file", path.to_str().unwrap(), "--suite", "gauss-codazzi"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&run(&["verify", "--model", "no_such_model"])), 2);
    assert_eq!(code(&run(&["verify", "--model", "hemisphere", "--suite", "nope"])), 2);
    assert_eq!(code(&run(&["verify", "--model", "hemisphere", "--order", "9"])), 2);
    assert_eq!(code(&run(&["verify", "--model", "hemisphere", "--tol", "-1"])), 2);
    assert_eq!(code(&run(&["verify", "--bogus"])), 2);
}

#[test]
fn expand_hemisphere_series() {
    let (c, r) = json_of(&["expand", "--model", "hemisphere", "--order", "4"]);
    assert_eq!(c, 0);
    let expect = [1.0, 0.0, -2.0, 0.0, 8.0];
    for route in ["direct", "formula", "geodesic"] {
        let coeffs = r["routes"][route].as_array().unwrap();
        assert_eq!(coeffs.len(), 5);
        for (k, h) in coeffs.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { expect[k] } else { 0.0 };
                    let got = h[i][j].as_f64().unwrap();
                    assert!((got - want).abs() < 1e-6, "{route} h{k}[{i}][{j}] = {got}");
                }
            }
        }
    }
    for row in r["residuals"].as_array().unwrap() {
        assert!(row["max_diff"].as_f64().unwrap() < 1e-7);
    }
}

#[test]
fn expand_table_marks_proportional_terms() {
    let o = run(&["expand", "--model", "hemisphere", "--order", "4"]);
    let s = stdout(&o);
    assert!(s.contains("h(2) = -2.000000000 h0"), "{s}");
    assert!(s.contains("h(4) = 8.000000000 h0"), "{s}");
}

#[test]
fn expand_flat_half_is_zero() {
    let (c, r) = json_of(&["expand", "--model", "flat_half", "--order", "6"]);
    assert_eq!(c, 0);
    let coeffs = r["routes"]["direct"].as_array().unwrap();
    assert_eq!(coeffs.len(), 7);
    for h in &coeffs[1..] {
        for row in h.as_array().unwrap() {
            for x in row.as_array().unwrap() {
                assert!(x.as_f64().unwrap().abs() < 1e-12);
            }
        }
    }
}

#[test]
fn expand_order_cap() {
    assert_eq!(code(&run(&["expand", "--model", "hemisphere", "--order", "7"])), 2);
}

#[test]
fn functional_hemisphere_quotient() {
    let (c, r) = json_of(&["functional", "--model", "hemisphere"]);
    assert_eq!(c, 0);
    let y = r["values"]["yamabe_quotient"].as_f64().unwrap();
    let target = 8.0 * 3f64.sqrt() * std::f64::consts::PI;
    assert!((y - target).abs() / target < 1e-4, "{y}");
}

#[test]
fn functional_flat_half_zeros() {
    let (c, r) = json_of(&["functional", "--model", "flat_half"]);
    assert_eq!(c, 0);
    let v = r["values"].as_object().unwrap();
    for (k, x) in v {
        let x = x.as_f64().unwrap();
        match k.as_str() {
            "volume" | "boundary_volume" => assert!((x - 1.0).abs() < 1e-12, "{k} {x}"),
            _ => assert!(x.abs() < 1e-12, "{k} {x}"),
        }
    }
}

#[test]
fn functional_full_ball_energy() {
    let (c, r) = json_of(&["functional", "--model", "flat_ball_collar", "--full-ball"]);
    assert_eq!(c, 0);
    let e = r["values"]["e_b"].as_f64().unwrap();
    let target = 12.0 * std::f64::consts::PI.powi(2);
    assert!((e - target).abs() / target < 1e-4, "{e}");
}

#[test]
fn variation_zero_sigma_both_sides_vanish() {
    let (c, r) = json_of(&[
        "variation", "--model", "flat_half", "--sigma", "0,0,0,0,0,0", "--quad", "4",
    ]);
    assert_eq!(c, 0);
    assert_eq!(r["result"]["numeric"].as_f64().unwrap(), 0.0);
    assert_eq!(r["result"]["formula"].as_f64().unwrap(), 0.0);
}

#[test]
fn variation_spd_loss_exits_3() {
    let o = run(&["variation", "--model", "flat_half", "--sigma", "1e4,0,0,0,0,0"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("variation-spd") && err.contains("positive definite"), "{err}");
}

#[test]
fn variation_bad_sigma_is_config_error() {
    assert_eq!(code(&run(&["variation", "--model", "flat_half", "--sigma", "1,2"])), 2);
    assert_eq!(code(&run(&["variation", "--model", "flat_half", "--sigma", "r,0,0,0,0,0"])), 2);
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "--model", "perturbed_flat", "--suite", "curvature-symmetries,gauss-codazzi", "--points", "8"];
    let (_, mut a) = json_of(&args);
    let (_, mut b) = json_of(&args);
    a.as_object_mut().unwrap().remove("wall_time_s");
    b.as_object_mut().unwrap().remove("wall_time_s");
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sequential_matches_parallel() {
    let args = ["verify", "--model", "warped_umbilic", "--suite", "weyl-boundary", "--points", "8"];
    let (_, a) = json_of(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let (_, b) = json_of(&seq);
    assert_eq!(a["checks"], b["checks"]);
}
