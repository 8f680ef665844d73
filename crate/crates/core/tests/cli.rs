use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anisolag"))
        .args(args)
        .output()
        .expect("run anisolag")
}

fn json(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stdout).expect("JSON report");
    assert_eq!(v["schema"], "anisolag/1");
    v
}

#[test]
fn catalog_lists_entries() {
    let out = run(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["entries"].as_array().unwrap().len(), 6);
}

#[test]
fn catalog_describes_heisenberg() {
    let out = run(&["catalog", "--config", &config("heisenberg.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let p = &v["points"][0];
    assert_eq!(p["matrix"], serde_json::json!([[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]]));
    assert_eq!(p["brackets"][0]["value"], serde_json::json!([0.0, 0.0, -2.0]));
}

#[test]
fn catalog_split_plane_rows() {
    let v = json(&run(&["catalog", "--config", &config("split_plane.toml")]));
    assert_eq!(v["points"][0]["matrix"], serde_json::json!([[1.0, 0.0], [0.0, 0.0]]));
    assert_eq!(v["points"][1]["matrix"], serde_json::json!([[1.0, 0.0], [0.0, 0.5]]));
}

#[test]
fn pinv_duplicate_row() {
    let out = run(&["pinv", "--matrix", "[[1,0],[1,0]]"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let cp = &v["result"]["c_p"];
    for (i, want) in [[0.5, 0.5], [0.0, 0.0]].iter().enumerate() {
        for (j, w) in want.iter().enumerate() {
            assert!((cp[i][j].as_f64().unwrap() - w).abs() <= 1e-12);
        }
    }
    assert_eq!(v["result"]["rank"], 1);
    assert!(v["penrose"]["max_residual"].as_f64().unwrap() <= 1e-12);

    let out = run(&["pinv", "--config", &config("duplicate_row_pinv.toml"), "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().lines().count() == 2);
}

#[test]
fn lift_and_push_reproduce_f1() {
    let out = run(&["lift", "--config", &config("duplicate_row_lift.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["comparison"]["pass"], true);
    // 2 ((1 + 3) / 2)^2
    assert!((v["evaluations"][0]["value"].as_f64().unwrap() - 8.0).abs() < 1e-12);

    let out = run(&["push", "--config", &config("duplicate_row_push_f2.toml")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["comparison"]["pass"], true);
}

#[test]
fn kernel_constancy_f2_fails_with_witness() {
    let out = run(&["check", "kernel-constancy", "--config", &config("duplicate_row_f2.toml")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["witness"]["arg"], serde_json::json!([1.0, -1.0]));
    let e4 = 4f64.exp() - 1.0;
    assert!((v["witness"]["value"].as_f64().unwrap() - e4).abs() <= 1e-6 * e4);

    let out = run(&["check", "kernel-constancy", "--config", &config("duplicate_row_f1.toml")]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn growth_convexity_equivalence() {
    for cfg in ["duplicate_row_f1.toml", "duplicate_row_f2.toml"] {
        let out = run(&["check", "growth-bound", "--config", &config(cfg)]);
        assert_eq!(out.status.code(), Some(0), "{cfg}");
        let out = run(&["check", "convexity", "--config", &config(cfg), "--samples", "2000"]);
        assert_eq!(out.status.code(), Some(0), "{cfg}");
    }
    let out = run(&["check", "equivalent-on-image", "--config", &config("duplicate_row_equivalence.toml")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["samples"].as_u64().unwrap() >= 100_000);
}

#[test]
fn energy_heisenberg() {
    let out = run(&["energy", "--config", &config("heisenberg_dirichlet.toml"), "--resolution", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let e = json(&out)["value"].as_f64().unwrap();
    assert!((e - 2.0 / 3.0).abs() <= 0.01 * 2.0 / 3.0);
}

#[test]
fn norm_and_fit() {
    let out = run(&["norm", "--config", &config("heisenberg_norm.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let want = 1.0 / 3f64.sqrt() + (2.0f64 / 3.0).sqrt();
    assert!((json(&out)["value"].as_f64().unwrap() - want).abs() <= 0.01 * want);

    let out = run(&["fit", "--config", &config("heisenberg_affine_gap.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let want = 1.0 / 12f64.sqrt();
    assert!((json(&out)["residual"].as_f64().unwrap() - want).abs() <= 0.01 * want);
}

#[test]
fn ccdist_reports_and_exports() {
    let out = run(&["ccdist", "--config", &config("euclidean_ccdist.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let want = 0.8 * 2f64.sqrt();
    assert!((v["distance"].as_f64().unwrap() - want).abs() <= 0.05 * want);
    assert!(v["nodes_expanded"].as_u64().unwrap() > 0);

    let out = run(&["ccdist", "--config", &config("euclidean_ccdist.json"), "--resolution", "6", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("src,dst,weight\n"));
}

#[test]
fn ccdist_unreachable_is_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("line.toml");
    std::fs::write(
        &path,
        "[anisotropy]\nn = 2\nm = 1\nbox = [[0, 1], [0, 1]]\ncoeffs = [[\"1\", \"0\"]]\n\
         [grid]\nresolution = 20\n[ccdist]\nfrom = [0.1, 0.1]\nto = [0.1, 0.9]\n",
    )
    .unwrap();
    let out = run(&["ccdist", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["distance"], "infinite");
}

#[test]
fn zigzag_symmetric_bound() {
    let out = run(&["zigzag", "--config", &config("zigzag_symmetric.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["sup_deviation"].as_f64().unwrap() <= 0.05);
    assert_eq!(v["sup_bound"].as_f64().unwrap(), 0.05);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["energy", "--config", "/definitely/missing.toml"]).status.code(), Some(2));
    assert_eq!(run(&["pinv", "--matrix", "[[1,0],[1]]"]).status.code(), Some(2));
    assert_eq!(run(&["pinv", "--seed", "abc"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[anisotropy]\nname = \"heisenberg\"\nunknown_key = 1\n").unwrap();
    let out = run(&["check", "convexity", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bad.toml"));

    let expr = dir.path().join("expr.toml");
    std::fs::write(&expr, "[anisotropy]\nname = \"grushin\"\n[lagrangian]\nkind = \"anisotropic\"\nexpr = \"q1^2 +\"\n").unwrap();
    assert_eq!(run(&["check", "convexity", "--config", expr.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_and_out_flag_writes_file() {
    let args = ["check", "kernel-constancy", "--config", &config("duplicate_row_f2.toml"), "--seed", "7"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(&["energy", "--config", &config("heisenberg_dirichlet.toml"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(v["command"], "energy");
}

#[test]
fn verify_suite_reports_every_criterion() {
    let out = run(&["verify-suite", "--seed", "0"]);
    let v = json(&out);
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 8);
    let all = criteria.iter().all(|c| c["pass"] == true);
    assert_eq!(v["pass"], all);
    assert_eq!(out.status.code(), Some(if all { 0 } else { 1 }));
    assert!(String::from_utf8(out.stderr).unwrap().contains("overall:"));
}
