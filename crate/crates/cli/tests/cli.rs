use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qregion(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qregion"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn qregion")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn generate_then_regionalize_geojson() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&qregion(&["generate", "--grid", "4x5", "--seed", "7", "--out", "g.geojson"], d)), 0);

    let out = qregion(
        &["regionalize", "--input", "g.geojson", "--p", "4", "--iterations", "5", "--out", "sol.geojson", "--metrics", "m.csv"],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["p"], 4);
    assert!(summary["final_h"].as_f64().unwrap() <= summary["initial_h"].as_f64().unwrap());

    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("sol.geojson")).unwrap()).unwrap();
    let features = sol["features"].as_array().unwrap();
    assert_eq!(features.len(), 20);
    let mut regions: Vec<i64> = features
        .iter()
        .map(|f| f["properties"]["region"].as_i64().unwrap())
        .collect();
    regions.sort();
    regions.dedup();
    assert_eq!(regions, vec![1, 2, 3, 4]);
    assert_eq!(sol["summary"]["final_h"], summary["final_h"]);

    let metrics = fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "stage,size,p,iteration,h_before,h_after,candidates,selected,runtime_ms"
    );
    assert!(metrics.lines().any(|l| l.starts_with("seeding,20,4,")));
    assert_eq!(metrics.lines().filter(|l| l.starts_with("local_opt,")).count(), 5);
}

#[test]
fn csv_round_trip_echoes_rows_with_region() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&qregion(&["generate", "--grid", "3x4", "--dist", "normal:10,2", "--out", "a.csv"], d)), 0);
    assert!(d.join("a.edges.csv").exists());
    let out = qregion(&["regionalize", "--input", "a.csv", "--p", "3", "--out", "sol.csv"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("sol.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id,attribute,x,y,region");
    assert_eq!(lines.count(), 12);
    assert!(d.join("sol.summary.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // usage
    assert_eq!(code(&qregion(&["regionalize", "--p", "2"], d)), 1);
    assert_eq!(code(&qregion(&["regionalize", "--grid", "2x2"], d)), 1);
    assert_eq!(code(&qregion(&["frobnicate"], d)), 1);
    assert_eq!(code(&qregion(&["--help"], d)), 0);
    // input
    assert_eq!(code(&qregion(&["regionalize", "--input", "missing.geojson", "--p", "2"], d)), 2);
    assert_eq!(code(&qregion(&["regionalize", "--grid", "2x2", "--p", "5"], d)), 2);
    fs::write(d.join("bad.geojson"), r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#).unwrap();
    assert_eq!(code(&qregion(&["regionalize", "--input", "bad.geojson", "--p", "1"], d)), 2);
}

#[test]
fn export_models_are_importable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&qregion(&["export-model", "--stage", "seeds", "--grid", "3x3", "--p", "3", "--out", "s.json"], d)), 0);
    let seeds = qregion_core::model::import_model(&d.join("s.json")).unwrap().into_bqm().unwrap();
    assert_eq!(seeds.num_variables(), 9);

    assert_eq!(code(&qregion(&["export-model", "--stage", "moves", "--grid", "3x4", "--p", "3", "--out", "m.json"], d)), 0);
    let moves = qregion_core::model::import_model(&d.join("m.json")).unwrap().into_cqm().unwrap();
    assert!(moves.constraints.iter().any(|c| c.label.starts_with("region_stability_")));
}

#[test]
fn small_bench_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = qregion(
        &["bench", "--sizes", "20,30", "--ps", "2,3", "--p", "3", "--p-size", "20", "--iterations", "3", "--out", "r.csv"],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "size,p,method,seed_min_dist,h_initial,h_final,seed_ms,init_ms,opt_ms,quality_improvement_pct,runtime_improvement_pct"
    );
    // cells (20,2) (20,3) (30,3), two rows each
    assert_eq!(report.lines().count(), 1 + 6);
    for t in ["improvements_vs_size.csv", "runtime_vs_size.csv", "improvements_vs_p.csv", "quality_vs_p.csv"] {
        assert!(d.join(t).exists(), "{t}");
    }
}
