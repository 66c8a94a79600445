use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QDO: &str = env!("CARGO_BIN_EXE_qdo");
const MOCK: &str = env!("CARGO_BIN_EXE_qdo-eval-synthetic");

fn qdo(args: &[&str]) -> Output {
    Command::new(QDO)
        .args(args)
        .env_remove("QDO_EVALUATOR_CMD")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn run_writes_one_file_set_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = qdo(&[
        "run", "--problem", "grid_sphere_d6", "--optimizer", "map_elites", "--iterations", "7",
        "--batch", "100", "--seed", "1", "--replications", "10", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("metrics_seed")).count(), 10);
    assert_eq!(names.iter().filter(|n| n.starts_with("archive_seed")).count(), 10);
    assert!(names.contains(&"aggregate.csv".to_string()));
    assert!(names.contains(&"metrics_seed10.csv".to_string()));
    let metrics = fs::read_to_string(out.join("metrics_seed1.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 8);
    assert_eq!(
        metrics.lines().next().unwrap(),
        "iteration,evaluations,coverage,qd_score,max_objective"
    );
    assert!(metrics.lines().last().unwrap().starts_with("7,700,"));
    assert_eq!(fs::read_to_string(out.join("aggregate.csv")).unwrap().lines().count(), 8);
    let table = stdout(&o);
    assert!(table.contains("Coverage %") && table.contains("map_elites"), "{table}");
}

#[test]
fn single_replication_skips_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdo(&[
        "run", "--problem", "peaks_d4", "--iterations", "3", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        files(dir.path()),
        ["archive_seed0.csv", "metrics_seed0.csv", "run_config.json"]
    );
}

#[test]
fn usage_errors_exit_one() {
    let o = qdo(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--problem", "nope", "--iterations", "3", "--out", out],
        vec!["run", "--problem", "peaks_d6", "--iterations", "0", "--out", out],
        vec!["run", "--problem", "peaks_d6", "--iterations", "3", "--optimizer", "simplex", "--out", out],
        vec!["run", "--problem", "iaml_ranger_1489/interpretability", "--iterations", "3", "--out", out],
        vec!["oracle", "--problem", "iaml_ranger_1489/interpretability"],
        vec!["heatmap", "--archive", "x.csv", "--out", "x.svg", "--range", "3:1"],
    ] {
        let o = qdo(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    assert!(stderr(&qdo(&["run", "--problem", "nope", "--iterations", "3", "--out", out]))
        .contains("iaml_ranger_40981/interpretability"));

    assert_eq!(qdo(&["--help"]).status.code(), Some(0));
    assert_eq!(qdo(&["--version"]).status.code(), Some(0));
    assert_eq!(qdo(&[]).status.code(), Some(1));
}

#[test]
fn list_problems_enumerates_registry() {
    let o = qdo(&["list-problems"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let ids: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ids.iter().filter(|i| i.starts_with("iaml_")).count(), 12);
    assert_eq!(ids.iter().filter(|i| i.ends_with("/interpretability")).count(), 8);
    assert_eq!(ids.iter().filter(|i| i.ends_with("/resource_usage")).count(), 4);
    assert!(ids.contains(&"grid_sphere_d<N>") && ids.contains(&"peaks_d<N>"));
}

fn oracle_table(problem: &str, resolution: &str) -> Vec<(usize, usize, f64)> {
    let o = qdo(&["oracle", "--problem", problem, "--resolution", resolution]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_0,bin_1,objective"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn peaks_oracle_matches_brute_force() {
    let mut best = [[f64::NEG_INFINITY; 10]; 10];
    for i in 0..=200 {
        for j in 0..=200 {
            let (x, y) = (i as f64 / 200.0, j as f64 / 200.0);
            let v = (0.5 + 0.5 * (3.0 * PI * x).sin() * (3.0 * PI * y).sin()).clamp(0.0, 1.0);
            // Bin width 0.1, as the archive defines it; lattice points such as
            // 0.3 fall below the boundary after division.
            let (a, b) = (((x / 0.1) as usize).min(9), ((y / 0.1) as usize).min(9));
            best[a][b] = best[a][b].max(v);
        }
    }
    let table = oracle_table("peaks_d6", "201");
    assert_eq!(table.len(), 100);
    for (a, b, v) in table {
        assert!((v - best[a][b]).abs() < 1e-12, "cell ({a},{b}): {v} vs {}", best[a][b]);
    }
    // Peak cells around (1/6, 1/6) reach the global optimum.
    assert!(best[1][1] > 0.99);
}

#[test]
fn grid_sphere_oracle_qd_score_is_100() {
    let table = oracle_table("grid_sphere_d6", "201");
    assert_eq!(table.len(), 100);
    assert_eq!(table.iter().map(|t| t.2).sum::<f64>(), 100.0);
}

fn archive_objectives(path: &Path) -> HashMap<(usize, usize), String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (b0, b1, obj) = (col("bin_0"), col("bin_1"), col("objective"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ((f[b0].parse().unwrap(), f[b1].parse().unwrap()), f[obj].to_string())
        })
        .collect()
}

#[test]
fn heatmap_matrix_cross_reads_archive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = qdo(&[
        "run", "--problem", "peaks_d6", "--optimizer", "random", "--iterations", "1", "--batch", "30",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let archive = out.join("archive_seed0.csv");
    let svg = out.join("map.svg");
    let o = qdo(&["heatmap", "--archive", archive.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let elites = archive_objectives(&archive);
    assert!(!elites.is_empty() && elites.len() < 100);
    let matrix = fs::read_to_string(out.join("map.csv")).unwrap();
    let rows: Vec<Vec<&str>> = matrix.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 10);
        for (j, cell) in row.iter().enumerate() {
            match elites.get(&(j, 9 - i)) {
                Some(v) => assert_eq!(cell, v),
                None => assert!(cell.is_empty()),
            }
        }
    }
    let svg = fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<rect").count(), elites.len() + 1);

    // A fixed range and an explicit problem give the same grid.
    let svg2 = out.join("fixed.svg");
    let o = qdo(&[
        "heatmap", "--archive", archive.to_str().unwrap(), "--out", svg2.to_str().unwrap(),
        "--problem", "peaks_d6", "--range", "0:1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("fixed.csv")).unwrap(), matrix);
}

#[test]
fn heatmap_without_grid_shape_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("a.csv");
    fs::write(&archive, "bin_0,bin_1,objective\n0,0,0.5\n").unwrap();
    let o = qdo(&["heatmap", "--archive", archive.to_str().unwrap(), "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--problem"));
}

fn run_to(dir: &Path, extra: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut args = vec![
        "run", "--problem", "peaks_d6", "--optimizer", "illuminate", "--iterations", "20",
        "--seed", "5", "--replications", "2", "--out", dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = qdo(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    files(dir)
        .into_iter()
        .filter(|n| n.ends_with(".csv"))
        .map(|n| {
            let bytes = fs::read(dir.join(&n)).unwrap();
            (n, bytes)
        })
        .collect()
}

#[test]
fn outputs_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_to(&dir.path().join("a"), &[]);
    let b = run_to(&dir.path().join("b"), &[]);
    let c = run_to(&dir.path().join("c"), &["--workers", "4"]);
    assert_eq!(a.len(), 5);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn config_file_and_optimizer_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"problem":"grid_sphere_d5","optimizer":{"emitters":[{"kind":"gaussian","sigma":0.2},{"kind":"improvement","sigma0":0.1}]},"iterations":4,"batch":40,"seed":9}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = qdo(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(manifest["batch"], 40);
    assert_eq!(manifest["optimizer"]["emitters"][1]["allocation"], 20);
    assert!(fs::read_to_string(out.join("metrics_seed9.csv")).unwrap().contains("\n4,160,"));

    let opt = dir.path().join("mine.json");
    fs::write(&opt, r#"{"emitters":[{"kind":"random","allocation":25}]}"#).unwrap();
    let out2 = dir.path().join("out2");
    let o = qdo(&[
        "run", "--config", cfg.to_str().unwrap(), "--optimizer", opt.to_str().unwrap(),
        "--batch", "25", "--seed", "3", "--out", out2.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mine"));
    assert!(fs::read_to_string(out2.join("metrics_seed3.csv")).unwrap().contains("\n4,100,"));

    fs::write(&cfg, "{not json").unwrap();
    let o = qdo(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tabular_problem_from_sample_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let mut text = String::from("g_0,g_1,g_2,g_3,y_1,y_2,y_3\n");
    for i in 0..50 {
        let g: Vec<f64> = (0..4).map(|k| ((i * (k + 3)) % 50) as f64 / 49.0).collect();
        let nf = (g[1] * 5.0).round();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g[0], g[1], g[2], g[3], 0.6 + 0.3 * g[0], nf, g[2]
        ));
    }
    fs::write(&table, text).unwrap();
    let out = dir.path().join("out");
    let o = qdo(&[
        "run", "--problem", "iaml_ranger_1489/interpretability", "--table", table.to_str().unwrap(),
        "--iterations", "10", "--replications", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let archive = fs::read_to_string(out.join("archive_seed0.csv")).unwrap();
    assert!(archive.lines().next().unwrap().ends_with("num.trees,mtry.ratio,min.node.size,sample.fraction"));
    // Predictions are convex combinations of the table's objective column.
    for (_, v) in archive_objectives(&out.join("archive_seed0.csv")) {
        let v: f64 = v.parse().unwrap();
        assert!((0.6..=0.9 + 1e-12).contains(&v), "{v}");
    }

    fs::write(&table, "g_0,g_1,y_1,y_2,y_3\n0.1,0.2,0.5,1,0.5\n").unwrap();
    let o = qdo(&[
        "run", "--problem", "iaml_ranger_1489/interpretability", "--table", table.to_str().unwrap(),
        "--iterations", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn external_evaluator_through_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = [
        "run", "--problem", "iaml_xgboost_40981/interpretability", "--optimizer", "cma_me",
        "--iterations", "5", "--replications", "2", "--out", out.to_str().unwrap(),
    ];
    let o = Command::new(QDO).args(args).env("QDO_EVALUATOR_CMD", MOCK).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(out.join("metrics_seed1.csv")).unwrap();
    assert!(metrics.lines().last().unwrap().starts_with("5,500,"));

    // Same results as a second invocation: the protocol path is deterministic.
    let first = fs::read(out.join("archive_seed0.csv")).unwrap();
    let o = Command::new(QDO).args(args).env("QDO_EVALUATOR_CMD", MOCK).output().unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("archive_seed0.csv")).unwrap(), first);

    let crash = format!("{MOCK} --exit-after 120");
    let o = Command::new(QDO).args(args).env("QDO_EVALUATOR_CMD", crash).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("request 120"), "{}", stderr(&o));
}
