use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use factrf::sim::{gen_features, SimulationSpec};
use tempfile::TempDir;

const FAST_FACT: &str = r#"{"forest": {"n_trees": 40}}"#;

fn factrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factrf"))
        .args(args)
        .env("FACT_LOG", "error")
        .output()
        .expect("run factrf")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// CSV with a header `X1..Xp,y` from row-major rows.
fn csv_from_rows(rows: &[f64], p: usize, y: &[f64]) -> String {
    let mut text: Vec<String> = (1..=p).map(|j| format!("X{j}")).collect();
    text.push("y".into());
    let mut out = text.join(",") + "\n";
    for (row, yi) in rows.chunks_exact(p).zip(y) {
        let mut cells: Vec<String> = row.iter().map(f64::to_string).collect();
        cells.push(yi.to_string());
        out += &(cells.join(",") + "\n");
    }
    out
}

/// Five uniform features and an independent uniform response.
fn null_rows(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let raw = gen_features(n, 45, 0.0, seed).unwrap();
    let x = raw.chunks_exact(45).flat_map(|r| r[..5].to_vec()).collect();
    let y = raw.chunks_exact(45).map(|r| r[44]).collect();
    (x, y)
}

fn monthly_csv(n: usize, seed: u64) -> String {
    let (x, y) = null_rows(n, seed);
    let mut out = String::from("date,a,b,c,d,e,y\n");
    for (i, (row, yi)) in x.chunks_exact(5).zip(&y).enumerate() {
        let (year, month) = (2000 + i / 12, i % 12 + 1);
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out += &format!("{year}-{month:02},{},{yi}\n", cells.join(","));
    }
    out
}

fn table_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn three_row_csv_is_too_small() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "tiny.csv", "a,b,y\n1,2,3\n2,1,4\n3,3,1\n");
    let o = factrf(&["test", s(&csv), "-y", "y", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("inference sample too small"), "{}", stderr(&o));
}

#[test]
fn missing_response_column_is_named() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "d.csv", "a,b,y\n1,2,3\n2,1,4\n3,3,1\n");
    let o = factrf(&["test", s(&csv), "-y", "target", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("target"), "{}", stderr(&o));
}

#[test]
fn unknown_importance_method_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "d.csv", "a,y\n1,2\n2,3\n");
    let o = factrf(&["importance", s(&csv), "-y", "y", "--methods", "MDI,SHAP"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn mdi_is_zero_for_a_constant_response() {
    let dir = TempDir::new().unwrap();
    let (x, _) = null_rows(40, 1);
    let csv = write(dir.path(), "flat.csv", &csv_from_rows(&x, 5, &[1.5; 40]));
    let cfg = write(dir.path(), "fact.json", FAST_FACT);
    let o = factrf(&[
        "importance", s(&csv), "-y", "y", "--methods", "MDI", "--config", s(&cfg), "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = table_lines(&dir.path().join("importance.csv"));
    assert!(lines.len() > 1);
    for line in &lines[1..] {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(value, 0.0, "{line}");
    }
}

fn simulate_config(dir: &Path, reps: usize) -> PathBuf {
    let text = format!(
        r#"{{"seed": 5, "fact": {FAST_FACT},
            "experiments": [{{"kind": "size_power", "design": {{"case": "I", "n": 80, "p": 45, "reps": {reps}}},
                              "alphas": [0.01, 0.05, 0.1]}}]}}"#
    );
    write(dir, "sim.json", &text)
}

#[test]
fn simulate_rejects_zero_repetitions() {
    let dir = TempDir::new().unwrap();
    let cfg = simulate_config(dir.path(), 0);
    let o = factrf(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = simulate_config(dir.path(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = factrf(&["simulate", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let name = "size_power_I.csv";
    let first = fs::read(a.join(name)).unwrap();
    assert_eq!(first, fs::read(b.join(name)).unwrap());
    assert_eq!(
        fs::read(a.join("experiment_config.json")).unwrap(),
        fs::read(b.join("experiment_config.json")).unwrap()
    );
    let lines = table_lines(&a.join(name));
    assert_eq!(lines[0].split(',').count(), 2 + 8);
    assert_eq!(lines.len(), 1 + 3);
}

#[test]
fn outputs_start_with_the_config_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = simulate_config(dir.path(), 1);
    let o = factrf(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("size_power_I.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let hex = first.strip_prefix("# config_sha256=").expect(first);
    assert_eq!(hex.len(), 64);
    assert!(hex.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn rolling_window_count_on_a_monthly_series() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "m.csv", &monthly_csv(246, 2));
    let cfg = write(dir.path(), "fact.json", FAST_FACT);
    let o = factrf(&[
        "rolling", s(&csv), "-y", "y", "--date", "date", "--window", "60", "--step", "3",
        "--features", "a,b", "--config", s(&cfg), "--out", s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = table_lines(&dir.path().join("rolling.csv"));
    assert_eq!(lines.len(), 1 + 63 * 2);
    let last = lines.last().unwrap();
    assert!(last.starts_with("62,"), "{last}");
}

#[test]
fn rolling_fdr_on_null_data_flags_few_cells() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "m.csv", &monthly_csv(120, 3));
    let cfg = write(dir.path(), "fact.json", FAST_FACT);
    let o = factrf(&[
        "--fdr", "0.2", "rolling", s(&csv), "-y", "y", "--date", "date", "--window", "60",
        "--step", "10", "--config", s(&cfg), "--out", s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines = table_lines(&dir.path().join("rolling.csv"));
    assert!(lines[0].ends_with(",bh_reject"));
    let cells = &lines[1..];
    assert_eq!(cells.len(), 7 * 5);
    let flagged = cells.iter().filter(|l| l.ends_with(",true")).count();
    assert!((flagged as f64) < 0.25 * cells.len() as f64, "{flagged} of {}", cells.len());
}

#[test]
fn rolling_window_longer_than_series_fails() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "m.csv", &monthly_csv(50, 4));
    let o = factrf(&["rolling", s(&csv), "-y", "y", "--date", "date", "--window", "60"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("exceeds"), "{}", stderr(&o));
}

#[test]
fn rolling_rejects_non_monotone_dates() {
    let dir = TempDir::new().unwrap();
    let mut text = monthly_csv(80, 5);
    text = text.replacen("2000-03,", "1999-03,", 1);
    let csv = write(dir.path(), "m.csv", &text);
    let o = factrf(&["rolling", s(&csv), "-y", "y", "--date", "date", "--window", "60"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("strictly increasing"), "{}", stderr(&o));
}

fn case_one_csv(dir: &Path) -> PathBuf {
    let spec = SimulationSpec::size_power_case("I").unwrap();
    let sample = spec.generate(0).unwrap();
    let y = sample.data.response().to_vec();
    write(dir, "case1.csv", &csv_from_rows(&sample.raw, spec.p, &y))
}

fn p_value_of(path: &Path, feature: &str) -> f64 {
    let lines = table_lines(path);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|&h| h == "p_value").unwrap();
    let row = lines
        .iter()
        .find(|l| l.split(',').next() == Some(feature))
        .unwrap_or_else(|| panic!("no row for {feature}"));
    row.split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn relevant_feature_is_detected_on_case_one() {
    let dir = TempDir::new().unwrap();
    let csv = case_one_csv(dir.path());
    let cfg = write(dir.path(), "fact.json", r#"{"forest": {"n_trees": 200}}"#);
    let o = factrf(&[
        "test", s(&csv), "-y", "y", "--features", "X11", "--seed", "0", "--config", s(&cfg),
        "--out", s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = p_value_of(&dir.path().join("fact_reports.csv"), "X11");
    assert!(p < 0.05, "p = {p}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fact_reports.json")).unwrap())
            .unwrap();
    assert_eq!(json["reports"].as_array().unwrap().len(), 1);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let csv = case_one_csv(dir.path());
    let cfg = write(dir.path(), "fact.json", FAST_FACT);
    let mut tables = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = factrf(&[
            "--threads", threads, "test", s(&csv), "-y", "y", "--features", "X1,X2,X11,X12",
            "--config", s(&cfg), "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        tables.push(fs::read(out.join("fact_reports.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn zero_threads_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "d.csv", "a,y\n1,2\n2,3\n");
    let o = factrf(&["--threads", "0", "test", s(&csv), "-y", "y"]);
    assert_eq!(code(&o), 2);
}
