use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use confound_core::glm::{fit_logistic, logit, DesignMatrix, FitOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn confound(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_confound"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV output keyed by header name.
fn csv_rows(text: &str) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            headers.iter().cloned().zip(r.iter().map(String::from)).collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = '{}'", row[key]))
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn si_mapping() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/nsduh_mapping.txt")
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let run = confound(&["simulate", "--p", "0.75", "--k", "4", "--n", "1000", "--seed", "7", "--out", path_str(out)]);
        assert_eq!(run.code, 0, "{}", run.stderr);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1000);
    assert_eq!(rows[0].len(), 6);
    assert!(text.contains("\"seed\":7"));
}

#[test]
fn simulate_rejects_bad_flags() {
    assert_eq!(confound(&["simulate", "--p", "0.4", "--k", "2", "--n", "10", "--seed", "1"]).code, 2);
    assert_eq!(confound(&["simulate", "--p", "0.7", "--k", "0", "--n", "10", "--seed", "1"]).code, 2);
    assert_eq!(confound(&["simulate", "--p", "0.7", "--k", "2", "--n", "10"]).code, 2);
    assert_eq!(confound(&["simulate", "--p", "abc", "--k", "2", "--n", "10", "--seed", "1"]).code, 2);
}

#[test]
fn simulate_reports_unwritable_output() {
    let run = confound(&["simulate", "--p", "0.7", "--k", "2", "--n", "10", "--seed", "1", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(run.code, 1);
}

#[test]
fn causal_increment_raises_dependent_mean() {
    let run = confound(&["simulate", "--p", "0.75", "--k", "2", "--n", "100000", "--beta-prime", "0.1", "--seed", "3"]);
    assert_eq!(run.code, 0);
    let rows = csv_rows(&run.stdout);
    let mean = |c: &str| rows.iter().map(|r| num(r, c)).sum::<f64>() / rows.len() as f64;
    assert!((mean("R1") - 0.5).abs() < 0.01);
    assert!(mean("R0") > 0.5 + 0.005, "R0 mean {}", mean("R0"));
}

#[test]
fn default_scan_has_twenty_cells() {
    let run = confound(&["scan", "--seed", "1", "--reps", "2", "--N", "400"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = csv_rows(&run.stdout);
    assert_eq!(rows.len(), 20);
    let header: Vec<&str> = run.stdout.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    assert_eq!(
        &header[..10],
        &["r", "n_confounders", "N", "replications", "mean_beta1", "mean_sigma1", "relative_risk", "ci_low", "ci_high", "excluded"]
    );
    assert!(header.contains(&"formula_beta1") && header.contains(&"formula_sigma1"));
    let cells: Vec<(f64, f64)> = rows.iter().map(|r| (num(r, "r"), num(r, "n_confounders"))).collect();
    assert_eq!(cells[0], (0.01, 1.0));
    assert_eq!(cells[19], (0.15, 8.0));
}

#[test]
fn single_replication_scan() {
    let run = confound(&["scan", "--seed", "2", "--reps", "1", "--N", "2000", "--r-list", "0.05", "--n-list", "1"]);
    assert_eq!(run.code, 0);
    let row = &csv_rows(&run.stdout)[0];
    assert!(num(row, "mc_error_beta1") > 0.0);
    assert_eq!(row["mc_error_beta1"], row["mean_sigma1"]);
}

#[test]
fn scan_formats_share_fields() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("g.csv");
    let json_path = dir.path().join("g.json");
    let base = ["scan", "--seed", "4", "--reps", "3", "--N", "500", "--r-list", "0.05,0.1", "--n-list", "2"];
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--out", path_str(&csv_path)]);
    let mut b: Vec<&str> = base.to_vec();
    b.extend(["--out", path_str(&json_path), "--format", "json"]);
    assert_eq!(confound(&a).code, 0);
    assert_eq!(confound(&b).code, 0);
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    let rows = csv_rows(&csv_text);
    let doc = json_file(&json_path);
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (c, j) in rows.iter().zip(json_rows) {
        let obj = j.as_object().unwrap();
        assert_eq!(c.len(), obj.len());
        for key in c.keys() {
            assert!(obj.contains_key(key), "{key}");
        }
        assert_eq!(num(c, "mean_beta1"), obj["mean_beta1"].as_f64().unwrap());
    }
    assert_eq!(doc["metadata"]["seed"], 4);
    assert_eq!(doc["metadata"]["config"]["grid"]["replications"], 3);
}

#[test]
fn scan_output_independent_of_threads() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let run = confound(&[
            "scan", "--seed", "5", "--reps", "6", "--N", "1000", "--r-list", "0.02,0.15", "--n-list", "1,4",
            "--threads", threads, "--out", path_str(&out),
        ]);
        assert_eq!(run.code, 0);
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.json");
    let again = dir.path().join("again.json");
    let run = confound(&[
        "scan", "--seed", "6", "--reps", "3", "--N", "500", "--r-list", "0.1", "--n-list", "1",
        "--beta-prime", "0.1", "--baseline", "mean", "--format", "json", "--out", path_str(&first),
    ]);
    assert_eq!(run.code, 0);
    let run = confound(&["replay", "--from", path_str(&first), "--out", path_str(&again), "--threads", "2"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&again).unwrap());

    let pop = dir.path().join("pop.csv");
    let pop2 = dir.path().join("pop2.csv");
    confound(&["simulate", "--p", "0.6", "--k", "3", "--n", "50", "--seed", "9", "--out", path_str(&pop)]);
    assert_eq!(confound(&["replay", "--from", path_str(&pop), "--out", path_str(&pop2)]).code, 0);
    assert_eq!(std::fs::read(&pop).unwrap(), std::fs::read(&pop2).unwrap());

    let bare = dir.path().join("bare.csv");
    std::fs::write(&bare, "a,b\n1,2\n").unwrap();
    assert_eq!(confound(&["replay", "--from", path_str(&bare)]).code, 2);
}

#[test]
fn scan_rejects_bad_grids() {
    assert_eq!(confound(&["scan", "--seed", "1", "--r-list", "1.5"]).code, 2);
    assert_eq!(confound(&["scan", "--seed", "1", "--n-list", "0"]).code, 2);
    assert_eq!(confound(&["scan", "--seed", "1", "--beta-prime", "-0.1"]).code, 2);
    assert_eq!(confound(&["scan", "--reps", "2"]).code, 2);
    assert_eq!(confound(&["scan", "--seed", "1", "--baseline", "2"]).code, 2);
}

#[test]
fn scan_with_no_usable_cell_is_numerical_failure() {
    let run = confound(&["scan", "--seed", "1", "--reps", "2", "--N", "3", "--r-list", "0.1", "--n-list", "8"]);
    assert_eq!(run.code, 3);
    let rows = csv_rows(&run.stdout);
    assert_ne!(rows[0]["status"], "ok");
}

fn write_table(dir: &Path, name: &str, header: &str, rows: &[String]) -> PathBuf {
    let path = dir.join(name);
    let mut text = format!("{header}\n");
    for r in rows {
        writeln!(text, "{r}").unwrap();
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn intercept_only_fit() {
    let dir = TempDir::new().unwrap();
    let rows: Vec<String> = (0..40).map(|i| if i % 4 == 0 { "1".into() } else { "0".into() }).collect();
    let input = write_table(dir.path(), "y.csv", "y", &rows);
    let out = dir.path().join("fit.json");
    let run = confound(&["fit", "--input", path_str(&input), "--dependent", "y", "--out", path_str(&out), "--format", "json"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let beta0 = json_file(&out)["rows"][0]["coefficient"].as_f64().unwrap();
    assert!((beta0 - logit(0.25).unwrap()).abs() < 1e-8);
    assert_eq!(confound(&["fit", "--input", path_str(&input), "--dependent", "y", "--no-intercept"]).code, 2);
}

#[test]
fn two_by_two_fit_matches_log_odds_ratio() {
    let dir = TempDir::new().unwrap();
    let (a, b, c, d) = (12, 5, 7, 16);
    let mut rows = Vec::new();
    for (n, x, y) in [(a, 1, 1), (b, 1, 0), (c, 0, 1), (d, 0, 0)] {
        rows.extend(std::iter::repeat(format!("{x},{y}")).take(n));
    }
    let input = write_table(dir.path(), "t.csv", "x,y", &rows);
    let out = dir.path().join("fit.csv");
    let run = confound(&["fit", "--input", path_str(&input), "--dependent", "y", "--regressors", "x", "--out", path_str(&out)]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.contains("converged = true"));
    let text = std::fs::read_to_string(&out).unwrap();
    let row = &csv_rows(&text)[1];
    assert_eq!(row["name"], "x");
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    assert!((num(row, "coefficient") - (a * d / (b * c)).ln()).abs() < 1e-6);
    assert!((num(row, "std_error") - (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt()).abs() < 1e-6);
}

#[test]
fn fit_of_simulated_population_matches_library() {
    let dir = TempDir::new().unwrap();
    let pop = dir.path().join("pop.csv");
    let out = dir.path().join("fit.json");
    confound(&["simulate", "--p", "0.7", "--k", "3", "--n", "4000", "--seed", "11", "--out", path_str(&pop)]);
    let run = confound(&[
        "fit", "--input", path_str(&pop), "--dependent", "R0", "--regressors", "R1,R2,R3",
        "--no-intercept", "--format", "json", "--out", path_str(&out),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc = json_file(&out);

    let rows = csv_rows(&std::fs::read_to_string(&pop).unwrap());
    let col = |c: &str| rows.iter().map(|r| num(r, c)).collect::<Vec<f64>>();
    let design = DesignMatrix::from_columns(
        ["R1", "R2", "R3"].iter().map(|c| (c.to_string(), col(c))).collect(),
        false,
    )
    .unwrap();
    let fit = fit_logistic(&col("R0"), &design, &FitOptions::default()).unwrap();
    for (i, row) in doc["rows"].as_array().unwrap().iter().enumerate() {
        assert_eq!(row["coefficient"].as_f64().unwrap(), fit.coefficients[i]);
        assert_eq!(row["std_error"].as_f64().unwrap(), fit.std_errors[i]);
    }
}

#[test]
fn separation_is_flagged_not_fatal() {
    let dir = TempDir::new().unwrap();
    let rows: Vec<String> = (0..30).map(|i| format!("{},{}", i, u8::from(i >= 15))).collect();
    let input = write_table(dir.path(), "s.csv", "x,y", &rows);
    let out = dir.path().join("s.json");
    let run = confound(&["fit", "--input", path_str(&input), "--dependent", "y", "--regressors", "x", "--format", "json", "--out", path_str(&out)]);
    assert_eq!(run.code, 0);
    assert!(run.stdout.contains("separation = true"));
    assert_eq!(json_file(&out)["rows"][1]["separation_detected"], true);
}

#[test]
fn singular_design_exits_three() {
    let dir = TempDir::new().unwrap();
    let rows: Vec<String> = (0..20).map(|i| format!("{},{},{}", i % 3, 2 * (i % 3), i % 2)).collect();
    let input = write_table(dir.path(), "c.csv", "a,b,y", &rows);
    let run = confound(&["fit", "--input", path_str(&input), "--dependent", "y", "--regressors", "a,b"]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("singular"));
}

#[test]
fn fit_usage_errors() {
    let dir = TempDir::new().unwrap();
    let input = write_table(dir.path(), "u.csv", "x,y", &["1,0".into(), "2,1".into(), "3,0".into()]);
    assert_eq!(confound(&["fit", "--input", path_str(&input), "--dependent", "z", "--regressors", "x"]).code, 2);
    assert_eq!(confound(&["fit", "--input", "/nonexistent.csv", "--dependent", "y", "--regressors", "x"]).code, 2);
    let bad = write_table(dir.path(), "b.csv", "x,y", &["1,0".into(), "q,1".into()]);
    assert_eq!(confound(&["fit", "--input", path_str(&bad), "--dependent", "y", "--regressors", "x"]).code, 2);
    let nonbinary = write_table(dir.path(), "n.csv", "x,y", &["1,0".into(), "2,3".into(), "3,1".into()]);
    assert_eq!(confound(&["fit", "--input", path_str(&nonbinary), "--dependent", "y", "--regressors", "x"]).code, 2);
}

const STAGES: [(&str, &[&str]); 4] = [
    ("A", &["IRSEX", "ANYHLTI2", "GOVTPROG", "IREDUHIGHST2", "IRFAMIN3", "BMI2", "HEALTH2", "AGE3", "COUTYP4", "IRHHSIZ2"]),
    ("B", &["MJYRTOT", "MJEVER"]),
    ("C", &["LSD", "PCP", "PEYOTE", "ECSTMOLLY", "KETMINESK", "DMTAMTFXY", "SALVIADIV"]),
    ("D", &["CIGEVER", "CIG30USE"]),
];

/// A tab-delimited file with every column of the survey mapping table.
/// A hidden trait drives drinking days, marijuana, cigarette and inhalant
/// use; everything else is noise in the survey's coding.
fn survey_shaped_data(dir: &Path, n: usize) -> PathBuf {
    let mapping = std::fs::read_to_string(si_mapping()).unwrap();
    let columns: Vec<&str> = mapping
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let yes_no = |rng: &mut ChaCha8Rng, p: f64| if rng.gen::<f64>() < p { "1" } else { "2" }.to_string();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let latent = rng.gen::<f64>() < 0.3;
        let lift = if latent { 0.35 } else { 0.0 };
        let cells: Vec<String> = columns
            .iter()
            .map(|&c| match c {
                "ALCYRTOT" | "MJYRTOT" => {
                    if rng.gen::<f64>() < 0.05 {
                        "993".into()
                    } else if latent {
                        rng.gen_range(20..=365).to_string()
                    } else {
                        rng.gen_range(0..=120).to_string()
                    }
                }
                "MJEVER" | "CIGEVER" | "SPPAINT" | "LSD" | "PCP" => yes_no(&mut rng, 0.1 + lift),
                "CIG30USE" => rng.gen_range(if latent { 5..=30 } else { 0..=10 }).to_string(),
                "IRSEX" => rng.gen_range(1..=2).to_string(),
                "NEWRACE2" => rng.gen_range(1..=7).to_string(),
                "IRMARIT" => [1, 2, 3, 4, 99][rng.gen_range(0..5)].to_string(),
                "IRWRKSTAT18" => [1, 2, 3, 4, 99][rng.gen_range(0..5)].to_string(),
                "COUTYP4" => rng.gen_range(1..=3).to_string(),
                _ => {
                    if rng.gen::<f64>() < 0.05 {
                        "94".into()
                    } else {
                        rng.gen_range(1..=6).to_string()
                    }
                }
            })
            .collect();
        rows.push(cells.join("\t"));
    }
    write_table(dir, "survey.tsv", &columns.join("\t"), &rows)
}

fn study_file(dir: &Path) -> PathBuf {
    let mut text = String::from("dependent = \"SPPAINT\"\nindependent = \"ALCYRTOT\"\nunit_change = 52.18\n");
    for (name, cols) in STAGES {
        writeln!(text, "\n[[stages]]\nname = \"{name}\"\ncolumns = {cols:?}").unwrap();
    }
    let path = dir.join("study.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn staged_analysis_on_survey_shaped_data() {
    let dir = TempDir::new().unwrap();
    let data = survey_shaped_data(dir.path(), 3_000);
    let study = study_file(dir.path());
    let out = dir.path().join("stages.csv");
    let run = confound(&[
        "ingest", "--data", path_str(&data), "--mapping", path_str(&si_mapping()),
        "--study", path_str(&study), "--out", path_str(&out),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stderr.contains("COUTYP4"), "overlap warning expected");
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    let labels: Vec<&str> = rows.iter().map(|r| r["label"].as_str()).collect();
    assert_eq!(labels, ["A", "A+B", "A+B+C", "A+B+C+D"]);
    let widths: Vec<f64> = rows.iter().map(|r| num(r, "design_columns")).collect();
    assert!(widths.windows(2).all(|w| w[0] < w[1]), "{widths:?}");
    assert_eq!(widths[0], 12.0);
    for r in &rows {
        assert_eq!(r["status"], "ok");
        assert_eq!(num(r, "unit_change"), 52.18);
        assert!(num(r, "ci_low") < num(r, "relative_risk") && num(r, "relative_risk") < num(r, "ci_high"));
    }
    // The shared trait inflates the drinking coefficient until it is adjusted for.
    assert!(num(&rows[0], "relative_risk") > num(&rows[3], "relative_risk"));

    let override_out = dir.path().join("stages_day.json");
    let run = confound(&[
        "ingest", "--data", path_str(&data), "--mapping", path_str(&si_mapping()),
        "--study", path_str(&study), "--unit-change", "1", "--format", "json", "--out", path_str(&override_out),
    ]);
    assert_eq!(run.code, 0);
    let doc = json_file(&override_out);
    let per_day = doc["rows"][0]["mean_beta1"].as_f64().unwrap();
    assert!((num(&rows[0], "mean_beta1") - 52.18 * per_day).abs() < 1e-9);
}

#[test]
fn ingest_input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let data = write_table(dir.path(), "d.tsv", "Y\tX", &["1\t2".into()]);
    let study = dir.path().join("s.toml");
    std::fs::write(&study, "dependent = \"Y\"\nindependent = \"X\"\n[[stages]]\nname = \"A\"\ncolumns = []\n").unwrap();
    let missing = dir.path().join("nope.txt");
    let run = confound(&["ingest", "--data", path_str(&data), "--mapping", path_str(&missing), "--study", path_str(&study)]);
    assert_eq!(run.code, 2);

    let bad_mapping = dir.path().join("bad.txt");
    std::fs::write(&bad_mapping, "Y ORD 2:0\nX ORD 5-1:0\n").unwrap();
    let run = confound(&["ingest", "--data", path_str(&data), "--mapping", path_str(&bad_mapping), "--study", path_str(&study)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("line 2"), "{}", run.stderr);

    let good_mapping = dir.path().join("good.txt");
    std::fs::write(&good_mapping, "Y ORD\nX ORD\nZ ORD\n").unwrap();
    let run = confound(&["ingest", "--data", path_str(&data), "--mapping", path_str(&good_mapping), "--study", path_str(&study)]);
    assert_eq!(run.code, 2, "mapping names a column the data lacks");
    assert_eq!(confound(&["ingest", "--data", path_str(&data), "--mapping", path_str(&good_mapping), "--study", path_str(&study), "--delimiter", "ab"]).code, 2);
}
