use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GOLDEN_FEATURES: &str = "\
mfi_id,rating_norm,lar_norm,fairness,service_p90_sec,epc
MFI 18,3.8687,0.1329,1,126004.2648,5.3577
MFI 20,3.8599,0.1229,3,58758.7124,1.5044
MFI 29,3.8630,0.1277,4,310794.5388,1.1219
MFI 56,3.8690,0.1256,1,68637.8840,2.1196
MFI 64,3.8747,0.1323,1,90024.9961,3.5466
MFI 87,3.8712,0.1247,3,23893.1089,1.9553
";

fn mfirank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfirank")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture(dir: &Path, days: &str) {
    let o = mfirank(dir, &["--out", "data", "fixture", "--seed", "7", "--mfis", "6", "--clients", "600", "--days", days]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ranks_the_golden_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("six.csv"), GOLDEN_FEATURES).unwrap();
    let o = mfirank(dir.path(), &["rank", "--input", "six.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("out/rank.json"));
    let order: Vec<&str> = v["ranked"].as_array().unwrap().iter().map(|e| e["mfi_id"].as_str().unwrap()).collect();
    assert_eq!(order, ["MFI 87", "MFI 64", "MFI 18", "MFI 56", "MFI 29", "MFI 20"]);
    assert_eq!(v["matrix"]["points"][1], serde_json::json!([3, 0, 3, 3, 3, 4]));
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    let pi = fs::read_to_string(dir.path().join("out/pi.csv")).unwrap();
    assert!(pi.starts_with("position,mfi_id,pi\n1,MFI 87,"));
}

#[test]
fn missing_feature_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let without_epc: String = GOLDEN_FEATURES.lines().map(|l| l.rsplit_once(',').unwrap().0.to_owned() + "\n").collect();
    fs::write(dir.path().join("f.csv"), without_epc).unwrap();
    let o = mfirank(dir.path(), &["rank", "--input", "f.csv"]);
    assert_eq!(code(&o), 1);
    let o = mfirank(dir.path(), &["--features", "rating,lar", "rank", "--input", "f.csv"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn fisher_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfirank(dir.path(), &["abtest", "--fisher", "126", "7368", "206", "14685"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["rows"][0]["p"].as_f64().unwrap();
    assert!((p - 0.045).abs() < 0.005, "{p}");
    assert!(dir.path().join("out/abtest.json").exists());
}

#[test]
fn welch_and_yule_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "1, 2, 3\n4 5\n").unwrap();
    fs::write(dir.path().join("b.txt"), "2\n2\n2\n2\n2\n").unwrap();
    let o = mfirank(dir.path(), &["abtest", "--welch", "a.txt", "b.txt", "--yule", "10", "5", "5", "10", "--level", "0.95"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["rows"][0]["t"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert!((v["rows"][1]["y"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(code(&mfirank(dir.path(), &["abtest"])), 1);
    assert_eq!(code(&mfirank(dir.path(), &["abtest", "--fisher", "5", "3", "1", "4"])), 1);
}

#[test]
fn pipeline_runs_end_to_end_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "14");
    let config = ["--config", "data/pipeline.json"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for cmd in ["validate", "features", "rank", "evaluate", "report"] {
            let o = mfirank(dir.path(), &[&config[..], &[cmd]].concat());
            assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let out = dir.path().join("data/out");
        let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        snapshots.push(files.iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(snapshots[0], snapshots[1]);
    assert_eq!(snapshots[0].len(), 8);

    let out = dir.path().join("data/out");
    let validation = json(&out.join("validation.json"));
    assert_eq!(validation["row_errors"]["conversions"]["count"], 0);
    assert_eq!(validation["report"]["n_mfis"], 6);

    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("date,algorithm,income,share_per_click"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len() % 2, 0);
    assert!(rows.len() >= 2 * 14);
    assert_eq!(report, fs::read_to_string(out.join("daily.csv")).unwrap());

    let eval = json(&out.join("evaluation.json"));
    assert_eq!(eval["coverage"]["applications"], eval["coverage"]["simulated"]);
    assert_eq!(eval["weekly_lists"][0]["source"], "historical");
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "7");
    fs::remove_file(dir.path().join("data/products.csv")).unwrap();
    let o = mfirank(dir.path(), &["--config", "data/pipeline.json", "validate"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("data/out").exists());
    let o = mfirank(dir.path(), &["report", "--input", "nothing.json"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mfirank(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&mfirank(dir.path(), &["--damping", "1.5", "rank"])), 1);
    assert_eq!(code(&mfirank(dir.path(), &["--features", "rating,height", "rank"])), 1);
    assert_eq!(code(&mfirank(dir.path(), &["validate"])), 1);
    assert_eq!(code(&mfirank(dir.path(), &["--help"])), 0);
}
