use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
schema_version = 1
name = "tiny"
seeds = [0, 1]

[dataset]
seed = 1
num_classes = 4
feature_dim = 3
n_max = 120
imbalance_factor = 20.0
test_per_class = 10

[model]
hidden_dims = [6]
init_seed = 2

[optimizer]
name = "imbsam"
learning_rate = 0.005
momentum = 0.9
rho = 0.5

[split]
eta = 50

[training]
epochs = 3
batch_size = 16

[diagnostics]
enabled = true
n_probes = 4
max_iters = 10
"#;

fn imbsam(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imbsam"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = imbsam(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    (headers, r.records().map(Result::unwrap).collect())
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn generate_writes_train_and_test_csv() {
    let dir = setup();
    let d = dir.path();
    ok(
        &[
            "generate",
            "--config",
            "tiny.toml",
            "--out",
            "data/train.csv",
            "--test-out",
            "data/test.csv",
        ],
        d,
    );
    let (h, rows) = csv_rows(&d.join("data/train.csv"));
    assert_eq!(h.iter().collect::<Vec<_>>(), ["f0", "f1", "f2", "y"]);
    // round(120 · 20^(−k/3)) for k = 0..4.
    assert_eq!(rows.len(), 120 + 44 + 16 + 6);
    let (_, test) = csv_rows(&d.join("data/test.csv"));
    assert_eq!(test.len(), 40);
}

#[test]
fn train_diagnose_compare_pipeline() {
    let dir = setup();
    let d = dir.path();
    let stdout = ok(
        &[
            "train",
            "--config",
            "tiny.toml",
            "--optimizer",
            "sgd",
            "--out-dir",
            "out",
        ],
        d,
    );
    assert!(stdout.contains("tiny-sgd-s0"));
    ok(&["train", "--config", "tiny.toml", "--out-dir", "out"], d);
    for f in [
        "tiny-sgd-s0.json",
        "tiny-sgd-s1.ckpt",
        "tiny-imbsam-s1.json",
        "tiny-imbsam-summary.csv",
        "tiny-imbsam-per_class.csv",
        "tiny-imbsam-epochs.csv",
        "tiny-imbsam-sharpness.csv",
    ] {
        assert!(d.join("out").join(f).exists(), "missing {f}");
    }
    let (_, summary) = csv_rows(&d.join("out/tiny-imbsam-summary.csv"));
    assert_eq!(summary.len(), 2);
    let (_, per_class) = csv_rows(&d.join("out/tiny-imbsam-per_class.csv"));
    assert_eq!(per_class.len(), 2 * 4);
    let (_, epochs) = csv_rows(&d.join("out/tiny-imbsam-epochs.csv"));
    assert_eq!(epochs.len(), 2 * 3);

    ok(
        &[
            "diagnose",
            "--checkpoint",
            "out/tiny-imbsam-s0.ckpt",
            "--out-dir",
            "diag",
            "--grid-points",
            "5",
        ],
        d,
    );
    let (_, sharp) = csv_rows(&d.join("diag/tiny-imbsam-s0-sharpness.csv"));
    assert_eq!(sharp.len(), 3);
    let (h, slice) = csv_rows(&d.join("diag/tiny-imbsam-s0-landscape.csv"));
    assert_eq!(slice.len(), 5 * 3);
    assert!(h.iter().any(|c| c == "config_hash"));

    ok(
        &[
            "diagnose",
            "--checkpoint",
            "out/tiny-sgd-s1.ckpt",
            "--out-dir",
            "diag",
            "--dims",
            "2",
            "--grid-points",
            "3",
            "--direction",
            "gradient",
            "--restrictions",
            "tail",
        ],
        d,
    );
    let (_, plane) = csv_rows(&d.join("diag/tiny-sgd-s1-landscape.csv"));
    assert_eq!(plane.len(), 9);

    let stdout = ok(
        &[
            "compare",
            "out/tiny-sgd-s0.json",
            "out/tiny-imbsam-s0.json",
            "--out",
            "gains.csv",
        ],
        d,
    );
    assert!(stdout.contains("tiny-sgd-s0 -> tiny-imbsam-s0"));
    let (_, gains) = csv_rows(&d.join("gains.csv"));
    assert_eq!(gains.len(), 4 + 4);

    ok(
        &[
            "compare",
            "out/tiny-sgd-s0.json",
            "out/tiny-sgd-s0.json",
            "--out",
            "self.csv",
        ],
        d,
    );
    let (_, same) = csv_rows(&d.join("self.csv"));
    assert!(same
        .iter()
        .filter(|r| !r[3].is_empty())
        .all(|r| r[3].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn training_is_reproducible_from_the_cli() {
    let dir = setup();
    let d = dir.path();
    ok(
        &[
            "train",
            "--config",
            "tiny.toml",
            "--seeds",
            "1",
            "--out-dir",
            "a",
            "--no-checkpoints",
        ],
        d,
    );
    ok(
        &[
            "train",
            "--config",
            "tiny.toml",
            "--seeds",
            "1",
            "--out-dir",
            "b",
            "--no-checkpoints",
        ],
        d,
    );
    let read = |p: &str| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(p)).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_clock_secs");
        v
    };
    assert_eq!(read("a/tiny-imbsam-s1.json"), read("b/tiny-imbsam-s1.json"));
    assert!(!d.join("a/tiny-imbsam-s1.ckpt").exists());
}

#[test]
fn grid_writes_one_row_per_cell() {
    let dir = setup();
    let d = dir.path();
    ok(
        &[
            "grid",
            "--config",
            "tiny.toml",
            "--no-diagnostics",
            "--rho",
            "0,0.1,0.2",
            "--eta",
            "10,50",
            "--out",
            "grid.csv",
        ],
        d,
    );
    let (h, rows) = csv_rows(&d.join("grid.csv"));
    assert_eq!(rows.len(), 3 * 2 * 2);
    let digest = h.iter().position(|c| c == "params_digest").unwrap();
    let zero: Vec<_> = rows
        .iter()
        .filter(|r| &r[0] == "0.0")
        .map(|r| r[digest].to_string())
        .collect();
    assert_eq!(zero.len(), 4);
    assert_eq!(zero[0], zero[2]);
    assert_eq!(zero[1], zero[3]);
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(
        d.join("v2.toml"),
        CONFIG.replace("schema_version = 1", "schema_version = 2"),
    )
    .unwrap();
    let out = imbsam(&["train", "--config", "v2.toml"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let out = imbsam(&["train", "--preset", "nope"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let out = imbsam(&["train", "--preset", "desk_lt10", "--config", "tiny.toml"], d);
    assert!(!out.status.success());

    let out = imbsam(&["train", "--config", "tiny.toml", "--optimizer", "adam"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown optimizer"));

    let out = imbsam(&["diagnose", "--checkpoint", "missing.ckpt", "--out-dir", "x"], d);
    assert!(!out.status.success());
}
