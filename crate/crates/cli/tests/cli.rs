use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zosketch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zosketch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    let text = format!("schema_version = 1\noutput = \"out\"\nseeds = [0]\n{body}");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const QUAD: &str = r#"
[problem]
kind = "quadratic"
d = 16
decay = "exp:0.8"
ridge = 1e-3
seed = 2

[[methods]]
name = "gauss"
method = "zo_sketch"
ell = 4
alpha = 1e-4
step = { policy = "known_trace" }
max_queries = 2000
"#;

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn gen_quadratic_then_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("q.json");
    let o = zosketch(&[
        "gen-quadratic",
        "--d",
        "12",
        "--decay",
        "poly_inv",
        "--ridge",
        "0",
        "--seed",
        "5",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = write_config(
        dir.path(),
        "[problem]\nkind = \"quadratic_file\"\npath = \"q.json\"\n",
    );
    let o = zosketch(&["spectrum", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let rows = csv_rows(&dir.path().join("out/spectrum.csv"));
    assert_eq!(rows.len(), 13);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap())
            .unwrap();
    let harmonic: f64 = (1..=12).map(|i| 1.0 / i as f64).sum();
    assert!((json["trace"].as_f64().unwrap() - harmonic).abs() < 1e-9);
    assert!((json["lmax"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn runs_are_reproducible_and_budgeted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let csv = dir.path().join("out/runs/gauss__seed0.csv");

    assert_eq!(code(&zosketch(&["run", "--config", &cfg])), 0);
    let first = csv_rows(&csv);
    assert_eq!(first[0], "iter,queries,f_value,gap,eta,tau");
    assert_eq!(
        code(&zosketch(&["run", "--config", &cfg, "--threads", "2"])),
        0
    );
    assert_eq!(first, csv_rows(&csv));
    let last_queries: u64 = first
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last_queries <= 2000);

    assert_eq!(
        code(&zosketch(&["run", "--config", &cfg, "--budget", "0"])),
        0
    );
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0,0,"));
    assert!(dir.path().join("out/summary.json").exists());
    assert!(dir.path().join("out/config.resolved.toml").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let o = zosketch(&[
        "run",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);

    let cfg = write_config(dir.path(), &format!("colour = \"red\"\n{QUAD}"));
    assert_eq!(code(&zosketch(&["run", "--config", &cfg])), 2);

    let cfg = write_config(dir.path(), QUAD);
    assert_eq!(
        code(&zosketch(&["run", "--config", &cfg, "--method", "nope"])),
        2
    );

    let diverging = QUAD.replace(
        "{ policy = \"known_trace\" }",
        "{ policy = \"fixed\", eta = 50.0 }",
    );
    let cfg = write_config(dir.path(), &diverging);
    let o = zosketch(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
