use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn disag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disag"))
        .args(args)
        .env_remove("DISAG_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    disag(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn toy_estimate_irf_fevd_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("toy/estimate.toml");
    for cmd in ["estimate", "irf", "fevd"] {
        let o = run(cmd, &cfg, dir.path());
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["retained"], (600 - 100) / 5);
    assert_eq!(manifest["lags"], 1);
    assert_eq!(csv_rows(&dir.path().join("draws/lambda.csv")).len(), 100);
    assert_eq!(csv_rows(&dir.path().join("draws/factors.csv")).len(), 100 * 149);

    let irf = csv_rows(&dir.path().join("irf.csv"));
    assert_eq!(irf.len(), 3 * 9);
    let impact_c = irf.iter().find(|r| r[0] == "C" && r[2] == "0").unwrap();
    assert_eq!(&impact_c[3..], ["0", "0", "0"]);
    let fevd = csv_rows(&dir.path().join("fevd.csv"));
    assert_eq!(fevd.len(), 3 * 2 * 9);
    assert!(fevd.iter().any(|r| r[1] == "residual"));
    assert_eq!(
        fs::read_to_string(dir.path().join("config.toml")).unwrap(),
        fs::read_to_string(&cfg).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("toy/estimate.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&disag(&["estimate", "--config", cfg, "--out", a.path().to_str().unwrap()])), 0);
    assert_eq!(
        code(&disag(&["estimate", "--config", cfg, "--seed", "12", "--out", b.path().to_str().unwrap()])),
        0
    );
    let la = fs::read(a.path().join("draws/lambda.csv")).unwrap();
    let lb = fs::read(b.path().join("draws/lambda.csv")).unwrap();
    assert_ne!(la, lb);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 12);
}

#[test]
fn unknown_flag_exits_2() {
    let o = disag(&["estimate", "--bogus"]);
    assert_eq!(code(&o), 2);
    let o = disag(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&disag(&["--help"])), 0);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[estimate\nlags = ").unwrap();
    assert_eq!(code(&run("estimate", &cfg, dir.path())), 2);
    fs::write(&cfg, "[simulate]\nbeta = 1.5\nreplications = 10\nn_agents = 10\n").unwrap();
    assert_eq!(code(&run("simulate", &cfg, dir.path())), 2);
    fs::write(&cfg, "seed = 1\n").unwrap();
    assert_eq!(code(&run("index", &cfg, dir.path())), 2);
    assert_eq!(code(&run("estimate", &dir.path().join("absent.toml"), dir.path())), 2);
}

#[test]
fn missing_data_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[index]\nmethod = \"tail\"\nquestions = [\"nope.csv\"]\n").unwrap();
    let o = run("index", &cfg, dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // irf without stored draws
    assert_eq!(code(&run("irf", &cfg, dir.path())), 3);
}

#[test]
fn interior_gap_exits_3_and_names_series() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "date,value\n2000-01,1\n2000-02,2\n2000-03,3\n2000-04,4\n").unwrap();
    fs::write(dir.path().join("b.csv"), "date,value\n2000-01,1\n2000-02,\n2000-03,3\n2000-04,4\n").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        r#"
[estimate]
lags = 1
shocks = ["s"]
signs = { a = { s = "+" } }
[[estimate.series]]
mnemonic = "a"
file = "a.csv"
tcode = 1
frequency = "monthly"
role = "activity"
[[estimate.series]]
mnemonic = "b"
file = "b.csv"
tcode = 1
frequency = "monthly"
role = "price"
"#,
    )
    .unwrap();
    let o = run("estimate", &cfg, &dir.path().join("out"));
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("b (1 missing: 2000-02)"), "{err}");
}

#[test]
fn explosive_draws_only_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir_all(d.join("draws")).unwrap();
    fs::write(
        d.join("manifest.json"),
        r#"{"variables":["x","y"],"shocks":["s"],"lags":1,"sample_start":"2000-01",
"sample_end":"2000-12","observations":12,"seed":0,
"settings":{"draws":3,"burn_in":1,"thin":1},"retained":2,"sign_pattern":["+","."],
"ess":[],"wall_time_secs":0.0,"warnings":[]}"#,
    )
    .unwrap();
    fs::write(
        d.join("draws/phi.csv"),
        "draw,x~const,x~x.l1,x~y.l1,y~const,y~x.l1,y~y.l1\n0,0,1.1,0,0,0,0.5\n1,0,1.2,0,0,0,0.5\n",
    )
    .unwrap();
    fs::write(d.join("draws/lambda.csv"), "draw,x~s,y~s\n0,1,0\n1,1,0\n").unwrap();
    fs::write(d.join("draws/sigma2.csv"), "draw,x,y\n0,1,1\n1,1,1\n").unwrap();
    let cfg = d.join("c.toml");
    fs::write(&cfg, "[irf]\nhorizon = 4\n").unwrap();
    let o = run("irf", &cfg, d);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[index]\nmethod = \"entropy\"\nquestions = [\"question2.csv\"]\n").unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_disag"))
        .args(["index", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("DISAG_DATA_DIR", fixtures().join("pipeline"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("index.csv"));
    assert_eq!(rows.len(), 241);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    assert_eq!(json["method"], "entropy");
    assert!(json["loadings"].is_null());
}

#[test]
fn small_surface_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "seed = 3\n[simulate]\nn_agents = 200\nreplications = 20\ngrid_eps2 = [1.0, 2.0]\ngrid_v2 = [1.0, 3.0, 5.0]\n",
    )
    .unwrap();
    assert_eq!(code(&run("simulate", &cfg, dir.path())), 0);
    let rows = csv_rows(&dir.path().join("surface.csv"));
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[1][..2], ["1", "3"]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("surface.json")).unwrap()).unwrap();
    assert_eq!(m["replications"], 20);
    assert_eq!(m["n_agents"], 200);
}
