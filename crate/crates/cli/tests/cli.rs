use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MORAN: &str = r#"
seed = 5
[system]
kind = "finite"
maps = [ [[0.3333333333333333]], [[0.3333333333333333]] ]
[spectrum]
alpha = [[0.25], [0.5], [1.2]]
levels = [1, 2]
[spectrum.potential]
kind = "digit_frequency"
digits = [1]
[render]
points = 300
translations = [[0.0], [0.6666666666666666]]
"#;

const TWISTED: &str = r#"
[system]
kind = "finite"
maps = [ [[0.3333333333333333, 0.0], [0.0, 0.03333333333333333]],
         [[0.0, -0.03333333333333333], [0.3333333333333333, 0.36666666666666664]] ]
[budget]
depth = 8
[pressure]
s = [0.5, 1.0]
[spectrum]
alpha_range = [0.2, 0.8]
points = 4
[spectrum.potential]
kind = "digit_frequency"
digits = [1]
[render]
points = 400
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_afflab"));
    c.env_remove("AFFLAB_WORD_BUDGET");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn dim_reports_moran_root_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.toml", MORAN);
    let out = tmp.path().join("out");
    let o = run(&["dim"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("dim.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s_lo,s_hi,dimension,depth"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let dim: f64 = row[2].parse().unwrap();
    assert!((dim - 2f64.ln() / 3f64.ln()).abs() < 1e-6);

    let m = manifest(&out);
    assert_eq!(m["command"], "dim");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["certificate_mode"], "exact");
    assert_eq!(m["budgets"]["words_source"], "config");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn csv_uses_lf_and_seventeen_digits() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.toml", MORAN);
    let out = tmp.path().join("out");
    assert_eq!(run(&["render"], &cfg, &out).status.code(), Some(0));
    let text = fs::read_to_string(out.join("cloud.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let first = text.lines().nth(1).unwrap();
    let mantissa = first.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn spectrum_writes_one_csv_per_level_and_flags_empty() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.toml", MORAN);
    let out = tmp.path().join("out");
    assert_eq!(run(&["spectrum"], &cfg, &out).status.code(), Some(0));
    for k in [1, 2] {
        let text = fs::read_to_string(out.join(format!("spectrum_k{k}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha1,dim,status,q1");
        assert!(lines[3].contains(",empty,"));
    }
    let names: Vec<String> = manifest(&out)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["spectrum_k1.csv", "spectrum_k2.csv"]);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("absent.toml");
    assert_eq!(run(&["dim"], &missing, &out).status.code(), Some(2));
    let garbled = write_config(tmp.path(), "g.toml", "[system\nkind = 1");
    assert_eq!(run(&["dim"], &garbled, &out).status.code(), Some(2));
    let expanding = write_config(tmp.path(), "e.toml", "[system]\nkind = \"finite\"\nmaps = [[[1.5]]]\n");
    assert_eq!(run(&["dim"], &expanding, &out).status.code(), Some(2));
    let moran = write_config(tmp.path(), "m.toml", MORAN);
    assert_eq!(run(&["pressure"], &moran, &out).status.code(), Some(2));
    assert_eq!(run(&["dim", "--threads", "0"], &moran, &out).status.code(), Some(2));
    assert_eq!(bin().arg("dim").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_4_and_env_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.toml", MORAN);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["dim", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("AFFLAB_WORD_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    let m = manifest(&out);
    assert_eq!(m["budgets"]["words"], 100);
    assert_eq!(m["budgets"]["words_source"], "env");
    assert!(m["status"].as_str().unwrap().contains("budget"));

    let bad = bin()
        .args(["dim", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("AFFLAB_WORD_BUDGET", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn certification_failure_exits_3() {
    // Joined products of length >= 6 underflow to zero.
    let tiny = r#"
[system]
kind = "finite"
maps = [ [[1e-100, 0.0], [0.0, 5e-101]], [[0.0, -1e-100], [1e-100, 0.0]] ]
[certify]
s = [0.5]
"#;
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", tiny);
    let out = tmp.path().join("out");
    let o = run(&["certify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", TWISTED);
    for cmd in ["pressure", "spectrum", "render", "dim"] {
        let a = tmp.path().join(format!("{cmd}-1"));
        let b = tmp.path().join(format!("{cmd}-4"));
        assert_eq!(run(&[cmd, "--threads", "1", "--seed", "11"], &cfg, &a).status.code(), Some(0));
        assert_eq!(run(&[cmd, "--threads", "4", "--seed", "11"], &cfg, &b).status.code(), Some(0));
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{cmd}: {n:?}");
        }
    }
}

#[test]
fn seed_flag_changes_sampled_translations() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", TWISTED);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&["render", "--seed", "1"], &cfg, &a);
    run(&["render", "--seed", "2"], &cfg, &b);
    assert_ne!(fs::read(a.join("cloud.csv")).unwrap(), fs::read(b.join("cloud.csv")).unwrap());
    assert_eq!(manifest(&a)["seed"], 1);
    assert_eq!(manifest(&b)["seed"], 2);
}
