use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exspec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exspec"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_shape_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = exspec(&["simulate", "--n", "1000", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("sample.csv"));
    assert_eq!(rows.len(), 1001);
    assert_eq!(rows[0], ["x1", "x2", "x3", "x4", "z1", "z2"]);
    assert!(rows.iter().all(|r| r.len() == 6));
    let meta = fs::read_to_string(dir.path().join("sample.meta")).unwrap();
    assert!(meta.contains("seed=5"));
    assert!(meta.contains("command=simulate"));
    assert!(meta.lines().any(|l| l.starts_with("config_hash=") && l.len() == "config_hash=".len() + 64));
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["cluster", "--n", "5000", "--nn", "200", "--seed", "11"];
    assert!(exspec(&args, a.path()).status.success());
    assert!(exspec(&args, b.path()).status.success());
    for f in ["labels.csv", "atoms.csv", "scree.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }

    let c = tempfile::tempdir().unwrap();
    let mut other = args;
    other[6] = "12";
    assert!(exspec(&other, c.path()).status.success());
    assert_ne!(
        fs::read(a.path().join("labels.csv")).unwrap(),
        fs::read(c.path().join("labels.csv")).unwrap()
    );
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# two-factor run\nseed=9\nn=400\n").unwrap();
    let o = exspec(&["simulate", "--config", cfg.to_str().unwrap(), "--n", "300"], dir.path());
    assert!(o.status.success());
    assert_eq!(read_csv(&dir.path().join("sample.csv")).len(), 301);
    assert!(fs::read_to_string(dir.path().join("sample.meta")).unwrap().contains("seed=9"));
}

#[test]
fn single_cluster_is_normalized_mean() {
    let dir = tempfile::tempdir().unwrap();
    let o = exspec(&["cluster", "--n", "2000", "--nn", "100", "--m", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let atoms = read_csv(&dir.path().join("atoms.csv"));
    assert_eq!(atoms.len(), 2);
    let vals: Vec<f64> = atoms[1].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals[0], 0.0);
    let norm: f64 = vals[1..5].iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    assert!((vals[5] - 1.0).abs() < 1e-12);
    let labels = read_csv(&dir.path().join("labels.csv"));
    assert!(labels[1..].iter().all(|r| r[1] == "0"));
}

/// Two tight arcs of ten points and one point halfway between them, plus
/// small-radius filler that falls below the selection threshold.
fn planted_csv(path: &Path) {
    let mut s = String::from("x1,x2\n");
    let mut push = |theta: f64, r: f64| s.push_str(&format!("{},{}\n", r * theta.cos(), r * theta.sin()));
    for i in 0..10 {
        push(0.01 * i as f64, 10.0);
    }
    push(std::f64::consts::FRAC_PI_4, 10.0);
    for i in 0..10 {
        push(std::f64::consts::FRAC_PI_2 - 0.01 * i as f64, 10.0);
    }
    for i in 0..19 {
        push(0.05 * i as f64, 1.0);
    }
    fs::write(path, s).unwrap();
}

#[test]
fn mutual_strips_the_bridge_point_symmetric_keeps_it() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("planted.csv");
    planted_csv(&input);
    let base = ["cluster", "--model", "csv", "--input", input.to_str().unwrap(), "--nn", "21", "--tau", "3", "--m", "2"];

    let mutual = dir.path().join("mutual");
    let mut args = base.to_vec();
    args.extend(["--mode", "mutual"]);
    let o = exspec(&args, &mutual);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let labels = read_csv(&mutual.join("labels.csv"));
    let bridge = labels.iter().find(|r| r[0] == "10").unwrap();
    assert_eq!(bridge[1], "-1");
    let first: Vec<&str> = labels[1..].iter().filter(|r| r[0].parse::<usize>().unwrap() < 10).map(|r| r[1].as_str()).collect();
    let second: Vec<&str> = labels[1..].iter().filter(|r| r[0].parse::<usize>().unwrap() > 10).map(|r| r[1].as_str()).collect();
    assert!(first.iter().all(|l| *l == "0"));
    assert!(second.iter().all(|l| *l == "1"));

    let symmetric = dir.path().join("symmetric");
    let mut args = base.to_vec();
    args.extend(["--mode", "symmetric"]);
    assert!(exspec(&args, &symmetric).status.success());
    let labels = read_csv(&symmetric.join("labels.csv"));
    assert!(labels[1..].iter().all(|r| r[1] != "-1"));
    let atoms = read_csv(&symmetric.join("atoms.csv"));
    let mass: f64 = atoms[1..].iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = exspec(&["cluster", "--tau", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x1,x2\n1,2\n3,4\n5,oops\n").unwrap();
    let o = exspec(&["cluster", "--model", "csv", "--input", bad.to_str().unwrap(), "--nn", "1", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "x1,x2\n0,0\n0,0\n0,0\n").unwrap();
    let o = exspec(&["cluster", "--model", "csv", "--input", zeros.to_str().unwrap(), "--nn", "1", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn benchmark_writes_one_row_per_method_and_replication() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.cfg");
    fs::write(&cfg, "grid_n=2000\ngrid_nn=100\ngrid_tau=5\ngrid_sigma=0\nreps=3\n").unwrap();
    let o = exspec(&["benchmark", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("benchmark.csv"));
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(dir.path().join("benchmark.meta").exists());
}
