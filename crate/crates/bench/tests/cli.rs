use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selective-bench")).args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--alg=hybrid_ew".into(),
            "--adversary=block:l=4".into(),
            "--n=32,64".into(),
            "--m=4".into(),
            "--delta=1,2".into(),
            "--mode=monte_carlo".into(),
            "--trials=50".into(),
            "--seed=11".into(),
            format!("--out={}", out.display()),
        ]
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_selective-bench")).args(args(p)).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.json").exists());
}

#[test]
fn removing_a_point_leaves_others_unchanged() {
    let full = bench(&["run", "--alg", "erm", "--adversary", "uniform", "--n", "16,32", "--m", "3", "--trials", "2", "--seed", "4"]);
    let part = bench(&["run", "--alg", "erm", "--adversary", "uniform", "--n", "32", "--m", "3", "--trials", "2", "--seed", "4"]);
    let (full, part) = (csv_rows(&stdout(&full)), csv_rows(&stdout(&part)));
    assert_eq!(full.len(), 4);
    assert_eq!(&full[2..], &part[..]);
}

#[test]
fn realizable_rows_within_log_m_over_n() {
    let o = bench(&[
        "run",
        "--alg",
        "realizable_learner",
        "--adversary",
        "realizable_random:density=0.2",
        "--n",
        "16,100",
        "--m",
        "2,9",
        "--trials",
        "5",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 20);
    for r in rows {
        let (n, m): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        let risk: f64 = r[9].parse().unwrap();
        assert!(risk <= m.ln() / n + 1e-12, "{r:?}");
    }
}

#[test]
fn zero_instances_have_zero_risk() {
    for alg in ["hybrid_ew", "bounded_recall_ew", "erm", "realizable_learner"] {
        let o = bench(&["run", "--alg", alg, "--adversary", "zeros", "--n", "16,20", "--m", "3"]);
        assert!(o.status.success(), "{alg}");
        for r in csv_rows(&stdout(&o)) {
            assert_eq!(r[9].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn unknown_flag_is_rejected() {
    let o = bench(&["run", "--alg", "erm", "--adversary", "zeros", "--n", "16", "--m", "2", "--trails", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--trails"));
}

#[test]
fn invalid_point_is_named_before_computation() {
    let o = bench(&["run", "--alg", "hybrid_ew", "--adversary", "uniform", "--n", "64,8", "--m", "2", "--delta", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n=8") && err.contains("delta=4"), "{err}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.conf");
    std::fs::write(&cfg, "# erm sweep\nalg = erm\nadversary = uniform\nn = 16\nm = 2\nseed = 5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&bench(&["run", "--config", cfg]));
    let flags = stdout(&bench(&["run", "--alg", "erm", "--adversary", "uniform", "--n", "16", "--m", "2", "--seed", "5"]));
    assert_eq!(from_file, flags);
    let overridden = stdout(&bench(&["run", "--config", cfg, "--seed", "6"]));
    let direct = stdout(&bench(&["run", "--alg", "erm", "--adversary", "uniform", "--n", "16", "--m", "2", "--seed", "6"]));
    assert_eq!(overridden, direct);
    assert_ne!(overridden, from_file);

    std::fs::write(dir.path().join("bad.conf"), "algorithm = erm\n").unwrap();
    let o = bench(&["run", "--config", dir.path().join("bad.conf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_output_reads_back() {
    let o = bench(&["gen", "--adversary", "tree", "--n", "16", "--m", "4", "--seed", "2"]);
    assert!(o.status.success());
    let inst = selective_core::Instance::<f64>::read_text(&o.stdout[..]).unwrap();
    assert_eq!((inst.m(), inst.n()), (4, 16));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.txt");
    std::fs::write(&path, &o.stdout).unwrap();
    let adv = format!("file:{}", path.display());
    let p = bench(&["profile", "--adversary", &adv]);
    assert!(p.status.success());
    assert_eq!(stdout(&p).lines().count(), 1 + 5);
}

#[test]
fn check_suite_reports() {
    let o = bench(&["check", "lemma4"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violations"], 0);
    assert!(v["stats"]["quadratic_max_abs_gap"].as_f64().unwrap() <= 1e-9);
    assert_eq!(bench(&["check", "lemma5"]).status.code(), Some(2));
}
