use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exciton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exciton")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    exciton(&args)
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/powerlaw_half")
}

const SMALL: &str = "seed = 11\nn = 12\ngamma = 1\nr = 6\ntau_min = 1e-4\ntau_max = 1e1\npoints_per_decade = 20\n";

#[test]
fn unknown_key_exits_one_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "n = 10\ngamma = 1\nr = 1\nbogus_key = 3\n");
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn invalid_values_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("neg.cfg", "n = 10\ngamma = -1\nr = 1\n"),
        ("small.cfg", "n = 1\ngamma = 1\nr = 1\n"),
        ("zero_r.cfg", "n = 10\ngamma = 1\nr = 0\n"),
        ("window.cfg", "n = 10\ngamma = 1\nr = 1\nfit_window = 2:1\n"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let o = run(&cfg, &tmp.path().join(name).with_extension("out"), &[]);
        assert_eq!(o.status.code(), Some(1), "{name}: {}", stderr(&o));
    }
    let o = exciton(&["run", "--config"]);
    assert_eq!(o.status.code(), Some(1));
    let o = exciton(&["run", "--config", "/nonexistent/x.cfg", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_realization_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.cfg", "seed = 3\nn = 8\ngamma = 1\nr = 1\npoints_per_decade = 10\n");
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &["--exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = out.join("n8_gamma1e0");
    for f in ["metadata", "nodes.csv", "spectrum.csv", "survival.csv", "survival_avg.csv", "gamma_avg.csv", "survival_exact_avg.csv"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    assert!(out.join("manifest").exists());
    let nodes = fs::read_to_string(dir.join("nodes.csv")).unwrap();
    assert!(nodes.starts_with("node_index,x1,x2,x3,is_trap\n1,"));
    assert_eq!(nodes.lines().count(), 9);
    assert_eq!(nodes.lines().filter(|l| l.ends_with(",1")).count(), 1);
    let spectrum = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 9);
    let meta = fs::read_to_string(dir.join("metadata")).unwrap();
    assert!(meta.contains("status = complete"));
    assert!(meta.contains("exact_mode = true"));
}

#[test]
fn rerun_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", SMALL);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &["--workers", "2"]).status.success());
    let manifest = fs::read_to_string(out.join("manifest")).unwrap();
    let avg = fs::read(out.join("n12_gamma1e0/survival_avg.csv")).unwrap();
    let o = run(&cfg, &out, &["--workers", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("up to date"));
    assert_eq!(fs::read_to_string(out.join("manifest")).unwrap(), manifest);
    assert_eq!(fs::read(out.join("n12_gamma1e0/survival_avg.csv")).unwrap(), avg);
}

#[test]
fn changed_configuration_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "s.cfg", SMALL);
    assert!(run(&cfg, &out, &[]).status.success());
    let cfg2 = write_config(tmp.path(), "s2.cfg", &SMALL.replace("seed = 11", "seed = 12"));
    let o = run(&cfg2, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("different configuration"), "{}", stderr(&o));
}

#[test]
fn resume_reproduces_an_interrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", SMALL);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let dir = out.join("n12_gamma1e0");
    let avg = fs::read(dir.join("survival_avg.csv")).unwrap();
    let rates = fs::read(dir.join("gamma_avg.csv")).unwrap();

    // Simulate a crash after four realizations.
    fs::remove_file(dir.join("survival_avg.csv")).unwrap();
    fs::remove_file(dir.join("gamma_avg.csv")).unwrap();
    fs::remove_file(dir.join("checkpoints/real_5.csv")).unwrap();
    fs::remove_file(dir.join("checkpoints/real_6.csv")).unwrap();
    let meta = fs::read_to_string(dir.join("metadata")).unwrap().replace("status = complete", "status = running");
    fs::write(dir.join("metadata"), meta).unwrap();

    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1), "partial run must need --resume");
    let o = run(&cfg, &out, &["--resume"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(4 from checkpoints)"), "{}", stdout(&o));
    assert_eq!(fs::read(dir.join("survival_avg.csv")).unwrap(), avg);
    assert_eq!(fs::read(dir.join("gamma_avg.csv")).unwrap(), rates);
}

#[test]
fn tampered_checkpoint_seed_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", SMALL);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let dir = out.join("n12_gamma1e0");
    fs::remove_file(dir.join("survival_avg.csv")).unwrap();
    let ck = dir.join("checkpoints/real_2.csv");
    let text = fs::read_to_string(&ck).unwrap();
    let first = text.lines().next().unwrap().to_string();
    let (head, _) = first.split_once("seed=").unwrap();
    fs::write(&ck, text.replacen(&first, &format!("{head}seed=1"), 1)).unwrap();
    let o = run(&cfg, &out, &["--resume"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("does not belong"), "{}", stderr(&o));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&cfg, &a, &["--workers", "1"]).status.success());
    assert!(run(&cfg, &b, &["--workers", "4"]).status.success());
    for f in ["survival_avg.csv", "gamma_avg.csv", "checkpoints/real_3.csv"] {
        assert_eq!(fs::read(a.join("n12_gamma1e0").join(f)).unwrap(), fs::read(b.join("n12_gamma1e0").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analyze_recovers_the_fixture_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("an");
    let o = exciton(&["analyze", fixture().to_str().unwrap(), "--out", out.to_str().unwrap(), "--windows", "1e-3:1e-2,auto"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("scaling skipped"));
    assert!(!out.join("scaling.csv").exists());
    let fits = fs::read_to_string(out.join("fits.csv")).unwrap();
    let mut lines = fits.lines();
    assert_eq!(lines.next(), Some("n,gamma,eta,eta_err,window_lo,window_hi,residual"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!((r[2] - 0.5).abs() < 1e-10, "eta = {}", r[2]);
    }
    assert!(out.join("n10_gamma1e0/density.csv").exists());
}

#[test]
fn analyze_two_sizes_gives_a_scaling_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "two.cfg",
        "seed = 4\ngamma = 1\nr = 3\ntau_min = 1e-4\ntau_max = 1e1\npoints_per_decade = 40\n[a]\nn = 16\n[b]\nn = 24\n",
    );
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let an = tmp.path().join("an");
    let o = exciton(&["analyze", out.to_str().unwrap(), "--out", an.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scaling = fs::read_to_string(an.join("scaling.csv")).unwrap();
    assert_eq!(scaling.lines().count(), 2);
    for f in ["fits.csv", "density_fits.csv", "laplace.csv"] {
        assert!(an.join(f).exists(), "{f}");
    }
}

#[test]
fn analyze_missing_artifacts_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = exciton(&["analyze", tmp.path().to_str().unwrap(), "--out", tmp.path().join("an").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn chain_bench_reports_and_flags_small_n() {
    let o = exciton(&["chain-bench", "--n", "100", "--gamma", "1e-3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("overall: PASS"), "{}", stdout(&o));
    let o = exciton(&["chain-bench", "--n", "20"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("small n"));
    let o = exciton(&["chain-bench", "--n", "5"]);
    assert_eq!(o.status.code(), Some(1));
}
