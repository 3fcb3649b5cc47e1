use std::process::Command;

fn fran() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fran"))
}

const SWEEP: &str = r#"
swept_parameter = "mu"
grid = [0.0, 1.0]
modes = ["soft", "hard"]
hard_nf = [1]
prefetchers = ["cmp"]
trials = 2
base_seed = 5

[fixed_parameters]
num_errh = 2
num_ue = 2
library_size = 2
fronthaul_capacity = 0.3
"#;

#[test]
fn sweep_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SWEEP).unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")] {
        let out = dir.path().join(name);
        let status = fran().arg("sweep").arg(&cfg).arg("--out").arg(&out).args(["--threads", threads]).status().unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep_param,value,mode,prefetcher,nf,mean_rmin,stderr,trials,failures"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn trials_and_seed_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SWEEP).unwrap();
    let run = |seed: &str| {
        let out = fran().arg("sweep").arg(&cfg).args(["--trials", "1", "--seed", seed]).output().unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run("1");
    assert!(a.lines().skip(1).all(|l| l.ends_with(",1,0")), "{a}");
    assert_ne!(a, run("2"));
}

#[test]
fn solve_prints_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.toml");
    std::fs::write(&cfg, "mode = \"soft\"\nprefetcher = \"cmp\"\n[fixed_parameters]\nfractional_cache = 0.3333333333\n").unwrap();
    let out = fran().arg("solve").arg(&cfg).arg("--trace").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("R_min "));
    assert!(text.contains("iter 1 "));
}

#[test]
fn bad_config_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "swept_parameter = \"mu\"\ngrid = []\nmodes = [\"soft\"]\nprefetchers = [\"cmp\"]\n").unwrap();
    assert!(!fran().arg("sweep").arg(&cfg).status().unwrap().success());
    assert!(!fran().arg("sweep").arg(dir.path().join("missing.toml")).status().unwrap().success());
}

#[test]
fn selftest_passes() {
    let out = fran().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
