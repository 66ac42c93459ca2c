//! End-to-end checks of the `slicegrad` binary: CSV shapes, exit codes,
//! seeding, and byte-level reproducibility across thread counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slicegrad"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn slicegrad")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bench_quad_row_count_matches_grid() {
    let out = run(&[
        "bench-quad",
        "--dims",
        "1,2,3,4",
        "--noise",
        "1.0",
        "--estimators",
        "glr,slrg,trrg:0.5,brg:1.5",
        "--seed",
        "0",
        "--samples",
        "10",
        "--repeats",
        "100",
        "--bootstrap",
        "50",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "estimator,dim,noise_sigma,variance,ci_low,ci_high,samples,repeats,seed"
    );
    assert_eq!(lines.count(), 16);
}

#[test]
fn identical_invocations_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let render = |threads: &str, name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = run(&[
            "bench-quad",
            "--dims",
            "1,3",
            "--estimators",
            "glr,slrg",
            "--samples",
            "10",
            "--repeats",
            "100",
            "--bootstrap",
            "50",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(&path).unwrap()
    };
    let a = render("1", "a.csv");
    let b = render("4", "b.csv");
    assert_eq!(a, b);
}

#[test]
fn seed_env_var_is_a_fallback_only() {
    let flag = bin()
        .args(["c-table"])
        .env("SLICEGRAD_SEED", "99")
        .output()
        .unwrap();
    assert!(flag.status.success());
    // c-table output is seed independent; use bench to check seeding.
    let with_env = bin()
        .args(["bench-quad", "--dims", "1", "--estimators", "glr", "--samples", "10", "--repeats", "100", "--bootstrap", "50"])
        .env("SLICEGRAD_SEED", "123")
        .output()
        .unwrap();
    let with_flag = run(&[
        "bench-quad", "--dims", "1", "--estimators", "glr", "--samples", "10", "--repeats", "100",
        "--bootstrap", "50", "--seed", "123",
    ]);
    assert_eq!(stdout_str(&with_env), stdout_str(&with_flag));
    // explicit flag beats the environment
    let flag_beats_env = bin()
        .args(["bench-quad", "--dims", "1", "--estimators", "glr", "--samples", "10", "--repeats", "100", "--bootstrap", "50", "--seed", "123"])
        .env("SLICEGRAD_SEED", "55")
        .output()
        .unwrap();
    assert_eq!(stdout_str(&flag_beats_env), stdout_str(&with_flag));
}

#[test]
fn c_table_has_eight_rows() {
    let out = run(&["c-table"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "c,dim_minus_one,accuracy_t,dim_minus_one_paper"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    // spot-check the printed integer comparison column
    assert!(rows[0].starts_with("0.1,"));
    assert!(rows[0].ends_with(",4523"));
    assert!(rows[7].starts_with("1,") || rows[7].starts_with("1.0,"));
    assert!(rows[7].ends_with(",19"));
}

#[test]
fn dist_check_emits_histogram_csv() {
    let out = run(&[
        "dist-check", "--dist", "bdist", "--mu", "0", "--sigma", "1", "--n", "20000", "--bins",
        "32",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,empirical_density,analytic_pdf");
    assert_eq!(lines.count(), 32);
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("chi-square"), "{summary}");
}

#[test]
fn estimator_spellings_round_trip_through_the_report() {
    let out = run(&[
        "bench-quad", "--dims", "1", "--estimators", "glr,slrg,trrg:0.25,brg:1.2", "--samples",
        "10", "--repeats", "100", "--bootstrap", "50",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    for spelling in ["glr,", "slrg,", "trrg:0.25,", "brg:1.2,"] {
        assert!(text.contains(spelling), "missing {spelling}");
    }
}

#[test]
fn usage_errors_exit_two_runtime_errors_exit_one() {
    let bad_estimator = run(&["bench-quad", "--dims", "1", "--estimators", "frobnicate"]);
    assert_eq!(bad_estimator.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_estimator.stderr).contains("usage"));

    let bad_flag = run(&["bench-quad", "--frobnicate"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let bad_subcommand = run(&["transmogrify"]);
    assert_eq!(bad_subcommand.status.code(), Some(2));

    let unwritable = run(&[
        "c-table",
        "--out",
        "/nonexistent-directory-xyz/table.csv",
    ]);
    assert_eq!(unwritable.status.code(), Some(1));

    let bad_dist = run(&["dist-check", "--dist", "cauchy"]);
    assert_eq!(bad_dist.status.code(), Some(2));
}

#[test]
fn es_train_runs_and_flags_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "objective=sphere\ndim=4\npopsize=8\nsigma=0.2\nlr=0.05\niterations=6\neval_every=2\nestimator=glr\nseed=3\n",
    )
    .unwrap();
    let base = run_es(&cfg, &[]);
    let mut lines = base.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,mean_train_reward,eval_reward,grad_variance,elapsed_ms"
    );
    assert_eq!(lines.count(), 6);

    // The iterations flag overrides the file.
    let short = run_es(&cfg, &["--iterations", "3"]);
    assert_eq!(short.lines().count(), 1 + 3);

    // Deterministic apart from the wall-clock column.
    let again = run_es(&cfg, &[]);
    assert_eq!(strip_elapsed(&base), strip_elapsed(&again));
}

fn run_es(cfg: &Path, extra: &[&str]) -> String {
    let mut args = vec!["es-train", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    stdout_str(&out)
}

fn strip_elapsed(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
        .collect()
}
