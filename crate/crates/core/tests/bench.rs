use std::process::Command;

use dfo_sparse::bench::*;
use dfo_sparse::driver::ModelNorm;

fn rec(problem: &str, solver: ModelNorm, fevals: Option<usize>) -> BenchmarkRecord {
    BenchmarkRecord {
        problem: problem.to_string(),
        n: 2,
        solver,
        acc: 6,
        fevals,
        final_f: 0.0,
        final_gnorm: 0.0,
        wall_time: 0.0,
    }
}

fn rho_at(p: &ProfileTable, solver: ModelNorm, tau: f64) -> f64 {
    let s = p.solvers.iter().position(|l| l == solver.label()).unwrap();
    let k = p.tau.iter().rposition(|t| *t <= tau).unwrap();
    p.rho[s][k]
}

use ModelNorm::{Frobenius as A, L1 as B};

#[test]
fn two_point_profile() {
    let p = performance_profile(&[rec("P", A, Some(10)), rec("P", B, Some(20))], 6).unwrap();
    assert_eq!(rho_at(&p, A, 1.0), 1.0);
    assert_eq!(rho_at(&p, B, 1.0), 0.0);
    assert_eq!(rho_at(&p, B, 2.0), 1.0);
    assert!(p.tau.contains(&2.0));
}

#[test]
fn ties_credit_both_solvers() {
    let recs = vec![
        rec("P", A, Some(7)),
        rec("P", B, Some(7)),
        rec("Q", A, Some(30)),
        rec("Q", B, Some(30)),
    ];
    let p = performance_profile(&recs, 6).unwrap();
    for row in &p.rho {
        assert!(row.iter().all(|v| *v == 1.0));
    }
}

#[test]
fn three_problem_profile() {
    let recs = vec![
        rec("P1", A, Some(10)),
        rec("P1", B, Some(20)),
        rec("P2", A, Some(30)),
        rec("P2", B, Some(15)),
        rec("P3", A, None),
        rec("P3", B, Some(40)),
    ];
    let p = performance_profile(&recs, 6).unwrap();
    assert!((rho_at(&p, A, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((rho_at(&p, B, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    let last = *p.tau.last().unwrap();
    assert!(last < FAIL_RATIO);
    assert!((rho_at(&p, A, last) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(rho_at(&p, B, last), 1.0);
    for row in &p.rho {
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
        assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(p.tau.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn profile_needs_records() {
    assert!(performance_profile(&[], 6).is_err());
    assert!(performance_profile(&[rec("P", A, Some(1))], 4).is_err());
    assert!(performance_profile(&[rec("P", A, Some(1)), rec("Q", B, Some(1))], 6).is_err());
}

#[test]
fn empty_records_give_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    write_records_csv(&[], &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "problem,n,solver,acc,fevals,final_f,final_gnorm,status\n"
    );
    assert!(read_records_csv(&path).unwrap().is_empty());
}

#[test]
fn benchmark_round_trip_and_protocol() {
    let mut cfg = BenchConfig::new(
        ProblemSpec::parse_list("DQDRTIC,ARWHEAD:6,SROSENBR:6").unwrap(),
        Preset::Table1,
    );
    cfg.accs = vec![4, 6, 16];
    let records = run_benchmark(&cfg).unwrap();
    assert_eq!(records.len(), 3 * 2 * 3);
    for r in &records {
        assert_eq!(r.fevals.is_none(), r.status() == "FAIL");
        if let Some(t) = r.fevals {
            assert!(t >= 1);
        }
        if r.acc == 16 {
            assert!(r.fevals.is_none() || r.final_f <= 1e-16, "{r:?}");
        }
    }
    let dq: Vec<_> = records
        .iter()
        .filter(|r| r.problem == "DQDRTIC" && r.acc == 6)
        .collect();
    assert!(dq.iter().all(|r| (10..=200).contains(&r.fevals.unwrap())));

    let dir = tempfile::tempdir().unwrap();
    let profiles = profiles_for(&records).unwrap();
    let written = emit_outputs(&records, &profiles, dir.path()).unwrap();
    assert_eq!(written.len(), 5);
    let back = read_records_csv(&dir.path().join("records.csv")).unwrap();
    assert_eq!(profiles_for(&back).unwrap(), profiles);
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(
            (a.fevals, a.final_f, a.final_gnorm),
            (b.fevals, b.final_f, b.final_gnorm)
        );
    }

    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = profile.lines();
    assert_eq!(lines.next().unwrap(), "tau,rho_DFO-TR-Frob,rho_DFO-TR-l1");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for w in rows.windows(2) {
        for c in 0..3 {
            assert!(w[0][c] <= w[1][c]);
        }
    }
    assert_eq!(
        profile,
        std::fs::read_to_string(dir.path().join("profile_acc16.csv")).unwrap()
    );
}

#[test]
fn table3_dqdrtic_favors_l1() {
    let mut cfg = BenchConfig::new(ProblemSpec::parse_list("DQDRTIC").unwrap(), Preset::Table3);
    cfg.accs = vec![6];
    let records = run_benchmark(&cfg).unwrap();
    let get = |s| {
        records
            .iter()
            .find(|r| r.solver == s)
            .unwrap()
            .fevals
            .unwrap()
    };
    assert_eq!(records[0].n, 20);
    assert!(get(ModelNorm::L1) <= get(ModelNorm::Frobenius));
}

#[test]
fn configuration_errors() {
    assert!(Preset::parse("table2").is_err());
    assert!(parse_solver("newuoa").is_err());
    assert!(ProblemSpec::parse("WOODS:x").is_err());
    let all = ProblemSpec::parse_list("all").unwrap();
    assert_eq!(all.len(), 14);
    let cfg = BenchConfig::new(
        ProblemSpec::parse_list("SYNTH_SPARSE_QUAD").unwrap(),
        Preset::Table1,
    );
    assert!(run_benchmark(&cfg).is_err());
    let cfg = BenchConfig::new(ProblemSpec::parse_list("NOPE").unwrap(), Preset::Table1);
    assert!(run_benchmark(&cfg).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfo-sparse"))
}

#[test]
fn cli_lists_problems() {
    let out = cli().arg("--list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .eq(["name", "n", "NNZH"]));
    assert!(text
        .lines()
        .any(|l| l.split_whitespace().eq(["DQDRTIC", "10", "10"])));
}

#[test]
fn cli_bench_recover_and_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args([
            "bench",
            "--problems",
            "DQDRTIC:6",
            "--acc",
            "4,6",
            "--seed",
            "3",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("records.csv").exists());
    assert!(dir.path().join("profile_acc4.csv").exists());

    let out = cli()
        .args([
            "recover", "--n", "3", "--h", "2", "--p-grid", "6,10", "--trials", "4", "--seed", "1",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("recovery.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);

    let out = cli()
        .args([
            "solve",
            "--problem",
            "dqdrtic",
            "--n",
            "5",
            "--solver",
            "frob",
            "--trace",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("DFO-TR-Frob") && text.contains("termination"));
}

#[test]
fn cli_reports_configuration_errors() {
    for args in [
        vec!["solve", "--problem", "NOPE"],
        vec!["bench", "--preset", "bogus"],
        vec!["bench", "--solvers", "newuoa"],
        vec!["recover", "--n", "3", "--p-grid", "99"],
        vec![],
    ] {
        let out = cli().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
    }
    let out = cli()
        .args([
            "bench",
            "--problems",
            "DQDRTIC:4",
            "--out",
            "/proc/definitely/not/here",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
