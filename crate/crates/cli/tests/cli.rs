use std::process::Command;

use nlschwarz_cli::config::SolverKind;
use nlschwarz_cli::experiments::{dirichlet_problem, neumann_problem, solve, NeumannData, SolveParams, SPLIT};

fn nlschwarz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlschwarz"))
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let st = nlschwarz().args(["solve-dirichlet", "--h", "0.1", "--out"]).arg(out).status().unwrap();
        assert!(st.success());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert!(String::from_utf8(ta).unwrap().starts_with("iteration,residual\n0,"));
    let sa = std::fs::read(dir.path().join("a.solution.csv")).unwrap();
    let sb = std::fs::read(dir.path().join("b.solution.csv")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "h = 0.25\nsolver = additive\n").unwrap();
    let out = nlschwarz().args(["solve-dirichlet", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("h=0.25") && log.contains("solver=additive"), "{log}");
    let out = nlschwarz().args(["solve-dirichlet", "--solver", "gmres-bgs", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver=gmres-bgs"));
}

#[test]
fn exit_codes() {
    // too few iterations: runs but does not converge
    let st = nlschwarz().args(["solve-dirichlet", "--h", "0.25", "--max-iters", "2"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = nlschwarz().args(["solve-dirichlet", "--h", "0.3"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = nlschwarz().args(["solve-neumann", "--solver", "additive"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = nlschwarz().args(["solve-dirichlet", "--theta", "5"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn neumann_run_flags_assumed_flux() {
    let out = nlschwarz().args(["solve-neumann", "--h", "0.25"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("g^N = 0"));
}

#[test]
fn patch_and_bench_single_point() {
    let out = nlschwarz().args(["patch-test", "--h", "0.25", "--tol", "1e-11"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("max nodal error"));
    let out = nlschwarz().args(["gmres-bench", "--h", "0.1"]).output().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,s,delta2,solver,iterations,cond_estimate");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("0.1,0.5,0.1,gmres-bgs,"));
}

#[test]
fn matrix_market_export() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("a.mtx");
    let st = nlschwarz().args(["solve-dirichlet", "--h", "0.25", "--matrix-out"]).arg(&m).output().unwrap();
    assert!(st.status.success());
    let a =
        nlschwarz_cli::io::read_matrix_market(&mut std::io::BufReader::new(std::fs::File::open(&m).unwrap())).unwrap();
    let d = dirichlet_problem(SPLIT, 0.25, 0.1, 0.5, [5.0, 5.0, 1.0]).unwrap();
    assert_eq!(a, d.system.a);
}

#[test]
fn zero_data_gives_zero_solution() {
    let params =
        SolveParams { solver: SolverKind::Multiplicative, tol: 1e-9, inner_tol: 1e-12, max_iters: 100, theta: 1.0 };
    let d = dirichlet_problem(SPLIT, 0.1, 0.1, 0.5, [0.0; 3]).unwrap();
    let (u, trace) = solve(&d, &params, None).unwrap();
    assert!(trace.converged && trace.iterations == 0 && u.iter().all(|x| *x == 0.0));
    let data = NeumannData { forcing: [0.0; 2], ..Default::default() };
    let n = neumann_problem(SPLIT, 0.1, 0.1, &data).unwrap();
    let (u, trace) = solve(&n, &params, None).unwrap();
    assert!(trace.converged && u.iter().all(|x| *x == 0.0));
}

#[test]
fn neumann_iterations_do_not_grow_with_refinement() {
    let params =
        SolveParams { solver: SolverKind::Multiplicative, tol: 1e-9, inner_tol: 1e-12, max_iters: 10_000, theta: 1.0 };
    let its: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let d = neumann_problem(SPLIT, h, 0.1, &NeumannData::default()).unwrap();
            let (_, t) = solve(&d, &params, None).unwrap();
            assert!(t.converged);
            t.iterations as f64
        })
        .collect();
    let (lo, hi) = its.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi <= 1.3 * lo, "{its:?}");
}
