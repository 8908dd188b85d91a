use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use laplace_forge::io::{read_graph, read_signals, write_graph, write_signals, GraphEdge, GraphFile};
use laplace_forge::SignalMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laplace-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn random_file(dir: &TempDir, name: &str, n: usize, l: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = SignalMatrix::new(DMatrix::from_fn(n, l, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let path = dir.path().join(name);
    write_signals(&path, &x).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn learn_noiseless_on_32_nodes() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 32, 50, 1);
    let out = dir.path().join("g.json");
    let o = run(&["learn", "noiseless", "--input", p(&input), "--k", "110", "--output", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("candidate_edges: 496"));
    assert!(text.contains("edges: 110"));
    let g = read_graph(&out).unwrap();
    assert_eq!((g.n, g.k, g.edges.len()), (32, 110, 110));
    assert!(g.edges.iter().all(|e| e.i < e.j && e.w == 1.0));
}

#[test]
fn learn_relax_full_budget_selects_every_edge() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 32, 10, 2);
    let out = dir.path().join("g.json");
    let o = run(&["learn", "relax", "--input", p(&input), "--k", "496", "--gamma", "1", "--output", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = read_graph(&out).unwrap();
    assert_eq!(g.edges.len(), 496);
    assert!(g.edges.iter().all(|e| e.w == 1.0));
}

#[test]
fn learn_altmin_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 12, 20, 3);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = run(&["learn", "altmin", "--input", p(&input), "--k", "15", "--seed", "7", "--output", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn denoise_with_zero_gamma_or_empty_graph_is_identity() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 6, 4, 4);
    let graph = dir.path().join("g.json");
    let o = run(&["learn", "noiseless", "--input", p(&input), "--k", "5", "--output", p(&graph)]);
    assert!(o.status.success());
    let out = dir.path().join("y.csv");
    let o = run(&["denoise", "--input", p(&input), "--graph", p(&graph), "--gamma", "0", "--output", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());

    let empty = dir.path().join("empty.json");
    write_graph(&empty, &GraphFile { n: 6, k: 0, edges: vec![] }).unwrap();
    let o = run(&["denoise", "--input", p(&input), "--graph", p(&empty), "--gamma", "3", "--output", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn denoise_two_node_instance() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("y.csv");
    std::fs::write(&input, "1\n0\n").unwrap();
    let graph = dir.path().join("g.json");
    write_graph(&graph, &GraphFile { n: 2, k: 1, edges: vec![GraphEdge { i: 0, j: 1, w: 1.0 }] }).unwrap();
    let out = dir.path().join("x.csv");
    for solver in ["dense", "cg"] {
        let o = run(&[
            "denoise", "--input", p(&input), "--graph", p(&graph), "--gamma", "1", "--solver", solver, "--output",
            p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let x = read_signals(&out, false).unwrap();
        // (I + L)^{-1} = [[2, 1], [1, 2]] / 3
        assert!((x.as_matrix()[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((x.as_matrix()[(1, 0)] - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn denoise_rejects_mismatched_graph() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 5, 3, 5);
    let graph = dir.path().join("g.json");
    write_graph(&graph, &GraphFile { n: 4, k: 0, edges: vec![] }).unwrap();
    let o = run(&["denoise", "--input", p(&input), "--graph", p(&graph), "--output", p(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_expected_shapes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["synth", "--n", "32", "--k", "110", "--l", "50", "--sigma", "0.5", "--seed", "1", "--output", p(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["clean.csv", "noisy.csv"] {
        let x = read_signals(&dir.path().join(f), false).unwrap();
        assert_eq!((x.n(), x.l()), (32, 50));
    }
    let g = read_graph(&dir.path().join("graph.json")).unwrap();
    assert_eq!((g.n, g.edges.len()), (32, 110));
}

#[test]
fn eval_k_sweep_is_non_decreasing() {
    let dir = TempDir::new().unwrap();
    let o = run(&["synth", "--n", "32", "--k", "110", "--l", "50", "--seed", "2", "--output", p(dir.path())]);
    assert!(o.status.success());
    let clean = dir.path().join("clean.csv");
    let o = run(&["eval", "--sweep", "k", "--values", "10:496:10", "--input", p(&clean)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<(usize, f64)> = text
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 49);
    assert_eq!(rows[0].0, 10);
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1));
}

#[test]
fn eval_sigma_sweep_reports_every_learner() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("mse.csv");
    let o = run(&[
        "eval", "--sweep", "sigma", "--values", "0.2,0.6", "--trials", "4", "--n", "8", "--k", "10", "--l", "20",
        "--l-eval", "10", "--seed", "3", "--output", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("sigma,learner,trials,mse,mse_se"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 8);
    let learners: Vec<&str> = rows[..4].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(learners, ["raw", "noiseless", "altmin", "relax"]);
    for r in &rows {
        assert_eq!(r[2], "4");
        let (mse, se): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!(mse > 0.0 && se >= 0.0);
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = random_file(&dir, "x.csv", 6, 4, 6);
    let out = dir.path().join("g.json");

    // K larger than the candidate set
    let o = run(&["learn", "noiseless", "--input", p(&input), "--k", "16", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let o = run(&["learn", "noiseless", "--input", p(&bad), "--k", "1", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column 2"), "{err}");

    let o = run(&["learn", "noiseless", "--k", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["learn", "relax", "--input", p(&input), "--k", "4", "--max-iter", "1", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.exists());
}
