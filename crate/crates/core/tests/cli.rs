//! End-to-end runs of the `netplan` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netplan::io::SolutionFile;

const TWO_NODE: &str = "\
NODES 2
a
b
ARCS 1
e a b 1 1
COMMODITIES 1
k a b
PENALTY 130
";

const THREE_NODE: &str = "\
NODES 3
s
m
t
ARCS 4
sm s m 2 3
mt m t 1 4
st s t 0 9
ms m s 0 1
COMMODITIES 2
k1 s t
k2 s m
PENALTY 60
";

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn netplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netplan")).args(args).env_remove("NETPLAN_THREADS").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = netplan(args);
    assert!(out.status.success(), "netplan {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn solution(path: &Path) -> SolutionFile {
    SolutionFile::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn evaluate_hand_checked_single_arc() {
    let d = Dir::new();
    let inst = d.write("inst.txt", TWO_NODE);
    let sol = d.write(
        "sol.json",
        r#"{"model":"nominal","capacity_mode":"shared","x":{"e":3.0},"d_tilde":null,
            "capacity_cost":3.0,"outsourcing_value":0.0,"objective":3.0}"#,
    );
    let sc = d.write("sc.csv", "scenario_id,d_1\n1,2\n2,5\n3,9\n");
    ok(&[
        "evaluate",
        "--instance",
        &inst,
        "--solution",
        &sol,
        "--scenarios",
        &sc,
        "--per-scenario-csv",
        &d.arg("per.csv"),
        "--out",
        &d.arg("rep.csv"),
    ]);
    let per = data_rows(&d.path("per.csv"));
    let os: Vec<f64> = per.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(os, vec![0.0, 1.0, 5.0]);
    let rep = data_rows(&d.path("rep.csv"));
    assert_eq!(rep[0][0], "3");
    assert_eq!(rep[0][1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(rep[0][2].parse::<f64>().unwrap(), 5.0);
}

#[test]
fn robust_with_one_scenario_matches_nominal() {
    let d = Dir::new();
    let inst = d.write("inst.txt", THREE_NODE);
    let sc = d.write("sc.csv", "scenario_id,d_1,d_2\n1,4.5,2\n");
    ok(&["solve", "--model", "robust", "--instance", &inst, "--scenarios", &sc, "--out", &d.arg("r.json")]);
    ok(&["solve", "--model", "nominal", "--instance", &inst, "--scenarios", &sc, "--out", &d.arg("n.json")]);
    let (r, n) = (solution(&d.path("r.json")), solution(&d.path("n.json")));
    assert!((r.objective - n.objective).abs() <= 1e-9 * (1.0 + n.objective));
}

#[test]
fn drso_objective_matches_library() {
    let d = Dir::new();
    let inst_path = d.write("inst.txt", THREE_NODE);
    let mom = d.write("m.csv", "commodity,mean,variance\n0,6,4\n1,3,9\n");
    ok(&[
        "solve",
        "--model",
        "drso",
        "--instance",
        &inst_path,
        "--moments",
        &mom,
        "--dump-lp",
        &d.arg("g.lp"),
        "--out",
        &d.arg("d.json"),
    ]);
    let sol = solution(&d.path("d.json"));
    let inst = netplan::network::parse_instance(THREE_NODE).unwrap();
    let moments = netplan::io::read_moments_csv(&fs::read_to_string(d.path("m.csv")).unwrap()).unwrap();
    let f = netplan::drso::objective_f(&inst, &moments, sol.d_tilde.as_ref().unwrap(), Default::default()).unwrap();
    assert!((sol.objective - f).abs() <= 1e-9 * (1.0 + f));
    assert!(fs::metadata(d.path("g.lp")).unwrap().len() > 0);
}

#[test]
fn generated_scenarios_have_the_requested_shape() {
    let d = Dir::new();
    ok(&["generate", "scenarios", "--n", "60", "--k", "20", "--seed", "7", "--out", &d.arg("s.csv")]);
    let rows = data_rows(&d.path("s.csv"));
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.len() == 21));
    let values: Vec<f64> = rows.iter().flat_map(|r| r[1..].iter().map(|v| v.parse::<f64>().unwrap())).collect();
    assert!(values.iter().all(|&v| (0.0..=50.0).contains(&v)));
}

#[test]
fn generated_instance_round_trips_and_reruns_identically() {
    let d = Dir::new();
    for name in ["a.txt", "b.txt"] {
        ok(&["generate", "instance", "--topology", "us14", "--commodities", "5", "--seed", "3", "--out", &d.arg(name)]);
    }
    let a = fs::read_to_string(d.path("a.txt")).unwrap();
    assert_eq!(a, fs::read_to_string(d.path("b.txt")).unwrap());
    let inst = netplan::network::parse_instance(&a).unwrap();
    assert_eq!((inst.network.num_nodes(), inst.network.num_arcs(), inst.num_commodities()), (14, 42, 5));
}

#[test]
fn solve_and_evaluate_rerun_byte_identical() {
    let d = Dir::new();
    let inst = d.write("inst.txt", THREE_NODE);
    ok(&["generate", "scenarios", "--n", "30", "--k", "2", "--seed", "1", "--out", &d.arg("s.csv")]);
    let s = d.arg("s.csv");
    for tag in ["1", "2"] {
        let sol = d.arg(&format!("sol{tag}.json"));
        ok(&["solve", "--model", "drso", "--instance", &inst, "--scenarios", &s, "--seed", "1", "--out", &sol]);
        ok(&[
            "--threads",
            tag,
            "evaluate",
            "--instance",
            &inst,
            "--solution",
            &sol,
            "--scenarios",
            &s,
            "--out",
            &d.arg(&format!("r{tag}.csv")),
        ]);
    }
    assert_eq!(fs::read(d.path("sol1.json")).unwrap(), fs::read(d.path("sol2.json")).unwrap());
    assert_eq!(fs::read(d.path("r1.csv")).unwrap(), fs::read(d.path("r2.csv")).unwrap());
}

#[test]
fn experiment_writes_both_csvs() {
    let d = Dir::new();
    let inst = d.write("inst.txt", THREE_NODE);
    ok(&[
        "experiment",
        "--instance",
        &inst,
        "--model",
        "robust",
        "--reps",
        "3",
        "--train-n",
        "10",
        "--eval-n",
        "20",
        "--seed",
        "5",
        "--scale-sweep",
        "--out",
        &d.arg("exp.csv"),
    ]);
    assert_eq!(data_rows(&d.path("exp.csv")).len(), 3);
    assert_eq!(data_rows(&d.path("exp_sweep.csv")).len(), 11);
    let text = fs::read_to_string(d.path("exp.csv")).unwrap();
    assert!(text.starts_with("# seed=5\n"));
}

#[test]
fn bad_input_exits_with_one_and_leaves_no_output() {
    let d = Dir::new();
    let inst = d.write("inst.txt", THREE_NODE);
    let out = d.arg("never.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--model", "drso", "--instance", &inst, "--out", &out],
        vec!["solve", "--model", "robust", "--instance", &inst, "--out", &out],
        vec!["solve", "--model", "drso", "--instance", "/nonexistent/inst.txt", "--out", &out],
        vec!["solve", "--model", "magic", "--instance", &inst, "--out", &out],
        vec!["--threads", "0", "experiment", "--instance", &inst, "--model", "drso", "--seed", "1", "--out", &out],
    ];
    for args in cases {
        let res = netplan(&args);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
        assert!(!d.path("never.json").exists(), "{args:?}");
    }
    let bad = d.write("bad.csv", "scenario_id,d_1,d_2\n1,-3,2\n");
    let res = netplan(&["solve", "--model", "robust", "--instance", &inst, "--scenarios", &bad, "--out", &out]);
    assert_eq!(res.status.code(), Some(1));
    let wrong_k = d.write("k.csv", "scenario_id,d_1\n1,3\n");
    let res = netplan(&["solve", "--model", "robust", "--instance", &inst, "--scenarios", &wrong_k, "--out", &out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!d.path("never.json").exists());
    let leftovers: Vec<_> = fs::read_dir(d.0.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 3, "{leftovers:?}");
}
