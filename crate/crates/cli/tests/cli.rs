use std::path::Path;
use std::process::{Command, Output};

use shapefit::io::{read_instance, read_result};

fn shapefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapefit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Drops the `mean_seconds` column of a sweep CSV.
fn untimed(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(8);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn gen_writes_reproducible_instances() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    let o = shapefit(&["gen", "-n", "4", "-p", "1", "--seed", "3", "--out", path(&a)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "n=4 m=6 bad=0");
    shapefit(&["--seed", "3", "gen", "-n", "4", "-p", "1", "-o", path(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_instance(&a).unwrap().graph.edge_count(), 6);
}

#[test]
fn impossible_generation_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.txt");
    let o = shapefit(&["gen", "-n", "5", "-p", "0", "--out", path(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(shapefit(&["solve", "x.txt", "--algo", "bogus"]).status.code(), Some(2));
    assert_eq!(shapefit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(shapefit(&["gen", "-n", "many"]).status.code(), Some(2));
    assert_eq!(shapefit(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_reports_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, res) = (dir.path().join("i.txt"), dir.path().join("r.txt"));
    shapefit(&["gen", "-n", "30", "-p", "0.5", "-q", "0.1", "--seed", "8", "--out", path(&inst)]);
    let o = shapefit(&["solve", path(&inst), "--algo", "shapefit", "--out", path(&res)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let rfe: f64 = line.split_whitespace().find_map(|w| w.strip_prefix("rfe=")).unwrap().parse().unwrap();
    assert!(rfe < 1e-9, "{line}");
    let r = read_result(&res).unwrap();
    assert_eq!(r.algo, "shapefit");
    assert_eq!(r.locations.len(), 30);
    assert_eq!(r.rfe, Some(rfe));
}

#[test]
fn solve_without_truth_reports_na() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.txt");
    let text = "shapefit-instance v1 d=2 n=3 m=3\n\
                e 0 1 1 0\n\
                e 0 2 0 1\n\
                e 1 2 -0.7071067811865476 0.7071067811865476\n";
    std::fs::write(&inst, text).unwrap();
    for algo in ["shapefit", "shapekick", "lud"] {
        let o = shapefit(&["solve", path(&inst), "--algo", algo]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("rfe=NA"), "{}", stdout(&o));
    }
}

#[test]
fn malformed_instance_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.txt");
    std::fs::write(&inst, "shapefit-instance v1 d=2 n=3 m=1\ne 0 nine 1 0\n").unwrap();
    let o = shapefit(&["solve", path(&inst)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn sweep_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let o = shapefit(&[
            "sweep",
            "-n",
            "25",
            "--p-grid",
            "0.4,0.8",
            "--q-grid",
            "0,0.2",
            "--trials",
            "2",
            "--algos",
            "shapefit,lud",
            "--max-iters",
            "3000",
            "--seed",
            "11",
            "--workers",
            workers,
            "--out",
            path(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let one = run("1", "a.csv");
    assert!(one.starts_with("algo,n,p,q,sigma,mean_rfe,median_rfe,exact_frac,mean_seconds,error\n"));
    assert_eq!(one.lines().count(), 9);
    assert_eq!(untimed(&one), untimed(&run("1", "b.csv")));
    assert_eq!(untimed(&one), untimed(&run("3", "c.csv")));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small noise curve\nn = 20\nsigmas = 0.01\ntrials = 2\nalgos = shapefit\nseed = 4\n")
        .unwrap();
    let o = shapefit(&["--config", path(&cfg), "noise-curve"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "algo,sigma,mean_rfe");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("shapefit,0.01,"));

    // explicit flags win over the file, wherever they appear
    let o = shapefit(&["--seed", "4", "--config", path(&cfg), "noise-curve", "--sigmas", "0.02,0.03"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3, "{text}");
    let again = shapefit(&["--config", path(&cfg), "noise-curve", "--sigmas", "0.02,0.03", "--seed", "4"]);
    assert_eq!(text, stdout(&again));

    std::fs::write(&cfg, "n 20\n").unwrap();
    assert_eq!(shapefit(&["--config", path(&cfg), "noise-curve"]).status.code(), Some(2));
}

#[test]
fn oracle_command_solves_small_instances() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, res) = (dir.path().join("i.txt"), dir.path().join("r.txt"));
    shapefit(&["gen", "-n", "7", "-p", "1", "--seed", "2", "--out", path(&inst)]);
    for program in ["shapefit", "lud"] {
        let o = shapefit(&["oracle", path(&inst), "--program", program, "--out", path(&res)]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).starts_with(&format!("program={program} ")));
        assert_eq!(read_result(&res).unwrap().algo, format!("oracle-{program}"));
    }
    let big = dir.path().join("big.txt");
    shapefit(&["gen", "-n", "40", "-p", "0.3", "--out", path(&big)]);
    assert_eq!(shapefit(&["oracle", path(&big)]).status.code(), Some(1));
}
