use std::path::PathBuf;
use std::process::{Command, Output};

fn twistlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn polys_k1_and_k0() {
    let o = twistlab(&["polys", "--K", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Q_1 = -s^2  [divisible by s^2: PASS]"));
    let o = twistlab(&["polys", "--K", "0"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with(['Q', 'R', 'V'])).collect();
    assert_eq!(rows, vec!["Q_0 = 1"]);
}

#[test]
fn polys_k8_has_nine_q_rows_all_passing() {
    let csv = scratch("polys8.csv");
    let o = twistlab(&["polys", "--K", "8", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let q_rows: Vec<&str> = text.lines().filter(|l| l.starts_with("Q_")).collect();
    assert_eq!(q_rows.len(), 9);
    for (nu, row) in q_rows.iter().enumerate().skip(1) {
        assert!(row.contains(&format!("[degree {}: PASS]", 2 * nu)), "{row}");
        assert!(row.contains("divisible by") && !row.contains("FAIL"), "{row}");
    }
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("family,index,power,re,im\n"));
    assert!(table.lines().any(|l| l == "Q,8,16,1/40320,0"));
}

#[test]
fn euler_small_primes() {
    let o = twistlab(&["euler", "--primes", "2,3,5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for v in ["4.000000000000", "2.250000000000", "1.562500000000"] {
        assert!(text.contains(&format!("measured {v} (deviation")), "{v}");
    }
    assert_eq!(text.matches("forced: partial degree 2, roots (1.000000000000, 1.000000000000)").count(), 3);
    assert!(text.ends_with("TOTAL: 12 records, 0 failed: PASS\n"));
}

#[test]
fn output_is_deterministic() {
    let a = twistlab(&["euler", "--primes", "3", "--precision", "96"]);
    let b = twistlab(&["euler", "--primes", "3", "--precision", "96"]);
    assert_eq!(a.stdout, b.stdout);
    let args = ["twist-grid", "--sigma-grid", "-3/2,2", "--t", "1", "--alphas", "1/3,2/3"];
    assert_eq!(twistlab(&args).stdout, twistlab(&args).stdout);
}

#[test]
fn guard_rails_exit_two() {
    for args in [
        &["polys", "--K", "17"][..],
        &["verify", "--qmax", "25"],
        &["verify", "--precision", "32"],
        &["euler", "--primes", "17"],
        &["euler", "--primes", "4"],
        &["verify", "--instance", "zeta"],
        &["twist-grid", "--source", "direct", "--sigma-grid", "1/2"],
    ] {
        let o = twistlab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"), "{args:?}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let path = scratch("run.toml");
    std::fs::write(&path, "precision = 64\nsigma_grid = [2, \"5/2\"]\nt = 0\nalphas = [\"1/2\"]\n").unwrap();
    let o = twistlab(&["twist-grid", "--config", path.to_str().unwrap(), "--t", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sigma,t,alpha,re,im");
    assert!(lines[1].starts_with("2,1,1/2,"));
    assert!(lines[2].starts_with("5/2,1,1/2,"));
    std::fs::write(&path, "bogus = 1\n").unwrap();
    assert_eq!(twistlab(&["polys", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn direct_grid_matches_oracle_grid() {
    let base = ["twist-grid", "--sigma-grid", "3", "--t", "2", "--alphas", "1/3", "--precision", "64"];
    let oracle = stdout(&twistlab(&base));
    let mut direct_args = base.to_vec();
    direct_args.extend(["--source", "direct", "--terms", "20000"]);
    let direct = stdout(&twistlab(&direct_args));
    let parse = |s: &str| -> (f64, f64) {
        let f: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
        (f[3].parse().unwrap(), f[4].parse().unwrap())
    };
    let (a, b) = (parse(&oracle), parse(&direct));
    assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6, "{a:?} {b:?}");
}

// Small parameters keep the full chain to a few seconds.
const QUICK: [&str; 10] = ["--K", "1", "--qmax", "1", "--primes", "2", "--alphas", "1/2", "--sigma-grid", "-10,-20,-30"];

#[test]
fn verify_quick_passes_and_sabotage_fails() {
    let mut args = vec!["verify"];
    args.extend(QUICK);
    let o = twistlab(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    // q_max = 1 leaves the laws on q = 1 alone
    assert!(text.contains("c_-2 at a/q = 1:") && !text.contains("a/q = 1/2"));

    let csv = scratch("verify.csv");
    args.extend(["--growth-pairs", "3:1", "--csv", csv.to_str().unwrap()]);
    let o = twistlab(&args);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("[FAIL] q = 3, h = 1, t = 5"));
    assert_eq!(text.matches("[FAIL]").count(), 1);
    let rows = std::fs::read_to_string(csv).unwrap();
    assert!(rows.starts_with("section,name,reference,measured,target,pass\n"));
    assert_eq!(rows.lines().filter(|l| l.ends_with(",FAIL")).count(), 1);
}

#[test]
fn out_file_receives_the_report() {
    let out = scratch("euler.txt");
    let o = twistlab(&["euler", "--primes", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).ends_with(": PASS\n"));
    assert!(std::fs::read_to_string(out).unwrap().contains("== Euler factor at p = 2 =="));
}

#[test]
fn datum_file_instance() {
    let path = scratch("zeta2_datum.toml");
    std::fs::write(
        &path,
        "Q = \"pi^-1\"\nomega = \"1,0\"\npole_order = 2\nfactors = [ { lambda = \"1/2\", mu = \"0\" }, { lambda = \"1/2\", mu = \"0\" } ]\n",
    )
    .unwrap();
    let from_file = stdout(&twistlab(&["polys", "--K", "3", "--instance", path.to_str().unwrap()]));
    let builtin = stdout(&twistlab(&["polys", "--K", "3"]));
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&from_file), body(&builtin));
    // verify is tied to the built-in instance, and a datum file equal to it is accepted
    let o = twistlab(&["euler", "--primes", "2", "--instance", path.to_str().unwrap()]);
    assert!(o.status.success());
    let o = twistlab(&["polys", "--instance", "/nonexistent/datum.toml"]);
    assert_eq!(o.status.code(), Some(2));
}
