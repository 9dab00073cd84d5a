use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mixclass(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixclass")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const INSTANCE: &str = "12 2 0\n2 0:0.6 3:0.8\n2 1:-1 3:1\n";

#[test]
fn setfam_construct_then_verify() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = mixclass(&["setfam", "construct", "--kind", "cff", "--n", "8", "--r", "2", "--t", "2", "--seed", "3", "--out", "f.txt"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("f.txt")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("cff 2 2"));
    assert_eq!(text.lines().count(), 9);
    let out = mixclass(&["setfam", "verify", "--in", "f.txt", "--r", "2", "--t", "2"], d);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "valid");

    // Every set is a subset of the union of all sets, so no family of 3 sets is 2-union-free.
    write(&dir, "bad.txt", "3 3 custom\n0 1\n1 2\n0 2\n");
    let out = mixclass(&["setfam", "verify", "--in", "bad.txt", "--t", "2"], d);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "invalid");
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn oracle_simulate_emits_counts() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "inst.txt", INSTANCE);
    let q = write(&dir, "q.txt", "3:1\n# comment\n0:1 1:1\n");
    let out = mixclass(&["oracle", "simulate", "--instance", &inst, "--query-file", &q, "--batch", "48", "--seed", "1"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // <e_0 + e_1, beta^2> = -1/sqrt 2 and <., beta^1> = 0.6.
    assert_eq!(text, "query_id,pos,neg,z,nz,calls\n0,2,0,0,2,96\n1,1,1,0,2,96\n");
}

#[test]
fn support_recover_writes_matrix() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "inst.txt", INSTANCE);
    let out = mixclass(&["support", "recover", "--instance", &inst, "--k", "2", "--ell", "2", "--seed", "4", "--out", "s.csv", "--exact-oracle"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(&lines[..6], &["coordinate,col_1,col_2", "rep,0,1", "sign,+1,-1", "0,1,0", "1,0,1", "2,0,0"]);
    assert_eq!(lines[6], "3,1,1");
    assert_eq!(lines.len(), 15);
}

#[test]
fn recover_writes_result_and_estimates() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "inst.txt", INSTANCE);
    let out = mixclass(&["recover", "two-stage", "--instance", &inst, "--k", "2", "--ell", "2", "--epsilon", "0.2", "--seed", "2", "--out", "r.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(text.starts_with("component,rep_coord,rep_sign,l2_error,queries_used\n0,0,+1,"));
    for line in text.lines().skip(1) {
        let err: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(err < 0.3, "{line}");
    }
    let est = fs::read_to_string(dir.path().join("r.estimates")).unwrap();
    assert!(est.starts_with("12 2 0\n"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.cfg", "kind = support-sim\nbogus = 1\n");
    assert_eq!(mixclass(&["experiment", "--config", &cfg], dir.path()).status.code(), Some(2));
    // beta^2's support is contained in beta^1's: no representative.
    let nested = write(&dir, "nested.txt", "6 2 0\n2 0:0.6 1:0.8\n1 1:1\n");
    let out = mixclass(&["support", "recover", "--instance", &nested, "--k", "2", "--ell", "2", "--out", "s.csv", "--exact-oracle"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mixclass(&["support", "recover", "--instance", "missing.txt", "--k", "2", "--ell", "2", "--out", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = "kind = support-sim\nn = 40\nk = 2\nseeds = 0..3\nrows = 0, 50, 400\nout = a.csv\nplot = a.dat\n";
    write(&dir, "a.cfg", cfg);
    write(&dir, "b.cfg", &cfg.replace("a.csv", "b.csv").replace("a.dat", "b.dat"));
    for c in ["a.cfg", "b.cfg"] {
        let out = mixclass(&["experiment", "--config", c], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("rows,mean_hamming,stderr\n0,"));
    assert!(dir.path().join("a.dat").exists());
}

#[test]
fn movielens_experiment_on_fixture() {
    let dir = TempDir::new().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let cfg = format!(
        "kind = movielens\nratings = {}\nmovies = {}\nusers = 1,2\nmin_common = 9\nm1 = 9\nm2 = 9\nseeds = 0..10\nout = ml.csv\n",
        fixtures.join("ratings.csv").display(),
        fixtures.join("movies.csv").display()
    );
    write(&dir, "ml.cfg", &cfg);
    let out = mixclass(&["experiment", "--config", "ml.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("ml.csv")).unwrap();
    assert_eq!(text, "user1,user2,m1,m2,acc1,prec1,rec1,acc2,prec2,rec2\n1,2,9,9,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000\n");
}
