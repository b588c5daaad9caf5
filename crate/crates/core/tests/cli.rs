use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddlekit")).args(args).output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn count_on_square_torus_is_primitive_count() {
    let o = run(&["count", "--surface", &data("torus.json"), "--radius", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut expected = 0;
    for x in -10i64..=10 {
        for y in -10i64..=10 {
            if x * x + y * y <= 100 && gcd(x, y) == 1 {
                expected += 1;
            }
        }
    }
    assert_eq!(json_out(&o)["count"], expected);
    let exact = run(&["torus-exact", "--radius", "10"]);
    assert_eq!(json_out(&exact)["count"], expected);
}

#[test]
fn bad_edge_sum_is_a_domain_error() {
    let o = run(&["validate", "--surface", &data("bad_edge_sum.json")]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["code"], "EDGE_SUM");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["count"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn mc_torus_is_reproducible() {
    let args = ["mc-torus", "--samples", "10000", "--radius", "10", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json_out(&a)["seed"], 7);
}

#[test]
fn enumerate_writes_csv() {
    let o = run(&["--format", "csv", "enumerate", "--surface", &data("torus.json"), "--radius", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("x_num,x_den"));
    // the primitive vectors of length at most 2
    assert_eq!(lines.count(), 8);
}

#[test]
fn delaunay_certifies_every_triangle() {
    let o = run(&["delaunay", "--surface", &data("octagon.json")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    let tris = v["triangles"].as_array().unwrap().len();
    assert_eq!(v["certificates"].as_array().unwrap().len(), tris);
}

#[test]
fn chew_check_finds_no_violations() {
    let o = run(&["chew-check", "--surface", &data("slit.json"), "--radius", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["violations"], 0);
    assert!(v["connections"].as_u64().unwrap() > 0);
}
