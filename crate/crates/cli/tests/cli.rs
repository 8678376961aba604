use std::process::{Command, Output};

fn run(args: &[&str], shards: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delpezzo"))
        .args(args)
        .env("DELPEZZO_SHARDS", shards)
        .output()
        .expect("binary runs")
}

#[test]
fn count_prints_the_record() {
    let out = run(&["count", "--surface", "s1", "--method", "torsor", "--bound", "100"], "2");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "s1 torsor 100 2222\n");
}

#[test]
fn json_output_is_identical_across_shard_counts() {
    let args = ["count", "--surface", "s1", "--method", "projection", "--bound", "200", "--json"];
    let base = run(&args, "1");
    assert_eq!(base.status.code(), Some(0));
    for shards in ["4", "16"] {
        assert_eq!(run(&args, shards).stdout, base.stdout);
    }
    let peyre = ["peyre", "--surface", "s3", "--samples", "20000", "--truncation", "1000", "--seed", "7"];
    let base = run(&peyre, "1");
    assert_eq!(base.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&base.stdout).unwrap();
    assert_eq!(v["alpha"], "1/21600");
    for shards in ["4", "16"] {
        assert_eq!(run(&peyre, shards).stdout, base.stdout);
    }
}

#[test]
fn manifest_goes_to_stderr() {
    let out = run(&["count", "--surface", "s3", "--method", "exhaustive", "--bound", "5"], "1");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("output_sha256"), "{err}");
}

#[test]
fn bijection_check_succeeds() {
    let out = run(&["verify-bijection", "--surface", "s1", "--bound", "50"], "2");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["torsor_count"], v["oracle_count"]);
}

#[test]
fn usage_and_domain_errors_exit_with_two() {
    assert_eq!(run(&["count", "--surface", "s4", "--method", "torsor", "--bound", "10"], "1").status.code(), Some(2));
    assert_eq!(run(&["count", "--surface", "s1", "--method", "torsor", "--bound", "0"], "1").status.code(), Some(2));
    assert_eq!(run(&["verify-bijection", "--surface", "s1", "--bound", "10", "--oracle", "torsor"], "1").status.code(), Some(2));
    assert_eq!(run(&["count", "--surface", "s1", "--method", "torsor", "--bound", "10"], "0").status.code(), Some(2));
}
