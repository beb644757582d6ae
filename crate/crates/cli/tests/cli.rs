use std::process::{Command, Output};

use serde_json::Value;

fn homoment(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homoment")).args(args).env_remove("HOMOMENT_SEED").output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

const TWO_MIX: &str = r#"{"means":[[1.0,0.0],[-0.42857142857142855,0.0]],"weights":[0.3,0.7],"cov":[[1.0,0.0],[0.0,1.0]]}"#;

#[test]
fn defect_table_single_rows() {
    let o = homoment(&["defect-table", "--n", "2", "--k", "2", "--d", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["2", "2", "3", "8", "9", "8", "7", "1", "1"]);

    let o = homoment(&["defect-table", "--n", "1", "--k", "1", "--d", "3", "--format", "csv"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap(), "1,1,3,2,3,2,2,0,0");

    let o = homoment(&["defect-table", "--n", "2", "--k", "3", "--d", "3", "--format", "json", "--check"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["schema"], "homoment/1");
    assert_eq!(v["rows"][0]["dim"], 9);
    assert_eq!(v["check"]["mismatches"].as_array().unwrap().len(), 0);
}

#[test]
fn defect_table_envelope() {
    let o = homoment(&["defect-table", "--n", "9", "--k", "2", "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["code"], "ENVELOPE_EXCEEDED");
}

#[test]
fn fit1d_from_moments() {
    let o = homoment(&["fit1d", "--k", "1", "--moments", "1,3"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["estimate"]["params"]["means"][0][0], 1.0);
    assert_eq!(v["estimate"]["params"]["cov"][0][0], 2.0);

    let o = homoment(&["fit1d", "--k", "2", "--moments", "1,3"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["code"], "INSUFFICIENT_ORDER");
}

#[test]
fn rank_test_on_exact_moments() {
    // 0.5 N(0, 1/4) + 0.5 N(2, 1/4), moments up to order 7
    let m = moments_1d(&[0.0, 2.0], &[0.5, 0.5], 0.25, 7);
    let arg = m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let o = homoment(&["rank-test", "--kmax", "3", "--moments", &arg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["k_hat"], 2);
}

fn moments_1d(means: &[f64], weights: &[f64], var: f64, d: usize) -> Vec<f64> {
    // Gaussian raw moments by the recursion m_j = μ m_{j−1} + (j−1) σ² m_{j−2}
    (1..=d)
        .map(|j| {
            means
                .iter()
                .zip(weights)
                .map(|(&mu, &w)| {
                    let mut m = vec![1.0, mu];
                    for i in 2..=j {
                        m.push(mu * m[i - 1] + (i - 1) as f64 * var * m[i - 2]);
                    }
                    w * m[j]
                })
                .sum()
        })
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = homoment(&["simulate", "--params", TWO_MIX, "--count", "500", "--seed", "7", "--output", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().starts_with("x1,x2\n"));

    let c = dir.path().join("c.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_homoment"))
        .args(["simulate", "--params", TWO_MIX, "--count", "500", "--output", c.to_str().unwrap()])
        .env("HOMOMENT_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&c).unwrap(), std::fs::read(&a).unwrap());
}

#[test]
fn simulate_then_fit2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let o = homoment(&["simulate", "--params", TWO_MIX, "--count", "100000", "--seed", "3", "--output", path.to_str().unwrap()]);
    assert!(o.status.success());
    let o = homoment(&["fit2", "--input", path.to_str().unwrap(), "--order", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let est = &v["estimates"][0]["params"];
    let w = est["weights"][0].as_f64().unwrap();
    assert!((w - 0.3).abs() < 0.05, "{est}");
    assert!((est["means"][0][0].as_f64().unwrap() - 1.0).abs() < 0.15, "{est}");
    assert!((est["cov"][1][1].as_f64().unwrap() - 1.0).abs() < 0.1, "{est}");

    let o = homoment(&["fit2", "--input", path.to_str().unwrap(), "--order", "4"]);
    assert_eq!(stdout_json(&o)["estimates"].as_array().unwrap().len(), 2);
}

#[test]
fn fit2_univariate_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let params = r#"{"means":[[0.0],[3.0]],"weights":[0.4,0.6],"cov":[[1.0]]}"#;
    assert!(homoment(&["simulate", "--params", params, "--count", "50000", "--output", one.to_str().unwrap()]).status.success());
    let o = homoment(&["fit2", "--input", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["method"], "univariate");
    assert_eq!(v["estimates"][0]["params"]["weights"].as_array().unwrap().len(), 2);

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = homoment(&["fit2", "--input", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["code"], "INPUT_EMPTY");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n3,oops\n").unwrap();
    let o = homoment(&["fit2", "--input", bad.to_str().unwrap()]);
    assert_eq!(stderr_json(&o)["error"]["code"], "INPUT_NON_NUMERIC");

    let o = homoment(&["fit2", "--input", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(stderr_json(&o)["error"]["code"], "INPUT_UNREADABLE");

    let sym = dir.path().join("sym.csv");
    std::fs::write(&sym, "x,y\n1,1\n-1,-1\n1,-1\n-1,1\n").unwrap();
    let o = homoment(&["fit2", "--input", sym.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"]["code"], "SYMMETRIC_MIXTURE");
}
