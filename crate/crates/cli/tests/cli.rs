use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use unobs_core::equivalence::ExtendedSpec;
use unobs_core::estimation::{fit_ml, replicate, simulate_cs, FitOptions, SimLayout};
use unobs_core::{CSParams, Seed};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unobs-lab"))
        .args(args)
        .env_remove("UNOBS_LAB_THREADS")
        .output()
        .unwrap()
}

fn ok_stdout(args: &[&str]) -> String {
    let out = lab(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn equivalence_members_share_the_marginal() {
    let recs = json(&[
        "equivalence",
        "--lambda2",
        "2",
        "--nu2",
        "1",
        "--alpha-grid",
        "-1,0,1",
        "--n",
        "2",
    ]);
    let recs = recs.as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        let cov: Vec<f64> = r["marginal_cov"]
            .as_array()
            .unwrap()
            .iter()
            .map(f)
            .collect();
        for (got, want) in cov.iter().zip([3.0, 2.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
    assert!(recs.iter().all(|r| r["marginal_pd"] == Value::Bool(true)));
    let c: Vec<f64> = recs.iter().map(|r| f(&r["shrinkage"])).collect();
    assert!(c[0] != c[1] && c[1] != c[2] && c[0] != c[2]);
}

#[test]
fn negative_component_forces_negative_tau() {
    let recs = json(&[
        "equivalence",
        "--lambda2",
        "-0.5",
        "--nu2",
        "1",
        "--alpha-grid",
        "-1,-0.5,0,0.5,1",
        "--n",
        "2",
    ]);
    let recs = recs.as_array().unwrap();
    assert!(recs.iter().all(|r| f(&r["tau"]) < 0.0));
    // φ + 2λ = 0 sits on the boundary, so no shrinkage is reported
    assert!(recs
        .iter()
        .all(|r| r["marginal_pd"] == Value::Bool(false) && r["shrinkage"].is_null()));
    let recs = json(&[
        "equivalence",
        "--lambda2",
        "-0.3",
        "--nu2",
        "1",
        "--alpha-grid",
        "-1,0,1",
        "--n",
        "3",
    ]);
    assert!(recs
        .as_array()
        .unwrap()
        .iter()
        .all(|r| f(&r["tau"]) < 0.0 && r["shrinkage"].is_f64()));
}

#[test]
fn equivalence_json_round_trips() {
    let recs = json(&[
        "equivalence",
        "--lambda2",
        "0.7",
        "--nu2",
        "1.3",
        "--alpha-grid",
        "-1,-0.3,0.25,0.9",
        "--n",
        "3",
    ]);
    for r in recs.as_array().unwrap() {
        let spec = ExtendedSpec::new(f(&r["lambda2"]), f(&r["nu2"]), f(&r["alpha"])).unwrap();
        assert_eq!(f(&r["d"]), spec.d());
        assert_eq!(f(&r["tau"]), spec.tau());
        for row in ["variance", "covariance"] {
            let t = &r["decomposition"][row];
            assert_eq!(
                f(&t["sigma2"]) + f(&t["d"]) + f(&t["two_tau"]),
                f(&t["total"])
            );
        }
    }
}

#[test]
fn alpha_outside_box_is_a_domain_error() {
    let out = lab(&[
        "equivalence",
        "--lambda2",
        "2",
        "--nu2",
        "1",
        "--alpha-grid",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("[-1, 1]"));
}

#[test]
fn usage_errors_exit_two() {
    let out = lab(&[
        "simulate",
        "--model",
        "cs",
        "--lambda",
        "1",
        "--phi",
        "1",
        "--clusters",
        "3",
        "--cluster-size",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--seed"));
    assert_eq!(lab(&["bogus"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_unobs-lab"))
        .args([
            "heavytail",
            "moments",
            "--phi",
            "1",
            "--rho",
            "1",
            "--delta",
            "1",
            "--k",
            "1",
        ])
        .env("UNOBS_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "cluster,unit,y,x1\na,1,0.5,1\na,2,0.7\nb,1,1.0,1\n").unwrap();
    let out = lab(&["fit", "--data", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn singleton_clusters_are_unidentified() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("single.csv");
    std::fs::write(&p, "cluster,unit,y,x1\na,1,0.5,1\nb,1,0.7,1\nc,1,1.0,1\n").unwrap();
    let out = lab(&["fit", "--data", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not identified"));
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        ok_stdout(&[
            "simulate",
            "--model",
            "cs",
            "--lambda",
            "1",
            "--phi",
            "1",
            "--xi",
            "2",
            "--clusters",
            "200",
            "--cluster-size",
            "2",
            "--seed",
            seed,
            "--out",
            p.to_str().unwrap(),
        ]);
        sha(&p)
    };
    assert_eq!(run("a.csv", "7"), run("b.csv", "7"));
    assert_ne!(run("a.csv", "7"), run("c.csv", "8"));
}

#[test]
fn simulate_then_fit_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    let fitted = dir.path().join("fit.json");
    ok_stdout(&[
        "simulate",
        "--model",
        "cs",
        "--lambda",
        "1",
        "--phi",
        "1",
        "--xi",
        "2",
        "--clusters",
        "200",
        "--cluster-size",
        "2",
        "--seed",
        "7",
        "--out",
        data.to_str().unwrap(),
    ]);
    ok_stdout(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        fitted.to_str().unwrap(),
    ]);
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(&fitted).unwrap()).unwrap();
    assert_eq!(fit["converged"], Value::Bool(true));

    // Monte Carlo standard errors from the same design
    let truth = CSParams::new(vec![2.0], 1.0, 1.0);
    let reps = replicate(Seed(99), 200, |_, s| {
        let d = simulate_cs(&truth, &SimLayout::balanced(200, 2), s).unwrap();
        let p = fit_ml(&d, FitOptions::default()).unwrap().params;
        [p.xi[0], p.lambda, p.phi]
    });
    let sd = |k: usize| {
        let m = reps.iter().map(|r| r[k]).sum::<f64>() / reps.len() as f64;
        (reps.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
    };
    assert!((f(&fit["xi"][0]) - 2.0).abs() < 3.0 * sd(0));
    assert!((f(&fit["lambda"]) - 1.0).abs() < 3.0 * sd(1));
    assert!((f(&fit["phi"]) - 1.0).abs() < 3.0 * sd(2));
}

#[test]
fn extended_simulation_with_latent_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let latent = dir.path().join("latent.csv");
    let csv = ok_stdout(&[
        "simulate",
        "--model",
        "extended",
        "--lambda",
        "1",
        "--phi",
        "1",
        "--alpha",
        "-0.5",
        "--clusters",
        "4",
        "--cluster-size",
        "2",
        "--seed",
        "3",
        "--latent",
        latent.to_str().unwrap(),
    ]);
    assert_eq!(csv.lines().count(), 9);
    let side = std::fs::read_to_string(&latent).unwrap();
    let mut lines = side.lines();
    assert_eq!(lines.next(), Some("cluster,b,eps1,eps2"));
    assert_eq!(lines.count(), 4);

    let out = lab(&[
        "simulate",
        "--model",
        "cs",
        "--lambda",
        "1",
        "--phi",
        "1",
        "--clusters",
        "4",
        "--cluster-size",
        "2",
        "--seed",
        "3",
        "--latent",
        latent.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = lab(&[
        "simulate",
        "--model",
        "extended",
        "--lambda",
        "1",
        "--phi",
        "1",
        "--clusters",
        "4",
        "--cluster-size",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // alpha = 1 is not jointly PSD at n = 2
    let out = lab(&[
        "simulate",
        "--model",
        "extended",
        "--lambda",
        "2",
        "--phi",
        "1",
        "--alpha",
        "1",
        "--clusters",
        "4",
        "--cluster-size",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("eigenvalue"));
}

#[test]
fn eb_loglik_is_invariant_while_predictions_move() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    ok_stdout(&[
        "simulate",
        "--model",
        "cs",
        "--lambda",
        "0.8",
        "--phi",
        "1",
        "--clusters",
        "50",
        "--cluster-size",
        "3",
        "--seed",
        "12",
        "--out",
        data.to_str().unwrap(),
    ]);
    let rep = json(&[
        "eb",
        "--data",
        data.to_str().unwrap(),
        "--alpha-grid",
        "-1,0,1",
    ]);
    let members = rep["members"].as_array().unwrap();
    let ll: Vec<f64> = members.iter().map(|m| f(&m["loglik"])).collect();
    assert!(ll
        .iter()
        .all(|l| (l - ll[0]).abs() < 1e-12 * ll[0].abs().max(1.0)));
    let first: Vec<f64> = members
        .iter()
        .map(|m| f(&m["predictions"][0]["prediction"]))
        .collect();
    assert!(first[0] != first[1] && first[1] != first[2]);
}

#[test]
fn heavytail_moments_tri_state() {
    let recs = json(&[
        "heavytail",
        "moments",
        "--phi",
        "1",
        "--rho",
        "1",
        "--delta",
        "1",
        "--k",
        "1..4",
    ]);
    let recs = recs.as_array().unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs
        .iter()
        .all(|r| r["integral_finite"] == Value::Bool(false) && r["value"].is_null()));
    let recs = json(&[
        "heavytail",
        "moments",
        "--phi",
        "1",
        "--rho",
        "2",
        "--delta",
        "1",
        "--k",
        "1",
    ]);
    assert!((f(&recs[0]["value"]) - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
}

#[test]
fn trace_row_count() {
    let out = ok_stdout(&[
        "heavytail",
        "trace",
        "--phi",
        "1",
        "--rho",
        "1",
        "--delta",
        "1",
        "--n",
        "100000",
        "--stride",
        "100",
        "--seed",
        "3",
    ]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n,running_mean"));
    assert_eq!(lines.count(), 1000);
}

#[test]
fn sample_and_pit_emit_one_value_per_line() {
    let s = ok_stdout(&[
        "heavytail",
        "sample",
        "--phi",
        "1",
        "--rho",
        "1.5",
        "--delta",
        "1",
        "--n",
        "500",
        "--seed",
        "1",
    ]);
    let p = ok_stdout(&[
        "pit",
        "--dist",
        "weibull-exp",
        "--phi",
        "1",
        "--rho",
        "1.5",
        "--delta",
        "1",
        "--n",
        "500",
        "--seed",
        "1",
    ]);
    for text in [&s, &p] {
        let v: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(v.len(), 500);
        assert!(v.iter().all(|x| *x > 0.0 && x.is_finite()));
    }
    let out = lab(&[
        "heavytail",
        "sample",
        "--phi",
        "-1",
        "--rho",
        "1",
        "--delta",
        "1",
        "--n",
        "5",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
