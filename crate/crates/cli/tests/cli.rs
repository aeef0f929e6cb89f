//! Runs the `abctk` binary on small toy workflows.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const EST: &str = "[PARAMETERS]
0 mu unif -2 2 output
0 sigma2 unif 0.1 3 output
[RULES]
[COMPLEX PARAMETERS]
";

const OBS: &str = "mean\tvar\tmedian\tmin\tmax\trange\tQ1\tQ3
0.102\t1.14\t0.1\t-2.4\t2.5\t4.9\t-0.6\t0.8
";

fn abctk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abctk"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn simulate(dir: &Path, model: &str, out: &str) {
    let o = abctk(
        dir,
        &[
            "task=simulate",
            "estName=toy.est",
            &format!("simProgram=builtin:{model}"),
            "numSims=2000",
            &format!("outName={out}"),
            "seed=1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.est"), EST).unwrap();
    fs::write(dir.path().join("obs.txt"), OBS).unwrap();
    dir
}

#[test]
fn simulate_then_estimate_with_model_choice() {
    let dir = setup();
    let d = dir.path();
    simulate(d, "toy-normal", "normal");
    simulate(d, "toy-uniform", "uniform");
    fs::write(
        d.join("est.input"),
        "task estimate\nsimName normal_sampling1.txt;uniform_sampling1.txt\nobsName obs.txt\n\
         params 1-2\nnumRetained 100\nmaxReadSims 2000\noutputPrefix toy\n",
    )
    .unwrap();
    let o = abctk(d, &["est.input", "seed=2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "toy_modelFit_Obs0.txt",
        "toy_model0_MarginalPosteriorDensities_Obs0.txt",
        "toy_model1_MarginalPosteriorCharacteristics_Obs0.txt",
    ] {
        assert!(d.join(f).exists(), "missing {f}");
    }
    let fit = fs::read_to_string(d.join("toy_modelFit_Obs0.txt")).unwrap();
    let p_normal: f64 = fit.lines().nth(1).unwrap().split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(p_normal > 0.99, "{fit}");
}

#[test]
fn same_seed_gives_identical_tables() {
    let dir = setup();
    let d = dir.path();
    simulate(d, "toy-normal", "a");
    simulate(d, "toy-normal", "b");
    assert_eq!(
        fs::read(d.join("a_sampling1.txt")).unwrap(),
        fs::read(d.join("b_sampling1.txt")).unwrap()
    );
}

#[test]
fn find_pls_then_transform() {
    let dir = setup();
    let d = dir.path();
    simulate(d, "toy-normal", "normal");
    let o = abctk(d, &["task=findPLS", "simName=normal_sampling1.txt", "params=1-2", "numComponents=4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = abctk(
        d,
        &[
            "task=transform",
            "input=normal_sampling1.txt",
            "output=pls.txt",
            "linearComb=PLSdef.txt",
            "numLinearComb=2",
            "params=1-2",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.join("pls.txt")).unwrap();
    assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 4);
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(abctk(d, &["task=nope"]).status.code(), Some(1));
    assert_eq!(abctk(d, &[]).status.code(), Some(1));
    let o = abctk(
        d,
        &["task=estimate", "simName=missing.txt", "obsName=obs.txt", "params=1-2", "numRetained=10", "maxReadSims=10"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let o = abctk(
        d,
        &["task=simulate", "estName=toy.est", "simProgram=/nonexistent/sim", "numSims=3", "outName=x", "seed=1"],
    );
    assert_ne!(o.status.code(), Some(0));
}
