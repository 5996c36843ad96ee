//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p hypernn-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use common::{
    conv_oracle, dense_oracle, layer_grad_error, max_rel_diff, model_grad_error, product,
    random_conv, random_dense,
};
use hypernn::algebra::{cayley_dickson, PREDEFINED_NAMES};
use hypernn::layers::{init_rng, Activation, Dense, HyperConv, HyperDense, Layer};
use hypernn::{predefined, Sequential, StructureConstants, Tensor};
use hypernn_cli::{Cli, Command};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_algebras() -> Vec<(&'static str, Arc<StructureConstants>)> {
    PREDEFINED_NAMES
        .iter()
        .map(|&n| (n, Arc::new(predefined(n).unwrap())))
        .collect()
}

fn algebra_laws() -> Check {
    for (name, alg) in all_algebras() {
        ensure(alg.check_unit(), || format!("{name} fails the unit law"))?;
        let assoc = alg.check_associative();
        ensure(assoc == (name != "Octonions"), || {
            format!("{name}: associative = {assoc}")
        })?;
    }
    let octonions = predefined("Octonions").unwrap();
    ensure(octonions.check_alternative(), || {
        "Octonions not alternative".into()
    })?;

    let mut rng = common::rng(1);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for name in ["Complex", "Quaternions", "Octonions"] {
        let alg = predefined(name).unwrap();
        for _ in 0..100 {
            let a = common::uniform(&mut rng, alg.dim());
            let b = common::uniform(&mut rng, alg.dim());
            let expected = norm(&a) * norm(&b);
            let rel = (norm(&product(&alg, &a, &b)) - expected).abs() / expected;
            worst = worst.max(rel);
        }
    }
    ensure(worst <= 1e-10, || {
        format!("norm composition error {worst:e}")
    })?;
    Ok(format!(
        "10 tables, worst norm composition error {worst:.1e}"
    ))
}

fn cayley_dickson_chain() -> Check {
    let chain = ["Reals", "Complex", "Quaternions", "Octonions"];
    for pair in chain.windows(2) {
        let doubled = cayley_dickson(&predefined(pair[0]).unwrap());
        let target = predefined(pair[1]).unwrap();
        ensure(doubled.tensor() == target.tensor(), || {
            format!("CD({}) differs from {}", pair[0], pair[1])
        })?;
    }
    Ok("CD(R)=C, CD(C)=H, CD(H)=O exactly".into())
}

fn two_path() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (s, (name, alg)) in all_algebras().into_iter().enumerate() {
        let mut rng = common::rng(500 + s as u64);
        for _ in 0..20 {
            let case = random_dense(&alg, &mut rng);
            let got = case
                .layer
                .forward(&case.x)
                .map_err(|e| e.to_string())?
                .to_vec();
            let err = max_rel_diff(&got, &dense_oracle(&alg, &case));
            ensure(err <= 1e-12, || format!("{name} dense error {err:e}"))?;
            worst = worst.max(err);
            cases += 1;
        }
        for d in 1..=3 {
            for _ in 0..10 {
                let case = random_conv(&alg, d, &mut rng);
                let got = case.layer.forward(&case.x).map_err(|e| e.to_string())?;
                let (shape, want) = conv_oracle(&alg, &case);
                ensure(got.shape() == &shape[..], || {
                    format!("{name} conv{d}d shape {:?}", got.shape())
                })?;
                let err = max_rel_diff(&got.to_vec(), &want);
                ensure(err <= 1e-12, || format!("{name} conv{d}d error {err:e}"))?;
                worst = worst.max(err);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} instances, worst error {worst:.1e}"))
}

fn gradients() -> Check {
    let mut worst = 0.0f64;
    let mut record = |what: &str, err: hypernn::Result<f64>| -> Result<(), String> {
        let err = err.map_err(|e| format!("{what}: {e}"))?;
        ensure(err < 1e-6, || format!("{what}: relative error {err:e}"))?;
        worst = worst.max(err);
        Ok(())
    };
    let mut rng = common::rng(77);
    for (name, alg) in all_algebras() {
        let case = random_dense(&alg, &mut rng);
        let layer = Layer::HyperDense(case.layer.with_activation(Activation::Tanh));
        record(
            &format!("HyperDense {name}"),
            layer_grad_error(&layer, &case.x, &mut rng),
        )?;
    }
    for name in ["Complex", "Quaternions", "Cl20"] {
        let alg = Arc::new(predefined(name).unwrap());
        for d in 1..=3 {
            let case = random_conv(&alg, d, &mut rng);
            let layer = Layer::HyperConv(case.layer.with_activation(Activation::Sigmoid));
            record(
                &format!("HyperConv{d}D {name}"),
                layer_grad_error(&layer, &case.x, &mut rng),
            )?;
        }
    }
    let x = Tensor::new(&[3, 5], common::uniform(&mut rng, 15)).unwrap();
    let dense = Dense::from_parts(
        5,
        2,
        common::uniform(&mut rng, 10),
        common::uniform(&mut rng, 2),
    )
    .unwrap();
    record(
        "Dense",
        layer_grad_error(&Layer::Dense(dense), &x, &mut rng),
    )?;
    record(
        "tanh",
        layer_grad_error(&Layer::Activation(Activation::Tanh), &x, &mut rng),
    )?;
    record(
        "sigmoid",
        layer_grad_error(&Layer::Activation(Activation::Sigmoid), &x, &mut rng),
    )?;
    let img = Tensor::new(&[2, 5, 4, 3], common::uniform(&mut rng, 120)).unwrap();
    record(
        "global max pool",
        layer_grad_error(&Layer::GlobalMaxPool, &img, &mut rng),
    )?;
    let (xx, yy) = common::xor_data();
    let mut model = common::xor_model(predefined("Quaternions").unwrap(), 5);
    model.build(&[4]).map_err(|e| e.to_string())?;
    record("XOR model", model_grad_error(&model, &xx, &yy))?;
    Ok(format!("worst relative error {worst:.1e}"))
}

fn xor_args(extra: &[&str], out: &Path) -> hypernn_cli::TrainXorArgs {
    let mut argv = vec!["hypernn", "train-xor", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(extra);
    match Cli::try_parse_from(argv).unwrap().command {
        Command::TrainXor(args) => args,
        _ => unreachable!(),
    }
}

fn xor_reproduction() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut solved = 0;
    let mut notes = Vec::new();
    for seed in 1..=5u64 {
        let seed_s = seed.to_string();
        let args = xor_args(&["--seed", &seed_s], &dir.path().join(&seed_s));
        let start = Instant::now();
        let report =
            hypernn_cli::train_xor(&args, &mut std::io::sink()).map_err(|e| format!("{e:#}"))?;
        let took = start.elapsed();
        ensure(took < Duration::from_secs(30), || {
            format!("seed {seed} took {took:?}")
        })?;
        if report.correct == 4 {
            solved += 1;
        }
        notes.push(format!("{}/4", report.correct));
    }
    ensure(solved >= 4, || {
        format!("only {solved}/5 seeds solved XOR ({})", notes.join(" "))
    })?;
    Ok(format!("{solved}/5 seeds at 4/4 ({})", notes.join(" ")))
}

fn parameter_ratio() -> Check {
    let mut rng = init_rng(0);
    let mut checked = 0;
    for (name, alg) in all_algebras() {
        let n = alg.dim();
        let mut dense = HyperDense::new(7, alg.clone()).map_err(|e| e.to_string())?;
        dense.build(&[3 * n], &mut rng).map_err(|e| e.to_string())?;
        let (h, r) = (
            dense.weight_count().unwrap(),
            dense.real_weight_count().unwrap(),
        );
        ensure(r == 3 * n * 7 * n && h * n == r, || {
            format!("{name} dense: {h} vs {r}")
        })?;
        let mut conv = HyperConv::new(5, &[3, 3], alg.clone()).map_err(|e| e.to_string())?;
        conv.build(&[6, 6, 2 * n], &mut rng)
            .map_err(|e| e.to_string())?;
        let (h, r) = (
            conv.weight_count().unwrap(),
            conv.real_weight_count().unwrap(),
        );
        ensure(r == 9 * 2 * n * 5 * n && h * n == r, || {
            format!("{name} conv: {h} vs {r}")
        })?;
        checked += 2;
    }
    Ok(format!(
        "{checked} layers, hyper weights exactly 1/n of real"
    ))
}

fn conv_pipeline() -> Check {
    let start = Instant::now();
    let mut model = Sequential::with_seed(42);
    model
        .add(HyperConv::new(100, &[3, 3], predefined("Quaternions").unwrap()).unwrap())
        .add(Layer::GlobalMaxPool)
        .add(Dense::new(1).unwrap())
        .add(Activation::Sigmoid);
    let x = Tensor::new(
        &[1, 100, 100, 4],
        common::uniform(&mut common::rng(3), 40_000),
    )
    .unwrap();
    model.build(&[100, 100, 4]).map_err(|e| e.to_string())?;
    let conv_out = model.layers()[0].forward(&x).map_err(|e| e.to_string())?;
    ensure(conv_out.shape() == [1, 98, 98, 400], || {
        format!("conv shape {:?}", conv_out.shape())
    })?;
    let y = model.predict(&x).map_err(|e| e.to_string())?;
    ensure(y.shape() == [1, 1], || {
        format!("output shape {:?}", y.shape())
    })?;
    let p = y.item().unwrap();
    ensure(p > 0.0 && p < 1.0, || format!("output {p} outside (0, 1)"))?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(10), || {
        format!("shape check took {took:?}")
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let argv = [
        "hypernn",
        "train-synth",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let Command::TrainSynth(args) = Cli::try_parse_from(argv).unwrap().command else {
        unreachable!()
    };
    let report =
        hypernn_cli::train_synth(&args, &mut std::io::sink()).map_err(|e| format!("{e:#}"))?;
    let best = report
        .history
        .records
        .iter()
        .map(|r| r.accuracy)
        .fold(0.0, f64::max);
    let last = report.history.last().unwrap().accuracy;
    ensure(report.history.len() == 30, || "history length".into())?;
    ensure(best >= 0.9, || {
        format!("synthetic train accuracy peaked at {best}")
    })?;
    Ok(format!(
        "(1,98,98,400) -> (1,1) p={p:.4} in {took:.2?}; synthetic train accuracy {last} at epoch 30"
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_hypernn"))
            .args(["train-xor", "--seed", "42", "--out", run])
            .current_dir(dir.path())
            .env_remove("KHNN_SEED")
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.code().is_some(), || {
            format!("run {run} terminated by signal")
        })?;
        outputs.push(
            std::fs::read(dir.path().join(run).join("history.csv")).map_err(|e| e.to_string())?,
        );
    }
    ensure(outputs[0] == outputs[1], || {
        "history.csv differs between runs".into()
    })?;
    Ok(format!(
        "history.csv identical ({} bytes)",
        outputs[0].len()
    ))
}

fn serialization() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = xor_args(&["--seed", "42"], &dir.path().join("run"));
    let mut report =
        hypernn_cli::train_xor(&args, &mut std::io::sink()).map_err(|e| format!("{e:#}"))?;
    let (x, _) = hypernn_cli::xor_data();
    let before = report
        .model
        .predict(&x)
        .map_err(|e| e.to_string())?
        .to_vec();
    let path = dir.path().join("model.json");
    report.model.save(&path).map_err(|e| e.to_string())?;
    let mut loaded = Sequential::load(&path).map_err(|e| e.to_string())?;
    let after = loaded.predict(&x).map_err(|e| e.to_string())?.to_vec();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&before) == bits(&after), || {
        "predictions differ after reload".into()
    })?;
    ensure(
        bits(&report.model.flat_parameters()) == bits(&loaded.flat_parameters()),
        || "parameters differ after reload".into(),
    )?;
    Ok(format!(
        "{} parameters and 4 predictions bit-identical",
        loaded.param_count()
    ))
}

fn main() {
    type Criterion = (u32, &'static str, Option<u64>, fn() -> Check);
    let criteria: [Criterion; 9] = [
        (1, "algebra laws", Some(1), algebra_laws),
        (2, "Cayley-Dickson oracle", Some(1), cayley_dickson_chain),
        (3, "two-path equivalence", Some(30), two_path),
        (4, "gradient checks", Some(60), gradients),
        (5, "XOR reproduction", None, xor_reproduction),
        (6, "parameter ratio", None, parameter_ratio),
        (
            7,
            "conv pipeline shapes and synthetic task",
            None,
            conv_pipeline,
        ),
        (8, "determinism", None, determinism),
        (9, "serialization round trip", None, serialization),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(s)) if took > Duration::from_secs(s) => {
                Err(format!("took {took:.2?}, budget {s}s"))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {id} {name} [{took:.2?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name} [{took:.2?}]: {detail}");
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
