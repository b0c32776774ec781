use std::path::PathBuf;

use drpc::check::check_model_gradients;
use drpc::corpus::{generate_synthetic, save_corpus, Corpus, SynthSpec};
use drpc::evaluation::{evaluate, representation_similarity, sample_complexity_sweep, sweep_csv};
use drpc::seed::sub_seed;
use drpc::training::{train_with, write_log, Checkpoint};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{AnalyzeCommand, Cli, Command, EvalArgs, GradcheckArgs, SimilarityArgs, SweepArgs, SynthArgs, TrainArgs};
use crate::run::*;

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Synth(a) => synth(a),
        Command::Analyze(AnalyzeCommand::Similarity(a)) => similarity(a),
        Command::Analyze(AnalyzeCommand::Sweep(a)) => sweep(a),
    }
}

fn train(a: TrainArgs) -> CliResult<()> {
    let clock = RunClock::start("train");
    let (model_cfg, train_cfg) = resolve_training(&a.opts)?;
    let corpus = read_corpus_arg(&a.corpus)?;
    let dev = a.dev.as_deref().map(read_corpus_arg).transpose()?;
    let pretrained = read_embeddings_arg(a.opts.embeddings.as_deref())?;

    let outcome = train_with(&corpus, dev.as_ref(), &model_cfg, &train_cfg, pretrained.as_ref(), |e| {
        let dev = e.dev_f1.map_or(String::new(), |f| format!(" dev_f1 {f:.4}"));
        eprintln!("epoch {} loss {:.5}{dev}", e.epoch, e.loss_total);
    })?;

    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let ckpt_path = a.out.join("checkpoint");
    let log_path = a.out.join("log.jsonl");
    let best = Checkpoint { precision: a.precision, ..outcome.best };
    best.save(&ckpt_path)?;
    let mut log = Vec::new();
    write_log(&mut log, &outcome.log)?;
    write_text(&log_path, std::str::from_utf8(&log).expect("log is JSON text"))?;

    let mut inputs = vec![a.corpus.clone()];
    inputs.extend(a.dev.clone());
    inputs.extend(a.opts.embeddings.clone());
    let config = json!({
        "model": train_cfg.resolve(&model_cfg),
        "train": train_cfg,
        "precision": a.precision,
    });
    let manifest = clock.finish(config, Some(train_cfg.seed), inputs, vec![ckpt_path.clone(), log_path])?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!(
        "best epoch {} dev_f1 {}",
        best.epoch,
        best.dev_f1.map_or("n/a".into(), |f| format!("{f:.4}"))
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let clock = RunClock::start("eval");
    let ckpt = Checkpoint::load(require_file(&a.ckpt)?)?;
    if let Some(path) = &a.config {
        let file = ConfigFile::load(path)?;
        let expected = file.train.resolve(&file.model);
        let diff = ckpt.model.config.differing_fields(&expected);
        if !diff.is_empty() {
            return Err(drpc::Error::Config(format!("checkpoint and config differ in: {}", diff.join(", "))).into());
        }
    }
    let mut corpus = read_corpus_arg(&a.corpus)?;
    if let Some(d) = &a.domain {
        corpus = corpus.filter_domain(d);
        if corpus.is_empty() {
            return Err(drpc::Error::Precondition(format!("no instances with domain {d:?}")).into());
        }
    }
    let report = evaluate(&ckpt.model, &corpus)?;
    let text = to_json(&report)?;
    print!("{text}");
    if let Some(out) = &a.out {
        write_text(out, &text)?;
        let manifest = clock.finish(
            json!({ "domain": a.domain }),
            None,
            vec![a.ckpt.clone(), a.corpus.clone()],
            vec![out.clone()],
        )?;
        write_json(&manifest_path_for(out), &manifest)?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> CliResult<()> {
    let clock = RunClock::start("gradcheck");
    if !(a.tol > 0.0 && a.step > 0.0) {
        return Err(CliError::Usage("--tol and --step must be positive".into()));
    }
    let report = check_model_gradients(a.ablation, a.lambda, a.step, a.tol, a.seed)?;
    for g in &report.groups {
        let status = if g.passed { "pass" } else { "FAIL" };
        println!("{status} {:<5} max rel error {:.3e}", g.group, g.max_rel_error);
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        let config = json!({ "ablation": a.ablation, "tol": a.tol, "step": a.step, "lambda": a.lambda });
        let manifest = clock.finish(config, Some(a.seed), vec![], vec![out.clone()])?;
        write_json(&manifest_path_for(out), &manifest)?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<_> = report.groups.iter().filter(|g| !g.passed).map(|g| g.group.as_str()).collect();
        Err(drpc::Error::Precondition(format!("gradient check failed for {}", failed.join(", "))).into())
    }
}

/// Generator settings and split sizes, saved as `synth.json`.
#[derive(Debug, Serialize, Deserialize)]
struct SynthManifest {
    seed: u64,
    train: usize,
    dev: usize,
    test: usize,
    spec: SynthSpec,
    /// Distribution of the test split; differs from `spec` with `--shift`.
    test_spec: SynthSpec,
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let clock = RunClock::start("synth");
    let mut spec = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(require_file(p)?).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid synth config: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(n) = a.n {
        spec.count = n;
    }
    let fracs_ok = |f: f64| (0.0..1.0).contains(&f);
    if !fracs_ok(a.dev_frac) || !fracs_ok(a.test_frac) || a.dev_frac + a.test_frac >= 1.0 {
        return Err(CliError::Usage("--dev-frac and --test-frac must be in [0, 1) with a sum below 1".into()));
    }
    let n = spec.count;
    let n_dev = (n as f64 * a.dev_frac).round() as usize;
    let n_test = (n as f64 * a.test_frac).round() as usize;
    let n_train = n.saturating_sub(n_dev + n_test);
    if n_train == 0 {
        return Err(CliError::Usage(format!("--n {n} leaves no training instances")));
    }

    let (train, dev, test, test_spec) = if a.shift {
        let base = generate_synthetic(&SynthSpec { count: n_train + n_dev, ..spec.clone() }, a.seed)?;
        let test_spec = SynthSpec { count: n_test.max(1), ..spec.shifted() };
        let test = if n_test > 0 { generate_synthetic(&test_spec, sub_seed(a.seed, "shift"))?.instances } else { vec![] };
        let mut it = base.instances.into_iter();
        let train: Vec<_> = it.by_ref().take(n_train).collect();
        (train, it.collect(), test, SynthSpec { count: n_test, ..test_spec })
    } else {
        let all = generate_synthetic(&spec, a.seed)?;
        let mut it = all.instances.into_iter();
        let train: Vec<_> = it.by_ref().take(n_train).collect();
        let dev: Vec<_> = it.by_ref().take(n_dev).collect();
        (train, dev, it.collect(), spec.clone())
    };

    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let mut outputs = Vec::new();
    for (name, split) in [("train", train), ("dev", dev), ("test", test)] {
        let path = a.out.join(format!("{name}.jsonl"));
        save_corpus(&path, &Corpus::new(split))?;
        outputs.push(path);
    }
    let meta = SynthManifest { seed: a.seed, train: n_train, dev: n_dev, test: n_test, spec, test_spec };
    let meta_path = a.out.join("synth.json");
    write_json(&meta_path, &meta)?;
    outputs.push(meta_path);
    let manifest = clock.finish(&meta, Some(a.seed), vec![], outputs)?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!("wrote {n_train} train, {n_dev} dev, {n_test} test instances to {}", a.out.display());
    Ok(())
}

fn similarity(a: SimilarityArgs) -> CliResult<()> {
    let clock = RunClock::start("analyze similarity");
    if a.cap == 0 {
        return Err(CliError::Usage("--cap must be positive".into()));
    }
    let ckpt = Checkpoint::load(require_file(&a.ckpt)?)?;
    let train = read_corpus_arg(&a.train)?;
    let test = read_corpus_arg(&a.test)?;
    let report = representation_similarity(&ckpt.model, &train.instances, &test.instances, a.cap, a.seed)?;
    let text = to_json(&report)?;
    print!("{text}");
    if let Some(out) = &a.out {
        write_text(out, &text)?;
        let inputs = vec![a.ckpt.clone(), a.train.clone(), a.test.clone()];
        let manifest = clock.finish(json!({ "cap": a.cap }), Some(a.seed), inputs, vec![out.clone()])?;
        write_json(&manifest_path_for(out), &manifest)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let clock = RunClock::start("analyze sweep");
    if a.ratios.is_empty() {
        return Err(CliError::Usage("--ratios needs at least one value".into()));
    }
    if let Some(r) = a.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(CliError::Usage(format!("ratio {r} outside (0, 1]")));
    }
    let (model_cfg, train_cfg) = resolve_training(&a.opts)?;
    let train = read_corpus_arg(&a.train)?;
    let dev = read_corpus_arg(&a.dev)?;
    let pretrained = read_embeddings_arg(a.opts.embeddings.as_deref())?;
    let rows = sample_complexity_sweep(&train, &dev, &model_cfg, &train_cfg, pretrained.as_ref(), &a.ratios)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    if let Some(out) = &a.out {
        write_text(out, &csv)?;
        let mut inputs: Vec<PathBuf> = vec![a.train.clone(), a.dev.clone()];
        inputs.extend(a.opts.embeddings.clone());
        let config = json!({ "model": train_cfg.resolve(&model_cfg), "train": train_cfg, "ratios": a.ratios, "rows": rows });
        let manifest = clock.finish(config, Some(train_cfg.seed), inputs, vec![out.clone()])?;
        write_json(&manifest_path_for(out), &manifest)?;
    }
    Ok(())
}
