use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use lanemerge_core::dataset::{read_dataset, write_dataset};
use lanemerge_core::synth::{synth_dataset, synth_tracks, SynthConfig};
use lanemerge_core::trajectory::write_trajectories;
use lanemerge_core::window::{read_windows, write_windows, ExtractOptions};
use lanemerge_core::{
    build_dataset, extract_windows, parse_trajectory_file, DatasetFormat, LabeledSample,
};
use lanemerge_harness::{
    oracle_check, read_trace, replay, synth_scenario, write_trace, BandwidthEstimate,
    ReplayOptions, ScenarioParams,
};
use lanemerge_ml::evaluate::{depth_gap, sweep_best, write_table_csv};
use lanemerge_ml::{
    default_specs, results_table, sweep_max_depth, train_bundle, Algorithm, Dataset,
    Hyperparameters, ModelBundle, ModelSpec, Scoring, SplitTag, SweepParam, Target,
};
use lanemerge_orchestrator::server::{serve, ServerOptions};
use lanemerge_orchestrator::{KnowledgeBase, Orchestrator};
use tracing::{info, warn};

use crate::cli::*;
use crate::config::RunConfig;
use crate::io::{check_inputs, check_output, open, write_atomic};

pub const DEFAULT_SEED: u64 = 42;

pub struct RunContext {
    pub config: RunConfig,
    pub seed: u64,
}

pub fn load_context(cli: &Cli) -> Result<RunContext> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.apply_env(|k| std::env::var(k).ok())?;
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    Ok(RunContext { config, seed })
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = load_context(&cli)?;
    match cli.command {
        Command::Extract(a) => extract(&ctx, a),
        Command::Label(a) => label(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Serve(a) => serve_cmd(ctx, a),
        Command::Replay(a) => replay_cmd(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

fn extract(_ctx: &RunContext, a: ExtractArgs) -> Result<()> {
    let inputs: Vec<&Path> = a.input.iter().map(|p| p.as_path()).collect();
    check_inputs(&inputs)?;
    if let Some(out) = &a.output {
        check_output(out, &inputs)?;
    }
    let options = ExtractOptions {
        skip_aborted: a.skip_aborted,
    };
    let mut windows = Vec::new();
    for path in &inputs {
        let tracks = parse_trajectory_file(path, DatasetFormat::from_path(path))
            .with_context(|| format!("while reading {}", path.display()))?;
        let report = extract_windows(&tracks, options);
        let skipped: BTreeMap<&str, usize> =
            report.skipped.iter().map(|(r, n)| (r.code(), *n)).collect();
        println!(
            "{}: {} vehicles, {} lane changes, {} windows, skipped {:?}",
            path.display(),
            tracks.len(),
            report.events,
            report.windows.len(),
            skipped
        );
        windows.extend(report.windows);
    }
    println!("total windows: {}", windows.len());
    match (&a.output, a.dry_run) {
        (Some(out), false) => write_atomic(out, |w| Ok(write_windows(w, &windows)?)),
        _ => Ok(()),
    }
}

fn class_balance(samples: &[LabeledSample]) -> String {
    let yes = samples.iter().filter(|s| s.recommendation).count();
    let flagged = samples.iter().filter(|s| s.flagged).count();
    let pct = |n: usize| {
        if samples.is_empty() {
            0.0
        } else {
            100.0 * n as f64 / samples.len() as f64
        }
    };
    format!(
        "{} samples: merge {} ({:.1}%), no merge {} ({:.1}%), flagged {}",
        samples.len(),
        yes,
        pct(yes),
        samples.len() - yes,
        pct(samples.len() - yes),
        flagged
    )
}

fn label(ctx: &RunContext, a: LabelArgs) -> Result<()> {
    check_inputs(&[&a.input])?;
    if let Some(out) = &a.output {
        check_output(out, &[&a.input])?;
    }
    let windows = read_windows(open(&a.input)?)
        .with_context(|| format!("while reading {}", a.input.display()))?;
    let samples = build_dataset(&windows, &ctx.config.safety);
    if samples.is_empty() {
        warn!(
            "{} holds no windows; the dataset is empty",
            a.input.display()
        );
        eprintln!(
            "warning: no windows in {}, dataset is empty",
            a.input.display()
        );
    }
    println!("{} windows, {}", windows.len(), class_balance(&samples));
    match (&a.output, a.dry_run) {
        (Some(out), false) => write_atomic(out, |w| Ok(write_dataset(w, &samples)?)),
        _ => Ok(()),
    }
}

fn load_dataset(path: &Path, config: &RunConfig, seed: u64) -> Result<Dataset> {
    let samples =
        read_dataset(open(path)?).with_context(|| format!("while reading {}", path.display()))?;
    if samples.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    Ok(Dataset::from_samples(&samples, config.split()?, seed)?)
}

fn parse_algorithm(name: &str) -> Result<Algorithm> {
    name.parse::<Algorithm>().map_err(|_| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
        anyhow!(
            "unknown algorithm {name:?}; expected one of {} or all",
            names.join(", ")
        )
    })
}

/// Chosen hyperparameters with config then flag overrides.
fn hyperparameters(
    algorithm: Algorithm,
    target: Target,
    ctx: &RunContext,
    flags: &ModelFlags,
) -> Hyperparameters {
    let t = &ctx.config.train;
    let base = Hyperparameters::chosen(algorithm, target, ctx.seed);
    Hyperparameters {
        max_depth: flags.max_depth.or(t.max_depth).unwrap_or(base.max_depth),
        n_estimators: flags
            .estimators
            .or(t.n_estimators)
            .unwrap_or(base.n_estimators),
        k_neighbors: flags.k.or(t.k_neighbors).unwrap_or(base.k_neighbors),
        ..base
    }
}

fn tolerances(ctx: &RunContext, accel: Option<f64>, heading: Option<f64>) -> Result<(f64, f64)> {
    let a = accel.unwrap_or(ctx.config.train.accel_tolerance);
    let h = heading.unwrap_or(ctx.config.train.heading_tolerance);
    if !(a.is_finite() && a >= 0.0 && h.is_finite() && h >= 0.0) {
        bail!("tolerances must be non-negative numbers");
    }
    Ok((a, h))
}

fn scoring(target: Target, tol: (f64, f64)) -> Scoring {
    match target {
        Target::Merge => Scoring::Exact,
        Target::Acceleration => Scoring::Linear(tol.0),
        Target::Heading => Scoring::Angular(tol.1),
    }
}

fn train(ctx: &RunContext, a: TrainArgs) -> Result<()> {
    ctx.config.validate()?;
    check_inputs(&[&a.input])?;
    if let Some(out) = &a.output {
        check_output(out, &[&a.input])?;
    }
    let all = a.algorithm == "all";
    let algorithm = if all {
        None
    } else {
        Some(parse_algorithm(&a.algorithm)?)
    };
    let tol = tolerances(ctx, a.model.tolerance, a.model.heading_tolerance)?;
    let data = load_dataset(&a.input, &ctx.config, ctx.seed)?;
    info!(samples = data.len(), "dataset loaded");

    let Some(algorithm) = algorithm else {
        let rows = results_table(&data, ctx.seed, Some(tol.0), Some(tol.1))?;
        let mut text = Vec::new();
        write_table_csv(&rows, &mut text)?;
        print!("{}", String::from_utf8_lossy(&text));
        if let (Some(out), false) = (&a.output, a.dry_run) {
            write_atomic(out, |w| Ok(w.write_all(&text)?))?;
        }
        return Ok(());
    };

    let merge = ModelSpec::new(
        algorithm,
        Target::Merge,
        hyperparameters(algorithm, Target::Merge, ctx, &a.model),
    );
    let [_, acceleration, heading] = default_specs(ctx.seed);
    let bundle = train_bundle(&data, merge, acceleration, heading)?;
    for target in Target::ALL {
        let model = bundle.model(target);
        let (x, y) = data.part(SplitTag::Validation, target);
        let acc = scoring(target, tol).score(&model.predict_matrix(&x)?, &y)?;
        println!(
            "{:<13} {:<20} validation accuracy {:.2}%",
            target.name(),
            model.spec.algorithm.name(),
            100.0 * acc
        );
    }
    if let (Some(out), false) = (&a.output, a.dry_run) {
        let json = bundle.to_json()?;
        write_atomic(out, |w| Ok(w.write_all(json.as_bytes())?))?;
        println!("model written to {}", out.display());
    }
    Ok(())
}

fn evaluate(ctx: &RunContext, a: EvaluateArgs) -> Result<()> {
    ctx.config.validate()?;
    check_inputs(&[&a.input, &a.model])?;
    if let Some(out) = &a.output {
        check_output(out, &[&a.input, &a.model])?;
    }
    let bundle = ModelBundle::load(&a.model)
        .with_context(|| format!("cannot load model {}", a.model.display()))?;
    let tol = tolerances(ctx, a.tolerance, a.heading_tolerance)?;
    let data = load_dataset(&a.input, &ctx.config, ctx.seed)?;
    let mut rows = Vec::new();
    for target in Target::ALL {
        let (mut x, mut y) = data.part(SplitTag::Test, target);
        let mut split = "test";
        if y.is_empty() {
            (x, y) = (data.x.clone(), data.targets(target).to_vec());
            split = "all";
        }
        let model = bundle.model(target);
        let acc = scoring(target, tol).score(&model.predict_matrix(&x)?, &y)?;
        println!(
            "{:<13} {:<20} {split} accuracy {:.2}% on {} samples",
            target.name(),
            model.spec.algorithm.name(),
            100.0 * acc,
            y.len()
        );
        rows.push(format!(
            "{},{},{split},{},{:.6}",
            target.name(),
            model.spec.algorithm.name(),
            y.len(),
            acc
        ));
    }
    if let Some(out) = &a.output {
        write_atomic(out, |w| {
            writeln!(w, "target,algorithm,split,samples,accuracy")?;
            for r in &rows {
                writeln!(w, "{r}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn sweep(ctx: &RunContext, a: SweepArgs) -> Result<()> {
    ctx.config.validate()?;
    check_inputs(&[&a.input])?;
    if let Some(out) = &a.output {
        check_output(out, &[&a.input])?;
    }
    if a.from == 0 || a.from > a.to {
        bail!("sweep range must satisfy 1 <= from <= to");
    }
    let algorithm = parse_algorithm(&a.algorithm)?;
    let target = match a.target {
        TargetArg::Merge => Target::Merge,
        TargetArg::Acceleration => Target::Acceleration,
        TargetArg::Heading => Target::Heading,
    };
    let tol = tolerances(ctx, a.model.tolerance, a.model.heading_tolerance)?;
    let data = load_dataset(&a.input, &ctx.config, ctx.seed)?;
    let spec = ModelSpec::new(
        algorithm,
        target,
        hyperparameters(algorithm, target, ctx, &a.model),
    );
    let values: Vec<usize> = (a.from..=a.to).collect();
    let sc = scoring(target, tol);
    let result = match a.param {
        SweepParamArg::MaxDepth => sweep_max_depth(spec, &data, &values, depth_gap(algorithm), sc)?,
        SweepParamArg::Estimators => sweep_best(spec, &data, SweepParam::Estimators, &values, sc)?,
        SweepParamArg::Neighbors => sweep_best(spec, &data, SweepParam::Neighbors, &values, sc)?,
    };
    let mut text = Vec::new();
    result.write_csv(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    println!("chosen {}: {}", result.param.name(), result.chosen);
    if let (Some(out), false) = (&a.output, a.dry_run) {
        write_atomic(out, |w| Ok(w.write_all(&text)?))?;
    }
    Ok(())
}

fn serve_cmd(mut ctx: RunContext, a: ServeArgs) -> Result<()> {
    let service = &mut ctx.config.service;
    if let Some(l) = a.listen {
        service.listen = l;
    }
    if let Some(m) = a.model {
        service.model = Some(m);
    }
    ctx.config.validate()?;
    let service = &ctx.config.service;
    let path = service
        .model
        .as_deref()
        .ok_or_else(|| anyhow!("no model given; pass --model or set LANEMERGE_MODEL"))?;
    let bundle =
        ModelBundle::load(path).with_context(|| format!("cannot load model {}", path.display()))?;
    let orch = Arc::new(Orchestrator::new(
        KnowledgeBase::new(service.staleness_ms),
        Some(Arc::new(bundle)),
        ctx.config.safety,
    ));
    let options = ServerOptions {
        max_frame_bytes: service.max_frame_bytes,
    };
    let listen = service.listen.clone();
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&listen)
            .await
            .with_context(|| format!("cannot listen on {listen}"))?;
        println!("listening on {}", listener.local_addr()?);
        serve(listener, orch, options, shutdown_signal()).await?;
        println!("stopped");
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn replay_cmd(ctx: &RunContext, a: ReplayArgs) -> Result<()> {
    ctx.config.validate()?;
    check_inputs(&[&a.input])?;
    if let Some(out) = &a.output {
        check_output(out, &[&a.input])?;
    }
    let trace = read_trace(open(&a.input)?)
        .with_context(|| format!("while reading {}", a.input.display()))?;
    let options = ReplayOptions {
        speed_factor: a.speed_factor,
        ..ReplayOptions::default()
    };
    let outcome = runtime()?.block_on(replay(&trace, &a.endpoint, options))?;
    print!("{}", outcome.report.summary());
    print!(
        "{}",
        BandwidthEstimate::from_replay(&trace, &outcome.recommendations).summary()
    );
    let violations = oracle_check(&trace, &outcome.recommendations, &ctx.config.safety);
    println!("safety oracle: {} violations", violations.len());
    for v in violations.iter().take(10) {
        println!("  {v:?}");
    }
    if !outcome.errors.is_empty() {
        println!("orchestrator errors: {}", outcome.errors.len());
    }
    if let Some(out) = &a.output {
        write_atomic(out, |w| Ok(outcome.report.write_csv(w)?))?;
    }
    if !outcome.report.complete {
        bail!("replay incomplete");
    }
    if !violations.is_empty() {
        bail!("recommendations failed the safety oracle");
    }
    Ok(())
}

fn synth(ctx: &RunContext, a: SynthArgs) -> Result<()> {
    match a.kind {
        SynthKind::Trace {
            output,
            duration,
            gap,
        } => {
            check_output(&output, &[])?;
            let params = ScenarioParams {
                seed: ctx.seed,
                duration_s: duration,
                gap,
                ..ScenarioParams::default()
            };
            let trace = synth_scenario(&params)?;
            write_atomic(&output, |w| Ok(write_trace(&trace, w)?))?;
            println!(
                "{} updates written to {}",
                trace.messages.len(),
                output.display()
            );
        }
        SynthKind::Ngsim { output, episodes } => {
            check_output(&output, &[])?;
            let tracks = synth_tracks(&SynthConfig::new(episodes, ctx.seed));
            write_atomic(&output, |w| Ok(write_trajectories(w, &tracks)?))?;
            println!(
                "{} vehicles in {} episodes written to {}",
                tracks.len(),
                episodes,
                output.display()
            );
        }
        SynthKind::Dataset { output, samples } => {
            check_output(&output, &[])?;
            ctx.config.safety.validate()?;
            let data = synth_dataset(samples, ctx.seed, &ctx.config.safety);
            write_atomic(&output, |w| Ok(write_dataset(w, &data)?))?;
            println!("{}", class_balance(&data));
        }
    }
    Ok(())
}
