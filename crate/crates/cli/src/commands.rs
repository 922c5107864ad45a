use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use graphost::experiments::{
    run_ablation, run_delta_sweep, run_evaluation, run_noise_robustness,
    run_random_drop_comparison, ExperimentOptions, ExperimentReport, TrialSet,
};
use graphost::graph::{
    load_graph, save_graph, save_weighted_graph, GraphFormat, LabeledGraph,
};
use graphost::metrics::hd_delta_report;
use graphost::models::{
    load_checkpoint, save_checkpoint, train_classifier, train_homophily_predictor,
    ArchitectureSpec, Checkpoint,
};
use graphost::rng::derive_seed;
use graphost::transform::{transform_detailed, FilterSemantics, TransformConfig, TransformMode};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{
    Cli, Command, EvaluateArgs, ExperimentArgs, FormatArg, GenerateArgs, ModeArg, NoiseArgs,
    Split, SweepArgs, Target, TrainArgs, TransformArgs, TransformFlags,
};

pub struct Context {
    pub cfg: RunConfig,
    pub timestamp: String,
}

impl Context {
    pub fn first_seed(&self) -> u64 {
        if self.cfg.seeds.len() > 1 {
            log::warn!("using only the first seed, {}", self.cfg.seeds[0]);
        }
        self.cfg.seeds[0]
    }

    pub fn effective_config(&self) -> Value {
        serde_json::to_value(&self.cfg).expect("config serializes")
    }

    /// Stamps the report, echoes the effective config into it and writes it.
    pub fn write_report(&self, mut report: ExperimentReport) -> Result<ExperimentReport> {
        report.timestamp = self.timestamp.clone();
        if let Some(obj) = report.config.as_object_mut() {
            obj.insert("run".into(), self.effective_config());
        }
        create_out(&self.cfg.out)?;
        let (json, csv) = report.write(&self.cfg.out)?;
        println!("wrote {}", json.display());
        println!("wrote {}", csv.display());
        for arm in &report.arms {
            match arm.std {
                Some(s) => println!("{:<16} {:.4} ± {:.4}", arm.name, arm.mean, s),
                None => println!("{:<16} {:.4}", arm.name, arm.mean),
            }
        }
        Ok(report)
    }
}

pub fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<LabeledGraph> {
    load_graph(path, GraphFormat::infer(path))
        .with_context(|| format!("cannot load graph {}", path.display()))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

fn apply_flags(flags: &TransformFlags, t: &mut TransformConfig) {
    if let Some(m) = flags.mode {
        t.mode = match m {
            ModeArg::Homophilic => TransformMode::Homophilic,
            ModeArg::Heterophilic => TransformMode::Heterophilic,
            ModeArg::Auto => TransformMode::Auto,
        };
    }
    if let Some(d) = flags.delta {
        t.delta = d;
    }
    if flags.no_weight {
        t.enable_weighting = false;
    }
    if flags.no_filter {
        t.enable_filtering = false;
    }
    if flags.threshold_semantics {
        t.semantics = FilterSemantics::Threshold;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seeds) = cli.seed {
        cfg.seeds = seeds;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match &cli.command {
        Command::Transform(a) => apply_flags(&a.flags, &mut cfg.transform),
        Command::Evaluate(a) => apply_flags(&a.flags, &mut cfg.transform),
        Command::Ablate(a) | Command::RandomDrop(a) => apply_flags(&a.flags, &mut cfg.transform),
        Command::SweepDelta(a) => {
            apply_flags(&a.common.flags, &mut cfg.transform);
            if let Some(g) = &a.grid {
                cfg.delta_grid = g.clone();
            }
        }
        Command::NoiseRobustness(a) => {
            apply_flags(&a.common.flags, &mut cfg.transform);
            if let Some(l) = &a.levels {
                cfg.noise_levels = l.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    let timestamp = cli
        .pin_timestamp
        .unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string());
    let ctx = Context { cfg, timestamp };
    match cli.command {
        Command::Generate(a) => generate(&ctx, &a),
        Command::Train(a) => train(&ctx, &a),
        Command::Transform(a) => transform(&ctx, &a),
        Command::Evaluate(a) => evaluate(&ctx, &a),
        Command::Ablate(a) => {
            let set = trial_set(&ctx, &a)?;
            ctx.write_report(run_ablation(&set, &options(&ctx))?).map(drop)
        }
        Command::RandomDrop(a) => {
            let set = trial_set(&ctx, &a)?;
            ctx.write_report(run_random_drop_comparison(&set, &options(&ctx))?).map(drop)
        }
        Command::SweepDelta(a) => sweep(&ctx, &a),
        Command::NoiseRobustness(a) => noise(&ctx, &a),
        Command::TheoryValidate(a) => crate::theory::theory_validate(&ctx, &a),
    }
}

fn options(ctx: &Context) -> ExperimentOptions {
    ExperimentOptions {
        transform: ctx.cfg.transform,
        metric: ctx.cfg.metric,
    }
}

fn generate(ctx: &Context, args: &GenerateArgs) -> Result<()> {
    let mut scenario = ctx.cfg.scenario.clone();
    scenario.use_validation_graph = args.splits.contains(&Split::Val);
    log::info!("CSBM parameters: {}", serde_json::to_string(&scenario.params)?);
    let (format, ext) = match args.format {
        FormatArg::Json => (GraphFormat::Json, ".json"),
        FormatArg::EdgeList => (GraphFormat::EdgeList, ""),
    };
    let mut outputs = Vec::new();
    for &seed in &ctx.cfg.seeds {
        let graphs = scenario.graphs(seed)?;
        let dir = if ctx.cfg.seeds.len() == 1 {
            ctx.cfg.out.clone()
        } else {
            ctx.cfg.out.join(format!("seed-{seed}"))
        };
        for split in &args.splits {
            let (name, graph) = match split {
                Split::Train => ("train", graphs.train.clone()),
                Split::Val => ("val", graphs.val.clone().expect("validation graph requested")),
                Split::Test => ("test", graphs.test.clone()),
            };
            outputs.push((dir.join(format!("{name}{ext}")), graph));
        }
    }
    for (path, graph) in outputs {
        if let Some(parent) = path.parent() {
            create_out(parent)?;
        }
        save_graph(&graph, &path, format)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    require_file(&args.train)?;
    if let Some(v) = &args.val {
        require_file(v)?;
    }
    let train = read_graph(&args.train)?;
    train.require_labels().context("the training graph needs labels")?;
    let val = match &args.val {
        Some(p) => {
            let g = read_graph(p)?;
            g.require_labels().context("the validation graph needs labels")?;
            Some(g)
        }
        None => None,
    };
    let seed = ctx.first_seed();
    let sc = &ctx.cfg.scenario;
    let d = train.feature_dim();
    let mut log = serde_json::Map::new();
    let mut outputs = Vec::new();
    if matches!(args.target, Target::Classifier | Target::Both) {
        let spec =
            ArchitectureSpec::new(sc.classifier_kind, d, sc.hidden, train.num_classes(), sc.num_layers)?;
        let ckpt = train_classifier(&train, val.as_ref(), &spec, &sc.classifier, derive_seed(seed, "classifier"))?;
        log.insert("classifier".into(), serde_json::to_value(&ckpt.metadata)?);
        outputs.push(("classifier.json", ckpt));
    }
    if matches!(args.target, Target::Predictor | Target::Both) {
        let spec = ArchitectureSpec::new(sc.predictor_kind, d, sc.hidden, sc.hidden, sc.num_layers)?;
        let ckpt = train_homophily_predictor(&train, val.as_ref(), &spec, &sc.predictor, derive_seed(seed, "predictor"))?;
        log.insert("predictor".into(), serde_json::to_value(&ckpt.metadata)?);
        outputs.push(("predictor.json", ckpt));
    }
    log.insert("config".into(), ctx.effective_config());
    create_out(&ctx.cfg.out)?;
    for (name, ckpt) in &outputs {
        let path = ctx.cfg.out.join(name);
        save_checkpoint(ckpt, &path)?;
        println!("wrote {}", path.display());
    }
    write_json(&ctx.cfg.out.join("train-log.json"), &Value::Object(log))
}

fn transform(ctx: &Context, args: &TransformArgs) -> Result<()> {
    require_file(&args.test)?;
    require_file(&args.predictor)?;
    let test = read_graph(&args.test)?;
    let predictor = read_checkpoint(&args.predictor)?;
    let out = transform_detailed(&test, &predictor, &ctx.cfg.transform)?;
    let mut summary = json!({
        "regime": out.regime,
        "edges_before": test.num_edges(),
        "edges_after": out.graph.graph().num_edges(),
        "removed": out.removed,
        "config": ctx.effective_config(),
    });
    if let Some(labels) = test.labels() {
        let hd = hd_delta_report(&test, out.graph.graph(), labels)?;
        summary["homophily"] = serde_json::to_value(hd)?;
    }
    let format = GraphFormat::infer(&args.test);
    let name = match format {
        GraphFormat::Json => "transformed.json",
        GraphFormat::EdgeList => "transformed",
    };
    let path = ctx.cfg.out.join(name);
    create_out(&ctx.cfg.out)?;
    if out.graph.weights().iter().all(|&w| w == 1.0) {
        save_graph(out.graph.graph(), &path, format)?;
    } else {
        save_weighted_graph(&out.graph, &path, format)?;
    }
    println!("wrote {}", path.display());
    write_json(&ctx.cfg.out.join("transform-summary.json"), &summary)
}

fn evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<()> {
    let set = fixed_set(ctx, &args.classifier, &args.predictor, &args.test)?;
    ctx.write_report(run_evaluation(&set, &options(ctx))?).map(drop)
}

fn fixed_set(ctx: &Context, classifier: &Path, predictor: &Path, test: &Path) -> Result<TrialSet> {
    for p in [classifier, predictor, test] {
        require_file(p)?;
    }
    let test_graph = read_graph(test)?;
    test_graph.require_labels().context("evaluation needs a labeled test graph")?;
    Ok(TrialSet::fixed(
        read_checkpoint(classifier)?,
        read_checkpoint(predictor)?,
        test_graph,
        &ctx.cfg.seeds,
    )?)
}

fn trial_set(ctx: &Context, a: &ExperimentArgs) -> Result<TrialSet> {
    match (&a.classifier, &a.predictor, &a.test) {
        (Some(c), Some(p), Some(t)) => fixed_set(ctx, c, p, t),
        _ => {
            log::info!("training on fresh CSBM samples for seeds {:?}", ctx.cfg.seeds);
            Ok(ctx.cfg.scenario.instantiate(&ctx.cfg.seeds)?)
        }
    }
}

fn sweep(ctx: &Context, a: &SweepArgs) -> Result<()> {
    for &d in &ctx.cfg.delta_grid {
        TransformConfig { delta: d, ..ctx.cfg.transform }.validate()?;
    }
    let set = trial_set(ctx, &a.common)?;
    let report = ctx.write_report(run_delta_sweep(&set, &options(ctx), &ctx.cfg.delta_grid)?)?;
    let stem = PathBuf::from(report.file_name());
    let curve = ctx
        .cfg
        .out
        .join(format!("{}-curve.csv", stem.file_stem().unwrap().to_string_lossy()));
    fs::write(&curve, report.summary_csv())
        .with_context(|| format!("cannot write {}", curve.display()))?;
    println!("wrote {}", curve.display());
    Ok(())
}

fn noise(ctx: &Context, a: &NoiseArgs) -> Result<()> {
    if ctx.cfg.noise_levels.is_empty() || ctx.cfg.noise_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        bail!("noise levels must be a nonempty list of ratios in [0, 1]");
    }
    let set = trial_set(ctx, &a.common)?;
    ctx.write_report(run_noise_robustness(&set, &options(ctx), &ctx.cfg.noise_levels)?)
        .map(drop)
}
