//! Seeded experiment harness: ablation, structural-noise robustness, δ
//! sweeps, random-drop comparison and predictor quality.
//!
//! Every runner works on a [`TrialSet`], one [`Trial`] per seed. All arms of
//! a trial share that trial's classifier, predictor, test graph and seed, so
//! differences between arms come from the method alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::csbm::{generate_csbm, generate_csbm_multiclass, CsbmParams};
use crate::error::{Error, Result};
use crate::graph::{add_feature_noise, inject_structural_noise, random_edge_drop, LabeledGraph};
use crate::metrics::{accuracy, f1_macro, hd_delta_report, mean_std, roc_auc, HdReport};
use crate::models::{
    edge_homophily_scores, predict_labels, train_classifier, train_homophily_predictor,
    ArchitectureSpec, Checkpoint, EdgeScoreTable, ModelKind, ModelRole, PredictorConfig,
    TrainConfig, DEFAULT_HIDDEN,
};
use crate::rng::derive_seed;
use crate::transform::{regime_for, transform_with_scores, Regime, TransformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMetric {
    #[default]
    Accuracy,
    F1Macro,
}

/// Scores the classifier's predictions on `graph` against `truth`.
pub fn evaluate_checkpoint(
    classifier: &Checkpoint,
    graph: &LabeledGraph,
    edge_weights: Option<&[f64]>,
    truth: &[usize],
    metric: EvalMetric,
) -> Result<f64> {
    classifier.expect_role(ModelRole::Classifier)?;
    let pred = predict_labels(classifier, graph, edge_weights)?.labels;
    match metric {
        EvalMetric::Accuracy => accuracy(&pred, truth),
        EvalMetric::F1Macro => {
            let classes = classifier.network.spec().output_dim();
            f1_macro(&pred, truth, classes)
        }
    }
}

/// Trained models and a labeled test graph for one seed.
#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    pub classifier: Checkpoint,
    pub predictor: Checkpoint,
    pub test: LabeledGraph,
}

#[derive(Debug, Clone)]
pub struct TrialSet {
    /// Description of where the trials came from, copied into reports.
    pub scenario: Value,
    pub trials: Vec<Trial>,
}

impl TrialSet {
    /// The same checkpoints and test graph for every seed. Only the
    /// randomized parts of an experiment (noise, random drops) vary.
    pub fn fixed(
        classifier: Checkpoint,
        predictor: Checkpoint,
        test: LabeledGraph,
        seeds: &[u64],
    ) -> Result<Self> {
        check_seeds(seeds)?;
        classifier.expect_role(ModelRole::Classifier)?;
        predictor.expect_role(ModelRole::Predictor)?;
        test.require_labels()?;
        let scenario = json!({
            "kind": "fixed",
            "test_nodes": test.num_nodes(),
            "test_edges": test.num_edges(),
            "classifier": classifier.metadata,
            "predictor": predictor.metadata,
        });
        let trials = seeds
            .iter()
            .map(|&seed| Trial {
                seed,
                classifier: classifier.clone(),
                predictor: predictor.clone(),
                test: test.clone(),
            })
            .collect();
        Ok(Self { scenario, trials })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.trials.iter().map(|t| t.seed).collect()
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    Ok(())
}

/// A CSBM setting where every seed draws fresh train, validation and test
/// graphs and trains both models from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsbmScenario {
    pub params: CsbmParams,
    /// Variance of the Gaussian noise added to test features.
    pub test_feature_noise: f64,
    pub hidden: usize,
    pub num_layers: usize,
    pub classifier_kind: ModelKind,
    pub predictor_kind: ModelKind,
    pub classifier: TrainConfig,
    pub predictor: PredictorConfig,
    pub use_validation_graph: bool,
}

impl Default for CsbmScenario {
    fn default() -> Self {
        Self {
            params: CsbmParams::equidistant(16, 2.0, vec![300, 300], 0.05, 0.02)
                .expect("default parameters are valid"),
            test_feature_noise: 0.5,
            hidden: DEFAULT_HIDDEN,
            num_layers: 2,
            classifier_kind: ModelKind::Gcn,
            predictor_kind: ModelKind::Gcn,
            classifier: TrainConfig::default(),
            predictor: PredictorConfig::default(),
            use_validation_graph: true,
        }
    }
}

/// Train, validation and test graphs for one seed.
#[derive(Debug, Clone)]
pub struct ScenarioGraphs {
    pub train: LabeledGraph,
    pub val: Option<LabeledGraph>,
    pub test: LabeledGraph,
}

impl CsbmScenario {
    fn generate(&self, seed: u64) -> Result<LabeledGraph> {
        if self.params.num_classes() == 2 {
            generate_csbm(&self.params, seed)
        } else {
            generate_csbm_multiclass(&self.params, seed)
        }
    }

    pub fn graphs(&self, seed: u64) -> Result<ScenarioGraphs> {
        let train = self.generate(derive_seed(seed, "train-graph"))?;
        let val = if self.use_validation_graph {
            Some(self.generate(derive_seed(seed, "val-graph"))?)
        } else {
            None
        };
        let mut test = self.generate(derive_seed(seed, "test-graph"))?;
        if self.test_feature_noise > 0.0 {
            test = add_feature_noise(&test, self.test_feature_noise, derive_seed(seed, "test-noise"))?;
        }
        Ok(ScenarioGraphs { train, val, test })
    }

    pub fn classifier_spec(&self) -> Result<ArchitectureSpec> {
        ArchitectureSpec::new(
            self.classifier_kind,
            self.params.feature_dim(),
            self.hidden,
            self.params.num_classes(),
            self.num_layers,
        )
    }

    /// The predictor's embedding width equals the hidden width.
    pub fn predictor_spec(&self) -> Result<ArchitectureSpec> {
        ArchitectureSpec::new(
            self.predictor_kind,
            self.params.feature_dim(),
            self.hidden,
            self.hidden,
            self.num_layers,
        )
    }

    pub fn train_classifier(&self, seed: u64, graphs: &ScenarioGraphs) -> Result<Checkpoint> {
        train_classifier(
            &graphs.train,
            graphs.val.as_ref(),
            &self.classifier_spec()?,
            &self.classifier,
            derive_seed(seed, "classifier"),
        )
    }

    pub fn train_predictor(&self, seed: u64, graphs: &ScenarioGraphs) -> Result<Checkpoint> {
        train_homophily_predictor(
            &graphs.train,
            graphs.val.as_ref(),
            &self.predictor_spec()?,
            &self.predictor,
            derive_seed(seed, "predictor"),
        )
    }

    pub fn trial(&self, seed: u64) -> Result<Trial> {
        let graphs = self.graphs(seed)?;
        let classifier = self.train_classifier(seed, &graphs)?;
        let predictor = self.train_predictor(seed, &graphs)?;
        log::info!(
            "seed {seed}: classifier {} epochs, predictor {} epochs",
            classifier.metadata.epochs_run,
            predictor.metadata.epochs_run
        );
        Ok(Trial {
            seed,
            classifier,
            predictor,
            test: graphs.test,
        })
    }

    pub fn instantiate(&self, seeds: &[u64]) -> Result<TrialSet> {
        check_seeds(seeds)?;
        self.params.validate()?;
        let trials = seeds
            .iter()
            .map(|&s| self.trial(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialSet {
            scenario: json!({ "kind": "csbm", "settings": self }),
            trials,
        })
    }
}

/// Settings shared by all runners.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub transform: TransformConfig,
    pub metric: EvalMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    /// One value per seed, in seed order.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; absent with fewer than two seeds.
    pub std: Option<f64>,
}

impl ArmResult {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("arm has no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("experiment arm"));
        }
        let (mean, std) = mean_std(&values);
        Ok(Self {
            name: name.into(),
            std: (values.len() >= 2).then_some(std),
            values,
            mean,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Filled in by the caller; part of the output file name.
    pub timestamp: String,
    pub seeds: Vec<u64>,
    pub metric: EvalMetric,
    pub arms: Vec<ArmResult>,
    /// Edge homophily before and after the full transform, per seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub homophily: Vec<HdReport>,
    /// Edges removed by the full transform, per seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_edges: Vec<usize>,
    /// Edges removed by random dropping, per seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub random_removed_edges: Vec<usize>,
    pub config: Value,
}

impl ExperimentReport {
    fn new(name: &str, set: &TrialSet, options: &ExperimentOptions, extra: Value) -> Self {
        Self {
            experiment: name.to_string(),
            timestamp: String::new(),
            seeds: set.seeds(),
            metric: options.metric,
            arms: Vec::new(),
            homophily: Vec::new(),
            removed_edges: Vec::new(),
            random_removed_edges: Vec::new(),
            config: json!({ "scenario": set.scenario, "options": options, "experiment": extra }),
        }
    }

    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.name == name)
    }

    /// `"s3"`, `"s0-9"` for a consecutive run, otherwise `"s1_5_7"`.
    pub fn seed_set(&self) -> String {
        let s = &self.seeds;
        let consecutive = s.len() > 1 && s.windows(2).all(|w| w[1] == w[0] + 1);
        if consecutive {
            format!("s{}-{}", s[0], s[s.len() - 1])
        } else {
            let parts: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            format!("s{}", parts.join("_"))
        }
    }

    /// `<experiment>-<timestamp>-<seedset>.json`
    pub fn file_name(&self) -> String {
        let ts = if self.timestamp.is_empty() { "untimed" } else { &self.timestamp };
        format!("{}-{}-{}.json", self.experiment, ts, self.seed_set())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("experiment report", e))
    }

    /// Long format: one `arm,seed,value` row per measurement.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,seed,value\n");
        for arm in &self.arms {
            for (seed, v) in self.seeds.iter().zip(&arm.values) {
                out.push_str(&format!("{},{seed},{v}\n", arm.name));
            }
        }
        out
    }

    /// One `arm,mean,std` row per arm.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("arm,mean,std\n");
        for arm in &self.arms {
            let std = arm.std.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{std}\n", arm.name, arm.mean));
        }
        out
    }

    /// Writes the JSON report and its CSV next to each other in `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let json_path = dir.join(self.file_name());
        let csv_path = json_path.with_extension("csv");
        let json = self.to_json()?;
        fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        Ok((json_path, csv_path))
    }
}

struct Scored<'a> {
    trial: &'a Trial,
    truth: &'a [usize],
    scores: EdgeScoreTable,
    regime: Regime,
    metric: EvalMetric,
}

impl<'a> Scored<'a> {
    fn new(trial: &'a Trial, options: &ExperimentOptions) -> Result<Self> {
        Ok(Self {
            truth: trial.test.require_labels()?,
            scores: edge_homophily_scores(&trial.predictor, &trial.test.without_labels())?,
            regime: regime_for(&options.transform, &trial.predictor)?,
            trial,
            metric: options.metric,
        })
    }

    fn evaluate(&self, graph: &LabeledGraph, weights: Option<&[f64]>) -> Result<f64> {
        evaluate_checkpoint(&self.trial.classifier, graph, weights, self.truth, self.metric)
    }

    fn base(&self) -> Result<f64> {
        self.evaluate(&self.trial.test, None)
    }

    /// Metric after transforming with `config`, and the removed edge count.
    fn transformed(&self, config: &TransformConfig) -> Result<(f64, usize, HdReport)> {
        let out = transform_with_scores(&self.trial.test, self.scores.clone(), self.regime, config)?;
        let value = self.evaluate(out.graph.graph(), Some(out.graph.weights()))?;
        let hd = hd_delta_report(&self.trial.test, out.graph.graph(), self.truth)?;
        Ok((value, out.removed.len(), hd))
    }
}

fn arms_from(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Vec<ArmResult>> {
    names
        .into_iter()
        .zip(columns)
        .map(|(n, v)| ArmResult::new(n, v))
        .collect()
}

/// Arms `base` and `graphost`: the classifier on the test graph as given and
/// after the configured transform.
pub fn run_evaluation(set: &TrialSet, options: &ExperimentOptions) -> Result<ExperimentReport> {
    options.transform.validate()?;
    let mut report = ExperimentReport::new("evaluate", set, options, json!({}));
    let mut cols = vec![Vec::new(); 2];
    for trial in &set.trials {
        let s = Scored::new(trial, options)?;
        cols[0].push(s.base()?);
        let (v, removed, hd) = s.transformed(&options.transform)?;
        cols[1].push(v);
        report.removed_edges.push(removed);
        report.homophily.push(hd);
    }
    report.arms = arms_from(vec!["base".into(), "graphost".into()], cols)?;
    Ok(report)
}

/// Arms `base`, `w/o-weight`, `w/o-filter` and `full`.
pub fn run_ablation(set: &TrialSet, options: &ExperimentOptions) -> Result<ExperimentReport> {
    options.transform.validate()?;
    let full = TransformConfig {
        enable_weighting: true,
        enable_filtering: true,
        ..options.transform
    };
    let no_weight = TransformConfig { enable_weighting: false, ..full };
    let no_filter = TransformConfig { enable_filtering: false, ..full };
    let mut report = ExperimentReport::new("ablation", set, options, json!({}));
    let mut cols = vec![Vec::new(); 4];
    for trial in &set.trials {
        let s = Scored::new(trial, options)?;
        cols[0].push(s.base()?);
        cols[1].push(s.transformed(&no_weight)?.0);
        cols[2].push(s.transformed(&no_filter)?.0);
        let (v, removed, hd) = s.transformed(&full)?;
        cols[3].push(v);
        report.removed_edges.push(removed);
        report.homophily.push(hd);
    }
    let names = ["base", "w/o-weight", "w/o-filter", "full"].map(String::from).to_vec();
    report.arms = arms_from(names, cols)?;
    Ok(report)
}

pub const NOISE_LEVELS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

/// The untransformed `base` arm on the clean graph, then one `noise=<r>` arm
/// per level: the transform applied to the graph with ratio `r` of its
/// edges rewired.
pub fn run_noise_robustness(
    set: &TrialSet,
    options: &ExperimentOptions,
    levels: &[f64],
) -> Result<ExperimentReport> {
    options.transform.validate()?;
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no noise levels".into()));
    }
    let mut report = ExperimentReport::new(
        "noise-robustness",
        set,
        options,
        json!({ "noise_levels": levels }),
    );
    let mut cols = vec![Vec::new(); levels.len() + 1];
    for trial in &set.trials {
        cols[0].push(Scored::new(trial, options)?.base()?);
        for (k, &level) in levels.iter().enumerate() {
            let noisy = Trial {
                test: inject_structural_noise(&trial.test, level, trial.seed)?,
                ..trial.clone()
            };
            let s = Scored::new(&noisy, options)?;
            cols[k + 1].push(s.transformed(&options.transform)?.0);
        }
    }
    let mut names = vec!["base".to_string()];
    names.extend(levels.iter().map(|l| format!("noise={l}")));
    report.arms = arms_from(names, cols)?;
    Ok(report)
}

/// δ = 0.0, 0.1, ..., 0.9.
pub fn delta_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

/// One `delta=<δ>` arm per grid point, each with filtering on and the
/// remaining transform settings from `options`.
pub fn run_delta_sweep(
    set: &TrialSet,
    options: &ExperimentOptions,
    grid: &[f64],
) -> Result<ExperimentReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty delta grid".into()));
    }
    let configs = grid
        .iter()
        .map(|&delta| {
            let c = TransformConfig {
                delta,
                enable_filtering: true,
                ..options.transform
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("delta-sweep", set, options, json!({ "grid": grid }));
    let mut cols = vec![Vec::new(); grid.len()];
    for trial in &set.trials {
        let s = Scored::new(trial, options)?;
        for (col, c) in cols.iter_mut().zip(&configs) {
            col.push(s.transformed(c)?.0);
        }
    }
    let names = grid.iter().map(|d| format!("delta={d}")).collect();
    report.arms = arms_from(names, cols)?;
    Ok(report)
}

/// Arms `base`, `random` and `graphost`. The random arm drops exactly as
/// many uniformly chosen edges as the transform filtered for that seed.
pub fn run_random_drop_comparison(
    set: &TrialSet,
    options: &ExperimentOptions,
) -> Result<ExperimentReport> {
    options.transform.validate()?;
    let mut report = ExperimentReport::new("random-drop", set, options, json!({}));
    let mut cols = vec![Vec::new(); 3];
    for trial in &set.trials {
        let s = Scored::new(trial, options)?;
        cols[0].push(s.base()?);
        let (v, removed, hd) = s.transformed(&options.transform)?;
        let dropped = random_edge_drop(&trial.test, removed, trial.seed)?;
        let random_removed = trial.test.num_edges() - dropped.num_edges();
        if random_removed != removed {
            return Err(Error::InvalidGraph(format!(
                "random drop removed {random_removed} edges, expected {removed}"
            )));
        }
        cols[1].push(s.evaluate(&dropped, None)?);
        cols[2].push(v);
        report.removed_edges.push(removed);
        report.random_removed_edges.push(random_removed);
        report.homophily.push(hd);
    }
    let names = ["base", "random", "graphost"].map(String::from).to_vec();
    report.arms = arms_from(names, cols)?;
    Ok(report)
}

/// The predictor's ROC-AUC on the test edges (`auc`) and the edge homophily
/// before and after the transform.
pub fn run_predictor_quality(
    set: &TrialSet,
    options: &ExperimentOptions,
) -> Result<ExperimentReport> {
    options.transform.validate()?;
    let mut report = ExperimentReport::new("predictor-quality", set, options, json!({}));
    let mut auc = Vec::new();
    for trial in &set.trials {
        let s = Scored::new(trial, options)?;
        auc.push(roc_auc(s.scores.values(), &trial.test.edge_homophily_mask()?)?);
        let (_, removed, hd) = s.transformed(&options.transform)?;
        report.removed_edges.push(removed);
        report.homophily.push(hd);
    }
    report.arms = vec![ArmResult::new("auc", auc)?];
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TrainConfig;

    fn quick_set(seeds: &[u64]) -> TrialSet {
        let mut sc = CsbmScenario {
            params: CsbmParams::equidistant(4, 2.0, vec![40, 40], 0.15, 0.04).unwrap(),
            hidden: 8,
            ..CsbmScenario::default()
        };
        sc.classifier = TrainConfig { max_epochs: 30, ..TrainConfig::default() };
        sc.predictor.train = TrainConfig { max_epochs: 30, ..TrainConfig::default() };
        sc.instantiate(seeds).unwrap()
    }

    #[test]
    fn ablation_base_matches_direct_evaluation() {
        let set = quick_set(&[1, 2]);
        let r = run_ablation(&set, &ExperimentOptions::default()).unwrap();
        for (t, v) in set.trials.iter().zip(&r.arm("base").unwrap().values) {
            let direct = evaluate_checkpoint(
                &t.classifier,
                &t.test,
                None,
                t.test.labels().unwrap(),
                EvalMetric::Accuracy,
            )
            .unwrap();
            assert_eq!(*v, direct);
        }
        assert_eq!(r.arms.len(), 4);
        assert!(r.arm("full").unwrap().std.is_some());
    }

    #[test]
    fn sweep_zero_delta_is_the_no_filter_arm() {
        let set = quick_set(&[3]);
        let o = ExperimentOptions::default();
        let sweep = run_delta_sweep(&set, &o, &delta_grid()).unwrap();
        let ab = run_ablation(&set, &o).unwrap();
        assert_eq!(sweep.arms.len(), 10);
        assert_eq!(sweep.arms[0].values, ab.arm("w/o-filter").unwrap().values);
        assert_eq!(sweep.arms[0].std, None);
    }

    #[test]
    fn noise_zero_is_the_full_transform() {
        let set = quick_set(&[4]);
        let o = ExperimentOptions::default();
        let noise = run_noise_robustness(&set, &o, &NOISE_LEVELS).unwrap();
        let drop = run_random_drop_comparison(&set, &o).unwrap();
        assert_eq!(noise.arm("noise=0").unwrap().values, drop.arm("graphost").unwrap().values);
        assert_eq!(drop.removed_edges, drop.random_removed_edges);
    }

    #[test]
    fn file_names_and_csv() {
        let set = quick_set(&[0]);
        let mut r = run_predictor_quality(&set, &ExperimentOptions::default()).unwrap();
        r.seeds = vec![0, 1, 2];
        r.timestamp = "pinned".into();
        assert_eq!(r.file_name(), "predictor-quality-pinned-s0-2.json");
        r.seeds = vec![5, 1];
        assert_eq!(r.seed_set(), "s5_1");
        assert!(r.to_csv().starts_with("arm,seed,value\nauc,5,"));
        assert!(r.summary_csv().ends_with(",\n"));
    }

    #[test]
    fn empty_seed_list_is_refused() {
        assert!(CsbmScenario::default().instantiate(&[]).is_err());
    }
}
