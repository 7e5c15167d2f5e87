//! Reproduction harness: k-fold cross validation with repeats, ablation
//! wiring, the late-batch stream scenario, and a declared-grid
//! hyperparameter search. Every cell owns RNG substreams derived from
//! (seed, repeat, fold), so whole runs replay bit-identically.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, Dataset, Schema, Task};
use crate::dpboost::{train_dpboost, DpBoostConfig};
use crate::error::TrainError;
use crate::gbdt::{train_dp_mean, train_nonprivate, GbdtConfig};
use crate::manifest::config_hash;
use crate::metrics::evaluate;
use crate::model::LossKind;
use crate::params::{Hyperparameters, InitNoiseVariant};
use crate::rng::{derive_rng, derive_u64, tag, RunSeeds};
use crate::trainer::{train_sgbdt_stream, InitScoreMode, LeafNoiseMode, SgbdtConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgbdtParams {
    pub epsilon: f64,
    /// Share of the total budget routed to the init score.
    pub eps_init_fraction: f64,
    pub delta_trees: f64,
    pub g_star: f64,
    pub m_star: f64,
    pub lambda: f64,
    pub eta: f64,
    pub depth: u32,
    pub gamma: f64,
    pub t_regular: u32,
    pub t_extra: u32,
    pub r1: f64,
    pub r2: f64,
    pub r_num: f64,
    pub alpha_max: u32,
    #[serde(default = "default_true")]
    pub filter: bool,
    #[serde(default)]
    pub leaf_noise: LeafNoiseMode,
    #[serde(default = "default_true")]
    pub init_score: bool,
    #[serde(default)]
    pub init_noise_variant: InitNoiseVariant,
}

fn default_true() -> bool {
    true
}

impl SgbdtParams {
    pub fn to_config(&self, loss: LossKind) -> SgbdtConfig {
        let eps_init = self.epsilon * self.eps_init_fraction;
        let eps_trees = if self.init_score {
            self.epsilon
                - crate::accountant::init_score_pure_epsilon(self.init_noise_variant, eps_init)
        } else {
            self.epsilon
        };
        let hyper = Hyperparameters {
            g_star: self.g_star,
            m_star: self.m_star,
            lambda: self.lambda,
            eta: self.eta,
            depth: self.depth,
            gamma: self.gamma,
            t_regular: self.t_regular,
            t_extra: self.t_extra,
            eps_init,
            eps_trees,
            delta_trees: self.delta_trees,
            r1: self.r1,
            r2: self.r2,
            r_num: self.r_num,
            alpha_max: self.alpha_max,
            init_noise_variant: self.init_noise_variant,
        };
        SgbdtConfig {
            hyper,
            loss,
            filter_enabled: self.filter,
            leaf_noise: self.leaf_noise,
            init_score: if self.init_score {
                InitScoreMode::DpMean
            } else {
                InitScoreMode::Zero
            },
            keep_ledger_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpboostParams {
    pub epsilon: f64,
    pub eps_init_fraction: f64,
    pub inner_ensembles: u32,
    pub trees_per_ensemble: u32,
    pub depth: u32,
    pub eta: f64,
    pub lambda: f64,
    pub g_star: f64,
    pub m_star: f64,
    pub r_num: f64,
    #[serde(default)]
    pub gdf: bool,
    #[serde(default = "default_true")]
    pub init_score: bool,
    #[serde(default)]
    pub init_noise_variant: InitNoiseVariant,
}

impl DpboostParams {
    pub fn to_config(&self, loss: LossKind) -> DpBoostConfig {
        let eps_init = if self.init_score {
            self.epsilon * self.eps_init_fraction
        } else {
            0.0
        };
        let eps_trees = if self.init_score {
            self.epsilon
                - crate::accountant::init_score_pure_epsilon(self.init_noise_variant, eps_init)
        } else {
            self.epsilon
        };
        DpBoostConfig {
            loss,
            eps_trees,
            eps_init,
            inner_ensembles: self.inner_ensembles,
            trees_per_ensemble: self.trees_per_ensemble,
            depth: self.depth,
            eta: self.eta,
            lambda: self.lambda,
            g_star: self.g_star,
            m_star: self.m_star,
            r_num: self.r_num,
            gdf: self.gdf,
            init_score: self.init_score,
            init_noise_variant: self.init_noise_variant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpMeanParams {
    pub epsilon: f64,
    pub m_star: f64,
    #[serde(default)]
    pub init_noise_variant: InitNoiseVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonprivateParams {
    pub trees: u32,
    pub depth: u32,
    pub eta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum LearnerSpec {
    Sgbdt(SgbdtParams),
    Dpboost(DpboostParams),
    Dpmean(DpMeanParams),
    Nonprivate(NonprivateParams),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Sgbdt(_) => "sgbdt",
            LearnerSpec::Dpboost(_) => "dpboost",
            LearnerSpec::Dpmean(_) => "dpmean",
            LearnerSpec::Nonprivate(_) => "nonprivate",
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            LearnerSpec::Sgbdt(p) => p.epsilon,
            LearnerSpec::Dpboost(p) => p.epsilon,
            LearnerSpec::Dpmean(p) => p.epsilon,
            LearnerSpec::Nonprivate(_) => f64::INFINITY,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> LearnerSpec {
        let mut spec = self.clone();
        match &mut spec {
            LearnerSpec::Sgbdt(p) => p.epsilon = epsilon,
            LearnerSpec::Dpboost(p) => p.epsilon = epsilon,
            LearnerSpec::Dpmean(p) => p.epsilon = epsilon,
            LearnerSpec::Nonprivate(_) => {}
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamSkew {
    /// Batch drawn from the top label quartile (regression).
    TopLabelQuartile,
    /// Batch drawn from the positive class (classification).
    SingleClass,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamParams {
    pub batch_fraction: f64,
    pub skew: StreamSkew,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: String,
    pub schema: String,
    pub seed: u64,
    pub folds: u32,
    pub repeats: u32,
    pub learner: LearnerSpec,
    /// Optional grid of total budgets; one results row per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamParams>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::BadConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TrainError::BadConfig(e.to_string()))
    }
}

/// One aggregated results row, as written to results.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub learner: String,
    pub dataset: String,
    pub epsilon: f64,
    pub epsilon_reported: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
    pub config_hash: String,
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out =
        String::from("learner,dataset,epsilon,epsilon_reported,metric,mean,std,seed,config_hash\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.learner,
            r.dataset,
            r.epsilon,
            r.epsilon_reported,
            r.metric,
            r.mean,
            r.std,
            r.seed,
            r.config_hash
        ));
    }
    out
}

struct CellOutcome {
    metric: f64,
    epsilon_reported: f64,
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Regression => "r2",
        Task::Classification => "test_error",
    }
}

/// Deterministic CV split: fold `fold` of `folds` under shuffle `repeat`.
pub fn cv_split(n: usize, folds: u32, repeat: u32, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_rng(seed, &[tag::CV, repeat as u64]);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let folds = folds as usize;
    (0..folds)
        .map(|f| {
            let lo = f * n / folds;
            let hi = (f + 1) * n / folds;
            let test: Vec<usize> = order[lo..hi].to_vec();
            let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).cloned().collect();
            (train, test)
        })
        .collect()
}

fn train_and_eval(
    spec: &LearnerSpec,
    task: Task,
    train: &Dataset,
    test: &Dataset,
    seeds: RunSeeds,
) -> Result<CellOutcome, TrainError> {
    let loss = LossKind::for_task(task);
    let (ensemble, eps_reported) = match spec {
        LearnerSpec::Sgbdt(p) => {
            let cfg = p.to_config(loss);
            let model = train_sgbdt_stream(train, None, &cfg, seeds)?;
            (model.ensemble, model.manifest.epsilon_total_reported)
        }
        LearnerSpec::Dpboost(p) => {
            let cfg = p.to_config(loss);
            let (ensemble, manifest) = train_dpboost(train, &cfg, seeds)?;
            (ensemble, manifest.epsilon_total_reported)
        }
        LearnerSpec::Dpmean(p) => {
            let ensemble = train_dp_mean(
                train,
                loss,
                p.m_star,
                p.epsilon,
                p.init_noise_variant,
                seeds,
            )?;
            (
                ensemble,
                crate::accountant::init_score_pure_epsilon(p.init_noise_variant, p.epsilon),
            )
        }
        LearnerSpec::Nonprivate(p) => {
            let cfg = GbdtConfig {
                loss,
                trees: p.trees,
                depth: p.depth,
                eta: p.eta,
                lambda: p.lambda,
            };
            (train_nonprivate(train, &cfg)?, f64::INFINITY)
        }
    };
    let preds: Vec<f64> = (0..test.len()).map(|i| ensemble.predict(test.row(i))).collect();
    let metric = evaluate(task, &preds, test.labels())?;
    Ok(CellOutcome {
        metric,
        epsilon_reported: eps_reported,
    })
}

fn aggregate(
    cfg: &ExperimentConfig,
    learner_label: &str,
    epsilon: f64,
    task: Task,
    outcomes: &[CellOutcome],
    hash: &str,
) -> ResultRow {
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.metric).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|o| (o.metric - mean).powi(2))
        .sum::<f64>()
        / n;
    let eps_rep = outcomes.iter().map(|o| o.epsilon_reported).sum::<f64>() / n;
    ResultRow {
        learner: learner_label.to_string(),
        dataset: cfg.name.clone(),
        epsilon,
        epsilon_reported: eps_rep,
        metric: metric_name(task).to_string(),
        mean,
        std: var.sqrt(),
        seed: cfg.seed,
        config_hash: hash.to_string(),
    }
}

/// folds x repeats evaluation of one learner at each requested epsilon.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, TrainError> {
    let schema = Schema::load(Path::new(&cfg.schema))?;
    let data = load_dataset(Path::new(&cfg.dataset), &schema)?;
    run_experiment_on(cfg, &data)
}

/// As `run_experiment` but on a pre-loaded dataset (the test suites reuse one
/// in-memory copy).
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    data: &Dataset,
) -> Result<Vec<ResultRow>, TrainError> {
    let task = data.schema.task;
    let epsilons = cfg
        .epsilons
        .clone()
        .unwrap_or_else(|| vec![cfg.learner.epsilon()]);
    let mut rows = Vec::new();
    for eps in epsilons {
        let spec = cfg.learner.with_epsilon(eps);
        let hash = config_hash(&(&spec, cfg.seed, cfg.folds, cfg.repeats));
        let cells: Vec<(u32, u32)> = (0..cfg.repeats)
            .flat_map(|r| (0..cfg.folds).map(move |f| (r, f)))
            .collect();
        let outcomes: Result<Vec<CellOutcome>, TrainError> = cells
            .par_iter()
            .map(|&(repeat, fold)| {
                let splits = cv_split(data.len(), cfg.folds, repeat, cfg.seed);
                let (train_idx, test_idx) = &splits[fold as usize];
                let train = data.subset(train_idx);
                let test = data.subset(test_idx);
                let seeds = cell_seeds(cfg.seed, repeat, fold);
                train_and_eval(&spec, task, &train, &test, seeds)
            })
            .collect();
        rows.push(aggregate(cfg, spec.name(), eps, task, &outcomes?, &hash));
    }
    Ok(rows)
}

pub fn cell_seeds(seed: u64, repeat: u32, fold: u32) -> RunSeeds {
    RunSeeds {
        structure: derive_u64(seed, &[tag::CELL, repeat as u64, fold as u64, 1]),
        noise: derive_u64(seed, &[tag::CELL, repeat as u64, fold as u64, 2]),
    }
}

/// Split a training set into the initial pool and the late-arriving batch.
pub fn stream_split(
    data: &Dataset,
    train_idx: &[usize],
    params: &StreamParams,
    seed: u64,
    repeat: u32,
    fold: u32,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = derive_rng(seed, &[tag::STREAM_BATCH, repeat as u64, fold as u64]);
    let batch_target = ((train_idx.len() as f64) * params.batch_fraction).round() as usize;
    let mut candidates: Vec<usize> = match params.skew {
        StreamSkew::Iid => train_idx.to_vec(),
        StreamSkew::TopLabelQuartile => {
            let mut labels: Vec<f64> = train_idx.iter().map(|&i| data.label(i)).collect();
            labels.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
            let q3 = labels[(labels.len() * 3) / 4];
            train_idx.iter().cloned().filter(|&i| data.label(i) >= q3).collect()
        }
        StreamSkew::SingleClass => train_idx
            .iter()
            .cloned()
            .filter(|&i| data.label(i) > 0.5)
            .collect(),
    };
    for i in (1..candidates.len()).rev() {
        let j = rng.random_range(0..=i);
        candidates.swap(i, j);
    }
    let batch: Vec<usize> = candidates.into_iter().take(batch_target).collect();
    let batch_set: std::collections::HashSet<usize> = batch.iter().cloned().collect();
    let pool: Vec<usize> = train_idx
        .iter()
        .cloned()
        .filter(|i| !batch_set.contains(i))
        .collect();
    (pool, batch)
}

/// Stream scenario: train on the pool for the regular rounds, inject the
/// batch, keep training under the filter; report both arms.
pub fn run_stream_scenario(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, TrainError> {
    let schema = Schema::load(Path::new(&cfg.schema))?;
    let data = load_dataset(Path::new(&cfg.dataset), &schema)?;
    run_stream_scenario_on(cfg, &data)
}

pub fn run_stream_scenario_on(
    cfg: &ExperimentConfig,
    data: &Dataset,
) -> Result<Vec<ResultRow>, TrainError> {
    let task = data.schema.task;
    let LearnerSpec::Sgbdt(params) = &cfg.learner else {
        return Err(TrainError::BadConfig(
            "stream scenario runs the sgbdt learner".into(),
        ));
    };
    let stream = cfg
        .stream
        .as_ref()
        .ok_or_else(|| TrainError::BadConfig("missing stream parameters".into()))?;
    let loss = LossKind::for_task(task);

    let cells: Vec<(u32, u32)> = (0..cfg.repeats)
        .flat_map(|r| (0..cfg.folds).map(move |f| (r, f)))
        .collect();
    let outcomes: Result<Vec<(CellOutcome, CellOutcome)>, TrainError> = cells
        .par_iter()
        .map(|&(repeat, fold)| {
            let splits = cv_split(data.len(), cfg.folds, repeat, cfg.seed);
            let (train_idx, test_idx) = &splits[fold as usize];
            let (pool_idx, batch_idx) =
                stream_split(data, train_idx, stream, cfg.seed, repeat, fold);
            let pool = data.subset(&pool_idx);
            let batch = data.subset(&batch_idx);
            let test = data.subset(test_idx);
            let seeds = cell_seeds(cfg.seed, repeat, fold);

            let mut on_cfg = params.to_config(loss);
            on_cfg.filter_enabled = true;
            let on = train_sgbdt_stream(&pool, Some(&batch), &on_cfg, seeds)?;
            let mut off_cfg = params.to_config(loss);
            off_cfg.filter_enabled = false;
            let off = train_sgbdt_stream(&pool, Some(&batch), &off_cfg, seeds)?;

            let eval = |e: &crate::model::Ensemble| -> Result<f64, TrainError> {
                let preds: Vec<f64> =
                    (0..test.len()).map(|i| e.predict(test.row(i))).collect();
                evaluate(task, &preds, test.labels())
            };
            Ok((
                CellOutcome {
                    metric: eval(&on.ensemble)?,
                    epsilon_reported: on.manifest.epsilon_total_reported,
                },
                CellOutcome {
                    metric: eval(&off.ensemble)?,
                    epsilon_reported: off.manifest.epsilon_total_reported,
                },
            ))
        })
        .collect();
    let outcomes = outcomes?;
    let on: Vec<CellOutcome> = outcomes
        .iter()
        .map(|(a, _)| CellOutcome {
            metric: a.metric,
            epsilon_reported: a.epsilon_reported,
        })
        .collect();
    let off: Vec<CellOutcome> = outcomes
        .iter()
        .map(|(_, b)| CellOutcome {
            metric: b.metric,
            epsilon_reported: b.epsilon_reported,
        })
        .collect();
    let hash = config_hash(&(params, stream, cfg.seed, cfg.folds, cfg.repeats));
    Ok(vec![
        aggregate(cfg, "sgbdt_stream_filter_on", params.epsilon, task, &on, &hash),
        aggregate(cfg, "sgbdt_stream_filter_off", params.epsilon, task, &off, &hash),
    ])
}

/// Declared-grid hyperparameter search: JSON field overrides applied to the
/// base learner, evaluated in a seed-shuffled random order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneConfig {
    pub base: ExperimentConfig,
    pub grid: Vec<serde_json::Value>,
    pub shuffle_seed: u64,
}

pub fn run_tune(cfg: &TuneConfig) -> Result<Vec<(serde_json::Value, ResultRow)>, TrainError> {
    let schema = Schema::load(Path::new(&cfg.base.schema))?;
    let data = load_dataset(Path::new(&cfg.base.dataset), &schema)?;
    let mut order: Vec<usize> = (0..cfg.grid.len()).collect();
    let mut rng = derive_rng(cfg.shuffle_seed, &[tag::CELL]);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut out = Vec::new();
    for idx in order {
        let patch = &cfg.grid[idx];
        let learner = apply_patch(&cfg.base.learner, patch)?;
        let cell_cfg = ExperimentConfig {
            learner,
            ..cfg.base.clone()
        };
        let rows = run_experiment_on(&cell_cfg, &data)?;
        for row in rows {
            out.push((patch.clone(), row));
        }
    }
    Ok(out)
}

fn apply_patch(spec: &LearnerSpec, patch: &serde_json::Value) -> Result<LearnerSpec, TrainError> {
    let mut value = serde_json::to_value(spec).expect("spec serializes");
    if let (Some(obj), Some(patch_obj)) = (value.as_object_mut(), patch.as_object()) {
        for (k, v) in patch_obj {
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| TrainError::BadConfig(e.to_string()))
}
