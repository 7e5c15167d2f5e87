//! Experiment CLI: train/eval single models, run the cross-validation
//! harness, the stream scenario, multi-party simulation, and the
//! hyperparameter search.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sgbdt_core::data::{load_dataset, Schema};
use sgbdt_core::distributed::{distributed_train, uniform_shards, DEFAULT_SCALE_BITS};
use sgbdt_core::experiment::{
    cell_seeds, rows_to_csv, run_experiment, run_stream_scenario, run_tune, ExperimentConfig,
    LearnerSpec, TuneConfig,
};
use sgbdt_core::metrics::evaluate;
use sgbdt_core::model::{Ensemble, LossKind};
use sgbdt_core::rng::RunSeeds;
use sgbdt_core::trainer::train_sgbdt;

#[derive(Parser)]
#[command(name = "sgbdt", about = "Differentially private GBDT training and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model from an experiment config and write model + manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        manifest_out: Option<PathBuf>,
        /// Dump the per-point privacy ledger as CSV.
        #[arg(long)]
        ledger_csv: Option<PathBuf>,
        /// Structure seed, noise seed.
        #[arg(long, num_args = 2, default_values = ["1", "2"])]
        seeds: Vec<u64>,
    },
    /// Evaluate a serialized model on a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// folds x repeats cross-validated evaluation of one learner.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Late-batch stream scenario: filter-on vs filter-off rows.
    Stream {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulated k-party training on uniform shards.
    Distributed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        parties: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-order declared-grid hyperparameter search.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            model_out,
            manifest_out,
            ledger_csv,
            seeds,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let LearnerSpec::Sgbdt(params) = &cfg.learner else {
                bail!("train expects an sgbdt learner config");
            };
            let schema = Schema::load(&PathBuf::from(&cfg.schema))?;
            let data = load_dataset(&PathBuf::from(&cfg.dataset), &schema)?;
            let loss = LossKind::for_task(schema.task);
            let mut train_cfg = params.to_config(loss);
            train_cfg.keep_ledger_history = ledger_csv.is_some();
            let seeds = RunSeeds::new(seeds[0], seeds[1]);
            let model = train_sgbdt(&data, &train_cfg, seeds)?;
            std::fs::write(&model_out, model.ensemble.to_json())?;
            if let Some(path) = manifest_out {
                std::fs::write(path, model.manifest.to_json())?;
            }
            if let Some(path) = ledger_csv {
                std::fs::write(path, model.ledger.to_csv())?;
            }
            println!(
                "trained {} trees; reported epsilon {:.4} (plan alpha={} sigma2={:.4})",
                model.ensemble.trees.len(),
                model.manifest.epsilon_total_reported,
                model.manifest.plan.alpha_hat,
                model.manifest.plan.sigma2_leaf,
            );
            Ok(())
        }
        Command::Eval { data, schema, model } => {
            let schema = Schema::load(&schema)?;
            let dataset = load_dataset(&data, &schema)?;
            let ensemble = Ensemble::from_json(&std::fs::read_to_string(model)?)?;
            ensemble.validate_arity(schema.num_features())?;
            let preds: Vec<f64> = (0..dataset.len())
                .map(|i| ensemble.predict(dataset.row(i)))
                .collect();
            let metric = evaluate(schema.task, &preds, dataset.labels())?;
            println!("{metric:.6}");
            Ok(())
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = run_experiment(&cfg)?;
            std::fs::write(&out, rows_to_csv(&rows))
                .with_context(|| format!("writing {}", out.display()))?;
            for r in &rows {
                println!(
                    "{} {} eps={} -> {} = {:.4} +- {:.4}",
                    r.learner, r.dataset, r.epsilon, r.metric, r.mean, r.std
                );
            }
            Ok(())
        }
        Command::Stream { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = run_stream_scenario(&cfg)?;
            std::fs::write(&out, rows_to_csv(&rows))?;
            for r in &rows {
                println!(
                    "{} {} eps={} -> {} = {:.4} +- {:.4}",
                    r.learner, r.dataset, r.epsilon, r.metric, r.mean, r.std
                );
            }
            Ok(())
        }
        Command::Distributed {
            config,
            parties,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let LearnerSpec::Sgbdt(params) = &cfg.learner else {
                bail!("distributed expects an sgbdt learner config");
            };
            let schema = Schema::load(&PathBuf::from(&cfg.schema))?;
            let data = load_dataset(&PathBuf::from(&cfg.dataset), &schema)?;
            let loss = LossKind::for_task(schema.task);
            let train_cfg = params.to_config(loss);
            let seeds = cell_seeds(cfg.seed, 0, 0);
            let shards = uniform_shards(&data, parties, seeds);
            let party_seeds: Vec<u64> = (0..parties).map(|u| seeds.noise ^ u as u64).collect();
            let outcome = distributed_train(
                &shards,
                &train_cfg,
                seeds.structure,
                &party_seeds,
                DEFAULT_SCALE_BITS,
            )?;
            let preds: Vec<f64> = (0..data.len())
                .map(|i| outcome.ensemble.predict(data.row(i)))
                .collect();
            let metric = evaluate(schema.task, &preds, data.labels())?;
            std::fs::write(&out, serde_json::to_string_pretty(&outcome.manifest)?)?;
            println!(
                "{} parties, {} rounds, train-set metric {:.4}",
                parties,
                outcome.manifest.rounds,
                metric
            );
            Ok(())
        }
        Command::Tune { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: TuneConfig = serde_json::from_str(&text)?;
            let results = run_tune(&cfg)?;
            let mut csv = String::from("patch,learner,epsilon,metric,mean,std\n");
            for (patch, row) in &results {
                csv.push_str(&format!(
                    "\"{}\",{},{},{},{},{}\n",
                    patch.to_string().replace('"', "'"),
                    row.learner,
                    row.epsilon,
                    row.metric,
                    row.mean,
                    row.std
                ));
            }
            std::fs::write(&out, csv)?;
            for (patch, row) in &results {
                println!("{} -> {} = {:.4} +- {:.4}", patch, row.metric, row.mean, row.std);
            }
            Ok(())
        }
    }
}
