//! Stage implementations. Each stage consumes only the config plus files
//! written by earlier stages, so any stage can be rerun in isolation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::CliError;
use crate::causal::{effect_matrix, estimate_cate, CateEstimate, EffectEntry, Estimator};
use crate::confgraph::{build_dag, classify_conflicts, CausalDag, ConflictGraph, ConflictReport,
                       Finding};
use crate::dataset::{ColumnRole, Dataset};
use crate::regressor::{evaluate, fit, FitReport, GbtModel};
use crate::rng::stage_seed;
use crate::shapley::{efficiency_residual, global_importance, ImportanceTable};
use crate::simkernel::{generate_dataset, table_schema, KpiName};

pub struct StageContext {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub config_hash: String,
}

impl StageContext {
    pub fn new(config: PipelineConfig, out_dir: PathBuf) -> Result<Self, CliError> {
        config.validate().map_err(CliError::Config)?;
        let config_hash = config.hash();
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(StageContext {
            config,
            out_dir,
            config_hash,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn require(&self, name: &str, produced_by: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        if !p.exists() {
            return Err(CliError::Data(format!(
                "{} not found; run the `{produced_by}` stage first",
                p.display()
            )));
        }
        Ok(p)
    }

    fn load_dataset(&self) -> Result<Dataset<f64>, CliError> {
        let path = self.require("dataset.csv", "simulate")?;
        Dataset::load(&path).map_err(|e| CliError::Data(e.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReportFile {
    pub config_hash: String,
    pub master_seed: u64,
    pub reports: BTreeMap<String, FitReport<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImportanceMeta {
    pub config_hash: String,
    pub master_seed: u64,
    pub tau: f64,
    pub background_size: usize,
    pub eval_samples: usize,
    pub degenerate_kpis: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConflictsFile {
    pub config_hash: String,
    pub master_seed: u64,
    pub tau: f64,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CateEntry {
    pub treatment: String,
    pub outcome: String,
    pub condition_variable: String,
    pub estimate: Option<CateEstimate<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EffectsFile {
    pub config_hash: String,
    pub master_seed: u64,
    pub estimator: Estimator,
    pub bootstrap_samples: usize,
    pub min_stratum_n: usize,
    pub effects: Vec<EffectEntry<f64>>,
    pub cates: Vec<CateEntry>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, json).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_simulate(ctx: &StageContext) -> Result<(), CliError> {
    let sim = ctx.config.sim_config();
    let dataset = generate_dataset::<f64>(&sim).map_err(CliError::from_sim)?;
    let path = ctx.path("dataset.csv");
    dataset
        .save(&path)
        .map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "simulate: {} episodes (seed {}) -> {}; prb clamps: {}",
        dataset.len(),
        sim.master_seed,
        path.display(),
        dataset.provenance.clamp_events
    );
    Ok(())
}

pub fn cmd_train(ctx: &StageContext) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let (train, test) = dataset
        .split(
            ctx.config.model.train_fraction,
            stage_seed(ctx.config.master_seed, "split"),
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
    let models_dir = ctx.path("models");
    fs::create_dir_all(&models_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", models_dir.display())))?;

    let mut reports = BTreeMap::new();
    for kpi in KpiName::ALL {
        let model =
            fit(&train, kpi.column(), &ctx.config.model.hyper).map_err(CliError::from_model)?;
        let report = evaluate(&model, &test).map_err(CliError::from_model)?;
        println!(
            "train: {} held-out r2={:.4} rmse={:.4} mae={:.4} (n_train={}, n_test={})",
            kpi.column(),
            report.r2,
            report.rmse,
            report.mae,
            report.n_train,
            report.n_test
        );
        model
            .save_json(&models_dir.join(format!("{}.json", kpi.column())))
            .map_err(CliError::from_model)?;
        reports.insert(kpi.column().to_string(), report);
    }
    write_json(
        &ctx.path("fit_report.json"),
        &FitReportFile {
            config_hash: ctx.config_hash.clone(),
            master_seed: ctx.config.master_seed,
            reports,
        },
    )
}

fn load_models(ctx: &StageContext) -> Result<Vec<GbtModel<f64>>, CliError> {
    KpiName::ALL
        .iter()
        .map(|kpi| {
            let path = ctx.path(&format!("models/{}.json", kpi.column()));
            if !path.exists() {
                return Err(CliError::Data(format!(
                    "{} not found; run the `train` stage first",
                    path.display()
                )));
            }
            GbtModel::load_json(&path).map_err(CliError::from_model)
        })
        .collect()
}

pub fn cmd_explain(ctx: &StageContext) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let models = load_models(ctx)?;
    let shap = &ctx.config.shap;
    let background = dataset.subsample(
        shap.background_size,
        stage_seed(ctx.config.master_seed, "shap-background"),
    );
    let eval = dataset.subsample(
        shap.eval_samples,
        stage_seed(ctx.config.master_seed, "shap-eval"),
    );

    let mut table = ImportanceTable::<f64>::default();
    let mut matrices = Vec::new();
    let mut degenerate_kpis = Vec::new();
    for model in &models {
        let (rows, matrix) =
            global_importance(model, &eval, &background).map_err(CliError::from_shap)?;
        if rows.iter().any(|r| r.degenerate) {
            degenerate_kpis.push(model.target.clone());
        }
        table.rows.extend(rows);
        matrices.push(matrix);
    }
    table
        .save_csv(&ctx.path("importance.csv"))
        .map_err(CliError::from_shap)?;
    write_json(
        &ctx.path("importance.meta.json"),
        &ImportanceMeta {
            config_hash: ctx.config_hash.clone(),
            master_seed: ctx.config.master_seed,
            tau: shap.tau,
            background_size: background.len(),
            eval_samples: eval.len(),
            degenerate_kpis,
        },
    )?;
    if shap.dump_attributions {
        ImportanceTable::save_attributions_csv(&matrices, &ctx.path("attributions.csv"))
            .map_err(CliError::from_shap)?;
    }

    // Efficiency spot check on a few evaluated samples per KPI.
    let mut max_residual = 0.0f64;
    for (model, matrix) in models.iter().zip(&matrices) {
        let rows = eval
            .rows(&model.feature_names)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let mut rng = crate::rng::seeded(stage_seed(ctx.config.master_seed, "shap-spotcheck"));
        for _ in 0..10 {
            let i = rand::Rng::gen_range(&mut rng, 0..rows.len());
            let residual =
                efficiency_residual(model, &rows[i], &matrix.phi[i], matrix.base_value);
            max_residual = max_residual.max(residual);
        }
    }
    println!(
        "explain: {} kpis x {} features -> {}; efficiency residual (30 spot checks) <= {:.3e}",
        models.len(),
        models.first().map(|m| m.feature_names.len()).unwrap_or(0),
        ctx.path("importance.csv").display(),
        max_residual
    );
    Ok(())
}

fn rebuild_dag(ctx: &StageContext, table: &ImportanceTable<f64>) -> Result<CausalDag, CliError> {
    let schema = table_schema();
    let roles: BTreeMap<String, ColumnRole> = schema
        .columns
        .iter()
        .map(|c| (c.name.clone(), c.role))
        .collect();
    build_dag(
        table,
        &roles,
        &ctx.config.scenario.structural_edges,
        ctx.config.shap.tau,
        ctx.config.model.hyper.include_context,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_graph(ctx: &StageContext) -> Result<(), CliError> {
    let table = ImportanceTable::<f64>::load_csv(&ctx.require("importance.csv", "explain")?)
        .map_err(CliError::from_shap)?;
    let dag = rebuild_dag(ctx, &table)?;
    let graph = ConflictGraph::from_scenario(ctx.config.scenario.xapps.clone(), &dag)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = classify_conflicts(&graph, &dag);

    fs::write(ctx.path("graph.dot"), graph.to_dot())
        .map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(ctx.path("dag.dot"), dag.to_dot()).map_err(|e| CliError::Data(e.to_string()))?;
    write_json(
        &ctx.path("conflicts.json"),
        &ConflictsFile {
            config_hash: ctx.config_hash.clone(),
            master_seed: ctx.config.master_seed,
            tau: ctx.config.shap.tau,
            findings: report.findings.clone(),
        },
    )?;
    let count = |kind: &str| report.of_kind(kind).len();
    println!(
        "graph: {} nodes, {} edges; conflicts: {} direct, {} indirect, {} implicit",
        dag.len(),
        dag.edges().len(),
        count("direct"),
        count("indirect"),
        count("implicit")
    );
    Ok(())
}

pub fn cmd_estimate(ctx: &StageContext) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let table = ImportanceTable::<f64>::load_csv(&ctx.require("importance.csv", "explain")?)
        .map_err(CliError::from_shap)?;
    let dag = rebuild_dag(ctx, &table)?;
    let conflicts: ConflictsFile = read_json(&ctx.require("conflicts.json", "graph")?)?;
    let report = ConflictReport {
        findings: conflicts.findings,
    };
    let options = ctx.config.causal_options();

    let effects = effect_matrix(&dataset, &dag, &report, &options);
    if effects.iter().all(|e| e.estimate.is_none()) && !effects.is_empty() {
        return Err(CliError::Estimation(
            "every conflicting pair failed estimation".into(),
        ));
    }

    let mut cates = Vec::new();
    for entry in &effects {
        if entry.estimate.is_none() {
            continue;
        }
        for condition in &ctx.config.causal.cate_conditions {
            if condition.variable == entry.treatment || condition.variable == entry.outcome {
                continue;
            }
            let result = estimate_cate(
                &dataset,
                &dag,
                &entry.treatment,
                &entry.outcome,
                condition,
                &options,
            );
            cates.push(match result {
                Ok(estimate) => CateEntry {
                    treatment: entry.treatment.clone(),
                    outcome: entry.outcome.clone(),
                    condition_variable: condition.variable.clone(),
                    estimate: Some(estimate),
                    error: None,
                },
                Err(e) => CateEntry {
                    treatment: entry.treatment.clone(),
                    outcome: entry.outcome.clone(),
                    condition_variable: condition.variable.clone(),
                    estimate: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }

    for entry in &effects {
        match &entry.estimate {
            Some(e) => println!(
                "estimate: {} -> {}: {:+.4} per {} [{:.4}, {:.4}] adj={:?} n={}",
                e.treatment,
                e.outcome,
                e.ate_per_unit,
                e.treatment_scale,
                e.ci95.0,
                e.ci95.1,
                e.adjustment_set,
                e.n_used
            ),
            None => println!(
                "estimate: {} -> {}: failed ({})",
                entry.treatment,
                entry.outcome,
                entry.error.as_deref().unwrap_or("unknown")
            ),
        }
    }

    write_json(
        &ctx.path("effects.json"),
        &EffectsFile {
            config_hash: ctx.config_hash.clone(),
            master_seed: ctx.config.master_seed,
            estimator: options.estimator,
            bootstrap_samples: options.bootstrap_samples,
            min_stratum_n: options.min_stratum_n,
            effects,
            cates,
        },
    )
}

pub fn cmd_report(ctx: &StageContext) -> Result<(), CliError> {
    let fit: FitReportFile = read_json(&ctx.require("fit_report.json", "train")?)?;
    let importance =
        ImportanceTable::<f64>::load_csv(&ctx.require("importance.csv", "explain")?)
            .map_err(CliError::from_shap)?;
    let meta: ImportanceMeta = read_json(&ctx.require("importance.meta.json", "explain")?)?;
    let conflicts: ConflictsFile = read_json(&ctx.require("conflicts.json", "graph")?)?;
    let effects: EffectsFile = read_json(&ctx.require("effects.json", "estimate")?)?;

    let text = super::report::render(ctx, &fit, &importance, &meta, &conflicts, &effects);
    let path = ctx.path("report.md");
    fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    println!("report: {}", path.display());
    Ok(())
}

pub const STAGES: [&str; 6] = ["simulate", "train", "explain", "graph", "estimate", "report"];

pub fn run_stage(ctx: &StageContext, stage: &str) -> Result<(), CliError> {
    match stage {
        "simulate" => cmd_simulate(ctx),
        "train" => cmd_train(ctx),
        "explain" => cmd_explain(ctx),
        "graph" => cmd_graph(ctx),
        "estimate" => cmd_estimate(ctx),
        "report" => cmd_report(ctx),
        other => Err(CliError::Config(format!(
            "unknown stage `{other}` (expected one of {})",
            STAGES.join(", ")
        ))),
    }
}

pub fn cmd_pipeline(ctx: &StageContext, stages: &[String]) -> Result<(), CliError> {
    let selected: Vec<&str> = if stages.is_empty() {
        STAGES.to_vec()
    } else {
        // Run the requested subset in canonical order.
        for s in stages {
            if !STAGES.contains(&s.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown stage `{s}` (expected one of {})",
                    STAGES.join(", ")
                )));
            }
        }
        STAGES
            .iter()
            .copied()
            .filter(|s| stages.iter().any(|x| x == s))
            .collect()
    };
    let t0 = std::time::Instant::now();
    for stage in &selected {
        run_stage(ctx, stage)?;
    }
    println!(
        "pipeline: {} stages in {:.2?} (config {})",
        selected.len(),
        t0.elapsed(),
        &ctx.config_hash[..12]
    );
    Ok(())
}
