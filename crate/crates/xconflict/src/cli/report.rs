//! Renders the human-readable run summary from the staged artifacts.

use std::fmt::Write;

use super::commands::{ConflictsFile, EffectsFile, FitReportFile, ImportanceMeta, StageContext};
use crate::confgraph::Finding;
use crate::shapley::ImportanceTable;

pub fn render(
    ctx: &StageContext,
    fit: &FitReportFile,
    importance: &ImportanceTable<f64>,
    meta: &ImportanceMeta,
    conflicts: &ConflictsFile,
    effects: &EffectsFile,
) -> String {
    let mut out = String::new();
    let w = &mut out;

    writeln!(w, "# Conflict Evaluation Report\n").unwrap();
    writeln!(w, "- config hash: `{}`", ctx.config_hash).unwrap();
    writeln!(w, "- master seed: {}", ctx.config.master_seed).unwrap();
    writeln!(
        w,
        "- episodes: {} x {} frames",
        ctx.config.sim.n_episodes, ctx.config.sim.frames_per_episode
    )
    .unwrap();
    writeln!(w).unwrap();

    writeln!(w, "## Scenario\n").unwrap();
    writeln!(w, "| xApp | controls | targets |").unwrap();
    writeln!(w, "|---|---|---|").unwrap();
    for x in &ctx.config.scenario.xapps {
        writeln!(
            w,
            "| {} ({}) | {} | {} |",
            x.id,
            x.name,
            x.controlled_rcps.join(", "),
            x.target_kpis.join(", ")
        )
        .unwrap();
    }
    if !ctx.config.scenario.structural_edges.is_empty() {
        let edges: Vec<String> = ctx
            .config
            .scenario
            .structural_edges
            .iter()
            .map(|(f, t)| format!("{f} -> {t}"))
            .collect();
        writeln!(w, "\nDeclared structural links: {}", edges.join("; ")).unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Model fit (held out)\n").unwrap();
    writeln!(w, "| KPI | R2 | RMSE | MAE | train / test |").unwrap();
    writeln!(w, "|---|---|---|---|---|").unwrap();
    for (kpi, r) in &fit.reports {
        writeln!(
            w,
            "| {kpi} | {:.4} | {:.4} | {:.4} | {} / {} |",
            r.r2, r.rmse, r.mae, r.n_train, r.n_test
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Attribution importance\n").unwrap();
    writeln!(
        w,
        "Edge threshold tau = {}; background = {} rows; evaluated samples = {}.\n",
        meta.tau, meta.background_size, meta.eval_samples
    )
    .unwrap();
    writeln!(w, "| KPI | feature | mean abs contribution | share |").unwrap();
    writeln!(w, "|---|---|---|---|").unwrap();
    for r in &importance.rows {
        writeln!(
            w,
            "| {} | {} | {:.4} | {:.4} |",
            r.kpi, r.feature, r.mean_abs_phi, r.normalized_share
        )
        .unwrap();
    }
    if !meta.degenerate_kpis.is_empty() {
        writeln!(
            w,
            "\nDegenerate (all-zero) attributions: {}",
            meta.degenerate_kpis.join(", ")
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Conflicts\n").unwrap();
    if conflicts.findings.is_empty() {
        writeln!(w, "No conflicts found.").unwrap();
    }
    for f in &conflicts.findings {
        match f {
            Finding::Direct { xapps, rcp } => writeln!(
                w,
                "- direct: {} and {} both set `{rcp}`",
                xapps[0], xapps[1]
            )
            .unwrap(),
            Finding::Indirect { xapps, rcps, kpi } => writeln!(
                w,
                "- indirect: {} and {} influence `{kpi}` through `{}` and `{}`",
                xapps[0], xapps[1], rcps[0], rcps[1]
            )
            .unwrap(),
            Finding::Implicit { xapps, path } => writeln!(
                w,
                "- implicit: {} and {} via `{}` -> `{}` -> `{}`",
                xapps[0], xapps[1], path[0], path[1], path[2]
            )
            .unwrap(),
        }
    }
    writeln!(w).unwrap();

    writeln!(w, "## Effect estimates\n").unwrap();
    writeln!(
        w,
        "Estimator: {:?}; bootstrap B = {}; min stratum n = {}.\n",
        effects.estimator, effects.bootstrap_samples, effects.min_stratum_n
    )
    .unwrap();
    writeln!(
        w,
        "| treatment | outcome | effect per unit | 95% CI | scale | adjusted for | n |"
    )
    .unwrap();
    writeln!(w, "|---|---|---|---|---|---|---|").unwrap();
    for entry in &effects.effects {
        match &entry.estimate {
            Some(e) => writeln!(
                w,
                "| {} | {} | {:+.4} | [{:+.4}, {:+.4}] | {} | {} | {} |",
                e.treatment,
                e.outcome,
                e.ate_per_unit,
                e.ci95.0,
                e.ci95.1,
                e.treatment_scale,
                if e.adjustment_set.is_empty() {
                    "(none)".to_string()
                } else {
                    e.adjustment_set.join(", ")
                },
                e.n_used
            )
            .unwrap(),
            None => writeln!(
                w,
                "| {} | {} | failed | - | - | - | - |",
                entry.treatment, entry.outcome
            )
            .unwrap(),
        }
    }
    writeln!(w).unwrap();

    if !effects.cates.is_empty() {
        writeln!(w, "## Conditional effects\n").unwrap();
        for c in &effects.cates {
            match &c.estimate {
                Some(est) => {
                    writeln!(
                        w,
                        "### {} -> {} by {}\n",
                        c.treatment, c.outcome, c.condition_variable
                    )
                    .unwrap();
                    writeln!(w, "| stratum | effect | stderr | n |").unwrap();
                    writeln!(w, "|---|---|---|---|").unwrap();
                    for s in &est.per_stratum {
                        match (s.effect, s.stderr) {
                            (Some(e), Some(se)) => {
                                writeln!(w, "| {} | {:+.4} | {:.4} | {} |", s.label, e, se, s.n)
                                    .unwrap()
                            }
                            (Some(e), None) => {
                                writeln!(w, "| {} | {:+.4} | - | {} |", s.label, e, s.n).unwrap()
                            }
                            _ => writeln!(
                                w,
                                "| {} | undefined (below min n) | - | {} |",
                                s.label, s.n
                            )
                            .unwrap(),
                        }
                    }
                    writeln!(
                        w,
                        "\nPooled: {:+.4} [{:+.4}, {:+.4}]\n",
                        est.base.ate_per_unit, est.base.ci95.0, est.base.ci95.1
                    )
                    .unwrap();
                }
                None => writeln!(
                    w,
                    "### {} -> {} by {}: failed ({})\n",
                    c.treatment,
                    c.outcome,
                    c.condition_variable,
                    c.error.as_deref().unwrap_or("unknown")
                )
                .unwrap(),
            }
        }
    }

    out
}
