//! Temporary numeric survey of the default pipeline; not part of the suite.

use xconflict::causal::{estimate_ate, CausalOptions};
use xconflict::regressor::{evaluate, fit, GbtHyperParams};
use xconflict::shapley::global_importance;
use xconflict::simkernel::{
    generate_dataset, oracle_ate, oracle_ate_conditional, true_dag, KpiName, RcpName, SimConfig,
};

#[test]
#[ignore]
fn survey() {
    let t0 = std::time::Instant::now();
    let config = SimConfig::default(); // 1000 episodes, seed 42
    let data = generate_dataset::<f64>(&config).unwrap();
    println!("dataset: {} records in {:?}", data.len(), t0.elapsed());

    let (train, test) = data.split(0.8, xconflict::rng::stage_seed(42, "split")).unwrap();
    let hyper = GbtHyperParams::default();

    let t1 = std::time::Instant::now();
    let mut models = Vec::new();
    for kpi in KpiName::ALL {
        let model = fit(&train, kpi.column(), &hyper).unwrap();
        let report = evaluate(&model, &test).unwrap();
        println!(
            "{}: held-out r2={:.4} rmse={:.4} mae={:.4}",
            kpi.column(),
            report.r2,
            report.rmse,
            report.mae
        );
        models.push(model);
    }
    println!("training in {:?}", t1.elapsed());

    let t2 = std::time::Instant::now();
    let background = data.subsample(100, xconflict::rng::stage_seed(42, "shap-background"));
    let eval = data.subsample(200, xconflict::rng::stage_seed(42, "shap-eval"));
    for model in &models {
        let (rows, _) = global_importance(model, &eval, &background).unwrap();
        let shares: Vec<String> = rows
            .iter()
            .map(|r| format!("{}={:.4}", r.feature, r.normalized_share))
            .collect();
        println!("shares[{}]: {}", model.target, shares.join(" "));
    }
    println!("shap in {:?}", t2.elapsed());

    let t3 = std::time::Instant::now();
    let oracle_config = SimConfig {
        n_episodes: 20_000,
        master_seed: 4242,
        ..SimConfig::default()
    };
    let o_tx_thp = oracle_ate::<f64>(RcpName::TxPower, 1.0, KpiName::Throughput, &oracle_config).unwrap();
    let o_prb_thp = oracle_ate::<f64>(RcpName::NumPrbs, 1.0, KpiName::Throughput, &oracle_config).unwrap();
    let o_prb_se = oracle_ate::<f64>(
        RcpName::NumPrbs,
        1.0,
        KpiName::SpectralEfficiency,
        &oracle_config,
    )
    .unwrap();
    println!(
        "oracle tx->thp: {:.4} (used {} clamped {})",
        o_tx_thp.ate_per_unit, o_tx_thp.n_pairs_used, o_tx_thp.n_pairs_clamped
    );
    println!("oracle prb->thp: {:.4}", o_prb_thp.ate_per_unit);
    println!("oracle prb->se: {:.6}", o_prb_se.ate_per_unit);
    println!("oracles in {:?}", t3.elapsed());

    let t4 = std::time::Instant::now();
    let dag = true_dag();
    let options = CausalOptions {
        seed: xconflict::rng::stage_seed(42, "bootstrap"),
        ..Default::default()
    };
    let est_tx = estimate_ate(&data, &dag, "tx_power_dbm", "throughput_mbps", &options).unwrap();
    println!(
        "est tx->thp: {:.4} se={:.4} adj={:?} n={}",
        est_tx.ate_per_unit, est_tx.stderr_boot, est_tx.adjustment_set, est_tx.n_used
    );
    let est_prb = estimate_ate(&data, &dag, "num_prbs", "throughput_mbps", &options).unwrap();
    println!(
        "est prb->thp: {:.4} se={:.4} adj={:?} n={}",
        est_prb.ate_per_unit, est_prb.stderr_boot, est_prb.adjustment_set, est_prb.n_used
    );
    let est_prb_se = estimate_ate(
        &data,
        &dag,
        "num_prbs",
        "spectral_efficiency_bps_hz",
        &options,
    )
    .unwrap();
    let unadj = CausalOptions {
        adjustment_override: Some(vec![]),
        ..options.clone()
    };
    let est_prb_se_unadj = estimate_ate(
        &data,
        &dag,
        "num_prbs",
        "spectral_efficiency_bps_hz",
        &unadj,
    )
    .unwrap();
    println!(
        "est prb->se adjusted: {:.6} se={:.6}; unadjusted: {:.6} se={:.6}",
        est_prb_se.ate_per_unit,
        est_prb_se.stderr_boot,
        est_prb_se_unadj.ate_per_unit,
        est_prb_se_unadj.stderr_boot
    );
    println!("estimates in {:?}", t4.elapsed());

    // CATE heterogeneity by distance: oracle per stratum.
    let t5 = std::time::Instant::now();
    let strata = [(10.0, 100.0), (100.0, 200.0), (200.0, 300.0)];
    for (lo, hi) in strata {
        let o = oracle_ate_conditional::<f64>(
            RcpName::TxPower,
            1.0,
            KpiName::Throughput,
            &oracle_config,
            |_, ctx| ctx.ue_distance_m >= lo && ctx.ue_distance_m < hi,
        )
        .unwrap();
        println!(
            "oracle tx->thp | dist [{lo},{hi}): {:.4} (n={})",
            o.ate_per_unit, o.n_pairs_used
        );
    }
    println!("conditional oracles in {:?}", t5.elapsed());
    println!("total {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn dump_default_config() {
    let config = xconflict::cli::PipelineConfig::default();
    println!("{}", serde_json::to_string_pretty(&config).unwrap());
}
