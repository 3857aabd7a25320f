//! Command implementations: synthesis pipeline, impact inspection,
//! controller evaluation, the built-in demo experiment and certificates.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use risksynth::certificate::{certificate, Certificate};
use risksynth::impact::impact_exact;
use risksynth::model::{validate_model, Controller};
use risksynth::optimizer::{
    design_dimension, evaluate_risk, minimize_cvar, minimize_nominal, ImpactMetric,
};
use risksynth::scenario::{draw_scenarios, ScenarioSet};
use risksynth::serde_matrix;

use crate::config::{demo_config, ExperimentConfig};
use crate::error::CliError;
use crate::report::{
    box_stats, box_stats_csv, certificate_csv, certificate_table, fnv1a64, samples_csv,
    BoxStatsRow, CertificateTable, EvaluationReport, Provenance, RunReport, SynthSummary,
};

/// The epsilon grid used for confidence curves: 0.01, 0.02, ..., 0.99.
pub fn epsilon_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Fingerprint of the experiment inputs; the output section is excluded so
/// that redirecting artifacts does not change the hash.
fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut normalized = cfg.clone();
    normalized.output = Default::default();
    let canonical = serde_json::to_string(&normalized).expect("config serialization");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

/// Evaluates proxy and exact impact under two controllers on one fresh
/// sample set, as the four box-stat rows plus raw columns.
struct Evaluation {
    rows: Vec<BoxStatsRow>,
    proxy_optimal: Vec<f64>,
    proxy_nominal: Vec<f64>,
    exact_optimal: Vec<f64>,
    exact_nominal: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate_controllers(
    built: &crate::config::BuiltExperiment,
    alpha: f64,
    eta: f64,
    k_optimal: &DMatrix<f64>,
    k_nominal: &DMatrix<f64>,
    n_eval: usize,
    seed: u64,
) -> Result<Evaluation, CliError> {
    let run = |k: &DMatrix<f64>, metric: ImpactMetric| {
        evaluate_risk(
            &built.plant,
            &built.unc,
            k,
            &built.hor,
            eta,
            alpha,
            n_eval,
            seed,
            metric,
        )
    };
    let proxy_optimal = run(k_optimal, ImpactMetric::Proxy)?.values;
    let proxy_nominal = run(k_nominal, ImpactMetric::Proxy)?.values;
    let exact_optimal = run(k_optimal, ImpactMetric::Exact)?.values;
    let exact_nominal = run(k_nominal, ImpactMetric::Exact)?.values;
    let rows = vec![
        BoxStatsRow {
            metric: "q_exact".into(),
            controller: "optimal".into(),
            stats: box_stats(&exact_optimal),
        },
        BoxStatsRow {
            metric: "q_exact".into(),
            controller: "nominal".into(),
            stats: box_stats(&exact_nominal),
        },
        BoxStatsRow {
            metric: "q_proxy".into(),
            controller: "optimal".into(),
            stats: box_stats(&proxy_optimal),
        },
        BoxStatsRow {
            metric: "q_proxy".into(),
            controller: "nominal".into(),
            stats: box_stats(&proxy_nominal),
        },
    ];
    Ok(Evaluation {
        rows,
        proxy_optimal,
        proxy_nominal,
        exact_optimal,
        exact_nominal,
    })
}

pub struct SynthOutcome {
    pub report: RunReport,
    pub scenarios: ScenarioSet,
    pub evaluation_samples_csv: String,
}

/// The full design pipeline: validate, sample, synthesize, certify,
/// evaluate against the nominal baseline.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<SynthOutcome, CliError> {
    let started = Instant::now();
    let built = cfg.build()?;
    validate_model(&built.plant, &built.unc, &built.hor)
        .into_result()
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let n = cfg.scenarios.n;
    let m = built.m;
    let d = design_dimension(built.plant.n_x());
    if cfg.risk.certify && n < m + d {
        return Err(CliError::Config(format!(
            "certification requires N >= m + d: N = {n}, m = {m}, d = {d}"
        )));
    }

    let set = draw_scenarios(&built.unc, n, cfg.scenarios.seed)?;
    let eta = cfg.risk.eta;
    let result = minimize_cvar(
        &built.plant,
        &built.unc,
        &set,
        &built.hor,
        eta,
        m,
        &built.solver,
    )?;
    let nominal = minimize_nominal(&built.plant, &built.unc, &built.hor, eta, &built.solver)?;

    let certificate_rows: Option<Vec<Certificate>> = if cfg.risk.certify {
        Some(
            epsilon_grid()
                .into_iter()
                .map(|eps| certificate(n, m, d, eps))
                .collect::<risksynth::Result<_>>()?,
        )
    } else {
        None
    };

    let evaluation = evaluate_controllers(
        &built,
        cfg.risk.alpha,
        eta,
        &result.k_star,
        &nominal.k_star,
        cfg.evaluation.n_eval,
        cfg.evaluation.eval_seed,
    )?;

    let regularization = eta * result.k_star.norm_squared();
    let summary = SynthSummary {
        n_scenarios: n,
        m,
        alpha: cfg.risk.alpha,
        eta,
        objective_cvar: result.objective,
        objective_kyfan: result.objective - regularization,
        regularization,
        shortfall_threshold: result.shortfall_threshold,
        iterations: result.iterations,
        converged: result.converged,
        proxy_values_distinct: risksynth::certificate::proxy_values_distinct(
            &result.per_scenario_proxy,
            1e-12,
        ),
    };

    let samples = samples_csv(
        &[
            "sample",
            "q_exact_nominal",
            "q_exact_optimal",
            "q_proxy_nominal",
            "q_proxy_optimal",
        ],
        &[
            &evaluation.exact_nominal,
            &evaluation.exact_optimal,
            &evaluation.proxy_nominal,
            &evaluation.proxy_optimal,
        ],
    );

    let report = RunReport {
        summary,
        synthesis: result,
        certificate: certificate_rows.as_deref().and_then(certificate_table),
        evaluation: EvaluationReport {
            n_eval: cfg.evaluation.n_eval,
            eval_seed: cfg.evaluation.eval_seed,
            nominal_k: serde_matrix::to_rows(&nominal.k_star),
            rows: evaluation.rows,
        },
        provenance: Provenance {
            config_hash: config_hash(cfg),
            scenario_seed: cfg.scenarios.seed,
            eval_seed: cfg.evaluation.eval_seed,
            threads: rayon::current_num_threads(),
            timing_ms: started.elapsed().as_millis(),
        },
    };

    Ok(SynthOutcome {
        report,
        scenarios: set,
        evaluation_samples_csv: samples,
    })
}

/// Writes the report and its CSV side tables into `dir` according to the
/// configured formats.
pub fn write_synth_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &SynthOutcome,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let formats = &cfg.output.formats;
    if formats.iter().any(|f| f == "json") {
        std::fs::write(dir.join("report.json"), outcome.report.to_json())?;
        // the resolved config, so every number in the report is
        // reproducible from this directory alone
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(cfg).expect("config serialization"),
        )?;
    }
    if formats.iter().any(|f| f == "csv") {
        std::fs::write(dir.join("scenarios.csv"), outcome.scenarios.to_csv())?;
        std::fs::write(
            dir.join("box_stats.csv"),
            box_stats_csv(&outcome.report.evaluation.rows),
        )?;
        std::fs::write(
            dir.join("eval_samples.csv"),
            &outcome.evaluation_samples_csv,
        )?;
        if let Some(table) = &outcome.report.certificate {
            std::fs::write(dir.join("certificate.csv"), certificate_csv(table))?;
        }
    }
    Ok(())
}

/// Impact inspection at one `(K, delta)` point.
#[derive(Debug, Clone, Serialize)]
pub struct ImpactPrintout {
    pub q_exact: f64,
    pub sigma_max_kappa: f64,
    pub q_proxy: f64,
    pub bound_value: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub degenerate_tie: bool,
}

pub fn cmd_impact(
    cfg: &ExperimentConfig,
    k: Option<DMatrix<f64>>,
    delta: Option<DVector<f64>>,
) -> Result<ImpactPrintout, CliError> {
    let built = cfg.build()?;
    validate_model(&built.plant, &built.unc, &built.hor)
        .into_result()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let n_x = built.plant.n_x();
    let k = Controller::new(k.unwrap_or_else(|| DMatrix::zeros(n_x, n_x)), n_x)?;
    let delta = delta.unwrap_or_else(|| DVector::zeros(built.unc.dim()));
    let rep = impact_exact(
        &built.plant,
        &built.unc,
        &delta,
        k.matrix(),
        &built.hor,
        cfg.risk.eta,
    )?;
    // The bound chain controls eps_r * sigma_max(kappa), not the squared
    // impact; compare on that scale.
    let bound_satisfied = rep
        .bound_value
        .map(|b| built.hor.eps_r() * rep.sigma_max_kappa <= b * (1.0 + 1e-9));
    Ok(ImpactPrintout {
        q_exact: rep.q_exact,
        sigma_max_kappa: rep.sigma_max_kappa,
        q_proxy: rep.q_proxy,
        bound_value: rep.bound_value,
        bound_satisfied,
        degenerate_tie: rep.degenerate_tie,
    })
}

pub struct EvaluateOutcome {
    pub rows: Vec<BoxStatsRow>,
    pub box_stats_csv: String,
    pub samples_csv: String,
}

/// Box-plot comparison of two controllers on fresh uncertainties.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    k_optimal: DMatrix<f64>,
    k_nominal: DMatrix<f64>,
    n_eval: usize,
    seed: u64,
) -> Result<EvaluateOutcome, CliError> {
    let built = cfg.build()?;
    validate_model(&built.plant, &built.unc, &built.hor)
        .into_result()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let n_x = built.plant.n_x();
    let k_optimal = Controller::new(k_optimal, n_x)?.into_inner();
    let k_nominal = Controller::new(k_nominal, n_x)?.into_inner();
    let evaluation = evaluate_controllers(
        &built,
        cfg.risk.alpha,
        cfg.risk.eta,
        &k_optimal,
        &k_nominal,
        n_eval,
        seed,
    )?;
    let samples = samples_csv(
        &[
            "sample",
            "q_exact_nominal",
            "q_exact_optimal",
            "q_proxy_nominal",
            "q_proxy_optimal",
        ],
        &[
            &evaluation.exact_nominal,
            &evaluation.exact_optimal,
            &evaluation.proxy_nominal,
            &evaluation.proxy_optimal,
        ],
    );
    Ok(EvaluateOutcome {
        box_stats_csv: box_stats_csv(&evaluation.rows),
        samples_csv: samples,
        rows: evaluation.rows,
    })
}

/// Certificate confidence curve for the configured `(N, m, d)`.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<CertificateTable, CliError> {
    let built = cfg.build()?;
    let n = cfg.scenarios.n;
    let d = design_dimension(built.plant.n_x());
    let certs = epsilon_grid()
        .into_iter()
        .map(|eps| certificate(n, built.m, d, eps))
        .collect::<risksynth::Result<Vec<_>>>()?;
    Ok(certificate_table(&certs).expect("nonempty grid"))
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoRow {
    pub m: usize,
    pub cvar: f64,
    pub shortfall_threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub rows: Vec<DemoRow>,
    /// `P^N{PS <= 0.9}` for the m = 2 design.
    pub confidence_at_09_m2: f64,
    pub evaluation_rows: Vec<BoxStatsRow>,
}

pub struct DemoOutcome {
    pub demo: DemoReport,
    pub reports: Vec<(usize, SynthOutcome)>,
}

/// The built-in experiment: the three-state demo system for m = 1 and
/// m = 2 on a shared scenario draw, with the Fig-2-style evaluation taken
/// from the m = 2 run.
pub fn cmd_demo() -> Result<DemoOutcome, CliError> {
    let base = demo_config();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for m in [1usize, 2] {
        let mut cfg = base.clone();
        cfg.risk.m = Some(m);
        let outcome = cmd_synth(&cfg)?;
        rows.push(DemoRow {
            m,
            cvar: outcome.report.summary.objective_cvar,
            shortfall_threshold: outcome
                .report
                .summary
                .shortfall_threshold
                .expect("demo has N = m + d"),
        });
        reports.push((m, outcome));
    }
    let confidence_at_09_m2 = certificate(base.scenarios.n, 2, 9, 0.9)?.confidence;
    let evaluation_rows = reports
        .iter()
        .find(|(m, _)| *m == 2)
        .expect("m = 2 run present")
        .1
        .report
        .evaluation
        .rows
        .clone();
    Ok(DemoOutcome {
        demo: DemoReport {
            rows,
            confidence_at_09_m2,
            evaluation_rows,
        },
        reports,
    })
}

pub fn write_demo_outputs(dir: &Path, outcome: &DemoOutcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("demo_report.json"),
        serde_json::to_string_pretty(&outcome.demo).expect("demo serialization"),
    )?;
    let mut table = String::from("m,cvar,shortfall_threshold\n");
    for row in &outcome.demo.rows {
        table.push_str(&format!(
            "{},{},{}\n",
            row.m, row.cvar, row.shortfall_threshold
        ));
    }
    std::fs::write(dir.join("demo_table.csv"), table)?;
    std::fs::write(
        dir.join("box_stats.csv"),
        box_stats_csv(&outcome.demo.evaluation_rows),
    )?;
    for (m, synth) in &outcome.reports {
        let sub = dir.join(format!("m{m}"));
        let mut cfg = demo_config();
        cfg.risk.m = Some(*m);
        write_synth_outputs(&sub, &cfg, synth)?;
    }
    Ok(())
}

/// Parses a JSON file holding a matrix as nested row-major arrays.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    serde_matrix::from_rows(&rows).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses a comma-separated realization, e.g. `0.25,-0.1`.
pub fn parse_delta(text: &str) -> Result<DVector<f64>, CliError> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    parts
        .map(DVector::from_vec)
        .map_err(|e| CliError::Config(format!("bad delta '{text}': {e}")))
}
