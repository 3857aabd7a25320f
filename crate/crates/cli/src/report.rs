//! Machine-readable run reports: JSON payloads, plot-ready CSV tables and
//! provenance.

use serde::Serialize;

use risksynth::certificate::Certificate;
use risksynth::optimizer::SynthesisResult;

/// Box-plot statistics: median, quartile box edges and whiskers at the most
/// extreme data points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Linear-interpolation percentile on a sorted copy of `values`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    assert!(!values.is_empty(), "box stats need at least one sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    BoxStats {
        median: percentile(&sorted, 0.5),
        q25: percentile(&sorted, 0.25),
        q75: percentile(&sorted, 0.75),
        whisker_lo: sorted[0],
        whisker_hi: sorted[sorted.len() - 1],
    }
}

/// One row of the evaluation table: an impact metric under a controller.
#[derive(Debug, Clone, Serialize)]
pub struct BoxStatsRow {
    pub metric: String,
    pub controller: String,
    #[serde(flatten)]
    pub stats: BoxStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub n_scenarios: usize,
    pub m: usize,
    pub alpha: f64,
    pub eta: f64,
    /// Empirical CVaR of the proxy (regularizer included).
    pub objective_cvar: f64,
    /// Singular-value part alone: `objective_cvar - regularization`.
    pub objective_kyfan: f64,
    /// `eta * ||K*||_F^2`.
    pub regularization: f64,
    pub shortfall_threshold: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Certificate no-tie diagnostic: training proxy values pairwise
    /// distinct beyond 1e-12 at the optimum.
    pub proxy_values_distinct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateTable {
    pub a: usize,
    pub b: usize,
    pub rows: Vec<CertificateRow>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertificateRow {
    pub epsilon: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub n_eval: usize,
    pub eval_seed: u64,
    /// The nominal baseline gain the optimal controller is compared against
    /// (minimizer of the zero-uncertainty proxy).
    pub nominal_k: Vec<Vec<f64>>,
    pub rows: Vec<BoxStatsRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// FNV-1a hash of the canonical config JSON.
    pub config_hash: String,
    pub scenario_seed: u64,
    pub eval_seed: u64,
    pub threads: usize,
    /// Wall-clock duration; informational only, excluded from determinism
    /// comparisons.
    pub timing_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub summary: SynthSummary,
    pub synthesis: SynthesisResult,
    pub certificate: Option<CertificateTable>,
    pub evaluation: EvaluationReport,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

pub fn certificate_table(certs: &[Certificate]) -> Option<CertificateTable> {
    let first = certs.first()?;
    Some(CertificateTable {
        a: first.a,
        b: first.b,
        rows: certs
            .iter()
            .map(|c| CertificateRow {
                epsilon: c.epsilon,
                confidence: c.confidence,
            })
            .collect(),
    })
}

pub fn certificate_csv(table: &CertificateTable) -> String {
    let mut out = String::from("epsilon,confidence\n");
    for row in &table.rows {
        out.push_str(&format!("{},{}\n", row.epsilon, row.confidence));
    }
    out
}

pub fn box_stats_csv(rows: &[BoxStatsRow]) -> String {
    let mut out = String::from("metric,controller,median,q25,q75,whisker_lo,whisker_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.metric,
            r.controller,
            r.stats.median,
            r.stats.q25,
            r.stats.q75,
            r.stats.whisker_lo,
            r.stats.whisker_hi
        ));
    }
    out
}

/// Per-sample evaluation table, one row per fresh uncertainty.
pub fn samples_csv(headers: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(headers.len(), columns.len() + 1);
    let mut out = String::from("sample");
    for h in &headers[1..] {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        out.push_str(&format!("{i}"));
        for col in columns {
            out.push_str(&format!(",{}", col[i]));
        }
        out.push('\n');
    }
    out
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
