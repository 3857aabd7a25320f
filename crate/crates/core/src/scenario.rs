//! Scenario sampling and empirical risk functionals.
//!
//! A scenario set is `N` independent draws from the uncertainty box; the
//! empirical CVaR objective is the average of the `m` largest per-scenario
//! proxy values. Order statistics break ties by original index (lower index
//! treated as larger) so that subgradient selection is deterministic.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::impact::impact_proxy;
use crate::model::{BoxDistribution, Horizon, PlantModel, UncertaintyModel};

/// `N` sampled uncertainties with their RNG provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    deltas: Vec<DVector<f64>>,
    seed: u64,
}

impl ScenarioSet {
    /// Wraps externally supplied realizations (e.g. imported from CSV).
    pub fn from_deltas(deltas: Vec<DVector<f64>>, seed: u64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario set must be nonempty".into(),
            ));
        }
        let v = deltas[0].len();
        if deltas.iter().any(|d| d.len() != v) {
            return Err(Error::Dimension(
                "all scenario realizations must have the same length".into(),
            ));
        }
        Ok(Self { deltas, seed })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, i: usize) -> &DVector<f64> {
        &self.deltas[i]
    }

    pub fn deltas(&self) -> &[DVector<f64>] {
        &self.deltas
    }

    pub fn iter(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.deltas.iter()
    }

    /// One row per realization; a leading comment line records the seed so
    /// experiments are replayable.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={}\n", self.seed);
        for d in &self.deltas {
            let row: Vec<String> = d.iter().map(|x| format!("{x}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut seed = 0u64;
        let mut deltas = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("seed=") {
                    seed = s.trim().parse().map_err(|_| Error::Csv {
                        line: idx + 1,
                        msg: format!("bad seed value '{s}'"),
                    })?;
                }
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect();
            let row = row.map_err(|e| Error::Csv {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            deltas.push(DVector::from_vec(row));
        }
        Self::from_deltas(deltas, seed)
    }
}

/// Draws `n` i.i.d. realizations from the box. Identical seeds give
/// bit-identical sets.
pub fn draw_scenarios(unc: &UncertaintyModel, n: usize, seed: u64) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "scenario count must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = unc.dim();
    let mut deltas = Vec::with_capacity(n);
    for _ in 0..n {
        let mut d = DVector::zeros(v);
        for k in 0..v {
            d[k] = match unc.distribution {
                BoxDistribution::Uniform => {
                    let (lo, hi) = (unc.lower[k], unc.upper[k]);
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..=hi)
                    }
                }
            };
        }
        deltas.push(d);
    }
    ScenarioSet::from_deltas(deltas, seed)
}

/// Proxy value for every scenario, in scenario order. Scenarios are
/// evaluated concurrently; the output order is fixed by the set order.
pub fn proxy_values(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    set: &ScenarioSet,
    k: &DMatrix<f64>,
    hor: &Horizon,
    eta: f64,
) -> Result<Vec<f64>> {
    set.deltas
        .par_iter()
        .map(|delta| impact_proxy(plant, unc, delta, k, hor, eta))
        .collect()
}

/// CVaR level and the number of tail scenarios entering the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarParameters {
    pub alpha: f64,
    pub m: usize,
}

impl CvarParameters {
    pub fn new(alpha: f64, m: usize, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "m must satisfy 1 <= m <= N = {n}, got {m}"
            )));
        }
        Ok(Self { alpha, m })
    }

    /// The default tail size `m = ceil(N (1 - alpha))`; `m` stays directly
    /// overridable for experiments that pin it directly.
    pub fn with_default_m(alpha: f64, n: usize) -> Result<Self> {
        let m = (n as f64 * (1.0 - alpha)).ceil() as usize;
        Self::new(alpha, m.max(1), n)
    }
}

/// Indices of the `m` largest entries, largest first; ties broken by
/// original index (lower index treated as larger).
pub fn topm_indices(values: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    idx.truncate(m);
    idx
}

/// Mean of the `m` largest entries. The selected entries are summed in
/// index order so the result is independent of how the selection was found.
pub fn topm_average(values: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > values.len() {
        return Err(Error::InvalidParameter(format!(
            "m must satisfy 1 <= m <= {}, got {m}",
            values.len()
        )));
    }
    let mut chosen = topm_indices(values, m);
    chosen.sort_unstable();
    let sum: f64 = chosen.iter().map(|&i| values[i]).sum();
    Ok(sum / m as f64)
}

/// Empirical value-at-risk and conditional value-at-risk.
///
/// `var` is the smallest observed value `x` with empirical
/// `P[X >= x] <= alpha` (the no-point-mass form; with heavy ties the set can
/// be empty, in which case the maximum is returned). `cvar` is the mean of
/// the values strictly above `var`, falling back to the maximum when that
/// set is empty (e.g. a constant sample).
pub fn empirical_var_cvar(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("values must be nonempty".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted[sorted.len() - 1];

    // Scan ascending: count(>= sorted[i]) = n - i for distinct values; with
    // ties, count from the first occurrence.
    let mut var = max;
    let mut found = false;
    let mut i = 0;
    while i < sorted.len() {
        let mut first = i;
        while first > 0 && sorted[first - 1] == sorted[i] {
            first -= 1;
        }
        let tail = (sorted.len() - first) as f64;
        if tail / n <= alpha {
            var = sorted[i];
            found = true;
            break;
        }
        // skip the tie block
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    if !found {
        var = max;
    }

    let above: Vec<f64> = sorted.iter().copied().filter(|&x| x > var).collect();
    let cvar = if above.is_empty() {
        max
    } else {
        above.iter().sum::<f64>() / above.len() as f64
    };
    Ok((var, cvar))
}
