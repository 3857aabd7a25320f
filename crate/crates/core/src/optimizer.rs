//! First-order minimization of the empirical-CVaR synthesis objective
//!
//! ```text
//! f(K) = (1/m) * sum of the m largest q_bar(K, delta_i),  i = 1..N,
//! ```
//!
//! over the feedback gain `K`. Each `q_bar(·, delta_i)` is convex in `K`
//! (strongly convex with modulus `2 eta`), so the top-m average is too. A
//! subgradient of `f` is the average of the per-scenario subgradients over
//! the `m` currently-largest scenarios, selected with the deterministic
//! index tie rule.
//!
//! The solver runs the diminishing-step subgradient schedule and then a
//! monotone backtracking refinement from the best iterate; the scheduled
//! phase alone converges like `O(1/t)` in the objective, which is far too
//! slow for the tight iterate agreement the synthesis pipeline needs. The
//! equivalent subset-constraint program (one constraint per m-subset) is
//! kept as an enumeration-based cross-check, never as the solve path.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::{impact_exact, proxy_value_and_gradient};
use crate::lifted::{affine_decomposition, AffineKappaInverse};
use crate::model::{Horizon, PlantModel, UncertaintyModel};
use crate::scenario::{
    draw_scenarios, empirical_var_cvar, proxy_values, topm_average, topm_indices, ScenarioSet,
};
use crate::serde_matrix;

/// Step-size policy of the scheduled subgradient phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StepRule {
    /// `1 / (eta (t + 1))`: the classical schedule for strong convexity
    /// modulus `2 eta`.
    StronglyConvex,
    /// `c / sqrt(t + 1)`.
    Diminishing { c: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative best-objective improvement over `window` iterations below
    /// which the scheduled phase stops.
    pub tol_rel: f64,
    pub window: usize,
    pub step_rule: StepRule,
    /// Initial gain of the first run; zero when absent. Further restarts
    /// use random initializations seeded from `restart_seed`.
    #[serde(with = "serde_matrix::opt")]
    pub init_k: Option<DMatrix<f64>>,
    pub restarts: usize,
    pub restart_seed: u64,
    /// Monotone backtracking refinement from the best iterate; required for
    /// anything beyond coarse objective accuracy.
    pub polish: bool,
    pub polish_iters: usize,
    /// Record the best-so-far objective after every iteration (one series
    /// per restart) in the result.
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_rel: 1e-8,
            window: 50,
            step_rule: StepRule::StronglyConvex,
            init_k: None,
            restarts: 3,
            restart_seed: 0,
            polish: true,
            polish_iters: 2000,
            record_history: false,
        }
    }
}

/// Outcome of one synthesis solve.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisResult {
    #[serde(with = "serde_matrix")]
    pub k_star: DMatrix<f64>,
    /// Empirical CVaR objective value at `k_star`.
    pub objective: f64,
    /// `q_bar_i(k_star)` in scenario order.
    pub per_scenario_proxy: Vec<f64>,
    /// The `(m + d)`-th largest training proxy value at `k_star`, present
    /// when `N >= m + d` (with `d = n_x^2`).
    pub shortfall_threshold: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub config: SolverConfig,
    /// Best-so-far objective after every iteration, one series per restart;
    /// recorded only when `config.record_history` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_history: Option<Vec<Vec<f64>>>,
}

/// Dimension of the design variable: `d = n_x^2`.
pub fn design_dimension(n_x: usize) -> usize {
    n_x * n_x
}

fn check_finite_matrix(k: &DMatrix<f64>) -> Result<()> {
    if k.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("iterate K"))
    }
}

/// Per-scenario proxy values without gradients (cheap path for line search).
fn objective_values(affs: &[AffineKappaInverse], k: &DMatrix<f64>, eta: f64) -> Vec<f64> {
    let reg = eta * k.norm_squared();
    affs.par_iter()
        .map(|aff| {
            let kinv = aff.evaluate(k);
            let sv = kinv.singular_values();
            reg + (sv.iter().sum::<f64>() - sv.min())
        })
        .collect()
}

struct FullEval {
    objective: f64,
    gradient: DMatrix<f64>,
    values: Vec<f64>,
    per_scenario_gradients: Vec<DMatrix<f64>>,
}

/// Objective, subgradient and per-scenario values/gradients at `k`.
fn objective_full(
    affs: &[AffineKappaInverse],
    k: &DMatrix<f64>,
    eta: f64,
    m: usize,
) -> Result<FullEval> {
    let evals: Vec<_> = affs
        .par_iter()
        .map(|aff| proxy_value_and_gradient(aff, k, eta))
        .collect();
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let objective = topm_average(&values, m)?;
    if !objective.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    let mut selected = topm_indices(&values, m);
    selected.sort_unstable();
    let mut gradient = DMatrix::zeros(k.nrows(), k.ncols());
    for &i in &selected {
        gradient += &evals[i].gradient;
    }
    gradient /= m as f64;
    Ok(FullEval {
        objective,
        gradient,
        values,
        per_scenario_gradients: evals.into_iter().map(|e| e.gradient).collect(),
    })
}

/// Subgradient candidates at a top-m selection kink: the gradient of the
/// current selection plus every single-exchange variant among scenarios
/// tied with the m-th ranked value.
fn kink_candidates(eval: &FullEval, m: usize, tie_tol: f64) -> Vec<DMatrix<f64>> {
    let mut ranked = topm_indices(&eval.values, eval.values.len());
    let selected: Vec<usize> = ranked.drain(..m).collect();
    let outside = ranked;
    let boundary = eval.values[selected[m - 1]];
    let scale = 1.0 + boundary.abs();
    let mut candidates = vec![eval.gradient.clone()];
    for &i in selected.iter().rev() {
        if eval.values[i] - boundary > tie_tol * scale {
            break;
        }
        for &j in &outside {
            if boundary - eval.values[j] > tie_tol * scale {
                break;
            }
            let swapped = &eval.gradient
                + (&eval.per_scenario_gradients[j] - &eval.per_scenario_gradients[i]) / m as f64;
            candidates.push(swapped);
            if candidates.len() >= 16 {
                return candidates;
            }
        }
    }
    candidates
}

/// Approximate least-norm element of the convex hull of `candidates`
/// (Gilbert's algorithm); the negated result is the steepest descent
/// direction of the max-of-smooth local model.
fn min_norm_element(candidates: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut w = candidates[0].clone();
    for _ in 0..40 {
        let (mut best_dot, mut best) = (f64::INFINITY, None);
        for c in candidates {
            let d = w.dot(c);
            if d < best_dot {
                best_dot = d;
                best = Some(c);
            }
        }
        let g = best.expect("nonempty candidates");
        let diff = g - &w;
        let denom = diff.norm_squared();
        if denom <= 1e-30 {
            break;
        }
        // exact line minimum of ||w + t (g - w)|| over t in [0, 1]
        let t = (-w.dot(&diff) / denom).clamp(0.0, 1.0);
        if t <= 0.0 {
            break;
        }
        w += diff * t;
    }
    w
}

struct RunOutcome {
    k: DMatrix<f64>,
    objective: f64,
    values: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn run_single(
    affs: &[AffineKappaInverse],
    eta: f64,
    m: usize,
    cfg: &SolverConfig,
    k0: DMatrix<f64>,
) -> Result<RunOutcome> {
    let mut k = k0;
    check_finite_matrix(&k)?;
    let first = objective_full(affs, &k, eta, m)?;
    let mut best_k = k.clone();
    let mut best_obj = first.objective;
    let mut best_vals = first.values;
    let mut iterations = 0usize;
    let mut converged = false;

    // Scheduled subgradient phase with best-iterate tracking.
    let mut history: Vec<f64> = Vec::with_capacity(cfg.max_iters);
    for t in 0..cfg.max_iters {
        let eval = objective_full(affs, &k, eta, m)?;
        iterations = t + 1;
        if eval.objective < best_obj {
            best_obj = eval.objective;
            best_k.copy_from(&k);
            best_vals = eval.values;
        }
        history.push(best_obj);
        if t >= cfg.window {
            let prev = history[t - cfg.window];
            if prev - best_obj <= cfg.tol_rel * (1.0 + prev.abs()) {
                converged = true;
                break;
            }
        }
        let step = match cfg.step_rule {
            StepRule::StronglyConvex => 1.0 / (eta * (t as f64 + 1.0)),
            StepRule::Diminishing { c } => c / (t as f64 + 1.0).sqrt(),
        };
        k -= eval.gradient * step;
        check_finite_matrix(&k)?;
    }

    if cfg.polish {
        // Monotone refinement from the best iterate. The optimum typically
        // sits at a top-m selection kink (the tail scenarios tie there), so
        // the descent direction is the least-norm element of the hull of
        // the exchange subgradients; away from ties this is the plain
        // gradient. Barzilai-Borwein trial steps, Armijo backtracking as
        // the safeguard.
        converged = false;
        let mut pk = best_k.clone();
        let mut step = 1.0;
        let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        let mut tiny_streak = 0u32;
        for _ in 0..cfg.polish_iters {
            let eval = objective_full(affs, &pk, eta, m)?;
            let pobj = eval.objective;
            if pobj < best_obj {
                best_obj = pobj;
                best_k.copy_from(&pk);
                best_vals = eval.values.clone();
            }
            iterations += 1;
            history.push(best_obj);

            let candidates = kink_candidates(&eval, m, 1e-6);
            let w = if candidates.len() == 1 {
                eval.gradient.clone()
            } else {
                min_norm_element(&candidates)
            };
            let wnorm2 = w.norm_squared();
            if wnorm2.sqrt() <= 1e-12 * (1.0 + pobj.abs()) {
                converged = true;
                break;
            }
            let mut t_step = match &prev {
                Some((k_prev, w_prev)) => {
                    let s = &pk - k_prev;
                    let y = &w - w_prev;
                    let sy = s.dot(&y);
                    let yy = y.norm_squared();
                    if sy > 0.0 && yy > 0.0 {
                        (sy / yy).clamp(1e-12, 1e6)
                    } else {
                        step
                    }
                }
                None => step,
            };
            let mut accepted = None;
            while t_step >= 1e-18 {
                let k_try = &pk - &w * t_step;
                let vals_try = objective_values(affs, &k_try, eta);
                let obj_try = topm_average(&vals_try, m)?;
                if obj_try <= pobj - 1e-4 * t_step * wnorm2 {
                    accepted = Some((k_try, obj_try));
                    break;
                }
                t_step *= 0.5;
            }
            match accepted {
                Some((k_try, obj_try)) => {
                    let decrease = pobj - obj_try;
                    prev = Some((pk.clone(), w));
                    pk = k_try;
                    step = (t_step * 2.0).min(1e6);
                    if decrease <= 1e-15 * (1.0 + pobj.abs()) {
                        tiny_streak += 1;
                        if tiny_streak >= 8 {
                            converged = true;
                            break;
                        }
                    } else {
                        tiny_streak = 0;
                    }
                }
                None => {
                    // Even the least-norm hull direction makes no progress:
                    // the iterate is at the nonsmooth minimum to working
                    // precision.
                    converged = true;
                    break;
                }
            }
        }
        let eval = objective_full(affs, &pk, eta, m)?;
        if eval.objective < best_obj {
            best_obj = eval.objective;
            best_k.copy_from(&pk);
            best_vals = eval.values;
        }
        history.push(best_obj);
    }

    Ok(RunOutcome {
        k: best_k,
        objective: best_obj,
        values: best_vals,
        iterations,
        converged,
        history,
    })
}

/// Solves `inf_K (1/m) * sum of the m largest q_bar_i(K)` over the scenario
/// set, with best-iterate tracking across restarts.
///
/// Requires `eta > 0`: the Frobenius regularizer is what makes the optimum
/// unique, which the restart-agreement check and the shortfall certificate
/// both rely on.
pub fn minimize_cvar(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    set: &ScenarioSet,
    hor: &Horizon,
    eta: f64,
    m: usize,
    cfg: &SolverConfig,
) -> Result<SynthesisResult> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive for a unique optimum, got {eta}"
        )));
    }
    let n = set.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "m must satisfy 1 <= m <= N = {n}, got {m}"
        )));
    }
    let n_x = plant.n_x();
    if let Some(k0) = &cfg.init_k {
        if k0.nrows() != n_x || k0.ncols() != n_x {
            return Err(Error::Dimension(format!(
                "init_k must be {}x{}, got {}x{}",
                n_x,
                n_x,
                k0.nrows(),
                k0.ncols()
            )));
        }
    }

    let affs: Vec<AffineKappaInverse> = set
        .deltas()
        .par_iter()
        .map(|delta| affine_decomposition(plant, unc, delta, hor))
        .collect::<Result<_>>()?;

    let restarts = cfg.restarts.max(1);
    let mut best: Option<RunOutcome> = None;
    let mut total_iterations = 0usize;
    let mut all_converged = true;
    let mut histories = Vec::new();
    for r in 0..restarts {
        let k0 = if r == 0 {
            cfg.init_k
                .clone()
                .unwrap_or_else(|| DMatrix::zeros(n_x, n_x))
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.restart_seed.wrapping_add(r as u64));
            DMatrix::from_fn(n_x, n_x, |_, _| rng.random_range(-1.0..=1.0))
        };
        let mut outcome = run_single(&affs, eta, m, cfg, k0)?;
        total_iterations += outcome.iterations;
        all_converged &= outcome.converged;
        if cfg.record_history {
            histories.push(std::mem::take(&mut outcome.history));
        }
        best = match best {
            Some(cur) if cur.objective <= outcome.objective => Some(cur),
            _ => Some(outcome),
        };
    }
    let best = best.expect("at least one restart");

    let d = design_dimension(n_x);
    let shortfall_threshold = if n >= m + d {
        let mut sorted = best.values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        Some(sorted[m + d - 1])
    } else {
        None
    };

    Ok(SynthesisResult {
        k_star: best.k,
        objective: best.objective,
        per_scenario_proxy: best.values,
        shortfall_threshold,
        iterations: total_iterations,
        converged: all_converged,
        config: cfg.clone(),
        best_history: cfg.record_history.then_some(histories),
    })
}

/// Baseline design: minimize `q_bar(K, 0)` for the nominal system (a single
/// zero-uncertainty scenario).
pub fn minimize_nominal(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    hor: &Horizon,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<SynthesisResult> {
    let zero = DVector::zeros(unc.dim());
    let set = ScenarioSet::from_deltas(vec![zero], 0)?;
    minimize_cvar(plant, unc, &set, hor, eta, 1, cfg)
}

const SUBSET_CAP: u128 = 1_000_000;

fn binomial(n: usize, m: usize) -> u128 {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    let mut out: u128 = 1;
    for i in 0..m {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if out > SUBSET_CAP {
            return out;
        }
    }
    out
}

/// Maximum over all m-subsets of the subset average — the optimal `y` of the
/// subset-constraint program for fixed values. Must coincide with
/// [`topm_average`]; kept as an enumeration oracle.
pub fn max_subset_average(values: &[f64], m: usize) -> Result<f64> {
    let n = values.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "m must satisfy 1 <= m <= {n}, got {m}"
        )));
    }
    let count = binomial(n, m);
    if count > SUBSET_CAP {
        return Err(Error::SubsetGuard {
            n,
            m,
            count,
            cap: SUBSET_CAP,
        });
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        let avg = idx.iter().map(|&i| values[i]).sum::<f64>() / m as f64;
        if avg > best {
            best = avg;
        }
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if idx[i] < n - m + i {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Evaluates the subset-constraint form of the objective at `k` by full
/// enumeration (guarded); equals the top-m average of the proxy values.
pub fn subset_form_objective(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    set: &ScenarioSet,
    hor: &Horizon,
    eta: f64,
    m: usize,
    k: &DMatrix<f64>,
) -> Result<f64> {
    let values = proxy_values(plant, unc, set, k, hor, eta)?;
    max_subset_average(&values, m)
}

/// Which impact number to evaluate out of sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactMetric {
    Proxy,
    Exact,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskEvaluation {
    pub var: f64,
    pub cvar: f64,
    pub values: Vec<f64>,
}

/// Draws `n_eval` fresh scenarios and evaluates the empirical VaR/CVaR of
/// the chosen impact metric under the gain `k`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_risk(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    k: &DMatrix<f64>,
    hor: &Horizon,
    eta: f64,
    alpha: f64,
    n_eval: usize,
    seed: u64,
    metric: ImpactMetric,
) -> Result<RiskEvaluation> {
    let set = draw_scenarios(unc, n_eval, seed)?;
    let values = match metric {
        ImpactMetric::Proxy => proxy_values(plant, unc, &set, k, hor, eta)?,
        ImpactMetric::Exact => set
            .deltas()
            .par_iter()
            .map(|delta| impact_exact(plant, unc, delta, k, hor, eta).map(|r| r.q_exact))
            .collect::<Result<_>>()?,
    };
    let (var, cvar) = empirical_var_cvar(&values, alpha)?;
    Ok(RiskEvaluation { var, cvar, values })
}
