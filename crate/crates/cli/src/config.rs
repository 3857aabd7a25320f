//! JSON experiment configuration: schema, defaults and conversion into the
//! library's validated domain types.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use risksynth::model::{BoxDistribution, Horizon, PlantModel, UncertaintyModel};
use risksynth::optimizer::{SolverConfig, StepRule};
use risksynth::serde_matrix;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub uncertainty: UncertaintySection,
    pub horizon: HorizonSection,
    pub risk: RiskSection,
    pub scenarios: ScenariosSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub c_j: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

fn default_distribution() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintySection {
    pub basis: Vec<Vec<Vec<f64>>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_distribution")]
    pub distribution: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonSection {
    pub n_h: usize,
    pub eps_r: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskSection {
    pub alpha: f64,
    /// Tail size of the empirical CVaR objective; defaults to
    /// `ceil(N (1 - alpha))` when absent.
    #[serde(default)]
    pub m: Option<usize>,
    pub eta: f64,
    /// Whether the run must produce the out-of-sample certificate (requires
    /// `N >= m + d`).
    #[serde(default = "default_true")]
    pub certify: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenariosSection {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StepRuleSection {
    StronglyConvex,
    Diminishing { c: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub tol_rel: f64,
    pub window: usize,
    pub step_rule: StepRuleSection,
    pub init_k: Option<Vec<Vec<f64>>>,
    pub restarts: usize,
    pub restart_seed: u64,
    pub polish: bool,
    pub polish_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let base = SolverConfig::default();
        Self {
            max_iters: base.max_iters,
            tol_rel: base.tol_rel,
            window: base.window,
            step_rule: StepRuleSection::StronglyConvex,
            init_k: None,
            restarts: base.restarts,
            restart_seed: base.restart_seed,
            polish: base.polish,
            polish_iters: base.polish_iters,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    pub n_eval: usize,
    pub eval_seed: u64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            n_eval: 100,
            eval_seed: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

/// Config resolved into validated library types.
pub struct BuiltExperiment {
    pub plant: PlantModel,
    pub unc: UncertaintyModel,
    pub hor: Horizon,
    pub solver: SolverConfig,
    /// Resolved tail size.
    pub m: usize,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    serde_matrix::from_rows(rows).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }

    pub fn build(&self) -> Result<BuiltExperiment, CliError> {
        let plant = PlantModel::new(
            matrix(&self.plant.a, "plant.a")?,
            matrix(&self.plant.b, "plant.b")?,
            matrix(&self.plant.c, "plant.c")?,
            matrix(&self.plant.c_j, "plant.c_j")?,
            matrix(&self.plant.l, "plant.l")?,
        )?;

        let distribution = match self.uncertainty.distribution.as_str() {
            "uniform" => BoxDistribution::Uniform,
            other => {
                return Err(CliError::Config(format!(
                    "uncertainty.distribution: unknown value '{other}' (expected 'uniform')"
                )))
            }
        };
        let basis = self
            .uncertainty
            .basis
            .iter()
            .enumerate()
            .map(|(i, rows)| matrix(rows, &format!("uncertainty.basis[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let unc = UncertaintyModel::new(
            basis,
            DVector::from_vec(self.uncertainty.lower.clone()),
            DVector::from_vec(self.uncertainty.upper.clone()),
            distribution,
        )?;

        let hor = Horizon::new(self.horizon.n_h, self.horizon.eps_r)?;

        if !(self.risk.alpha > 0.0 && self.risk.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "risk.alpha must lie in (0, 1), got {}",
                self.risk.alpha
            )));
        }
        let n = self.scenarios.n;
        if n == 0 {
            return Err(CliError::Config("scenarios.n must be >= 1".into()));
        }
        let params = match self.risk.m {
            Some(m) => risksynth::scenario::CvarParameters::new(self.risk.alpha, m, n),
            None => risksynth::scenario::CvarParameters::with_default_m(self.risk.alpha, n),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let m = params.m;

        let init_k = self
            .solver
            .init_k
            .as_ref()
            .map(|rows| matrix(rows, "solver.init_k"))
            .transpose()?;
        let solver = SolverConfig {
            max_iters: self.solver.max_iters,
            tol_rel: self.solver.tol_rel,
            window: self.solver.window,
            step_rule: match self.solver.step_rule {
                StepRuleSection::StronglyConvex => StepRule::StronglyConvex,
                StepRuleSection::Diminishing { c } => StepRule::Diminishing { c },
            },
            init_k,
            restarts: self.solver.restarts,
            restart_seed: self.solver.restart_seed,
            polish: self.solver.polish,
            polish_iters: self.solver.polish_iters,
            record_history: false,
        };

        Ok(BuiltExperiment {
            plant,
            unc,
            hor,
            solver,
            m,
        })
    }
}

/// The built-in demo experiment: the three-state plant with two uncertain
/// diagonal entries (nominal at the box midpoints), C = C_J = I3,
/// N_h = 5, eps_r = 1, N = 11 scenarios, alpha = 0.8, eta = 0.1.
pub fn demo_config() -> ExperimentConfig {
    let eye = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    ExperimentConfig {
        plant: PlantSection {
            a: vec![
                vec![2.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
            b: vec![
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.3, 1.0],
                vec![0.0, 0.0, 1.0],
            ],
            c: eye.clone(),
            c_j: eye,
            l: vec![
                vec![1.95, 0.0, 1.0],
                vec![1.0, 0.36, 1.0],
                vec![0.0, 1.0, -0.87],
            ],
        },
        uncertainty: UncertaintySection {
            basis: vec![
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 0.0],
                ],
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
            ],
            lower: vec![-0.5, -0.5],
            upper: vec![0.5, 0.5],
            distribution: "uniform".into(),
        },
        horizon: HorizonSection { n_h: 5, eps_r: 1.0 },
        risk: RiskSection {
            alpha: 0.8,
            m: Some(2),
            eta: 0.1,
            certify: true,
        },
        scenarios: ScenariosSection { n: 11, seed: 1 },
        solver: SolverSection::default(),
        evaluation: EvaluationSection {
            n_eval: 100,
            eval_seed: 1007,
        },
        output: OutputSection {
            directory: "demo_out".into(),
            formats: vec!["json".into(), "csv".into()],
        },
    }
}
