//! Domain types for the plant, detector, controller, uncertainty set and
//! attack horizon, plus validation of the standing assumptions.
//!
//! The plant is a square, fully actuated discrete-time LTI system
//! `x[k+1] = (A + dA(delta)) x[k] + B u~[k]` with measured output `y = C x`,
//! performance output `y_p = C_J x` and a Luenberger-style detector with
//! gain `L`. All five matrices share the dimension `n_x`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the condition number of `B`, `C`, `C_J`.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Nominal plant and detector matrices.
///
/// Construction checks structure only (squareness, matching dimensions).
/// Invertibility of `B`, `C`, `C_J` is checked by [`validate_model`], which
/// is the gate every downstream operation assumes has been passed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub c_j: DMatrix<f64>,
    pub l: DMatrix<f64>,
    n_x: usize,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        c_j: DMatrix<f64>,
        l: DMatrix<f64>,
    ) -> Result<Self> {
        let n_x = a.nrows();
        if n_x == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c), ("C_J", &c_j), ("L", &l)] {
            if m.nrows() != n_x || m.ncols() != n_x {
                return Err(Error::Dimension(format!(
                    "{} must be {}x{}, got {}x{}",
                    name,
                    n_x,
                    n_x,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            c_j,
            l,
            n_x,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }
}

/// Sampling law over the uncertainty box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxDistribution {
    Uniform,
}

/// Affine parameterization `dA(delta) = sum_k delta_k * E_k` of the plant
/// uncertainty, with `delta` ranging over the box `[lower, upper]`.
///
/// Construction checks structure; the requirement `lower <= 0 <= upper`
/// (so that `delta = 0` lies in the box and `dA(0) = 0`) is part of
/// [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModel {
    pub basis: Vec<DMatrix<f64>>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub distribution: BoxDistribution,
}

impl UncertaintyModel {
    pub fn new(
        basis: Vec<DMatrix<f64>>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        distribution: BoxDistribution,
    ) -> Result<Self> {
        let v = basis.len();
        if lower.len() != v || upper.len() != v {
            return Err(Error::Dimension(format!(
                "box bounds must have length {} (number of basis matrices), got {} and {}",
                v,
                lower.len(),
                upper.len()
            )));
        }
        if v > 0 {
            let n = basis[0].nrows();
            for (k, e) in basis.iter().enumerate() {
                if e.nrows() != n || e.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "basis matrix E_{} must be {}x{}, got {}x{}",
                        k,
                        n,
                        n,
                        e.nrows(),
                        e.ncols()
                    )));
                }
            }
        }
        for k in 0..v {
            if lower[k] > upper[k] {
                return Err(Error::InvalidParameter(format!(
                    "box component {}: lower {} exceeds upper {}",
                    k, lower[k], upper[k]
                )));
            }
        }
        Ok(Self {
            basis,
            lower,
            upper,
            distribution,
        })
    }

    /// Number of uncertain parameters `v`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `dA(delta) = sum_k delta_k * E_k`; the caller guarantees `delta` is
    /// in the box (checked by [`sample_a`]).
    pub fn delta_a(&self, delta: &DVector<f64>, n_x: usize) -> DMatrix<f64> {
        let mut da = DMatrix::zeros(n_x, n_x);
        for (k, e) in self.basis.iter().enumerate() {
            da += e * delta[k];
        }
        da
    }

    pub fn contains(&self, delta: &DVector<f64>) -> Result<()> {
        if delta.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "delta must have length {}, got {}",
                self.dim(),
                delta.len()
            )));
        }
        for k in 0..delta.len() {
            if delta[k] < self.lower[k] || delta[k] > self.upper[k] {
                return Err(Error::OutOfBox {
                    index: k,
                    value: delta[k],
                    lower: self.lower[k],
                    upper: self.upper[k],
                });
            }
        }
        Ok(())
    }
}

/// Static output-feedback gain `u = K y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    k: DMatrix<f64>,
}

impl Controller {
    pub fn new(k: DMatrix<f64>, n_x: usize) -> Result<Self> {
        if k.nrows() != n_x || k.ncols() != n_x {
            return Err(Error::Dimension(format!(
                "K must be {}x{}, got {}x{}",
                n_x,
                n_x,
                k.nrows(),
                k.ncols()
            )));
        }
        Ok(Self { k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.k
    }
}

/// Attack horizon length and the stealthiness (detection) threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    n_h: usize,
    eps_r: f64,
}

impl Horizon {
    pub fn new(n_h: usize, eps_r: f64) -> Result<Self> {
        if n_h < 1 {
            return Err(Error::InvalidParameter(
                "horizon length must be >= 1".into(),
            ));
        }
        if !eps_r.is_finite() || eps_r <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "detection threshold eps_r must be positive and finite, got {eps_r}"
            )));
        }
        Ok(Self { n_h, eps_r })
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn eps_r(&self) -> f64 {
        self.eps_r
    }
}

/// One named assumption check.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Itemized result of [`validate_model`]: one entry per checkable standing
/// assumption.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Converts a failed report into an [`Error::Validation`] listing the
    /// failing checks.
    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            let lines: Vec<String> = self
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("  FAIL {}: {}", c.name, c.detail))
                .collect();
            Err(Error::Validation(lines.join("\n")))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || !smax.is_finite() {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Checks every standing assumption that can be checked numerically and
/// returns the itemized report. Uses [`DEFAULT_CONDITION_CAP`].
pub fn validate_model(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    hor: &Horizon,
) -> ValidationReport {
    validate_model_with_cap(plant, unc, hor, DEFAULT_CONDITION_CAP)
}

/// [`validate_model`] with an explicit condition-number cap for the
/// invertibility checks on `B`, `C` and `C_J`.
pub fn validate_model_with_cap(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    hor: &Horizon,
    condition_cap: f64,
) -> ValidationReport {
    let n_x = plant.n_x();
    let mut checks = Vec::new();

    checks.push(ValidationCheck {
        name: "square system".into(),
        passed: true,
        detail: format!("all plant matrices are {n_x}x{n_x}"),
    });

    // Invertibility of B also gives controllability of (A + dA, B) for every
    // uncertainty, since B has full rank.
    for (name, m) in [("B", &plant.b), ("C", &plant.c), ("C_J", &plant.c_j)] {
        let cond = condition_number(m);
        checks.push(ValidationCheck {
            name: format!("{name} invertible"),
            passed: cond.is_finite() && cond <= condition_cap,
            detail: format!("condition number {cond:.3e} (cap {condition_cap:.3e})"),
        });
    }

    let basis_ok = unc
        .basis
        .iter()
        .all(|e| e.nrows() == n_x && e.ncols() == n_x);
    checks.push(ValidationCheck {
        name: "uncertainty basis dimensions".into(),
        passed: basis_ok,
        detail: if basis_ok {
            format!("{} basis matrices of size {}x{}", unc.dim(), n_x, n_x)
        } else {
            format!("basis matrices must all be {n_x}x{n_x}")
        },
    });

    let mut zero_in_box = true;
    let mut offending = String::new();
    for k in 0..unc.dim() {
        if unc.lower[k] > 0.0 || unc.upper[k] < 0.0 {
            zero_in_box = false;
            offending = format!("component {}: [{}, {}]", k, unc.lower[k], unc.upper[k]);
            break;
        }
    }
    checks.push(ValidationCheck {
        name: "zero uncertainty in box".into(),
        passed: zero_in_box,
        detail: if zero_in_box {
            "lower <= 0 <= upper componentwise, so dA(0) = 0".into()
        } else {
            format!("zero uncertainty not in box ({offending})")
        },
    });

    checks.push(ValidationCheck {
        name: "horizon".into(),
        passed: true,
        detail: format!("N_h = {}, eps_r = {}", hor.n_h(), hor.eps_r()),
    });

    ValidationReport { checks }
}

/// Realizes the uncertain system matrix `A + dA(delta)`.
///
/// Rejects `delta` outside the box.
pub fn sample_a(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    unc.contains(delta)?;
    Ok(&plant.a + unc.delta_a(delta, plant.n_x()))
}
