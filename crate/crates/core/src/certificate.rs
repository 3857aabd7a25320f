//! Out-of-sample probabilistic certificates.
//!
//! For a synthesis over `N` scenarios with tail size `m` and design
//! dimension `d = n_x^2`, the probability of shortfall
//! `PS = P{ q_bar(K*, delta) >= q_bar_(m+d)(K*) }` of a fresh uncertainty
//! follows a `Beta(m + d, N + 1 - m - d)` law, so
//! `P^N{ PS <= eps } = I_eps(m + d, N + 1 - m - d)` — the regularized
//! incomplete beta function, evaluated here with a continued fraction.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::impact_proxy;
use crate::model::{Horizon, PlantModel, UncertaintyModel};
use crate::optimizer::SynthesisResult;
use crate::scenario::draw_scenarios;

/// Confidence `P^N{PS <= eps}` at one epsilon.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certificate {
    /// First beta parameter `m + d`.
    pub a: usize,
    /// Second beta parameter `N + 1 - m - d`.
    pub b: usize,
    pub epsilon: f64,
    pub confidence: f64,
}

/// `P^N{PS(K_N*) <= eps} = I_eps(m + d, N + 1 - m - d)`.
pub fn confidence(n: usize, m: usize, d: usize, epsilon: f64) -> Result<f64> {
    let cert = certificate(n, m, d, epsilon)?;
    Ok(cert.confidence)
}

pub fn certificate(n: usize, m: usize, d: usize, epsilon: f64) -> Result<Certificate> {
    if m + d < 1 {
        return Err(Error::InvalidParameter("m + d must be >= 1".into()));
    }
    if n < m + d {
        return Err(Error::InvalidParameter(format!(
            "certificate requires N >= m + d, got N = {n}, m + d = {}",
            m + d
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let a = m + d;
    let b = n + 1 - m - d;
    let confidence = reg_inc_beta(a as f64, b as f64, epsilon)?;
    Ok(Certificate {
        a,
        b,
        epsilon,
        confidence,
    })
}

/// The `(m + d)`-th largest training-scenario proxy value at the optimum —
/// the shortfall threshold of the certificate.
pub fn shortfall_threshold(result: &SynthesisResult, m: usize, d: usize) -> Result<f64> {
    let n = result.per_scenario_proxy.len();
    if n < m + d || m + d == 0 {
        return Err(Error::InvalidParameter(format!(
            "shortfall threshold requires N >= m + d >= 1, got N = {n}, m + d = {}",
            m + d
        )));
    }
    let mut sorted = result.per_scenario_proxy.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[m + d - 1])
}

/// Operational check of the certificate's no-tie condition: all training
/// proxy values at the optimum are pairwise distinct beyond `tol`.
///
/// The tail scenarios entering the objective approach equality at a CVaR
/// optimum, so this can come out false when the solver is pushed to extreme
/// precision; it is a diagnostic, not a hard gate.
pub fn proxy_values_distinct(values: &[f64], tol: f64) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| (w[1] - w[0]).abs() > tol)
}

/// Monte-Carlo estimate of the probability of shortfall: the fraction of
/// `n_mc` fresh uncertainties whose proxy value reaches the threshold.
#[allow(clippy::too_many_arguments)]
pub fn empirical_ps(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    k_star: &DMatrix<f64>,
    threshold: f64,
    hor: &Horizon,
    eta: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    let set = draw_scenarios(unc, n_mc, seed)?;
    let hits = set
        .deltas()
        .par_iter()
        .map(|delta| {
            impact_proxy(plant, unc, delta, k_star, hor, eta).map(|q| {
                if q >= threshold {
                    1usize
                } else {
                    0
                }
            })
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / n_mc as f64)
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta function.
// ---------------------------------------------------------------------------

const MAX_CF_ITER: usize = 300;
const TINY: f64 = 1e-300;

/// Lanczos approximation (g = 7, 9 coefficients); relative error ~1e-13 on
/// the positive axis.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// `ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `I_x(a, b)` with the symmetry switch at `x > (a + 1) / (a + b + 2)` for
/// continued-fraction convergence.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta parameters must be positive, got a = {a}, b = {b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "beta argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_cf(b, a, 1.0 - x)?)
    } else {
        beta_cf(a, b, x)
    }
}

/// Continued fraction for `I_x(a, b)` (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_prefix = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let prefix = ln_prefix.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_CF_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;

        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;

        if (del - 1.0).abs() < 1e-15 {
            return Ok((prefix * h).clamp(0.0, 1.0));
        }
    }
    Err(Error::NonFinite("incomplete beta continued fraction"))
}
