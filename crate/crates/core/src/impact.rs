//! Worst-case stealthy-attack impact and its convex proxy.
//!
//! The exact impact for one `(K, delta)` pair is
//! `q = eps_r * sigma_max(kappa)^2` with `kappa = F_p F_r^-1`, computed from
//! the closed-form `kappa_inv` as `sigma_max(kappa) = 1 / sigma_min(kappa_inv)`.
//!
//! The proxy is
//! `q_bar = eta * ||K||_F^2 + sum of the (n_x N_h - 1) largest singular
//! values of kappa_inv` — a Ky Fan norm composed with an affine map of `K`,
//! hence convex (strongly convex for `eta > 0`). The chain
//! `eps_r * sigma_max(kappa) <= mu * q_bar^f` bounds the impact through the
//! determinant identity and the AM-GM inequality.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lifted::{affine_decomposition, build_kappa_inverse, build_lifted, AffineKappaInverse};
use crate::model::{Horizon, PlantModel, UncertaintyModel};

/// Relative gap below which two singular values straddling the Ky Fan cut
/// are treated as tied (subgradient mode).
pub const SIGMA_TIE_TOL: f64 = 1e-10;

/// `sigma_min/sigma_max` ratio below which `kappa_inv` is reported as
/// numerically singular (unbounded impact).
pub const UNBOUNDED_TOL: f64 = 1e-14;

/// Constants of the impact bound `eps_r * sigma_max(kappa) <= mu * q_bar^f`.
#[derive(Debug, Clone, Copy)]
pub struct ProxyConstants {
    /// `eps_r * |det(C_J C^-1)|^(N_h) / f^f`.
    pub mu: f64,
    /// `f = n_x N_h - 1`.
    pub f: usize,
    /// Regularization weight.
    pub eta: f64,
}

/// Computes the bound constants; rejects `n_x * N_h = 1` where the bound
/// degenerates.
pub fn impact_bound_constants(
    plant: &PlantModel,
    hor: &Horizon,
    eta: f64,
) -> Result<ProxyConstants> {
    let n = plant.n_x() * hor.n_h();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "impact bound requires n_x * N_h >= 2".into(),
        ));
    }
    if eta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularization weight eta must be nonnegative, got {eta}"
        )));
    }
    let f = n - 1;
    let det_c = plant.c.determinant();
    let det_cj = plant.c_j.determinant();
    if det_c == 0.0 {
        return Err(Error::Singular { name: "C" });
    }
    let ratio = (det_cj / det_c).abs();
    let mu = hor.eps_r() * ratio.powi(hor.n_h() as i32) / (f as f64).powi(f as i32);
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::NonFinite("mu"));
    }
    Ok(ProxyConstants { mu, f, eta })
}

/// Exact impact plus proxy diagnostics for one `(K, delta)` pair.
#[derive(Debug, Clone)]
pub struct ImpactReport {
    /// `eps_r * sigma_max(kappa)^2`.
    pub q_exact: f64,
    /// `sigma_max(kappa) = 1 / sigma_min(kappa_inv)`.
    pub sigma_max_kappa: f64,
    /// Proxy value `q_bar` at the given `eta`.
    pub q_proxy: f64,
    /// `mu * q_bar^f`; `None` when `n_x * N_h = 1` (bound degenerate).
    pub bound_value: Option<f64>,
    /// A maximizing stacked attack: `||F_r a*||^2 = eps_r` and
    /// `||F_p a*||^2 = q_exact`.
    pub worst_attack: DVector<f64>,
    /// Whether the singular values straddling the Ky Fan cut are tied.
    pub degenerate_tie: bool,
}

/// Proxy value from an already-built `kappa_inv`.
///
/// The sum of the `n - 1` largest singular values equals the nuclear norm
/// minus the smallest singular value, so no ordering is needed.
pub fn proxy_from_kappa_inverse(kinv: &DMatrix<f64>, k: &DMatrix<f64>, eta: f64) -> f64 {
    let sv = kinv.singular_values();
    let total: f64 = sv.iter().sum();
    let smallest = sv.min();
    eta * k.norm_squared() + (total - smallest)
}

/// Convex impact proxy `q_bar(K, delta)`.
pub fn impact_proxy(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
    eta: f64,
) -> Result<f64> {
    let kinv = build_kappa_inverse(plant, unc, delta, k, hor)?;
    Ok(proxy_from_kappa_inverse(&kinv, k, eta))
}

/// Proxy value, (sub)gradient and tie diagnostic at one point.
#[derive(Debug, Clone)]
pub struct ProxyEvaluation {
    pub value: f64,
    pub gradient: DMatrix<f64>,
    pub degenerate_tie: bool,
}

/// Evaluates the proxy and a subgradient through a precomputed affine
/// decomposition (the hot path of the optimizer).
///
/// With `kappa_inv = U S V^T`, a subgradient of the sum of the `f` largest
/// singular values is `U S' V^T` with ones on the `f` leading directions;
/// pulled back through the affine map this gives
/// `2 eta K - adjoint(U S' V^T)`. Wherever the `f`-th and `(f+1)`-th values
/// are separated this is the gradient.
pub fn proxy_value_and_gradient(
    aff: &AffineKappaInverse,
    k: &DMatrix<f64>,
    eta: f64,
) -> ProxyEvaluation {
    let kinv = aff.evaluate(k);
    let n = kinv.nrows();
    let f = n - 1;
    let svd = kinv.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let sv = &svd.singular_values;
    let value = eta * k.norm_squared() + sv.iter().take(f).sum::<f64>();
    let gradient = if f == 0 {
        k * (2.0 * eta)
    } else {
        let gsub = u.columns(0, f) * v_t.rows(0, f);
        k * (2.0 * eta) - aff.adjoint(&gsub)
    };
    let degenerate_tie = if f >= 1 {
        let scale = sv[0].max(f64::MIN_POSITIVE);
        (sv[f - 1] - sv[f]) / scale < SIGMA_TIE_TOL
    } else {
        false
    };
    ProxyEvaluation {
        value,
        gradient,
        degenerate_tie,
    }
}

/// Subgradient of the proxy in `K` (the gradient wherever the Ky Fan cut is
/// separated; ties are broken by the SVD output order).
pub fn proxy_gradient(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let aff = affine_decomposition(plant, unc, delta, hor)?;
    Ok(proxy_value_and_gradient(&aff, k, eta).gradient)
}

/// Exact worst-case impact with the maximizing attack, the proxy and the
/// impact bound, all from the closed-form `kappa_inv`.
pub fn impact_exact(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
    eta: f64,
) -> Result<ImpactReport> {
    let eps_r = hor.eps_r();
    let kinv = build_kappa_inverse(plant, unc, delta, k, hor)?;
    let n = kinv.nrows();
    let svd = kinv.clone().svd(true, false);
    let sv = &svd.singular_values;
    let s_max = sv[0];
    let s_min = sv[n - 1];
    if !s_min.is_finite() || s_min <= UNBOUNDED_TOL * s_max {
        return Err(Error::UnboundedImpact {
            sigma_min: s_min,
            threshold: UNBOUNDED_TOL * s_max,
        });
    }
    let sigma_max_kappa = 1.0 / s_min;
    let q_exact = eps_r * sigma_max_kappa * sigma_max_kappa;

    // Worst attack: sigma_max(kappa) has the left singular vector of
    // sigma_min(kappa_inv) as its input direction in residual space;
    // a* = F_r^-1 (sqrt(eps_r) u_min) then saturates the stealthiness budget.
    let u = svd.u.as_ref().expect("svd with u requested");
    let u_min = u.column(n - 1).into_owned();
    let ops = build_lifted(plant, unc, delta, k, hor)?;
    let target = u_min * eps_r.sqrt();
    let worst_attack = ops
        .f_r
        .clone()
        .lu()
        .solve(&target)
        .ok_or(Error::Singular { name: "F_r" })?;

    let q_proxy = proxy_from_kappa_inverse(&kinv, k, eta);
    let bound_value = impact_bound_constants(plant, hor, eta)
        .ok()
        .map(|c| c.mu * q_proxy.powi(c.f as i32));

    let f = n - 1;
    let degenerate_tie = if f >= 1 {
        (sv[f - 1] - sv[f]) / s_max.max(f64::MIN_POSITIVE) < SIGMA_TIE_TOL
    } else {
        false
    };

    Ok(ImpactReport {
        q_exact,
        sigma_max_kappa,
        q_proxy,
        bound_value,
        worst_attack,
        degenerate_tie,
    })
}
