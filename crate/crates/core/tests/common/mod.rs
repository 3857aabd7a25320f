//! Shared helpers for the integration tests: random well-conditioned
//! instances and independent numerical oracles.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use risksynth::model::{BoxDistribution, Horizon, PlantModel, UncertaintyModel};

pub struct Instance {
    pub plant: PlantModel,
    pub unc: UncertaintyModel,
    pub hor: Horizon,
    pub delta: DVector<f64>,
    pub k: DMatrix<f64>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..=scale))
}

/// Random square matrix kept comfortably away from singularity.
fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::identity(n, n) + random_matrix(rng, n, 0.6);
        let sv = m.singular_values();
        if sv.min() > 0.15 {
            return m;
        }
    }
}

/// Draws a random instance with n_x in `nx_range`, N_h in `nh_range`, a
/// random in-box uncertainty and a random gain. Rejects draws where the
/// stacked operators are too ill-conditioned for 1e-8-level oracle
/// comparisons.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    nx_range: std::ops::RangeInclusive<usize>,
    nh_range: std::ops::RangeInclusive<usize>,
) -> Instance {
    loop {
        let n_x = rng.random_range(nx_range.clone());
        let n_h = rng.random_range(nh_range.clone());
        let a = random_matrix(rng, n_x, 1.0);
        let b = random_invertible(rng, n_x);
        let c = random_invertible(rng, n_x);
        let c_j = random_invertible(rng, n_x);
        let l = random_matrix(rng, n_x, 1.0);
        let plant = PlantModel::new(a, b, c, c_j, l).unwrap();

        let v = rng.random_range(1..=2);
        let basis: Vec<DMatrix<f64>> = (0..v).map(|_| random_matrix(rng, n_x, 1.0)).collect();
        let bound = 0.4;
        let unc = UncertaintyModel::new(
            basis,
            DVector::from_element(v, -bound),
            DVector::from_element(v, bound),
            BoxDistribution::Uniform,
        )
        .unwrap();

        let hor = Horizon::new(n_h, rng.random_range(0.5..=2.0)).unwrap();
        let delta = DVector::from_fn(v, |_, _| rng.random_range(-bound..=bound));
        let k = random_matrix(rng, n_x, 0.5);

        let Ok(ops) = risksynth::lifted::build_lifted(&plant, &unc, &delta, &k, &hor) else {
            continue;
        };
        let cond = |m: &DMatrix<f64>| {
            let sv = m.singular_values();
            sv.max() / sv.min()
        };
        if cond(&ops.f_r) < 1e6 && cond(&ops.f_p) < 1e6 {
            return Instance {
                plant,
                unc,
                hor,
                delta,
                k,
            };
        }
    }
}

/// Demo-system fixtures (nominal A at the box midpoints, C = C_J = I3).
pub fn demo_plant() -> PlantModel {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.3, 1.0, 0.0, 0.0, 1.0]);
    let l = DMatrix::from_row_slice(3, 3, &[1.95, 0.0, 1.0, 1.0, 0.36, 1.0, 0.0, 1.0, -0.87]);
    PlantModel::new(a, b, DMatrix::identity(3, 3), DMatrix::identity(3, 3), l).unwrap()
}

pub fn demo_uncertainty() -> UncertaintyModel {
    let mut e1 = DMatrix::zeros(3, 3);
    e1[(1, 1)] = 1.0;
    let mut e2 = DMatrix::zeros(3, 3);
    e2[(2, 2)] = 1.0;
    UncertaintyModel::new(
        vec![e1, e2],
        DVector::from_row_slice(&[-0.5, -0.5]),
        DVector::from_row_slice(&[0.5, 0.5]),
        BoxDistribution::Uniform,
    )
    .unwrap()
}

pub fn demo_horizon() -> Horizon {
    Horizon::new(5, 1.0).unwrap()
}

/// Scalar desk case (n_x = 1, A = 2, B = C = C_J = L = 1).
pub fn scalar_plant() -> PlantModel {
    let one = DMatrix::from_element(1, 1, 1.0);
    PlantModel::new(
        DMatrix::from_element(1, 1, 2.0),
        one.clone(),
        one.clone(),
        one.clone(),
        one,
    )
    .unwrap()
}

pub fn scalar_uncertainty() -> UncertaintyModel {
    UncertaintyModel::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_row_slice(&[-0.5]),
        DVector::from_row_slice(&[0.5]),
        BoxDistribution::Uniform,
    )
    .unwrap()
}

/// Brute-force exact impact: `eps_r * lambda_max(F_r^-T F_p^T F_p F_r^-1)`
/// by dense inversion and a symmetric eigensolve — fully independent of the
/// closed-form `kappa_inv` path.
pub fn brute_force_impact(inst: &Instance) -> f64 {
    let ops =
        risksynth::lifted::build_lifted(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor)
            .unwrap();
    let fr_inv = ops.f_r.clone().try_inverse().expect("F_r invertible");
    let kappa = &ops.f_p * &fr_inv;
    let gram = kappa.transpose() * &kappa;
    let eig = gram.symmetric_eigen();
    let lmax = eig
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    inst.hor.eps_r() * lmax
}

/// Central finite differences of a scalar function of a matrix argument.
pub fn finite_difference_gradient<F: Fn(&DMatrix<f64>) -> f64>(
    f: F,
    k: &DMatrix<f64>,
    step: f64,
) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(k.nrows(), k.ncols());
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp[(i, j)] += step;
            km[(i, j)] -= step;
            g[(i, j)] = (f(&kp) - f(&km)) / (2.0 * step);
        }
    }
    g
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let left = simpson(f, a, c);
        let right = simpson(f, c, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, c, left, tol / 2.0, depth - 1)
                + recurse(f, c, b, right, tol / 2.0, depth - 1)
        }
    }
    let whole = simpson(&f, a, b);
    recurse(&f, a, b, whole, tol, 48)
}
