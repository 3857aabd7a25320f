//! Finite-horizon stacked operators and the affine-in-K decomposition of the
//! inverse attack map `kappa_inv`.
//!
//! Over the horizon `N_h` the stacked attack `a = (a[0], ..., a[N_h-1])`
//! maps to the stacked state `x = (x_p[1], ..., x_p[N_h])` and the stacked
//! outputs through block lower-triangular Toeplitz matrices:
//!
//! * `F_xa` with blocks `A_x^i B`, where `A_x = A + dA + B K C`,
//! * `F_ea` with blocks `A_e^i B`, where `A_e = A + dA - L C`,
//! * `F_ex` strictly lower triangular with blocks `A_e^(i-1) dA`,
//! * `F_p = (I (x) C_J) F_xa` and `F_r = (I (x) C) (F_ea + F_ex F_xa)`.
//!
//! `kappa_inv = F_r F_p^-1` maps a stacked performance output to the stacked
//! residual it necessarily produces; it is assembled in closed form from the
//! block lower-bidiagonal `F_xa^-1` (never by dense inversion) and is affine
//! in the feedback gain `K`, which the optimizer differentiates through.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{sample_a, Horizon, PlantModel, UncertaintyModel};

/// The five stacked operators for one `(K, delta)` pair, together with the
/// point they were built at.
#[derive(Debug, Clone)]
pub struct LiftedOperators {
    pub f_xa: DMatrix<f64>,
    pub f_ea: DMatrix<f64>,
    pub f_ex: DMatrix<f64>,
    pub f_p: DMatrix<f64>,
    pub f_r: DMatrix<f64>,
    pub delta: DVector<f64>,
    pub k: DMatrix<f64>,
}

/// Writes `value` into block `(bi, bj)` of `m` (block size `n`).
fn set_block(m: &mut DMatrix<f64>, n: usize, bi: usize, bj: usize, value: &DMatrix<f64>) {
    m.view_mut((bi * n, bj * n), (n, n)).copy_from(value);
}

/// Reads block `(bi, bj)` of `m` (block size `n`).
pub fn get_block(m: &DMatrix<f64>, n: usize, bi: usize, bj: usize) -> DMatrix<f64> {
    m.view((bi * n, bj * n), (n, n)).into_owned()
}

/// Block lower-triangular Toeplitz matrix with block `(i, j) = A^(i-j) B`.
///
/// Powers are taken by repeated multiplication.
fn block_toeplitz(a: &DMatrix<f64>, b: &DMatrix<f64>, n_h: usize) -> DMatrix<f64> {
    let n = b.nrows();
    let mut powers = Vec::with_capacity(n_h);
    powers.push(b.clone());
    for i in 1..n_h {
        let next = a * &powers[i - 1];
        powers.push(next);
    }
    let mut out = DMatrix::zeros(n * n_h, n * n_h);
    for i in 0..n_h {
        for j in 0..=i {
            set_block(&mut out, n, i, j, &powers[i - j]);
        }
    }
    out
}

/// Strictly block lower-triangular matrix with block `(i, j) = A_e^(i-j-1) dA`.
fn block_strict_lower(a_e: &DMatrix<f64>, da: &DMatrix<f64>, n_h: usize) -> DMatrix<f64> {
    let n = da.nrows();
    let mut out = DMatrix::zeros(n * n_h, n * n_h);
    if n_h < 2 {
        return out;
    }
    let mut powers = Vec::with_capacity(n_h - 1);
    powers.push(da.clone());
    for i in 1..n_h - 1 {
        let next = a_e * &powers[i - 1];
        powers.push(next);
    }
    for i in 1..n_h {
        for j in 0..i {
            set_block(&mut out, n, i, j, &powers[i - j - 1]);
        }
    }
    out
}

/// Left-multiplies `m` by the block-diagonal matrix `I_(n_h) (x) c`.
fn blockdiag_left_mul(c: &DMatrix<f64>, m: &DMatrix<f64>, n_h: usize) -> DMatrix<f64> {
    let n = c.nrows();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..n_h {
        let row = c * m.view((i * n, 0), (n, m.ncols()));
        out.view_mut((i * n, 0), (n, m.ncols())).copy_from(&row);
    }
    out
}

/// Right-multiplies `m` by the block-diagonal matrix `I_(n_h) (x) c`.
fn blockdiag_right_mul(m: &DMatrix<f64>, c: &DMatrix<f64>, n_h: usize) -> DMatrix<f64> {
    let n = c.nrows();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..n_h {
        let col = m.view((0, j * n), (m.nrows(), n)) * c;
        out.view_mut((0, j * n), (m.nrows(), n)).copy_from(&col);
    }
    out
}

fn invert_small(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or(Error::Singular { name })
}

/// Closed-loop matrices used everywhere below, for one `(K, delta)` pair.
struct ClosedLoop {
    a_x: DMatrix<f64>,
    a_e: DMatrix<f64>,
    da: DMatrix<f64>,
}

fn closed_loop(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Result<ClosedLoop> {
    let n_x = plant.n_x();
    if k.nrows() != n_x || k.ncols() != n_x {
        return Err(Error::Dimension(format!(
            "K must be {}x{}, got {}x{}",
            n_x,
            n_x,
            k.nrows(),
            k.ncols()
        )));
    }
    let a_j = sample_a(plant, unc, delta)?;
    let da = unc.delta_a(delta, n_x);
    let a_x = &a_j + &plant.b * k * &plant.c;
    let a_e = &a_j - &plant.l * &plant.c;
    Ok(ClosedLoop { a_x, a_e, da })
}

/// Builds the five stacked operators for one `(K, delta)` pair.
pub fn build_lifted(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
) -> Result<LiftedOperators> {
    let n_h = hor.n_h();
    let cl = closed_loop(plant, unc, delta, k)?;
    let f_xa = block_toeplitz(&cl.a_x, &plant.b, n_h);
    let f_ea = block_toeplitz(&cl.a_e, &plant.b, n_h);
    let f_ex = block_strict_lower(&cl.a_e, &cl.da, n_h);
    let f_p = blockdiag_left_mul(&plant.c_j, &f_xa, n_h);
    let f_r = blockdiag_left_mul(&plant.c, &(&f_ea + &f_ex * &f_xa), n_h);
    Ok(LiftedOperators {
        f_xa,
        f_ea,
        f_ex,
        f_p,
        f_r,
        delta: delta.clone(),
        k: k.clone(),
    })
}

/// Closed-form inverse of `F_xa`: block lower-bidiagonal with `B^-1` on the
/// diagonal and `-B^-1 A_x` on the first sub-diagonal.
pub fn build_fxa_inverse(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
) -> Result<DMatrix<f64>> {
    let cl = closed_loop(plant, unc, delta, k)?;
    let b_inv = invert_small(&plant.b, "B")?;
    Ok(bidiagonal(&b_inv, &(-&b_inv * &cl.a_x), hor.n_h()))
}

fn bidiagonal(diag: &DMatrix<f64>, sub: &DMatrix<f64>, n_h: usize) -> DMatrix<f64> {
    let n = diag.nrows();
    let mut out = DMatrix::zeros(n * n_h, n * n_h);
    for i in 0..n_h {
        set_block(&mut out, n, i, i, diag);
        if i + 1 < n_h {
            set_block(&mut out, n, i + 1, i, sub);
        }
    }
    out
}

/// Assembles `kappa_inv(K, delta) = (I (x) C)(F_ea F_xa^-1 + F_ex)(I (x) C_J^-1)`
/// from the closed-form bidiagonal `F_xa^-1`.
pub fn build_kappa_inverse(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    hor: &Horizon,
) -> Result<DMatrix<f64>> {
    let n_h = hor.n_h();
    let cl = closed_loop(plant, unc, delta, k)?;
    let b_inv = invert_small(&plant.b, "B")?;
    let cj_inv = invert_small(&plant.c_j, "C_J")?;
    let f_ea = block_toeplitz(&cl.a_e, &plant.b, n_h);
    let f_ex = block_strict_lower(&cl.a_e, &cl.da, n_h);
    let fxa_inv = bidiagonal(&b_inv, &(-&b_inv * &cl.a_x), n_h);
    let core = &f_ea * &fxa_inv + &f_ex;
    let left = blockdiag_left_mul(&plant.c, &core, n_h);
    Ok(blockdiag_right_mul(&left, &cj_inv, n_h))
}

/// Affine decomposition `kappa_inv(K, delta) = G0(delta) - L_delta(K)`.
///
/// `G0` is `kappa_inv` at `K = 0`; the linear part places `K C` on the first
/// block sub-diagonal of `F_xa^-1` and pushes it through
/// `(I (x) C) F_ea (.) (I (x) C_J^-1)`.
#[derive(Debug, Clone)]
pub struct AffineKappaInverse {
    /// Value of `kappa_inv` at `K = 0`.
    pub g0: DMatrix<f64>,
    /// `(I (x) C) F_ea(delta)`.
    p: DMatrix<f64>,
    /// `I (x) C_J^-1`.
    q: DMatrix<f64>,
    /// Plant output matrix `C`.
    c: DMatrix<f64>,
    n_x: usize,
    n_h: usize,
}

impl AffineKappaInverse {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// `L_delta(K)`: the linear-in-K part.
    pub fn linear(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let kc = k * &self.c;
        let mut sub = DMatrix::zeros(self.n_x * self.n_h, self.n_x * self.n_h);
        for i in 0..self.n_h.saturating_sub(1) {
            set_block(&mut sub, self.n_x, i + 1, i, &kc);
        }
        &self.p * sub * &self.q
    }

    /// `kappa_inv(K, delta) = G0 - L_delta(K)`.
    pub fn evaluate(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g0 - self.linear(k)
    }

    /// Adjoint of the linear part in the Frobenius inner product:
    /// `<L_delta(K), G> = <K, adjoint(G)>` for all `K`, `G`.
    pub fn adjoint(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.p.transpose() * g * self.q.transpose();
        let mut s = DMatrix::zeros(self.n_x, self.n_x);
        for i in 0..self.n_h.saturating_sub(1) {
            s += get_block(&m, self.n_x, i + 1, i);
        }
        s * self.c.transpose()
    }
}

/// Precomputes the affine decomposition of `kappa_inv` in `K` for one
/// uncertainty realization.
pub fn affine_decomposition(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    hor: &Horizon,
) -> Result<AffineKappaInverse> {
    let n_x = plant.n_x();
    let n_h = hor.n_h();
    let zero_k = DMatrix::zeros(n_x, n_x);
    let g0 = build_kappa_inverse(plant, unc, delta, &zero_k, hor)?;
    let cl = closed_loop(plant, unc, delta, &zero_k)?;
    let cj_inv = invert_small(&plant.c_j, "C_J")?;
    let f_ea = block_toeplitz(&cl.a_e, &plant.b, n_h);
    let p = blockdiag_left_mul(&plant.c, &f_ea, n_h);
    let q = DMatrix::identity(n_h, n_h).kronecker(&cj_inv);
    Ok(AffineKappaInverse {
        g0,
        p,
        q,
        c: plant.c.clone(),
        n_x,
        n_h,
    })
}

/// Direct time-domain recursion of the 2 n_x-state closed loop
///
/// ```text
/// [x_p[k+1]]   [A_x  0  ] [x_p[k]]   [B]
/// [ e[k+1] ] = [dA   A_e] [ e[k] ] + [B] a[k],   x[0] = 0,
/// ```
///
/// with outputs `y_p[k] = C_J x_p[k]` and `y_r[k] = C e[k]` stacked over
/// `k = 1, ..., N_h`. Serves as the independent oracle for `F_p` and `F_r`.
pub fn simulate_closed_loop(
    plant: &PlantModel,
    unc: &UncertaintyModel,
    delta: &DVector<f64>,
    k: &DMatrix<f64>,
    attack: &[DVector<f64>],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n_x = plant.n_x();
    let n_h = attack.len();
    if n_h == 0 {
        return Err(Error::InvalidParameter(
            "attack sequence must be nonempty".into(),
        ));
    }
    for (i, a) in attack.iter().enumerate() {
        if a.len() != n_x {
            return Err(Error::Dimension(format!(
                "attack step {} must have length {}, got {}",
                i,
                n_x,
                a.len()
            )));
        }
    }
    let cl = closed_loop(plant, unc, delta, k)?;

    // Assemble the 2 n_x closed-loop matrices explicitly and iterate them.
    let mut a_cl = DMatrix::zeros(2 * n_x, 2 * n_x);
    a_cl.view_mut((0, 0), (n_x, n_x)).copy_from(&cl.a_x);
    a_cl.view_mut((n_x, 0), (n_x, n_x)).copy_from(&cl.da);
    a_cl.view_mut((n_x, n_x), (n_x, n_x)).copy_from(&cl.a_e);
    let mut b_cl = DMatrix::zeros(2 * n_x, n_x);
    b_cl.view_mut((0, 0), (n_x, n_x)).copy_from(&plant.b);
    b_cl.view_mut((n_x, 0), (n_x, n_x)).copy_from(&plant.b);
    let mut c_p = DMatrix::zeros(n_x, 2 * n_x);
    c_p.view_mut((0, 0), (n_x, n_x)).copy_from(&plant.c_j);
    let mut c_r = DMatrix::zeros(n_x, 2 * n_x);
    c_r.view_mut((0, n_x), (n_x, n_x)).copy_from(&plant.c);

    let mut state = DVector::zeros(2 * n_x);
    let mut y_p = DVector::zeros(n_x * n_h);
    let mut y_r = DVector::zeros(n_x * n_h);
    for (step, a) in attack.iter().enumerate() {
        state = &a_cl * &state + &b_cl * a;
        y_p.rows_mut(step * n_x, n_x).copy_from(&(&c_p * &state));
        y_r.rows_mut(step * n_x, n_x).copy_from(&(&c_r * &state));
    }
    Ok((y_p, y_r))
}
