//! Acceptance suite: every release criterion with its tolerance, one
//! pass/fail line per criterion (visible with `cargo test -- --nocapture`;
//! failures always print).
//!
//! Criterion 8 carries a known red clause: on this example the risk-averse
//! design improves the tail of the impact proxy but not its median (the
//! nominal baseline is near median-optimal for the symmetric uncertainty
//! box); `acceptance_8b` asserts the median ordering anyway and documents
//! the failure.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use risksynth::certificate::{confidence, empirical_ps, reg_inc_beta, shortfall_threshold};
use risksynth::impact::{impact_bound_constants, impact_exact, impact_proxy, proxy_gradient};
use risksynth::lifted::{build_kappa_inverse, build_lifted, simulate_closed_loop};
use risksynth::model::{BoxDistribution, Horizon, PlantModel, UncertaintyModel};
use risksynth::optimizer::{max_subset_average, minimize_cvar, SolverConfig};
use risksynth::scenario::{draw_scenarios, proxy_values, topm_average};

use risksynth_cli::commands::cmd_demo;

// ---------------------------------------------------------------------------
// self-contained helpers (independent of the core test tree)
// ---------------------------------------------------------------------------

struct Instance {
    plant: PlantModel,
    unc: UncertaintyModel,
    hor: Horizon,
    delta: DVector<f64>,
    k: DMatrix<f64>,
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..=scale))
}

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::identity(n, n) + random_matrix(rng, n, 0.6);
        if m.singular_values().min() > 0.15 {
            return m;
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng, nx_hi: usize, nh_lo: usize, nh_hi: usize) -> Instance {
    loop {
        let n_x = rng.random_range(1..=nx_hi);
        let n_h = rng.random_range(nh_lo..=nh_hi);
        let plant = PlantModel::new(
            random_matrix(rng, n_x, 1.0),
            random_invertible(rng, n_x),
            random_invertible(rng, n_x),
            random_invertible(rng, n_x),
            random_matrix(rng, n_x, 1.0),
        )
        .unwrap();
        let v = rng.random_range(1..=2);
        let unc = UncertaintyModel::new(
            (0..v).map(|_| random_matrix(rng, n_x, 1.0)).collect(),
            DVector::from_element(v, -0.4),
            DVector::from_element(v, 0.4),
            BoxDistribution::Uniform,
        )
        .unwrap();
        let hor = Horizon::new(n_h, rng.random_range(0.5..=2.0)).unwrap();
        let delta = DVector::from_fn(v, |_, _| rng.random_range(-0.4..=0.4));
        let k = random_matrix(rng, n_x, 0.5);
        let Ok(ops) = build_lifted(&plant, &unc, &delta, &k, &hor) else {
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

/// Independent exact-impact oracle: dense inversion of F_r plus a symmetric
/// eigensolve of F_r^-T F_p^T F_p F_r^-1.
fn brute_force_impact(inst: &Instance) -> f64 {
    let ops = build_lifted(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor).unwrap();
    let fr_inv = ops.f_r.clone().try_inverse().unwrap();
    let kappa = &ops.f_p * fr_inv;
    let gram = kappa.transpose() * &kappa;
    let lmax = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    inst.hor.eps_r() * lmax
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_exact_impact_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 3, 2, 6);
        let rep =
            impact_exact(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor, 0.0).unwrap();
        let brute = brute_force_impact(&inst);
        worst = worst.max((rep.q_exact - brute).abs() / brute.abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-8 && elapsed < 10.0;
    report(
        "1 (exact-impact oracle equivalence)",
        ok,
        &format!("worst relative error {worst:.2e} over 100 instances, {elapsed:.2} s"),
    );
    assert!(
        ok,
        "worst relative error {worst:.2e}, elapsed {elapsed:.2} s"
    );
}

#[test]
fn acceptance_2_simulator_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 3, 1, 6);
        let n_x = inst.plant.n_x();
        let n_h = inst.hor.n_h();
        let ops = build_lifted(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor).unwrap();
        let attack: Vec<DVector<f64>> = (0..n_h)
            .map(|_| DVector::from_fn(n_x, |_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        let stacked =
            DVector::from_iterator(n_x * n_h, attack.iter().flat_map(|a| a.iter().copied()));
        let (y_p, y_r) =
            simulate_closed_loop(&inst.plant, &inst.unc, &inst.delta, &inst.k, &attack).unwrap();
        worst = worst.max((&ops.f_p * &stacked - &y_p).norm() / (1.0 + y_p.norm()));
        worst = worst.max((&ops.f_r * &stacked - &y_r).norm() / (1.0 + y_r.norm()));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && elapsed < 5.0;
    report(
        "2 (lifted vs time-domain simulator)",
        ok,
        &format!("worst scaled error {worst:.2e} over 200 draws, {elapsed:.2} s"),
    );
    assert!(ok, "worst scaled error {worst:.2e}, elapsed {elapsed:.2} s");
}

#[test]
fn acceptance_3_impact_bound_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst_det: f64 = 0.0;
    let mut violations = 0usize;
    for _ in 0..1000 {
        let inst = random_instance(&mut rng, 3, 2, 5);
        let kinv =
            build_kappa_inverse(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor).unwrap();
        // determinant identity
        let ratio = inst.plant.c_j.determinant() / inst.plant.c.determinant();
        let det_product = kinv.determinant() * ratio.powi(inst.hor.n_h() as i32);
        worst_det = worst_det.max((det_product.abs() - 1.0).abs());
        // bound chain at eta = 0
        let consts = impact_bound_constants(&inst.plant, &inst.hor, 0.0).unwrap();
        let sv = kinv.singular_values();
        let n = sv.len();
        let lhs = inst.hor.eps_r() / sv[n - 1];
        let rhs = consts.mu * sv.iter().take(n - 1).sum::<f64>().powi(consts.f as i32);
        if lhs > rhs * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    // equality in the scalar n_x * N_h = 2 case
    let one = DMatrix::from_element(1, 1, 1.0);
    let plant = PlantModel::new(
        DMatrix::from_element(1, 1, 2.0),
        one.clone(),
        one.clone(),
        one.clone(),
        one,
    )
    .unwrap();
    let unc = UncertaintyModel::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_element(1, -0.5),
        DVector::from_element(1, 0.5),
        BoxDistribution::Uniform,
    )
    .unwrap();
    let hor = Horizon::new(2, 1.0).unwrap();
    let consts = impact_bound_constants(&plant, &hor, 0.0).unwrap();
    let mut worst_eq: f64 = 0.0;
    for _ in 0..50 {
        let delta = DVector::from_element(1, rng.random_range(-0.5..=0.5));
        let k = DMatrix::from_element(1, 1, rng.random_range(-2.0..=2.0));
        let rep = impact_exact(&plant, &unc, &delta, &k, &hor, 0.0).unwrap();
        let lhs = hor.eps_r() * rep.sigma_max_kappa;
        let rhs = consts.mu * rep.q_proxy.powi(consts.f as i32);
        worst_eq = worst_eq.max((lhs - rhs).abs() / (1.0 + rhs));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_det <= 1e-6 && violations == 0 && worst_eq <= 1e-9 && elapsed < 30.0;
    report(
        "3 (determinant identity + impact bound)",
        ok,
        &format!(
            "det error {worst_det:.2e}, {violations} bound violations / 1000, \
             scalar equality error {worst_eq:.2e}, {elapsed:.2} s"
        ),
    );
    assert!(
        ok,
        "det {worst_det:.2e}, violations {violations}, eq {worst_eq:.2e}, {elapsed:.2} s"
    );
}

#[test]
fn acceptance_4_gradient_checks() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let eta = 0.1;

    // finite differences at separated points
    let mut worst_fd: f64 = 0.0;
    let mut checked = 0;
    while checked < 50 {
        let inst = random_instance(&mut rng, 3, 2, 4);
        let kinv =
            build_kappa_inverse(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor).unwrap();
        let sv = kinv.singular_values();
        let n = sv.len();
        if n >= 2 && (sv[n - 2] - sv[n - 1]) / sv[0] < 1e-4 {
            continue;
        }
        let g =
            proxy_gradient(&inst.plant, &inst.unc, &inst.delta, &inst.k, &inst.hor, eta).unwrap();
        let n_x = inst.plant.n_x();
        let mut fd = DMatrix::zeros(n_x, n_x);
        for i in 0..n_x {
            for j in 0..n_x {
                let mut kp = inst.k.clone();
                let mut km = inst.k.clone();
                kp[(i, j)] += 1e-6;
                km[(i, j)] -= 1e-6;
                let fp =
                    impact_proxy(&inst.plant, &inst.unc, &inst.delta, &kp, &inst.hor, eta).unwrap();
                let fm =
                    impact_proxy(&inst.plant, &inst.unc, &inst.delta, &km, &inst.hor, eta).unwrap();
                fd[(i, j)] = (fp - fm) / 2e-6;
            }
        }
        worst_fd = worst_fd.max((&g - &fd).norm() / fd.norm().max(1e-12));
        checked += 1;
    }

    // subgradient inequality at degenerate (fully tied) points
    let mut subgradient_ok = true;
    for _ in 0..10 {
        let a = rng.random_range(0.5..2.5);
        let l = rng.random_range(0.5..1.5);
        let one = DMatrix::from_element(1, 1, 1.0);
        let plant = PlantModel::new(
            DMatrix::from_element(1, 1, a),
            one.clone(),
            one.clone(),
            one.clone(),
            DMatrix::from_element(1, 1, l),
        )
        .unwrap();
        let unc = UncertaintyModel::new(
            vec![DMatrix::from_element(1, 1, 1.0)],
            DVector::from_element(1, -0.5),
            DVector::from_element(1, 0.5),
            BoxDistribution::Uniform,
        )
        .unwrap();
        let hor = Horizon::new(2, 1.0).unwrap();
        let delta = DVector::from_element(1, rng.random_range(-0.5..0.5));
        // kappa_inv = I at K = delta - L: fully tied singular values
        let k_tie = DMatrix::from_element(1, 1, delta[0] - l);
        let g = proxy_gradient(&plant, &unc, &delta, &k_tie, &hor, eta).unwrap();
        let q_tie = impact_proxy(&plant, &unc, &delta, &k_tie, &hor, eta).unwrap();
        for _ in 0..40 {
            let k_other = DMatrix::from_element(1, 1, rng.random_range(-3.0..3.0));
            let q_other = impact_proxy(&plant, &unc, &delta, &k_other, &hor, eta).unwrap();
            if q_other < q_tie + g.dot(&(&k_other - &k_tie)) - 1e-9 {
                subgradient_ok = false;
            }
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_fd <= 1e-4 && subgradient_ok && elapsed < 20.0;
    report(
        "4 (gradient finite differences + subgradient at ties)",
        ok,
        &format!(
            "worst FD relative error {worst_fd:.2e} over 50 points, \
             subgradient inequality {}, {elapsed:.2} s",
            if subgradient_ok { "holds" } else { "VIOLATED" }
        ),
    );
    assert!(
        ok,
        "fd {worst_fd:.2e}, subgradient ok {subgradient_ok}, {elapsed:.2} s"
    );
}

#[test]
fn acceptance_5_scenario_program_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);

    // subset-constraint form equals the top-m average, exactly
    let mut exact_equal = true;
    for n in 1..=6usize {
        for m in 1..=n {
            for _ in 0..25 {
                let values: Vec<f64> = (0..n).map(|_| rng.random_range(-40.0..40.0)).collect();
                if max_subset_average(&values, m).unwrap() != topm_average(&values, m).unwrap() {
                    exact_equal = false;
                }
            }
        }
    }

    // one-scenario scalar synthesis matches a dense grid search
    let one = DMatrix::from_element(1, 1, 1.0);
    let plant = PlantModel::new(
        DMatrix::from_element(1, 1, 2.0),
        one.clone(),
        one.clone(),
        one.clone(),
        one,
    )
    .unwrap();
    let unc = UncertaintyModel::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_element(1, -0.5),
        DVector::from_element(1, 0.5),
        BoxDistribution::Uniform,
    )
    .unwrap();
    let hor = Horizon::new(2, 1.0).unwrap();
    let eta = 0.1;
    let set = draw_scenarios(&unc, 1, 44).unwrap();
    let mut grid_best = f64::INFINITY;
    let steps = 40_000;
    for i in 0..=steps {
        let kv = -3.0 + 4.0 * i as f64 / steps as f64;
        let k = DMatrix::from_element(1, 1, kv);
        let v = proxy_values(&plant, &unc, &set, &k, &hor, eta).unwrap()[0];
        grid_best = grid_best.min(v);
    }
    let cfg = SolverConfig {
        max_iters: 500,
        polish_iters: 600,
        restarts: 1,
        ..SolverConfig::default()
    };
    let result = minimize_cvar(&plant, &unc, &set, &hor, eta, 1, &cfg).unwrap();
    let gap = (result.objective - grid_best).abs();

    let elapsed = started.elapsed().as_secs_f64();
    let ok = exact_equal && gap <= 1e-4;
    report(
        "5 (subset form = top-m; grid-search optimizer oracle)",
        ok,
        &format!(
            "subset equality {}, optimizer-vs-grid gap {gap:.2e}, {elapsed:.2} s",
            if exact_equal { "exact" } else { "BROKEN" }
        ),
    );
    assert!(ok, "subset equality {exact_equal}, gap {gap:.2e}");
}

#[test]
fn acceptance_6_optimizer_uniqueness_and_ordering() {
    let started = Instant::now();
    // the demo-scale system
    let cfg_demo = risksynth_cli::config::demo_config();
    let built = cfg_demo.build().unwrap();
    let set = draw_scenarios(&built.unc, 11, cfg_demo.scenarios.seed).unwrap();
    let eta = cfg_demo.risk.eta;

    // three independent initializations agree on the unique optimum
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut gains = Vec::new();
    let mut histories_ok = true;
    for run in 0..3 {
        let mut cfg = SolverConfig {
            restarts: 1,
            record_history: true,
            ..SolverConfig::default()
        };
        if run > 0 {
            cfg.init_k = Some(DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..=1.0)));
        }
        let result =
            minimize_cvar(&built.plant, &built.unc, &set, &built.hor, eta, 2, &cfg).unwrap();
        for series in result.best_history.as_ref().unwrap() {
            if !series.windows(2).all(|w| w[1] <= w[0]) {
                histories_ok = false;
            }
        }
        gains.push(result.k_star);
    }
    let mut worst_gap: f64 = 0.0;
    for i in 0..gains.len() {
        for j in i + 1..gains.len() {
            worst_gap = worst_gap.max((&gains[i] - &gains[j]).norm() / (1.0 + gains[i].norm()));
        }
    }

    // table ordering: the m = 2 optimum cannot exceed the m = 1 optimum
    let cfg = SolverConfig::default();
    let r1 = minimize_cvar(&built.plant, &built.unc, &set, &built.hor, eta, 1, &cfg).unwrap();
    let r2 = minimize_cvar(&built.plant, &built.unc, &set, &built.hor, eta, 2, &cfg).unwrap();
    let ordering_ok = r2.objective <= r1.objective + 1e-6;

    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_gap <= 1e-4 && histories_ok && ordering_ok && elapsed < 120.0;
    report(
        "6 (restart agreement, monotone best objective, tail-size ordering)",
        ok,
        &format!(
            "restart gap {worst_gap:.2e}, best-objective monotone {histories_ok}, \
             cvar(m=2) = {:.4} <= cvar(m=1) = {:.4}: {ordering_ok}, {elapsed:.2} s",
            r2.objective, r1.objective
        ),
    );
    assert!(
        ok,
        "gap {worst_gap:.2e}, monotone {histories_ok}, ordering {ordering_ok}, {elapsed:.2} s"
    );
}

#[test]
fn acceptance_7_certificate_math_and_calibration() {
    let started = Instant::now();

    // closed form at the demo parameters: I_eps(11, 1) = eps^11
    let mut worst_power: f64 = 0.0;
    for i in 1..=99 {
        let eps = i as f64 / 100.0;
        let c = confidence(11, 2, 9, eps).unwrap();
        worst_power = worst_power.max((c - eps.powi(11)).abs());
    }

    // symmetry and normalization
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst_sym: f64 = 0.0;
    for _ in 0..50 {
        let a = rng.random_range(1.0..=15.0);
        let b = rng.random_range(1.0..=15.0);
        let x = rng.random_range(0.01..=0.99);
        let lhs = reg_inc_beta(a, b, x).unwrap();
        let rhs = 1.0 - reg_inc_beta(b, a, 1.0 - x).unwrap();
        worst_sym = worst_sym.max((lhs - rhs).abs());
    }
    let norm_err = (reg_inc_beta(3.5, 4.5, 1.0).unwrap() - 1.0).abs()
        + reg_inc_beta(3.5, 4.5, 0.0).unwrap().abs();

    // Monte-Carlo calibration of the probability of shortfall against
    // Beta(m + d, N + 1 - m - d) over 200 independent repetitions
    let one = DMatrix::from_element(1, 1, 1.0);
    let plant = PlantModel::new(
        DMatrix::from_element(1, 1, 2.0),
        one.clone(),
        one.clone(),
        one.clone(),
        one,
    )
    .unwrap();
    let unc = UncertaintyModel::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_element(1, -0.5),
        DVector::from_element(1, 0.5),
        BoxDistribution::Uniform,
    )
    .unwrap();
    let hor = Horizon::new(2, 1.0).unwrap();
    let (n, m, d) = (6usize, 1usize, 1usize);
    let eta = 0.05;
    let reps = 200;
    let solver = SolverConfig {
        max_iters: 400,
        polish_iters: 500,
        restarts: 1,
        ..SolverConfig::default()
    };
    let mut ps_values = Vec::with_capacity(reps);
    for rep in 0..reps {
        let set = draw_scenarios(&unc, n, 10_000 + rep as u64).unwrap();
        let result = minimize_cvar(&plant, &unc, &set, &hor, eta, m, &solver).unwrap();
        let threshold = shortfall_threshold(&result, m, d).unwrap();
        let ps = empirical_ps(
            &plant,
            &unc,
            &result.k_star,
            threshold,
            &hor,
            eta,
            2000,
            700_000 + rep as u64,
        )
        .unwrap();
        ps_values.push(ps);
    }
    ps_values.sort_by(f64::total_cmp);
    // one-sided KS: the empirical distribution must not sit significantly
    // below the Beta CDF (PS must not be stochastically larger than theory)
    let mut d_stat: f64 = 0.0;
    for (i, &p) in ps_values.iter().enumerate() {
        let beta_cdf = reg_inc_beta((m + d) as f64, (n + 1 - m - d) as f64, p).unwrap();
        d_stat = d_stat.max(beta_cdf - i as f64 / reps as f64);
    }
    let ks_crit = ((1.0f64 / 0.01).ln() / (2.0 * reps as f64)).sqrt();

    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_power <= 1e-10
        && worst_sym <= 1e-10
        && norm_err <= 1e-10
        && d_stat <= ks_crit
        && elapsed < 300.0;
    report(
        "7 (certificate closed forms + shortfall calibration)",
        ok,
        &format!(
            "power-law error {worst_power:.2e}, symmetry error {worst_sym:.2e}, \
             normalization error {norm_err:.2e}, KS statistic {d_stat:.4} (crit {ks_crit:.4}), \
             {elapsed:.1} s"
        ),
    );
    assert!(
        ok,
        "power {worst_power:.2e}, sym {worst_sym:.2e}, norm {norm_err:.2e}, \
         KS {d_stat:.4} vs {ks_crit:.4}, {elapsed:.1} s"
    );
}

#[test]
fn acceptance_8a_demo_bands_and_threshold_ordering() {
    let started = Instant::now();
    let outcome = cmd_demo().unwrap();
    let rows = &outcome.demo.rows;
    assert_eq!(rows.len(), 2);

    // sample-dependent magnitudes: within [0.5x, 1.5x] of the reference
    // 20.6436 / 20.7160 objectives and 16.8910 / 16.9069 thresholds
    let mut bands_ok = true;
    for row in rows {
        if !(10.32..=31.07).contains(&row.cvar) {
            bands_ok = false;
        }
        if !(8.44..=25.36).contains(&row.shortfall_threshold) {
            bands_ok = false;
        }
        if row.shortfall_threshold > row.cvar {
            bands_ok = false;
        }
    }
    // tail-size ordering across the two rows
    let ordering_ok = rows[1].cvar <= rows[0].cvar + 1e-9;
    // the closed-form confidence at the demo parameters
    let conf_ok = (outcome.demo.confidence_at_09_m2 - 0.9f64.powi(11)).abs() < 1e-10;

    let elapsed = started.elapsed().as_secs_f64();
    let ok = bands_ok && ordering_ok && conf_ok && elapsed < 180.0;
    report(
        "8a (demo magnitudes, threshold <= cvar, m-ordering, confidence)",
        ok,
        &format!(
            "cvar m=1 {:.4} / m=2 {:.4}, thresholds {:.4} / {:.4}, \
             confidence(0.9) {:.6}, {elapsed:.1} s",
            rows[0].cvar,
            rows[1].cvar,
            rows[0].shortfall_threshold,
            rows[1].shortfall_threshold,
            outcome.demo.confidence_at_09_m2
        ),
    );
    assert!(
        ok,
        "bands {bands_ok}, ordering {ordering_ok}, confidence {conf_ok}, {elapsed:.1} s"
    );
}

#[test]
fn acceptance_8b_demo_median_improvement() {
    // Asserted exactly as the release criterion states: on 100 fresh uncertainties both the
    // proxy median and the exact-impact median must be strictly lower under
    // the risk-averse gain than under the nominal baseline.
    //
    // KNOWN RED: on this example the risk-averse design trims the proxy's
    // upper tail (which is what it optimizes) but the nominal baseline is
    // near median-optimal for the symmetric uncertainty box, so the median
    // ordering does not hold — for any training seed tried, and uniformly
    // per-sample for the exact impact. The failure is structural, not a
    // solver artifact; see the run detail printed below.
    let outcome = cmd_demo().unwrap();
    let median = |metric: &str, controller: &str| {
        outcome
            .demo
            .evaluation_rows
            .iter()
            .find(|r| r.metric == metric && r.controller == controller)
            .map(|r| r.stats.median)
            .unwrap()
    };
    let proxy_opt = median("q_proxy", "optimal");
    let proxy_nom = median("q_proxy", "nominal");
    let exact_opt = median("q_exact", "optimal");
    let exact_nom = median("q_exact", "nominal");
    let proxy_ok = proxy_opt < proxy_nom;
    let exact_ok = exact_opt < exact_nom;
    let ok = proxy_ok && exact_ok;
    report(
        "8b (median impact improvement over nominal)",
        ok,
        &format!(
            "median q_proxy optimal {proxy_opt:.4} vs nominal {proxy_nom:.4}; \
             median q_exact optimal {exact_opt:.4} vs nominal {exact_nom:.4}"
        ),
    );
    assert!(
        ok,
        "median ordering does not hold: q_proxy {proxy_opt:.4} vs {proxy_nom:.4}, \
         q_exact {exact_opt:.4} vs {exact_nom:.4} (known limitation of the proxy-based \
         tail design on this example; the tail improves, the median does not)"
    );
}
