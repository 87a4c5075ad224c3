//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! and the process exits nonzero if any fails. Runs without the libtest
//! harness so the lines are never captured, and sequentially so that the
//! timing-based criteria are not disturbed by parallel tests.

use std::time::{Duration, Instant};

use egw_core::bench::{self, BenchmarkSpec, EpsRule, GeneratorSpec};
use egw_core::egw::{
    debiased_egw, gradient, half_cross_moment, hessian_quadratic_form, high_precision_plan, phi,
    AuxMatrix, ProblemSpec,
};
use egw_core::measures::{rotate_grid, AffineMap, DiscreteMeasure, Raster};
use egw_core::sinkhorn::{self, hilbert_distance, Contraction, Kernel};
use egw_core::solvers::{self, Algorithm, SolveConfig, SolveStatus};
use ndarray::{array, Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn run(id: usize, limit_secs: u64, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > limit {
        passed = false;
        detail = format!("{detail}; exceeded time limit");
    }
    let o = Outcome {
        id,
        passed,
        detail,
        elapsed,
        limit,
    };
    println!(
        "{} criterion {:>2}: {} [{:.2?} / limit {:?}]",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.detail,
        o.elapsed,
        o.limit
    );
    o
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let normal = Normal::new(0.0, scale).unwrap();
    let points = Array2::from_shape_fn((n, d), |_| normal.sample(rng));
    let weights = Array1::from_shape_fn(n, |_| 0.2 + rng.random::<f64>());
    let weights = &weights / weights.sum();
    DiscreteMeasure::new(points, weights).unwrap()
}

fn random_aux(rng: &mut ChaCha8Rng, d0: usize, d1: usize, norm: f64) -> AuxMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let a = AuxMatrix(Array2::from_shape_fn((d0, d1), |_| normal.sample(rng)));
    a.scaled(norm / a.norm())
}

fn sup_norm(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Criterion 1: Two-point closed form of the entropic plan.
fn analytic_oracle() -> Result<String, String> {
    let mu = DiscreteMeasure::new(array![[0.0], [1.0]], array![0.5, 0.5]).unwrap();
    let spec = ProblemSpec::new(mu.clone(), mu, 1.0).unwrap();
    let mut worst = 0.0_f64;
    for a in [0.0, 0.1, -0.1] {
        let aux = AuxMatrix(array![[a]]);
        let (cp, _) = high_precision_plan(&spec, &aux).map_err(|e| e.to_string())?;
        let z: f64 = 2.0 + 16.0 * a;
        let expected = z.exp() / (2.0 * (1.0 + z.exp()));
        worst = worst.max((cp.plan[[1, 1]] - expected).abs());
    }
    let msg = format!("max |pi_ab - closed form| = {worst:.3e} (tol 1e-8)");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 2: Certified sup-norm bound against a tight reference run.
fn oracle_certification() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut nontrivial = 0;
    let mut worst_ratio = 0.0_f64;
    for _ in 0..50 {
        let mu0 = random_measure(&mut rng, 8, 2, 0.4);
        let mu1 = random_measure(&mut rng, 8, 2, 0.4);
        let eps = 0.5 + 1.5 * rng.random::<f64>();
        let r = 0.05 * rng.random::<f64>();
        let aux = random_aux(&mut rng, 2, 2, r);
        let kernel = sinkhorn::build_kernel(&mu0, &mu1, &aux, eps).map_err(|e| e.to_string())?;
        let (a, b) = (mu0.weights(), mu1.weights());
        let (reference, rcert) =
            sinkhorn::sinkhorn(&kernel, a, b, 1e-14, 1_000_000).map_err(|e| e.to_string())?;
        if rcert.marginal_violation >= 1e-14 {
            return Err(format!(
                "reference run reached only {:e}",
                rcert.marginal_violation
            ));
        }
        // Truncated runs give certificates of every size.
        let k_max = 1 + (rng.random::<f64>() * 15.0) as usize;
        let (approx, cert) =
            sinkhorn::sinkhorn(&kernel, a, b, 1e-300, k_max).map_err(|e| e.to_string())?;
        let err = sup_norm(&approx.plan, &reference.plan);
        if cert.delta_sup < 1.0 {
            nontrivial += 1;
        }
        worst_ratio = worst_ratio.max(err / cert.delta_sup);
        if err > cert.delta_sup {
            violations += 1;
        }
    }
    let msg = format!(
        "{violations} violations in 50 instances ({nontrivial} with bound < 1), max error/bound = {worst_ratio:.3}"
    );
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 3: Birkhoff contraction of the Hilbert metric.
fn contraction_property() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n0 = 2 + (rng.random::<f64>() * 6.0) as usize;
        let n1 = 2 + (rng.random::<f64>() * 6.0) as usize;
        let spread = 0.1 + 2.0 * rng.random::<f64>();
        let cost = Array2::from_shape_fn((n0, n1), |_| spread * normal.sample(&mut rng));
        let kernel = Kernel::from_cost(&cost, 1.0).map_err(|e| e.to_string())?;
        let lambda = Contraction::of(&kernel).lambda();
        let x = Array1::from_shape_fn(n1, |_| (2.0 * normal.sample(&mut rng)).exp());
        let y = Array1::from_shape_fn(n1, |_| (2.0 * normal.sample(&mut rng)).exp());
        let kx = kernel.matrix.dot(&x);
        let ky = kernel.matrix.dot(&y);
        let lhs = hilbert_distance(kx.view(), ky.view()).map_err(|e| e.to_string())?;
        let rhs = lambda * hilbert_distance(x.view(), y.view()).map_err(|e| e.to_string())?;
        worst = worst.max(lhs - rhs);
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
    }
    let msg = format!("{violations} violations in 100 trials, max(lhs - rhs) = {worst:.3e}");
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 4: Gradient against central differences of a tight objective.
fn gradient_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let n0 = 2 + (rng.random::<f64>() * 9.0) as usize;
        let n1 = 2 + (rng.random::<f64>() * 9.0) as usize;
        let d0 = 1 + (rng.random::<f64>() * 3.0) as usize;
        let d1 = 1 + (rng.random::<f64>() * 3.0) as usize;
        let mu0 = random_measure(&mut rng, n0, d0, 0.3).center();
        let mu1 = random_measure(&mut rng, n1, d1, 0.3).center();
        let eps = 0.2 + rng.random::<f64>();
        let spec = ProblemSpec::new(mu0, mu1, eps).map_err(|e| e.to_string())?;
        let r = 0.3 * spec.m * rng.random::<f64>();
        let a = random_aux(&mut rng, d0, d1, r);
        let dir = random_aux(&mut rng, d0, d1, 1.0);
        let at = phi(&spec, &a, 1e-10).map_err(|e| e.to_string())?;
        let g = gradient(&spec, &a, &at.coupling.plan);
        let analytic = g.inner(&dir);
        let plus = phi(&spec, &a.axpy(h, &dir), 1e-14)
            .map_err(|e| e.to_string())?
            .value;
        let minus = phi(&spec, &a.axpy(-h, &dir), 1e-14)
            .map_err(|e| e.to_string())?
            .value;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1.0));
    }
    let msg = format!("max relative error = {worst:.3e} over 20 instances (tol 1e-4)");
    if worst <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn convex_example() -> ProblemSpec {
    let mu0 = DiscreteMeasure::new(array![[-1.4], [1.2]], array![0.4, 0.6])
        .unwrap()
        .center();
    let mu1 = DiscreteMeasure::new(array![[-1.01], [1.31]], array![0.4, 0.6])
        .unwrap()
        .center();
    let probe = ProblemSpec::new(mu0.clone(), mu1.clone(), 1.0).unwrap();
    let eps = 1.05 * probe.convexity_threshold();
    ProblemSpec::new(mu0, mu1, eps).unwrap()
}

/// Criterion 5: Fast-gradient optimality gap under its envelope, decaying at least
/// quadratically.
fn convex_rate() -> Result<String, String> {
    let spec = convex_example();
    if !spec.is_certified_convex() {
        return Err("instance not certified convex".into());
    }
    let cfg = SolveConfig {
        algorithm: Algorithm::Fgm,
        grad_tol: 1e-12,
        max_outer_iters: 400,
        ..SolveConfig::default()
    };
    let report = solvers::solve_fgm(&spec, &cfg).map_err(|e| e.to_string())?;
    let gaps = report.gap_trace();
    let mut above = 0;
    for &(k, gap) in &gaps {
        if k >= 1 && gap > report.trace[k].envelope.unwrap() {
            above += 1;
        }
    }
    // Fit over k in [5, 200] where the gap is resolvable above rounding.
    let floor = 1e-13 * report.objective.abs().max(1.0);
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|&&(k, g)| (5..=200).contains(&k) && g > floor)
        .map(|&(k, g)| (k as f64, g))
        .collect();
    if pts.len() < 3 {
        return Err(format!("only {} resolvable gap points", pts.len()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let order = -bench::loglog_slope(&xs, &ys);
    let msg = format!(
        "{above} envelope violations over {} iterations; decay order {order:.2} on k in [{}, {}] (need >= 1.5)",
        gaps.len(),
        xs[0],
        xs[xs.len() - 1]
    );
    if above == 0 && order >= 1.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn nonconvex_example() -> ProblemSpec {
    let mu0 = DiscreteMeasure::uniform(array![[0.3], [-0.8], [-0.5]])
        .unwrap()
        .center();
    let mu1 = DiscreteMeasure::uniform(array![[0.1, 0.6], [-0.5, 0.3], [0.4, -0.3]])
        .unwrap()
        .center();
    ProblemSpec::new(mu0, mu1, 0.07).unwrap()
}

/// Criterion 6: Running minimum of the squared adaptive residual decays at least like k^-0.8.
fn nonconvex_residual() -> Result<String, String> {
    let spec = nonconvex_example();
    if spec.is_certified_convex() {
        return Err("instance unexpectedly certified convex".into());
    }
    let cfg = SolveConfig {
        algorithm: Algorithm::Adaptive,
        max_outer_iters: 500,
        record_objective: false,
        ..SolveConfig::default()
    };
    let report = solvers::solve_adaptive(&spec, &cfg, None).map_err(|e| e.to_string())?;
    let mins = report.running_min_sq_residual();
    let last = mins.len().min(500);
    if last < 20 {
        return Err(format!("only {last} iterations recorded"));
    }
    let xs: Vec<f64> = (10..=last).map(|k| k as f64).collect();
    let ys: Vec<f64> = (10..=last).map(|k| mins[k - 1]).collect();
    let slope = bench::loglog_slope(&xs, &ys);
    let envelope_ok = report
        .trace
        .iter()
        .zip(&mins)
        .all(|(r, m)| *m <= r.envelope.unwrap());
    let msg = format!(
        "log-log slope {slope:.2} over k in [10, {last}] (need <= -0.8); below envelope: {envelope_ok}; status {:?}",
        report.status
    );
    if slope <= -0.8 && envelope_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 7: Converged solves satisfy the fixed-point equation A = (1/2) sum Pi x y^T.
fn stationarity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let n0 = 3 + (rng.random::<f64>() * 8.0) as usize;
        let n1 = 3 + (rng.random::<f64>() * 8.0) as usize;
        let d0 = 1 + (rng.random::<f64>() * 2.0) as usize;
        let d1 = 1 + (rng.random::<f64>() * 2.0) as usize;
        let mu0 = random_measure(&mut rng, n0, d0, 0.3).center();
        let mu1 = random_measure(&mut rng, n1, d1, 0.3).center();
        let probe = ProblemSpec::new(mu0.clone(), mu1.clone(), 1.0).map_err(|e| e.to_string())?;
        // Alternate between the convex regime and a moderately nonconvex one.
        let factor = if i % 2 == 0 { 1.5 } else { 0.5 };
        let eps = factor * probe.convexity_threshold();
        let spec = ProblemSpec::new(mu0, mu1, eps).map_err(|e| e.to_string())?;
        let cfg = SolveConfig {
            record_objective: false,
            ..SolveConfig::default()
        };
        let report = solvers::solve(&spec, &cfg).map_err(|e| e.to_string())?;
        if report.status != SolveStatus::Converged {
            continue;
        }
        checked += 1;
        let a = report.final_a_matrix();
        let fixed = half_cross_moment(&spec, &report.plan);
        let lhs = a.axpy(-1.0, &fixed).norm();
        let rhs = cfg.grad_tol / 64.0 + 32.0 * report.delta_oracle * spec.norm_product_sum / 64.0;
        worst = worst.max(lhs / rhs);
        if lhs > rhs {
            failures += 1;
        }
    }
    let msg = format!(
        "{failures} failures in {checked} converged solves (of 20); max lhs/rhs = {worst:.3}"
    );
    if failures == 0 && checked == 20 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 8: Hessian quadratic form between its lower and upper bounds.
fn hessian_sandwich() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..10 {
        let n0 = 2 + (rng.random::<f64>() * 5.0) as usize;
        let n1 = 2 + (rng.random::<f64>() * 5.0) as usize;
        let d0 = 1 + (rng.random::<f64>() * 2.0) as usize;
        let d1 = 1 + (rng.random::<f64>() * 2.0) as usize;
        let mu0 = random_measure(&mut rng, n0, d0, 0.3).center();
        let mu1 = random_measure(&mut rng, n1, d1, 0.3).center();
        let eps = 0.05 + 0.5 * rng.random::<f64>();
        let spec = ProblemSpec::new(mu0, mu1, eps).map_err(|e| e.to_string())?;
        let r = 0.4 * spec.m * rng.random::<f64>();
        let a = random_aux(&mut rng, d0, d1, r);
        let (cp, _) = high_precision_plan(&spec, &a).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let r = 0.1 + rng.random::<f64>();
            let c = random_aux(&mut rng, d0, d1, r);
            let (q, _) = hessian_quadratic_form(&spec, &c, &cp.plan).map_err(|e| e.to_string())?;
            let n2 = c.norm().powi(2);
            checks += 1;
            if q < spec.hessian_lower_bound() * n2 - 1e-6 || q > 64.0 * n2 + 1e-6 {
                violations += 1;
            }
        }
    }
    let msg = format!("{violations} violations in {checks} quadratic forms");
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn egw_total(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    eps: f64,
    cfg: &SolveConfig,
) -> Result<(f64, solvers::SolveReport), String> {
    let spec = ProblemSpec::new(mu0.clone(), mu1.clone(), eps).map_err(|e| e.to_string())?;
    let report = solvers::solve(&spec, cfg).map_err(|e| e.to_string())?;
    if report.status != SolveStatus::Converged {
        return Err(format!("solve ended with {:?}", report.status));
    }
    let total = report.egw.ok_or("missing EGW value")?.total;
    Ok((total, report))
}

/// Criterion 9: Scaling identity, rotation invariance, and A* = 0 for a symmetric target.
fn invariances() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mu0 = random_measure(&mut rng, 7, 2, 0.4).center();
    let mu1 = random_measure(&mut rng, 6, 2, 0.4).center();
    let probe = ProblemSpec::new(mu0.clone(), mu1.clone(), 1.0).map_err(|e| e.to_string())?;
    let eps = 1.3 * probe.convexity_threshold();
    let cfg = SolveConfig {
        grad_tol: 1e-10,
        record_objective: false,
        ..SolveConfig::default()
    };
    let (s, _) = egw_total(&mu0, &mu1, eps, &cfg)?;
    let (s_unit, _) = egw_total(&mu0.eps_rescaled(eps), &mu1.eps_rescaled(eps), 1.0, &cfg)?;
    let scaling = relative(eps * s_unit, s);

    let q = AffineMap::rotation_2d(37.0);
    let (s_rot, _) = egw_total(
        &mu0,
        &mu1.transform(&q).map_err(|e| e.to_string())?,
        eps,
        &cfg,
    )?;
    let rotation = relative(s_rot, s);

    // mu1 invariant under x -> -x
    let half = random_measure(&mut rng, 4, 2, 0.4);
    let pts = ndarray::concatenate![
        ndarray::Axis(0),
        half.points().view(),
        (-half.points()).view()
    ];
    let w = ndarray::concatenate![
        ndarray::Axis(0),
        half.weights().view(),
        half.weights().view()
    ] * 0.5;
    let sym = DiscreteMeasure::new(pts, w).map_err(|e| e.to_string())?;
    let probe = ProblemSpec::new(mu0.clone(), sym.clone(), 1.0).map_err(|e| e.to_string())?;
    // Start away from the symmetric stationary point A = 0.
    let sym_cfg = SolveConfig {
        initial: Some(AuxMatrix::from_elem(2, 2, 0.1 * probe.m)),
        ..cfg.clone()
    };
    let (_, report) = egw_total(&mu0, &sym, 1.3 * probe.convexity_threshold(), &sym_cfg)?;
    let a_norm = report.final_a_matrix().norm();

    let msg = format!(
        "scaling rel err {scaling:.2e}, rotation rel err {rotation:.2e} (tol 1e-6); |A*| = {a_norm:.2e} (tol 1e-6)"
    );
    if scaling <= 1e-6 && rotation <= 1e-6 && a_norm <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn toy_raster() -> Raster {
    #[rustfmt::skip]
    let pixels = vec![
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.8, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.6, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.7, 0.9, 0.5, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    Raster::new(8, 8, pixels).unwrap()
}

/// Criterion 10: Debiased value vanishes on identical inputs and on a 90-degree grid rotation.
fn debias_nullity() -> Result<String, String> {
    let img = toy_raster();
    let pixel = 1.0 / 8.0;
    let mu = img.to_measure(pixel).map_err(|e| e.to_string())?;
    let rotated = rotate_grid(&img, 90.0)
        .to_measure(pixel)
        .map_err(|e| e.to_string())?;
    let centered = mu.center();
    let probe = ProblemSpec::new(centered.clone(), centered, 1.0).map_err(|e| e.to_string())?;
    let eps = 1.05 * probe.convexity_threshold();
    let cfg = SolveConfig {
        grad_tol: 1e-10,
        record_objective: false,
        ..SolveConfig::default()
    };
    let same = debiased_egw(&mu, &mu, eps, &cfg).map_err(|e| e.to_string())?;
    let rot = debiased_egw(&mu, &rotated, eps, &cfg).map_err(|e| e.to_string())?;
    let tol = 1e-5 * same.self0.abs() + 1e-8;
    let msg = format!(
        "S(mu, mu) debiased = {:e}; S(mu, R mu) debiased = {:.3e} (tol {tol:.3e}); S(mu, mu) = {:.6e}",
        same.value, rot.value, same.self0
    );
    if same.value == 0.0 && rot.value.abs() <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 11: Wall time grows quadratically in the number of atoms.
fn quadratic_scaling() -> Result<String, String> {
    let spec = BenchmarkSpec {
        dims: vec![2],
        sizes: vec![64, 128, 256, 512],
        trials: 5,
        time_budget: 120.0,
        eps_rule: EpsRule::ConvexMargin,
        generator: GeneratorSpec {
            seed: 11,
            ..GeneratorSpec::default()
        },
        solve: SolveConfig {
            grad_tol: 1e-6,
            record_objective: false,
            ..SolveConfig::default()
        },
    };
    let records = bench::run_benchmark(&spec).map_err(|e| e.to_string())?;
    let means = bench::mean_times(&records, 2);
    if means.len() != 4 {
        return Err(format!("only {} sizes completed", means.len()));
    }
    let xs: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    let slope = bench::loglog_slope(&xs, &ys);
    let times: Vec<String> = means
        .iter()
        .map(|(n, t)| format!("N={n}: {t:.4}s"))
        .collect();
    let msg = format!("slope {slope:.2} (need [1.5, 2.5]); {}", times.join(", "));
    if (1.5..=2.5).contains(&slope) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let outcomes = [
        run(1, 1, analytic_oracle),
        run(2, 30, oracle_certification),
        run(3, 5, contraction_property),
        run(4, 60, gradient_correctness),
        run(5, 60, convex_rate),
        run(6, 120, nonconvex_residual),
        run(7, 300, stationarity),
        run(8, 60, hessian_sandwich),
        run(9, 60, invariances),
        run(10, 120, debias_nullity),
        run(11, 600, quadratic_scaling),
    ];
    let failed: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    println!(
        "acceptance: {}/{} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
