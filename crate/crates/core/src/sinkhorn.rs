//! Sinkhorn iterations for entropic optimal transport, with certified error.
//!
//! The scaling iteration `v <- b / K^T u`, `u <- a / K v` is run from
//! `u_0 = 1/N0`. After every full update the row marginal of
//! `diag(u) K diag(v)` equals `a` (up to rounding), so only the column
//! marginal is monitored. The distance to the exact entropic plan is bounded in
//! the product Hilbert metric through the Birkhoff contraction coefficient of
//! the kernel, which turns the observed column violation into an entrywise
//! bound `||Pi - Pi*||_inf <= exp(delta_H) - 1`.

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::egw::{cost_matrix, AuxMatrix};
use crate::error::{EgwError, Result};
use crate::measures::DiscreteMeasure;

/// Above this many kernel entries the contraction coefficient is bounded
/// instead of computed exactly.
pub const EXACT_ETA_MAX_ENTRIES: usize = 1024;

/// Once the column violation is below `STALL_LEVEL`, the iteration stops if
/// it improved by less than a factor `STALL_RATIO` over the last
/// `STALL_WINDOW` updates (rounding floor, or a contraction so weak that the
/// requested threshold is out of practical reach).
const STALL_LEVEL: f64 = 1e-8;
const STALL_WINDOW: usize = 50;
const STALL_RATIO: f64 = 0.999;

/// Gibbs kernel `K_ij = exp(-C_ij / eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub matrix: Array2<f64>,
    /// `-C / eps`, kept to avoid recomputing logarithms.
    pub log_matrix: Array2<f64>,
    /// `max |C_ij|`.
    pub cost_sup: f64,
    pub eps: f64,
}

impl Kernel {
    pub fn from_cost(cost: &Array2<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EgwError::InvalidArgument(format!(
                "eps must be positive, got {eps}"
            )));
        }
        let log_matrix = cost.mapv(|c| -c / eps);
        let matrix = log_matrix.mapv(f64::exp);
        if matrix.iter().any(|k| !k.is_finite()) {
            return Err(EgwError::KernelOverflow);
        }
        if matrix.iter().any(|&k| k == 0.0) {
            return Err(EgwError::KernelUnderflow("kernel entry"));
        }
        let cost_sup = cost.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        Ok(Self {
            matrix,
            log_matrix,
            cost_sup,
            eps,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.dim()
    }
}

/// Kernel for the cost `c_A(x, y) = -4|x|^2|y|^2 - 32 x^T A y`.
pub fn build_kernel(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    a: &AuxMatrix,
    eps: f64,
) -> Result<Kernel> {
    Kernel::from_cost(&cost_matrix(mu0, mu1, a)?, eps)
}

/// Hilbert projective distance between positive vectors,
/// `max_i log(x_i/y_i) - min_i log(x_i/y_i)`.
pub fn hilbert_distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(EgwError::DimensionMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        if !(xi > 0.0 && yi > 0.0) {
            return Err(EgwError::InvalidArgument(
                "Hilbert distance needs strictly positive entries".into(),
            ));
        }
        let r = (xi / yi).ln();
        hi = hi.max(r);
        lo = lo.min(r);
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(hi - lo)
}

/// `log eta(K)`, where `eta` is the largest cross ratio `K_ik K_jl / (K_jk K_il)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub log_eta: f64,
    /// False when `log_eta` is an upper bound rather than the exact value.
    pub exact: bool,
}

impl Contraction {
    pub fn of(kernel: &Kernel) -> Self {
        let (n0, n1) = kernel.shape();
        if n0 * n1 <= EXACT_ETA_MAX_ENTRIES {
            Self {
                log_eta: exact_log_eta(&kernel.log_matrix),
                exact: true,
            }
        } else {
            Self {
                log_eta: bounded_log_eta(&kernel.log_matrix),
                exact: false,
            }
        }
    }

    /// `(sqrt(eta) - 1) / (sqrt(eta) + 1)`.
    pub fn lambda(&self) -> f64 {
        (self.log_eta / 4.0).tanh()
    }

    /// `1 - lambda`, accurate when lambda is close to one.
    pub fn one_minus_lambda(&self) -> f64 {
        2.0 / ((self.log_eta / 2.0).exp() + 1.0)
    }
}

/// Exact over all index quadruples: for each pair of rows the cross ratio is
/// maximized by the range of their log-difference across columns.
fn exact_log_eta(log_k: &Array2<f64>) -> f64 {
    let n0 = log_k.nrows();
    let mut best = 0.0_f64;
    for i in 0..n0 {
        let ri = log_k.row(i);
        for j in (i + 1)..n0 {
            let rj = log_k.row(j);
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for (a, b) in ri.iter().zip(rj.iter()) {
                let d = a - b;
                hi = hi.max(d);
                lo = lo.min(d);
            }
            best = best.max(hi - lo);
        }
    }
    best
}

/// `log eta <= 2 min(max column range, max row range)` of `log K`.
fn bounded_log_eta(log_k: &Array2<f64>) -> f64 {
    let (n0, n1) = log_k.dim();
    let mut col_hi = vec![f64::NEG_INFINITY; n1];
    let mut col_lo = vec![f64::INFINITY; n1];
    let mut row_range = 0.0_f64;
    for i in 0..n0 {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for (j, &v) in log_k.row(i).iter().enumerate() {
            hi = hi.max(v);
            lo = lo.min(v);
            col_hi[j] = col_hi[j].max(v);
            col_lo[j] = col_lo[j].min(v);
        }
        row_range = row_range.max(hi - lo);
    }
    let col_range = col_hi
        .iter()
        .zip(&col_lo)
        .fold(0.0_f64, |m, (h, l)| m.max(h - l));
    2.0 * row_range.min(col_range)
}

/// Birkhoff contraction coefficient `lambda(K)` in `[0, 1)`.
pub fn contraction_coefficient(kernel: &Kernel) -> f64 {
    Contraction::of(kernel).lambda()
}

/// Scaled plan `diag(u) K diag(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: Array2<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl Coupling {
    pub fn row_sums(&self) -> Array1<f64> {
        self.plan.sum_axis(ndarray::Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.plan.sum_axis(ndarray::Axis(0))
    }

    /// The independent coupling `a b^T` (no scalings attached).
    pub fn product(a: &Array1<f64>, b: &Array1<f64>) -> Self {
        let plan = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        Self {
            plan,
            u: a.clone(),
            v: b.clone(),
        }
    }
}

/// Metadata certifying a Sinkhorn output as an approximate entropic plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCertificate {
    /// Bound on the product Hilbert distance to the exact plan.
    pub delta_hilbert: f64,
    /// `exp(delta_hilbert) - 1`, bound on `||Pi - Pi*||_inf`. Both bounds
    /// saturate at `f64::MAX`.
    pub delta_sup: f64,
    pub iterations: usize,
    pub lambda_k: f64,
    /// `||Pi^T 1 - b||_2`.
    pub marginal_violation: f64,
    /// Stopping threshold reached before `k_max`.
    pub converged: bool,
    /// Stopped early because the violation sat at the rounding floor
    /// without improving.
    #[serde(default)]
    pub stalled: bool,
    /// False for outputs of the log-domain variant.
    pub certified: bool,
    /// `lambda_k` is exact (otherwise an upper bound).
    pub lambda_exact: bool,
    /// `d_H(Pi^1^T 1, b)` after the first full update.
    pub first_iterate_gap: f64,
}

/// Bound on the distance in the product Hilbert metric from the observed
/// column marginal `w`:
/// `(1/w[i_lo] + 1/b[i_hi]) / (1 - lambda) * ||w - b||_2`, where `i_hi`, `i_lo`
/// are the (lowest-index) argmax and argmin of `w / b`. The violation is
/// floored at `EPSILON * ||b||_2`.
pub fn marginal_certificate(w: &Array1<f64>, b: &Array1<f64>, one_minus_lambda: f64) -> f64 {
    let mut i_hi = 0;
    let mut i_lo = 0;
    for i in 1..w.len() {
        let r = w[i] / b[i];
        if r > w[i_hi] / b[i_hi] {
            i_hi = i;
        }
        if r < w[i_lo] / b[i_lo] {
            i_lo = i;
        }
    }
    // A zero observed violation still carries rounding error.
    let floor = f64::EPSILON * b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let viol = l2_distance(w, b).max(floor);
    ((1.0 / w[i_lo] + 1.0 / b[i_hi]) * viol / one_minus_lambda).min(f64::MAX)
}

fn l2_distance(x: &Array1<f64>, y: &Array1<f64>) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn safe_div(num: &Array1<f64>, den: &Array1<f64>, what: &'static str) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(num.len());
    for ((o, &n), &d) in out.iter_mut().zip(num.iter()).zip(den.iter()) {
        if d == 0.0 || !d.is_finite() {
            return Err(EgwError::KernelUnderflow(what));
        }
        *o = n / d;
    }
    Ok(out)
}

/// One Sinkhorn run, exposed step by step.
#[derive(Debug, Clone)]
pub struct SinkhornState<'a> {
    kernel: &'a Kernel,
    a: &'a Array1<f64>,
    b: &'a Array1<f64>,
    u: Array1<f64>,
    v: Array1<f64>,
    /// `K^T u` for the current `u`.
    ktu: Array1<f64>,
    iterations: usize,
}

impl<'a> SinkhornState<'a> {
    /// Start from `u_0` (default `1/N0`).
    pub fn new(
        kernel: &'a Kernel,
        a: &'a Array1<f64>,
        b: &'a Array1<f64>,
        u0: Option<&Array1<f64>>,
    ) -> Result<Self> {
        let (n0, n1) = kernel.shape();
        if a.len() != n0 || b.len() != n1 {
            return Err(EgwError::DimensionMismatch(format!(
                "kernel is {n0}x{n1}, marginals have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let u = match u0 {
            Some(u) if u.len() == n0 && u.iter().all(|x| *x > 0.0 && x.is_finite()) => u.clone(),
            _ => Array1::from_elem(n0, 1.0 / n0 as f64),
        };
        let ktu = kernel.matrix.t().dot(&u);
        Ok(Self {
            kernel,
            a,
            b,
            u,
            v: Array1::zeros(n1),
            ktu,
            iterations: 0,
        })
    }

    /// `v <- b / K^T u`, then `u <- a / K v`.
    pub fn step(&mut self) -> Result<()> {
        self.v = safe_div(self.b, &self.ktu, "column")?;
        let kv = self.kernel.matrix.dot(&self.v);
        self.u = safe_div(self.a, &kv, "row")?;
        self.ktu = self.kernel.matrix.t().dot(&self.u);
        self.iterations += 1;
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn u(&self) -> &Array1<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array1<f64> {
        &self.v
    }

    /// `Pi^T 1 = v * K^T u`.
    pub fn column_marginal(&self) -> Array1<f64> {
        &self.v * &self.ktu
    }

    pub fn violation(&self) -> f64 {
        l2_distance(&self.column_marginal(), self.b)
    }

    pub fn coupling(&self) -> Coupling {
        let mut plan = self.kernel.matrix.clone();
        Zip::from(plan.rows_mut())
            .and(&self.u)
            .for_each(|mut row, &ui| {
                Zip::from(&mut row)
                    .and(&self.v)
                    .for_each(|p, &vj| *p *= ui * vj);
            });
        Coupling {
            plan,
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

/// Run Sinkhorn until `||Pi^T 1 - b||_2 < gamma` or `k_max` updates.
pub fn sinkhorn(
    kernel: &Kernel,
    a: &Array1<f64>,
    b: &Array1<f64>,
    gamma: f64,
    k_max: usize,
) -> Result<(Coupling, OracleCertificate)> {
    sinkhorn_from(kernel, a, b, gamma, k_max, None)
}

/// As [`sinkhorn`], starting from the scaling `u0` when given.
pub fn sinkhorn_from(
    kernel: &Kernel,
    a: &Array1<f64>,
    b: &Array1<f64>,
    gamma: f64,
    k_max: usize,
    u0: Option<&Array1<f64>>,
) -> Result<(Coupling, OracleCertificate)> {
    let contraction = Contraction::of(kernel);
    sinkhorn_with(kernel, a, b, gamma, k_max, u0, contraction)
}

pub(crate) fn sinkhorn_with(
    kernel: &Kernel,
    a: &Array1<f64>,
    b: &Array1<f64>,
    gamma: f64,
    k_max: usize,
    u0: Option<&Array1<f64>>,
    contraction: Contraction,
) -> Result<(Coupling, OracleCertificate)> {
    if !(gamma > 0.0) {
        return Err(EgwError::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let mut state = SinkhornState::new(kernel, a, b, u0)?;
    let mut first_gap = 0.0;
    let mut converged = false;
    let mut stalled = false;
    let mut history = [f64::INFINITY; STALL_WINDOW];
    loop {
        state.step()?;
        let w = state.column_marginal();
        if state.iterations() == 1 {
            first_gap = hilbert_distance(w.view(), b.view())?;
        }
        let violation = l2_distance(&w, b);
        if violation < gamma {
            converged = true;
            break;
        }
        let slot = &mut history[state.iterations() % STALL_WINDOW];
        if violation <= STALL_LEVEL && violation > STALL_RATIO * *slot {
            stalled = true;
            break;
        }
        *slot = violation;
        if state.iterations() >= k_max.max(1) {
            break;
        }
    }
    let w = state.column_marginal();
    let delta_hilbert = marginal_certificate(&w, b, contraction.one_minus_lambda());
    let cert = OracleCertificate {
        delta_hilbert,
        delta_sup: delta_hilbert.exp_m1().min(f64::MAX),
        iterations: state.iterations(),
        lambda_k: contraction.lambda(),
        marginal_violation: l2_distance(&w, b),
        converged,
        stalled,
        certified: true,
        lambda_exact: contraction.exact,
        first_iterate_gap: first_gap,
    };
    Ok((state.coupling(), cert))
}

/// Stabilized Sinkhorn on `log u`, `log v`. Never underflows, but the
/// returned certificate is marked uncertified.
pub fn sinkhorn_log_domain(
    cost: &Array2<f64>,
    eps: f64,
    a: &Array1<f64>,
    b: &Array1<f64>,
    gamma: f64,
    k_max: usize,
) -> Result<(Coupling, OracleCertificate)> {
    let (n0, n1) = cost.dim();
    if a.len() != n0 || b.len() != n1 {
        return Err(EgwError::DimensionMismatch(format!(
            "cost is {n0}x{n1}, marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(eps > 0.0) || !(gamma > 0.0) {
        return Err(EgwError::InvalidArgument(
            "eps and gamma must be positive".into(),
        ));
    }
    let log_k = cost.mapv(|c| -c / eps);
    let log_a = a.mapv(f64::ln);
    let log_b = b.mapv(f64::ln);
    let mut log_u = Array1::from_elem(n0, -(n0 as f64).ln());
    let mut log_v: Array1<f64>;
    let col_lse = |log_u: &Array1<f64>| -> Array1<f64> {
        Array1::from_shape_fn(n1, |j| logsumexp((0..n0).map(|i| log_k[[i, j]] + log_u[i])))
    };
    let mut lse_cols = col_lse(&log_u);
    let mut iterations = 0;
    let mut first_gap = 0.0;
    let mut converged = false;
    let mut w;
    loop {
        log_v = &log_b - &lse_cols;
        for i in 0..n0 {
            let row = log_k.row(i);
            log_u[i] = log_a[i] - logsumexp(row.iter().zip(log_v.iter()).map(|(k, v)| k + v));
        }
        lse_cols = col_lse(&log_u);
        iterations += 1;
        w = (&log_v + &lse_cols).mapv(f64::exp);
        if iterations == 1 {
            first_gap = hilbert_distance(w.view(), b.view()).unwrap_or(f64::INFINITY);
        }
        if l2_distance(&w, b) < gamma {
            converged = true;
            break;
        }
        if iterations >= k_max.max(1) {
            break;
        }
    }
    let plan = Array2::from_shape_fn((n0, n1), |(i, j)| {
        (log_u[i] + log_k[[i, j]] + log_v[j]).exp()
    });
    let contraction = Contraction {
        log_eta: if n0 * n1 <= EXACT_ETA_MAX_ENTRIES {
            exact_log_eta(&log_k)
        } else {
            bounded_log_eta(&log_k)
        },
        exact: n0 * n1 <= EXACT_ETA_MAX_ENTRIES,
    };
    let delta_hilbert = marginal_certificate(&w, b, contraction.one_minus_lambda());
    let cert = OracleCertificate {
        delta_hilbert,
        delta_sup: delta_hilbert.exp_m1().min(f64::MAX),
        iterations,
        lambda_k: contraction.lambda(),
        marginal_violation: l2_distance(&w, b),
        converged,
        stalled: false,
        certified: false,
        lambda_exact: contraction.exact,
        first_iterate_gap: first_gap,
    };
    Ok((
        Coupling {
            plan,
            u: log_u.mapv(f64::exp),
            v: log_v.mapv(f64::exp),
        },
        cert,
    ))
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `2t / (t + 2 + sqrt(t^2 + 4))` with `t = delta (1 - lambda)`; algebraically
/// `(t + 2 - sqrt(t^2 + 4)) / 2`, written to avoid cancellation for small `t`.
pub fn alpha_bar(delta: f64, one_minus_lambda: f64) -> f64 {
    let t = delta * one_minus_lambda;
    2.0 * t / (t + 2.0 + (t * t + 4.0).sqrt())
}

/// Stopping threshold `gamma = alpha_bar * min(b)` guaranteeing a Hilbert
/// distance of at most `delta` to the exact plan once the column violation
/// drops below it.
pub fn oracle_tolerance_schedule(delta: f64, kernel: &Kernel, b: &Array1<f64>) -> Result<f64> {
    tolerance_for(delta, &Contraction::of(kernel), b)
}

pub fn tolerance_for(delta: f64, contraction: &Contraction, b: &Array1<f64>) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(EgwError::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let b_min = b.iter().cloned().fold(f64::INFINITY, f64::min);
    let oml = contraction.one_minus_lambda();
    let gamma = alpha_bar(delta, oml) * b_min;
    if !(gamma > 0.0) || !gamma.is_finite() {
        // Smallest delta whose threshold is still a normal positive float.
        let suggested = f64::MIN_POSITIVE / (oml * b_min).max(f64::MIN_POSITIVE) * 2.0;
        return Err(EgwError::ToleranceTooSmall { delta, suggested });
    }
    Ok(gamma)
}

/// A-priori bound on the number of updates needed to reach a Hilbert
/// distance `delta` to the exact plan: the minimum of the geometric-rate
/// bound (needs `first_gap = d_H(Pi^1^T 1, b)`) and the marginal-violation
/// bound `1 + R / gamma`.
pub fn max_iterations_bound(
    kernel: &Kernel,
    a: &Array1<f64>,
    b: &Array1<f64>,
    delta: f64,
    first_gap: f64,
) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(EgwError::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let contraction = Contraction::of(kernel);
    Ok(iteration_bound(
        kernel,
        a,
        b,
        delta,
        first_gap,
        &contraction,
    ))
}

pub(crate) fn iteration_bound(
    kernel: &Kernel,
    a: &Array1<f64>,
    b: &Array1<f64>,
    delta: f64,
    first_gap: f64,
    contraction: &Contraction,
) -> u64 {
    let lambda = contraction.lambda();
    let oml = contraction.one_minus_lambda();
    let b_min = b.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let ab_min = a_min.min(b_min);
    // R / 2 = cost_sup / eps - log(min a ^ b)
    let half_r = kernel.cost_sup / kernel.eps - ab_min.ln();
    let second = 1.0 + 2.0 * half_r / (alpha_bar(delta, oml) * b_min);

    let first = if lambda > 0.0 && first_gap > 0.0 {
        1.0 + (delta * oml / first_gap).ln() / (2.0 * lambda.ln())
    } else if first_gap == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let k = first.min(second).ceil().max(1.0);
    if k.is_finite() && k < u64::MAX as f64 {
        k as u64
    } else {
        u64::MAX
    }
}
