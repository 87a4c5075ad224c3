//! The variational objective `Phi(A) = 32 |A|_F^2 + OT_{A,eps}(mu0, mu1)`.
//!
//! For centered marginals the quadratic EGW cost splits as `S1 + S2`, where
//! `S1` depends only on the marginals and `S2 = min_{|A|_F <= M/2} Phi(A)`.
//! `Phi` is evaluated through an entropic OT problem with cost
//! `c_A(x, y) = -4 |x|^2 |y|^2 - 32 x^T A y`, solved by certified Sinkhorn.

mod hessian;

pub use hessian::{
    hessian_matrix, hessian_quadratic_form, high_precision_plan, max_cross_variance,
    HSystemSolution,
};

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{EgwError, Result};
use crate::measures::{DiscreteMeasure, Moments};
use crate::sinkhorn::{self, Contraction, Coupling, Kernel, OracleCertificate};
use crate::solvers::{self, SolveConfig};

/// Plan entries below this are treated as exact zeros in the entropy term.
const KL_FLOOR: f64 = 1e-300;

/// Default slack added to `sqrt(M2(mu0) M2(mu1))` when choosing the domain radius.
pub const DEFAULT_M_SLACK: f64 = 1e-5;

/// `d0 x d1` auxiliary matrix. Serialized as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct AuxMatrix(pub Array2<f64>);

impl TryFrom<Vec<Vec<f64>>> for AuxMatrix {
    type Error = EgwError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        AuxMatrix::from_rows(&rows)
    }
}

impl From<AuxMatrix> for Vec<Vec<f64>> {
    fn from(a: AuxMatrix) -> Self {
        a.to_rows()
    }
}

impl AuxMatrix {
    pub fn zeros(d0: usize, d1: usize) -> Self {
        Self(Array2::zeros((d0, d1)))
    }

    pub fn from_elem(d0: usize, d1: usize, v: f64) -> Self {
        Self(Array2::from_elem((d0, d1), v))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d0 = rows.len();
        let d1 = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d1) {
            return Err(EgwError::DimensionMismatch("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(Self(
            Array2::from_shape_vec((d0, d1), flat)
                .map_err(|e| EgwError::DimensionMismatch(e.to_string()))?,
        ))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.outer_iter().map(|r| r.to_vec()).collect()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &AuxMatrix) -> f64 {
        Zip::from(&self.0)
            .and(&other.0)
            .fold(0.0, |s, a, b| s + a * b)
    }

    /// `self + t * other`
    pub fn axpy(&self, t: f64, other: &AuxMatrix) -> AuxMatrix {
        AuxMatrix(&self.0 + &(&other.0 * t))
    }

    pub fn scaled(&self, t: f64) -> AuxMatrix {
        AuxMatrix(&self.0 * t)
    }

    /// Nearest point of the ball `|A|_F <= m / 2`.
    pub fn project(&self, m: f64) -> AuxMatrix {
        project_dm(self, m)
    }
}

/// Euclidean projection onto `D_M = {|A|_F <= M/2}`: `min(1, M / (2|A|_F)) A`,
/// with `min(1, M/0) = 1`.
pub fn project_dm(a: &AuxMatrix, m: f64) -> AuxMatrix {
    let norm = a.norm();
    if norm == 0.0 || norm <= m / 2.0 {
        a.clone()
    } else {
        a.scaled(m / (2.0 * norm))
    }
}

/// Cost matrix `C_ij = -4 |x_i|^2 |y_j|^2 - 32 x_i^T A y_j`.
pub fn cost_matrix(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    a: &AuxMatrix,
) -> Result<Array2<f64>> {
    let (d0, d1) = a.dim();
    if d0 != mu0.dim() || d1 != mu1.dim() {
        return Err(EgwError::DimensionMismatch(format!(
            "A is {d0}x{d1} but the measures live in R^{} and R^{}",
            mu0.dim(),
            mu1.dim()
        )));
    }
    let nx = mu0.sq_norms();
    let ny = mu1.sq_norms();
    // X A Y^T
    let xay = mu0.points().dot(&a.0).dot(&mu1.points().t());
    let mut c = xay * -32.0;
    Zip::indexed(&mut c).for_each(|(i, j), cij| *cij -= 4.0 * nx[i] * ny[j]);
    Ok(c)
}

/// Marginal-only part of the decomposition:
/// `E|x - x'|^4 + E|y - y'|^4 - 4 E|x|^2 E|y|^2`, as exact double sums.
pub fn s1_constant(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> f64 {
    fn quartic_spread(mu: &DiscreteMeasure) -> f64 {
        let p = mu.points();
        let w = mu.weights();
        let mut total = 0.0;
        for i in 0..mu.len() {
            let mut row = 0.0;
            for k in 0..mu.len() {
                let d2: f64 = p
                    .row(i)
                    .iter()
                    .zip(p.row(k).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                row += w[k] * d2 * d2;
            }
            total += w[i] * row;
        }
        total
    }
    let nx = mu0.sq_norms();
    let ny = mu1.sq_norms();
    let mut cross = 0.0;
    for (i, &wi) in mu0.weights().iter().enumerate() {
        for (j, &wj) in mu1.weights().iter().enumerate() {
            cross += wi * wj * nx[i] * ny[j];
        }
    }
    quartic_spread(mu0) + quartic_spread(mu1) - 4.0 * cross
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    /// `sqrt(M4(mu0) M4(mu1)) < eps / 16`: `Phi` is strictly convex.
    CertifiedConvex,
    Unknown,
}

/// Measures, regularization and the constants every bound depends on.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mu0: DiscreteMeasure,
    pub mu1: DiscreteMeasure,
    pub eps: f64,
    /// Domain parameter: feasible set is `|A|_F <= m / 2`.
    pub m: f64,
    /// Smoothness constant in use.
    pub l: f64,
    /// Per-call oracle radius `||Pi~ - Pi||_inf`; `None` lets the solver derive it.
    pub delta_oracle: Option<f64>,
    pub convexity: Convexity,
    /// Report the decomposition even when the marginals are not centered.
    pub allow_uncentered: bool,
    pub moments0: Moments,
    pub moments1: Moments,
    /// `sum_ij |x_i| |y_j|`
    pub norm_product_sum: f64,
}

impl ProblemSpec {
    /// Fill in `M = sqrt(M2 M2) + 1e-5`, the theoretical `L`, and the convexity flag.
    pub fn new(mu0: DiscreteMeasure, mu1: DiscreteMeasure, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EgwError::InvalidArgument(format!(
                "eps must be positive, got {eps}"
            )));
        }
        let moments0 = mu0.moments();
        let moments1 = mu1.moments();
        let m = (moments0.m2 * moments1.m2).sqrt() + DEFAULT_M_SLACK;
        let norm_product_sum =
            mu0.sq_norms().mapv(f64::sqrt).sum() * mu1.sq_norms().mapv(f64::sqrt).sum();
        let mut spec = Self {
            mu0,
            mu1,
            eps,
            m,
            l: 0.0,
            delta_oracle: None,
            convexity: Convexity::Unknown,
            allow_uncentered: false,
            moments0,
            moments1,
            norm_product_sum,
        };
        spec.l = spec.l_theoretical();
        spec.convexity = if spec.m4_product() < eps / 16.0 {
            Convexity::CertifiedConvex
        } else {
            Convexity::Unknown
        };
        Ok(spec)
    }

    /// Override the domain parameter; must be at least `sqrt(M2(mu0) M2(mu1))`.
    pub fn with_m(mut self, m: f64) -> Result<Self> {
        if !(m >= self.m_min()) {
            return Err(EgwError::InvalidArgument(format!(
                "M = {m} is below sqrt(M2 M2) = {}",
                self.m_min()
            )));
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_l(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(EgwError::InvalidArgument(format!(
                "L must be positive, got {l}"
            )));
        }
        self.l = l;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta_oracle = Some(delta);
        self
    }

    pub fn allowing_uncentered(mut self, allow: bool) -> Self {
        self.allow_uncentered = allow;
        self
    }

    pub fn d0(&self) -> usize {
        self.mu0.dim()
    }

    pub fn d1(&self) -> usize {
        self.mu1.dim()
    }

    /// `sqrt(M2(mu0) M2(mu1))`
    pub fn m_min(&self) -> f64 {
        (self.moments0.m2 * self.moments1.m2).sqrt()
    }

    /// `sqrt(M4(mu0) M4(mu1))`
    pub fn m4_product(&self) -> f64 {
        (self.moments0.m4 * self.moments1.m4).sqrt()
    }

    /// Smoothness constant of the OT part, `32^2 eps^-1 sqrt(M4 M4)`.
    pub fn l_prime(&self) -> f64 {
        1024.0 * self.m4_product() / self.eps
    }

    /// Weak-convexity parameter bound `32^2 eps^-1 sqrt(M4 M4) - 64`
    /// (negative values mean strong convexity).
    pub fn weak_convexity(&self) -> f64 {
        self.l_prime() - 64.0
    }

    /// Lower bound on the smallest Hessian eigenvalue, `64 - L'`.
    pub fn hessian_lower_bound(&self) -> f64 {
        64.0 - self.l_prime()
    }

    /// `64 v (32^2 eps^-1 sqrt(M4 M4) - 64)`
    pub fn l_theoretical(&self) -> f64 {
        64f64.max(self.weak_convexity())
    }

    /// Smallest eps certified convex: `16 sqrt(M4 M4)` (strict inequality needed).
    pub fn convexity_threshold(&self) -> f64 {
        16.0 * self.m4_product()
    }

    pub fn is_certified_convex(&self) -> bool {
        self.convexity == Convexity::CertifiedConvex
    }

    /// Gradient-level error `delta' = 32 M delta sum_ij |x_i||y_j|` for an oracle radius `delta`.
    pub fn delta_prime(&self, delta: f64) -> f64 {
        32.0 * self.m * delta * self.norm_product_sum
    }

    /// Oracle radius giving `delta' = target`.
    pub fn delta_for_delta_prime(&self, target: f64) -> f64 {
        let denom = 32.0 * self.m * self.norm_product_sum;
        if denom > 0.0 {
            target / denom
        } else {
            // Every gradient error vanishes when one marginal sits at the origin.
            1e-3
        }
    }

    pub fn is_centered(&self) -> bool {
        let tol = |mu: &DiscreteMeasure| {
            1e-10 * (1.0 + mu.points().iter().fold(0.0_f64, |m, x| m.max(x.abs())))
        };
        self.mu0.is_centered(tol(&self.mu0)) && self.mu1.is_centered(tol(&self.mu1))
    }

    pub fn kernel(&self, a: &AuxMatrix) -> Result<Kernel> {
        sinkhorn::build_kernel(&self.mu0, &self.mu1, a, self.eps)
    }
}

/// Smallest column-violation threshold Sinkhorn is asked to reach; below it
/// rounding in the marginal sums dominates.
pub fn gamma_floor(b: &Array1<f64>) -> f64 {
    16.0 * f64::EPSILON * b.dot(b).sqrt()
}

/// Objective of the inner problem plus the Frobenius term:
/// `32 |A|^2 + sum C Pi + eps KL(Pi || a b^T)` with `0 log 0 = 0`.
pub fn objective_value(
    spec: &ProblemSpec,
    a: &AuxMatrix,
    cost: &Array2<f64>,
    plan: &Array2<f64>,
) -> f64 {
    let wa = spec.mu0.weights();
    let wb = spec.mu1.weights();
    let mut transport = 0.0;
    let mut kl = 0.0;
    Zip::indexed(plan).and(cost).for_each(|(i, j), &p, &c| {
        if p > KL_FLOOR {
            transport += c * p;
            kl += p * (p / (wa[i] * wb[j])).ln();
        }
    });
    32.0 * a.norm().powi(2) + transport + spec.eps * kl
}

/// Inexact gradient `64 A - 32 sum_ij Pi_ij x_i y_j^T`.
pub fn gradient(spec: &ProblemSpec, a: &AuxMatrix, plan: &Array2<f64>) -> AuxMatrix {
    // X^T Pi Y
    let cross = spec.mu0.points().t().dot(&plan.dot(spec.mu1.points()));
    AuxMatrix(&a.0 * 64.0 - &(cross * 32.0))
}

/// `sum_ij Pi_ij x_i y_j^T / 2`, the fixed-point map whose fixed points are the
/// stationary points of `Phi`.
pub fn half_cross_moment(spec: &ProblemSpec, plan: &Array2<f64>) -> AuxMatrix {
    AuxMatrix(spec.mu0.points().t().dot(&plan.dot(spec.mu1.points())) * 0.5)
}

/// One certified oracle call.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub coupling: Coupling,
    pub cert: OracleCertificate,
    pub kernel: Kernel,
    pub gradient: AuxMatrix,
    /// Column-violation threshold that was requested.
    pub gamma: f64,
}

impl OracleOutput {
    pub fn cost(&self) -> Array2<f64> {
        self.kernel.log_matrix.mapv(|l| -l * self.kernel.eps)
    }

    pub fn value(&self, spec: &ProblemSpec, a: &AuxMatrix) -> f64 {
        objective_value(spec, a, &self.cost(), &self.coupling.plan)
    }
}

/// Stateful gradient oracle: remembers the last Sinkhorn scaling for warm starts.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    spec: &'a ProblemSpec,
    pub k_max: usize,
    pub warm_start: bool,
    /// Lower limit on the requested column violation, on top of the rounding floor.
    pub min_gamma: f64,
    last_u: Option<Array1<f64>>,
    pub total_sinkhorn_iters: usize,
    pub calls: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self {
            spec,
            k_max: 1_000_000,
            warm_start: true,
            min_gamma: 0.0,
            last_u: None,
            total_sinkhorn_iters: 0,
            calls: 0,
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn seed_scaling(&mut self, u: Array1<f64>) {
        self.last_u = Some(u);
    }

    /// Plan at `a` with `||Pi~ - Pi*||_inf <= delta` (the radius is converted
    /// to the Hilbert-metric target `log(1 + delta)`), and the gradient there.
    pub fn evaluate(&mut self, a: &AuxMatrix, delta: f64) -> Result<OracleOutput> {
        let kernel = self.spec.kernel(a)?;
        let contraction = Contraction::of(&kernel);
        let b = self.spec.mu1.weights();
        let target = sinkhorn::tolerance_for(delta.ln_1p(), &contraction, b)?;
        let gamma = target.max(gamma_floor(b)).max(self.min_gamma);
        let u0 = if self.warm_start {
            self.last_u.as_ref()
        } else {
            None
        };
        let (coupling, cert) = sinkhorn::sinkhorn_with(
            &kernel,
            self.spec.mu0.weights(),
            b,
            gamma,
            self.k_max,
            u0,
            contraction,
        )?;
        self.total_sinkhorn_iters += cert.iterations;
        self.calls += 1;
        if self.warm_start {
            self.last_u = Some(coupling.u.clone());
        }
        let gradient = gradient(self.spec, a, &coupling.plan);
        Ok(OracleOutput {
            coupling,
            cert,
            kernel,
            gradient,
            gamma,
        })
    }
}

/// `Phi(A)` with a certified plan of entrywise accuracy `delta`.
#[derive(Debug, Clone)]
pub struct PhiEval {
    pub value: f64,
    pub coupling: Coupling,
    pub cert: OracleCertificate,
}

pub fn phi(spec: &ProblemSpec, a: &AuxMatrix, delta: f64) -> Result<PhiEval> {
    let mut oracle = Oracle::new(spec);
    oracle.warm_start = false;
    let out = oracle.evaluate(a, delta)?;
    Ok(PhiEval {
        value: out.value(spec, a),
        coupling: out.coupling,
        cert: out.cert,
    })
}

/// Assembled `S_eps = S1 + 32|A|^2 + OT objective of the plan`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgwValue {
    pub s1: f64,
    pub s2: f64,
    pub total: f64,
    /// False when the marginals were not centered (decomposition not valid).
    pub decomposition_valid: bool,
}

pub fn egw_value(spec: &ProblemSpec, a: &AuxMatrix, plan: &Array2<f64>) -> Result<EgwValue> {
    let centered = spec.is_centered();
    if !centered && !spec.allow_uncentered {
        return Err(EgwError::NotCentered);
    }
    let cost = cost_matrix(&spec.mu0, &spec.mu1, a)?;
    let s1 = s1_constant(&spec.mu0, &spec.mu1);
    let s2 = objective_value(spec, a, &cost, plan);
    Ok(EgwValue {
        s1,
        s2,
        total: s1 + s2,
        decomposition_valid: centered,
    })
}

/// `S(mu0, mu1) - (S(mu0, mu0) + S(mu1, mu1)) / 2` and its three parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebiasedEgw {
    pub value: f64,
    pub cross: f64,
    pub self0: f64,
    pub self1: f64,
}

/// Debiased EGW. Each measure is centered first; all three problems use the
/// same `eps` and solver settings.
pub fn debiased_egw(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    eps: f64,
    cfg: &SolveConfig,
) -> Result<DebiasedEgw> {
    let c0 = mu0.center();
    let c1 = mu1.center();
    let solve = |x: &DiscreteMeasure, y: &DiscreteMeasure, stage: &'static str| -> Result<f64> {
        let spec = ProblemSpec::new(x.clone(), y.clone(), eps).map_err(|e| e.in_stage(stage))?;
        let report = solvers::solve(&spec, cfg).map_err(|e| e.in_stage(stage))?;
        if report.status == solvers::SolveStatus::Aborted {
            return Err(EgwError::InvalidArgument(
                report.message.unwrap_or_else(|| "aborted".into()),
            )
            .in_stage(stage));
        }
        report
            .egw
            .map(|v| v.total)
            .ok_or_else(|| EgwError::NotCentered.in_stage(stage))
    };
    let cross = solve(&c0, &c1, "cross")?;
    let self0 = solve(&c0, &c0, "first self-term")?;
    let self1 = solve(&c1, &c1, "second self-term")?;
    Ok(DebiasedEgw {
        value: cross - (0.5 * self0 + 0.5 * self1),
        cross,
        self0,
        self1,
    })
}
