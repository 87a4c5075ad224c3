//! Second-order information for `Phi` at a point `A`.
//!
//! The Hessian quadratic form needs a pair of dual perturbations `(h0, h1)`
//! solving a linear system built from the plan. The system is singular
//! along `(1, -1)`; it is pinned with the extra row `a^T h0 = 0` and solved
//! in the least-squares sense.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, Zip};

use super::{gamma_floor, AuxMatrix, ProblemSpec};
use crate::error::{EgwError, Result};
use crate::measures::DiscreteMeasure;
use crate::sinkhorn::{self, Coupling, OracleCertificate};

/// Residual above which the h-system is reported as ill-conditioned.
const H_RESIDUAL_TOL: f64 = 1e-8;

/// Largest column violation tolerated in a plan fed to the Hessian routines.
const PLAN_MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HSystemSolution {
    pub h0: Array1<f64>,
    pub h1: Array1<f64>,
    /// `||M h - rhs||_inf`
    pub residual: f64,
}

/// Plan at `A` computed to the floating-point floor of the column violation.
pub fn high_precision_plan(
    spec: &ProblemSpec,
    a: &AuxMatrix,
) -> Result<(Coupling, OracleCertificate)> {
    let kernel = spec.kernel(a)?;
    let b = spec.mu1.weights();
    let gamma = gamma_floor(b).max(1e-15);
    sinkhorn::sinkhorn(&kernel, spec.mu0.weights(), b, gamma, 5_000_000)
}

/// `S_ij = x_i^T C y_j`
fn bilinear_scores(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, c: &AuxMatrix) -> Array2<f64> {
    mu0.points().dot(&c.0).dot(&mu1.points().t())
}

fn check_inputs(spec: &ProblemSpec, c: &AuxMatrix, plan: &Array2<f64>) -> Result<()> {
    if c.dim() != (spec.d0(), spec.d1()) {
        return Err(EgwError::DimensionMismatch(format!(
            "direction is {:?}, expected {:?}",
            c.dim(),
            (spec.d0(), spec.d1())
        )));
    }
    if plan.dim() != (spec.mu0.len(), spec.mu1.len()) {
        return Err(EgwError::DimensionMismatch("plan shape".into()));
    }
    let cols = plan.sum_axis(ndarray::Axis(0));
    let violation = (&cols - spec.mu1.weights()).mapv(|x| x * x).sum().sqrt();
    if violation > PLAN_MARGINAL_TOL {
        return Err(EgwError::InvalidArgument(format!(
            "plan column marginal off by {violation:e}; Hessian needs <= {PLAN_MARGINAL_TOL:e}"
        )));
    }
    Ok(())
}

struct HSystem {
    matrix: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl HSystem {
    fn new(spec: &ProblemSpec, plan: &Array2<f64>) -> Self {
        let (n0, n1) = plan.dim();
        let a = spec.mu0.weights();
        let b = spec.mu1.weights();
        let mut m = DMatrix::zeros(n0 + n1 + 1, n0 + n1);
        for i in 0..n0 {
            m[(i, i)] = a[i];
            m[(n0 + n1, i)] = a[i];
            for j in 0..n1 {
                m[(i, n0 + j)] = plan[[i, j]];
                m[(n0 + j, i)] = plan[[i, j]];
            }
        }
        for j in 0..n1 {
            m[(n0 + j, n0 + j)] = b[j];
        }
        let svd = m.clone().svd(true, true);
        Self { matrix: m, svd }
    }

    fn solve(&self, plan: &Array2<f64>, scores: &Array2<f64>) -> Result<HSystemSolution> {
        let (n0, n1) = plan.dim();
        let weighted = plan * scores;
        let mut rhs = DVector::zeros(n0 + n1 + 1);
        for (i, r) in weighted.sum_axis(ndarray::Axis(1)).iter().enumerate() {
            rhs[i] = 32.0 * r;
        }
        for (j, c) in weighted.sum_axis(ndarray::Axis(0)).iter().enumerate() {
            rhs[n0 + j] = 32.0 * c;
        }
        let scale = self.svd.singular_values.max();
        let h = self
            .svd
            .solve(&rhs, scale * 1e-13)
            .map_err(|e| EgwError::InvalidArgument(e.to_string()))?;
        let residual = (&self.matrix * &h - &rhs).amax();
        if !(residual <= H_RESIDUAL_TOL) {
            return Err(EgwError::IllConditioned(residual));
        }
        Ok(HSystemSolution {
            h0: Array1::from_iter(h.iter().take(n0).copied()),
            h1: Array1::from_iter(h.iter().skip(n0).copied()),
            residual,
        })
    }
}

/// `sum_ij Pi_ij s_ij (h0_i + h1_j - 32 t_ij)`
fn cross_term(plan: &Array2<f64>, s: &Array2<f64>, h: &HSystemSolution, t: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    Zip::indexed(plan)
        .and(s)
        .and(t)
        .for_each(|(i, j), &p, &sij, &tij| {
            total += p * sij * (h.h0[i] + h.h1[j] - 32.0 * tij);
        });
    total
}

/// `D^2 Phi(A)(C, C) = 64 |C|^2 + (32/eps) sum Pi_ij s_ij (h0_i + h1_j - 32 s_ij)`
/// with `s_ij = x_i^T C y_j`. `plan` must be the entropic plan at `A` with
/// column violation at most `1e-12`.
pub fn hessian_quadratic_form(
    spec: &ProblemSpec,
    c: &AuxMatrix,
    plan: &Array2<f64>,
) -> Result<(f64, HSystemSolution)> {
    check_inputs(spec, c, plan)?;
    let system = HSystem::new(spec, plan);
    let s = bilinear_scores(&spec.mu0, &spec.mu1, c);
    let h = system.solve(plan, &s)?;
    let value = 64.0 * c.norm().powi(2) + 32.0 / spec.eps * cross_term(plan, &s, &h, &s);
    Ok((value, h))
}

/// Full `d0 d1 x d0 d1` Hessian in the row-major basis `E_pq`, symmetrized.
pub fn hessian_matrix(spec: &ProblemSpec, plan: &Array2<f64>) -> Result<Array2<f64>> {
    let (d0, d1) = (spec.d0(), spec.d1());
    check_inputs(spec, &AuxMatrix::zeros(d0, d1), plan)?;
    let system = HSystem::new(spec, plan);
    let n = d0 * d1;
    let mut scores = Vec::with_capacity(n);
    let mut sols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = AuxMatrix::zeros(d0, d1);
        e.0[[k / d1, k % d1]] = 1.0;
        let s = bilinear_scores(&spec.mu0, &spec.mu1, &e);
        sols.push(system.solve(plan, &s)?);
        scores.push(s);
    }
    let mut hess = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            let diag = if p == q { 64.0 } else { 0.0 };
            hess[[p, q]] =
                diag + 32.0 / spec.eps * cross_term(plan, &scores[p], &sols[q], &scores[q]);
        }
    }
    let sym = (&hess + &hess.t()) * 0.5;
    Ok(sym)
}

/// Largest eigenvalue of the covariance of `vec(x y^T)` under `plan`, i.e.
/// `sup_{|C|_F = 1} Var_plan(x^T C y)`.
pub fn max_cross_variance(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    plan: &Array2<f64>,
) -> Result<f64> {
    let (d0, d1) = (mu0.dim(), mu1.dim());
    if plan.dim() != (mu0.len(), mu1.len()) {
        return Err(EgwError::DimensionMismatch("plan shape".into()));
    }
    let n = d0 * d1;
    let mut mean = DVector::<f64>::zeros(n);
    let mut second = DMatrix::<f64>::zeros(n, n);
    let mut z = DVector::<f64>::zeros(n);
    for ((i, j), &p) in plan.indexed_iter() {
        if p == 0.0 {
            continue;
        }
        let x = mu0.point(i);
        let y = mu1.point(j);
        for a in 0..d0 {
            for b in 0..d1 {
                z[a * d1 + b] = x[a] * y[b];
            }
        }
        mean.axpy(p, &z, 1.0);
        second.ger(p, &z, &z, 1.0);
    }
    let cov = second - &mean * mean.transpose();
    let eig = SymmetricEigen::new(cov);
    Ok(eig.eigenvalues.max())
}
