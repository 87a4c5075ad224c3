use super::{Algorithm, LMode, RunState, SolveConfig, SolveReport, SolveStatus};
use crate::egw::{project_dm, AuxMatrix, ProblemSpec};
use crate::error::{EgwError, Result};

/// A-priori number of iterations after which `Phi(B_k) - Phi* <= eta`, using
/// `|B*|_F <= M/2`: `ceil(-3/2 + sqrt(1 + 128 M^2 / (eta - 3 delta')) / 2)`.
pub fn fgm_iteration_cap(m: f64, eta: f64, delta_prime: f64) -> Result<u64> {
    let slack = eta - 3.0 * delta_prime;
    if !(slack > 0.0) {
        return Err(EgwError::InvalidArgument(format!(
            "eta = {eta:e} must exceed 3 delta' = {:e}",
            3.0 * delta_prime
        )));
    }
    let k = (-1.5 + 0.5 * (1.0 + 128.0 * m * m / slack).sqrt()).ceil();
    Ok(k.max(0.0) as u64)
}

/// Accelerated projected gradient with inexact oracle.
///
/// `alpha_k = (k+1)/2`, `tau_k = 2/(k+3)`; `B_k` is the projected gradient
/// step from `A_k`, `C_k` minimizes the aggregated linear model `W_k`, and
/// `A_{k+1} = tau_k C_k + (1 - tau_k) B_k`.
pub fn solve_fgm(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let mut run = RunState::new(spec, cfg);
    if !spec.is_certified_convex() {
        run.warnings.push(
            "fgm requested on a problem that is not certified convex; rate guarantees do not apply"
                .into(),
        );
    }
    let l = match cfg.l_mode {
        LMode::Fixed(v) => v,
        _ => 64.0,
    };
    let m = spec.m;
    let a0 = match &cfg.initial {
        Some(a) => {
            check_start(spec, a)?;
            a.clone()
        }
        None => AuxMatrix::zeros(spec.d0(), spec.d1()),
    };
    let cap = match cfg.eta {
        Some(eta) => Some(fgm_iteration_cap(m, eta, run.delta_prime())?),
        None => None,
    };

    let mut a = a0.clone();
    let mut out = run.evaluate(&a)?;
    let mut w = out.gradient.scaled(0.5);
    let mut k = 0usize;
    let (status, message, b) = loop {
        let g = out.gradient.clone();
        let b = project_dm(&a.axpy(-1.0 / l, &g), m);
        // Minimizer of L/2 |C - A_0|^2 + <W, C> over the ball.
        let c = project_dm(&a0.axpy(-1.0 / l, &w), m);
        let residual = l * b.axpy(-1.0, &a).norm();
        if let Err(e) = run.record(k, &b, residual, &out) {
            break (SolveStatus::Aborted, Some(e.to_string()), b);
        }
        if g.norm() < cfg.grad_tol {
            break (SolveStatus::Converged, None, b);
        }
        if k + 1 >= cfg.max_outer_iters || cap.is_some_and(|c| (k + 1) as u64 > c) {
            break (SolveStatus::MaxIters, None, b);
        }
        let tau = 2.0 / (k as f64 + 3.0);
        let next = c.scaled(tau).axpy(1.0 - tau, &b);
        match run.evaluate(&next) {
            Ok(o) => {
                a = next;
                out = o;
            }
            Err(e) => break (SolveStatus::Aborted, Some(e.to_string()), b),
        }
        k += 1;
        let alpha = (k as f64 + 1.0) / 2.0;
        w = w.axpy(alpha, &out.gradient);
    };

    // Gap envelope with the best iterate standing in for the minimizer.
    let dp = run.delta_prime();
    if let Some(best) = run.best_iterate().cloned() {
        let r2 = best.axpy(-1.0, &a0).norm().powi(2);
        for rec in run.trace.iter_mut() {
            let kk = rec.iter as f64;
            rec.envelope = Some(2.0 * l * r2 / ((kk + 1.0) * (kk + 2.0)) + 3.0 * dp);
        }
    }
    run.finish(Algorithm::Fgm, status, message, l, &a, &b, &out, cap)
}

pub(crate) fn check_start(spec: &ProblemSpec, a: &AuxMatrix) -> Result<()> {
    if a.dim() != (spec.d0(), spec.d1()) {
        return Err(EgwError::DimensionMismatch(format!(
            "starting point is {:?}, expected {:?}",
            a.dim(),
            (spec.d0(), spec.d1())
        )));
    }
    let norm = a.norm();
    if !(norm <= spec.m / 2.0 + 1e-12) {
        return Err(EgwError::InfeasibleStart {
            norm,
            radius: spec.m / 2.0,
        });
    }
    Ok(())
}
