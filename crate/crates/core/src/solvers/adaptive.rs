use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fgm::check_start;
use super::{project, Algorithm, LMode, RunState, SolveConfig, SolveReport, SolveStatus};
use crate::egw::{AuxMatrix, ProblemSpec};
use crate::error::{EgwError, Result};

/// All-ones matrix scaled by `min(M, 1) * 1e-5`.
pub fn default_c0(spec: &ProblemSpec) -> AuxMatrix {
    AuxMatrix::from_elem(spec.d0(), spec.d1(), spec.m.min(1.0) * 1e-5)
}

/// Accelerated gradient method for possibly nonconvex `Phi`.
///
/// `beta = 1/(2L)`, `gamma_k = k/(4L)`, `tau_k = 2/(k+2)`, starting from
/// `A_1 = C_0`. The residual `|beta^-1 (B_k - A_k)|_F` is tracked; its
/// running minimum decays like `1/k` in general and `1/k^3` under convexity.
///
/// `c0 = None` uses [`default_c0`]; if that start is numerically stationary,
/// a seeded random direction of the same size is tried instead. An explicit
/// stationary `c0` is rejected.
pub fn solve_adaptive(
    spec: &ProblemSpec,
    cfg: &SolveConfig,
    c0: Option<AuxMatrix>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mut run = RunState::new(spec, cfg);
    let l = match cfg.l_mode {
        LMode::Fixed(v) => v,
        _ => spec.l,
    };
    let m = spec.m;
    let threshold = 10.0 * run.delta_prime();

    let explicit = c0.is_some();
    let mut c_prev = c0.unwrap_or_else(|| default_c0(spec));
    check_start(spec, &c_prev)?;
    let mut out = run.evaluate(&c_prev)?;
    if out.gradient.norm() < threshold {
        if explicit {
            return Err(EgwError::StationaryStart {
                grad: out.gradient.norm(),
                threshold,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scale = c_prev.norm();
        let mut dir = AuxMatrix(c_prev.0.mapv(|_| rng.random::<f64>() * 2.0 - 1.0));
        dir = dir.scaled(scale / dir.norm().max(f64::MIN_POSITIVE));
        out = run.evaluate(&dir)?;
        if out.gradient.norm() < threshold {
            return Err(EgwError::StationaryStart {
                grad: out.gradient.norm(),
                threshold,
            });
        }
        run.warnings
            .push("default start was stationary; used a seeded random start".into());
        c_prev = dir;
    }
    let c0 = c_prev.clone();
    let beta = 1.0 / (2.0 * l);

    let mut a = c_prev.clone();
    let mut k = 1usize;
    let (status, message, b) = loop {
        let g = out.gradient.clone();
        let b = project(&a.axpy(-beta, &g), m, cfg.projection);
        let gamma = k as f64 / (4.0 * l);
        let c = project(&c_prev.axpy(-gamma, &g), m, cfg.projection);
        let residual = b.axpy(-1.0, &a).norm() / beta;
        if let Err(e) = run.record(k, &b, residual, &out) {
            break (SolveStatus::Aborted, Some(e.to_string()), b);
        }
        if g.norm() < cfg.grad_tol {
            break (SolveStatus::Converged, None, b);
        }
        if k >= cfg.max_outer_iters {
            break (SolveStatus::MaxIters, None, b);
        }
        let tau = 2.0 / (k as f64 + 2.0);
        let next = c.scaled(tau).axpy(1.0 - tau, &b);
        match run.evaluate(&next) {
            Ok(o) => {
                a = next;
                out = o;
            }
            Err(e) => break (SolveStatus::Aborted, Some(e.to_string()), b),
        }
        c_prev = c;
        k += 1;
    };

    let dp = run.delta_prime();
    let convex = spec.is_certified_convex();
    let lp = spec.l_prime();
    if let Some(best) = run.best_iterate().cloned() {
        let d0 = c0.axpy(-1.0, &best).norm().powi(2);
        let b2 = best.norm().powi(2);
        for rec in run.trace.iter_mut() {
            let kk = rec.iter as f64;
            let mut env = 96.0 * l * l * d0 / (kk * (kk + 1.0) * (kk + 2.0)) + 8.0 * l * dp;
            if !convex {
                env += 24.0 * l * lp * (b2 + 5.0 * m * m / 16.0) / kk;
            }
            rec.envelope = Some(env);
        }
    }
    run.finish(Algorithm::Adaptive, status, message, l, &a, &b, &out, None)
}
