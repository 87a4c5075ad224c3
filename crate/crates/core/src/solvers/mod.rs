//! First-order solvers for `min_{|A|_F <= M/2} Phi(A)` driven by the
//! certified Sinkhorn oracle.
//!
//! * [`solve_fgm`]: accelerated projected gradient with fixed `L` (global
//!   rate when `Phi` is convex).
//! * [`solve_adaptive`]: accelerated method for possibly nonconvex `Phi`,
//!   which falls back to the convex rate when convexity holds.

mod adaptive;
mod fgm;
mod line_search;
mod sweep;

pub use adaptive::{default_c0, solve_adaptive};
pub use fgm::{fgm_iteration_cap, solve_fgm};
pub use line_search::{line_search_l, LineSearchOutcome, LineSearchTrial};
pub use sweep::{eps_sweep, SweepEntry, SweepOutcome};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::egw::{self, AuxMatrix, Convexity, EgwValue, OracleOutput, ProblemSpec};
use crate::error::{EgwError, Result};
use crate::sinkhorn::OracleCertificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fgm,
    Adaptive,
    /// `fgm` on certified-convex problems, `adaptive` otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LMode {
    /// `64` for `fgm`, `64 v (L' - 64)` for `adaptive`.
    Theoretical,
    Fixed(f64),
    /// Shrink the theoretical value geometrically until a run fails to converge.
    LineSearch,
}

/// Feasible-set projection used by the adaptive method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Scaling onto the Frobenius ball `|A|_F <= M/2` (the feasible set).
    FrobeniusBall,
    /// Entrywise clamp to `[-M/2, M/2]`; kept for comparison only.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    /// Stop once `|G~(A_k)|_F < grad_tol`.
    pub grad_tol: f64,
    pub max_outer_iters: usize,
    /// Oracle radius; `None` picks `delta` with `delta' = grad_tol / 10`.
    pub delta_oracle: Option<f64>,
    pub l_mode: LMode,
    pub line_search_shrink: f64,
    pub line_search_max_trials: usize,
    /// Reuse the previous Sinkhorn scaling as the starting point of the next call.
    pub warm_start: bool,
    /// Seeds the fallback start of the adaptive method when the default start
    /// is (numerically) stationary.
    pub seed: u64,
    /// Starting point: `A_0` for `fgm`, `C_0` for `adaptive`.
    pub initial: Option<AuxMatrix>,
    pub projection: Projection,
    /// Target accuracy for the a-priori iteration cap of `fgm` (convex mode).
    pub eta: Option<f64>,
    pub sinkhorn_max_iters: usize,
    /// Lower limit on the Sinkhorn stopping threshold `gamma`. The certified
    /// threshold can be far below what ill-conditioned kernels reach in
    /// floating point; the certificate always reports the achieved accuracy.
    pub sinkhorn_min_tol: f64,
    /// Evaluate `Phi(B_k)` every iteration (one extra oracle call each).
    pub record_objective: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Auto,
            grad_tol: 5e-8,
            max_outer_iters: 10_000,
            delta_oracle: None,
            l_mode: LMode::Theoretical,
            line_search_shrink: 0.99,
            line_search_max_trials: 200,
            warm_start: true,
            seed: 0,
            initial: None,
            projection: Projection::FrobeniusBall,
            eta: None,
            sinkhorn_max_iters: 1_000_000,
            sinkhorn_min_tol: 0.0,
            record_objective: true,
        }
    }
}

impl SolveConfig {
    /// Oracle radius in effect for `spec`.
    pub fn resolve_delta(&self, spec: &ProblemSpec) -> f64 {
        self.delta_oracle
            .or(spec.delta_oracle)
            .unwrap_or_else(|| spec.delta_for_delta_prime(self.grad_tol / 10.0))
    }

    pub fn resolve_algorithm(&self, spec: &ProblemSpec) -> Algorithm {
        match self.algorithm {
            Algorithm::Auto if spec.is_certified_convex() => Algorithm::Fgm,
            Algorithm::Auto => Algorithm::Adaptive,
            other => other,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(EgwError::InvalidArgument(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if let LMode::Fixed(l) = self.l_mode {
            if !(l > 0.0 && l.is_finite()) {
                return Err(EgwError::InvalidArgument(format!(
                    "L must be positive, got {l}"
                )));
            }
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(EgwError::InvalidArgument(
                "line search shrink factor must lie in (0, 1)".into(),
            ));
        }
        if let Some(d) = self.delta_oracle {
            if !(d > 0.0) {
                return Err(EgwError::InvalidArgument(format!(
                    "oracle delta must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Aborted,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// `Phi(B_k)`, when objective recording is on.
    pub phi: Option<f64>,
    /// `fgm`: `L |B_k - A_k|_F`; `adaptive`: `|beta^-1 (B_k - A_k)|_F`.
    pub residual: f64,
    /// `|G~(A_k)|_F`
    pub grad_norm: f64,
    /// Theoretical bound on the tracked quantity: the optimality gap for
    /// `fgm`, the running minimum of the squared residual for `adaptive`.
    /// Uses the best iterate in place of the unknown minimizer.
    pub envelope: Option<f64>,
    pub delta_sup: f64,
    pub sinkhorn_iters: usize,
    pub marginal_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub status: SolveStatus,
    pub message: Option<String>,
    pub warnings: Vec<String>,
    pub iterations: usize,
    /// Point where the stopping test was evaluated.
    pub final_a: Vec<Vec<f64>>,
    /// Last projected-gradient iterate `B_k`.
    pub final_b: Vec<Vec<f64>>,
    pub grad_norm: f64,
    pub residual: f64,
    /// `Phi(final_a)`
    pub objective: f64,
    /// `S1 + Phi(final_a)`; absent when the marginals are not centered.
    pub egw: Option<EgwValue>,
    /// Set when the decomposition was forced on uncentered marginals.
    pub decomposition_note: Option<String>,
    pub eps: f64,
    pub m: f64,
    pub l: f64,
    pub delta_oracle: f64,
    pub delta_prime: f64,
    pub convexity: Convexity,
    /// `32 delta sum |x||y| + residual`: bound on the exact gradient norm at
    /// `final_a` when `final_b` is interior. Uses the certified plan error
    /// when it exceeds the configured `delta`.
    pub stationarity_bound: f64,
    pub iteration_cap: Option<u64>,
    pub oracle_calls: usize,
    pub sinkhorn_iters: usize,
    pub certificate: OracleCertificate,
    pub trace: Vec<IterRecord>,
    /// Plan at `final_a`.
    #[serde(skip)]
    pub plan: Array2<f64>,
}

impl SolveReport {
    pub fn final_a_matrix(&self) -> AuxMatrix {
        AuxMatrix::from_rows(&self.final_a).expect("rectangular by construction")
    }

    pub fn final_b_matrix(&self) -> AuxMatrix {
        AuxMatrix::from_rows(&self.final_b).expect("rectangular by construction")
    }

    /// `min_{i <= k} residual_i^2` for every recorded `k`.
    pub fn running_min_sq_residual(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trace
            .iter()
            .map(|r| {
                best = best.min(r.residual * r.residual);
                best
            })
            .collect()
    }

    /// `Phi(B_k) - min_j Phi(B_j)` for every recorded `k` with an objective.
    pub fn gap_trace(&self) -> Vec<(usize, f64)> {
        let best = self
            .trace
            .iter()
            .filter_map(|r| r.phi)
            .fold(f64::INFINITY, f64::min);
        self.trace
            .iter()
            .filter_map(|r| r.phi.map(|p| (r.iter, p - best)))
            .collect()
    }
}

/// Solve with the configured algorithm and `L` rule.
pub fn solve(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    match cfg.l_mode {
        LMode::LineSearch => Ok(line_search_l(spec, cfg)?.report),
        _ => match cfg.resolve_algorithm(spec) {
            Algorithm::Fgm => solve_fgm(spec, cfg),
            _ => solve_adaptive(spec, cfg, cfg.initial.clone()),
        },
    }
}

pub(crate) fn project(a: &AuxMatrix, m: f64, projection: Projection) -> AuxMatrix {
    match projection {
        Projection::FrobeniusBall => egw::project_dm(a, m),
        Projection::Box => AuxMatrix(a.0.mapv(|v| v.clamp(-m / 2.0, m / 2.0))),
    }
}

/// Shared bookkeeping for both methods.
pub(crate) struct RunState<'a> {
    pub spec: &'a ProblemSpec,
    pub cfg: &'a SolveConfig,
    pub delta: f64,
    pub oracle: egw::Oracle<'a>,
    /// Independent oracle for the `Phi(B_k)` trace, so that its warm starts
    /// do not interfere with the main sequence.
    pub probe: egw::Oracle<'a>,
    pub trace: Vec<IterRecord>,
    pub b_iterates: Vec<AuxMatrix>,
    pub warnings: Vec<String>,
}

impl<'a> RunState<'a> {
    pub fn new(spec: &'a ProblemSpec, cfg: &'a SolveConfig) -> Self {
        let mut oracle = egw::Oracle::new(spec);
        oracle.warm_start = cfg.warm_start;
        oracle.k_max = cfg.sinkhorn_max_iters;
        oracle.min_gamma = cfg.sinkhorn_min_tol;
        let mut probe = egw::Oracle::new(spec);
        probe.warm_start = cfg.warm_start;
        probe.k_max = cfg.sinkhorn_max_iters;
        probe.min_gamma = cfg.sinkhorn_min_tol;
        Self {
            spec,
            cfg,
            delta: cfg.resolve_delta(spec),
            oracle,
            probe,
            trace: Vec::new(),
            b_iterates: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn delta_prime(&self) -> f64 {
        self.spec.delta_prime(self.delta)
    }

    pub fn evaluate(&mut self, a: &AuxMatrix) -> Result<OracleOutput> {
        let out = self.oracle.evaluate(a, self.delta)?;
        if !out.cert.converged && !out.cert.stalled {
            self.warnings.push(format!(
                "Sinkhorn hit its iteration cap with violation {:e}",
                out.cert.marginal_violation
            ));
        }
        Ok(out)
    }

    pub fn record(
        &mut self,
        iter: usize,
        b: &AuxMatrix,
        residual: f64,
        out: &OracleOutput,
    ) -> Result<()> {
        let phi = if self.cfg.record_objective {
            let probe = self.probe.evaluate(b, self.delta)?;
            Some(probe.value(self.spec, b))
        } else {
            None
        };
        self.trace.push(IterRecord {
            iter,
            phi,
            residual,
            grad_norm: out.gradient.norm(),
            envelope: None,
            delta_sup: out.cert.delta_sup,
            sinkhorn_iters: out.cert.iterations,
            marginal_violation: out.cert.marginal_violation,
        });
        self.b_iterates.push(b.clone());
        Ok(())
    }

    /// Best recorded `B_k` by objective (the last one if none was evaluated).
    pub fn best_iterate(&self) -> Option<&AuxMatrix> {
        let mut best: Option<(f64, usize)> = None;
        for (k, r) in self.trace.iter().enumerate() {
            if let Some(p) = r.phi {
                if best.is_none_or(|(v, _)| p < v) {
                    best = Some((p, k));
                }
            }
        }
        match best {
            Some((_, k)) => self.b_iterates.get(k),
            None => self.b_iterates.last(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        self,
        algorithm: Algorithm,
        status: SolveStatus,
        message: Option<String>,
        l: f64,
        a: &AuxMatrix,
        b: &AuxMatrix,
        out: &OracleOutput,
        iteration_cap: Option<u64>,
    ) -> Result<SolveReport> {
        let spec = self.spec;
        let objective = out.value(spec, a);
        let (egw, decomposition_note) = if spec.is_centered() {
            (Some(egw::egw_value(spec, a, &out.coupling.plan)?), None)
        } else if spec.allow_uncentered {
            (
                Some(egw::egw_value(spec, a, &out.coupling.plan)?),
                Some("decomposition valid only for centered marginals".to_string()),
            )
        } else {
            (None, None)
        };
        let residual = self.trace.last().map_or(0.0, |r| r.residual);
        let delta_prime = self.delta_prime();
        Ok(SolveReport {
            algorithm,
            status,
            message,
            warnings: self.warnings,
            iterations: self.trace.len(),
            final_a: a.to_rows(),
            final_b: b.to_rows(),
            grad_norm: out.gradient.norm(),
            residual,
            objective,
            egw,
            decomposition_note,
            eps: spec.eps,
            m: spec.m,
            l,
            delta_oracle: self.delta,
            delta_prime,
            convexity: spec.convexity,
            stationarity_bound: 32.0 * self.delta.max(out.cert.delta_sup) * spec.norm_product_sum
                + residual,
            iteration_cap,
            oracle_calls: self.oracle.calls + self.probe.calls,
            sinkhorn_iters: self.oracle.total_sinkhorn_iters + self.probe.total_sinkhorn_iters,
            certificate: out.cert,
            trace: self.trace,
            plan: out.coupling.plan.clone(),
        })
    }
}
