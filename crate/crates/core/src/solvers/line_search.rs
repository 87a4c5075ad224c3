use serde::{Deserialize, Serialize};

use super::{solve_adaptive, solve_fgm, Algorithm, LMode, SolveConfig, SolveReport, SolveStatus};
use crate::egw::ProblemSpec;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchTrial {
    pub l: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub l: f64,
    pub trials: Vec<LineSearchTrial>,
    /// Run at the returned `L`.
    pub report: SolveReport,
}

/// Geometric search `L_0 * shrink^m`, starting from the theoretical value (or
/// the fixed value, which is returned untouched). Stops at the first run that
/// fails to converge within the configured iteration budget and returns the
/// last converging `L`. If even `L_0` fails, `L_0` is returned with a warning.
pub fn line_search_l(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<LineSearchOutcome> {
    cfg.validate()?;
    let algorithm = cfg.resolve_algorithm(spec);
    let run = |l: f64| -> Result<SolveReport> {
        let c = SolveConfig {
            l_mode: LMode::Fixed(l),
            ..cfg.clone()
        };
        match algorithm {
            Algorithm::Fgm => solve_fgm(spec, &c),
            _ => solve_adaptive(spec, &c, cfg.initial.clone()),
        }
    };
    let l0 = match (cfg.l_mode, algorithm) {
        (LMode::Fixed(v), _) => {
            let report = run(v)?;
            return Ok(LineSearchOutcome {
                l: v,
                trials: vec![LineSearchTrial {
                    l: v,
                    converged: report.status == SolveStatus::Converged,
                    iterations: report.iterations,
                }],
                report,
            });
        }
        (_, Algorithm::Fgm) => 64.0,
        _ => spec.l,
    };

    let mut trials = Vec::new();
    let mut best: Option<(f64, SolveReport)> = None;
    let mut first_failure: Option<SolveReport> = None;
    let mut l = l0;
    for _ in 0..cfg.line_search_max_trials.max(1) {
        // Abort-type failures count as non-convergence.
        let report = run(l).ok();
        let converged = report
            .as_ref()
            .is_some_and(|r| r.status == SolveStatus::Converged);
        trials.push(LineSearchTrial {
            l,
            converged,
            iterations: report.as_ref().map_or(0, |r| r.iterations),
        });
        if !converged {
            if best.is_none() {
                first_failure = report;
            }
            break;
        }
        best = report.map(|r| (l, r));
        l *= cfg.line_search_shrink;
    }
    match best {
        Some((l, report)) => Ok(LineSearchOutcome { l, trials, report }),
        None => {
            let mut report = match first_failure {
                Some(r) => r,
                None => run(l0)?,
            };
            report.warnings.push(format!(
                "line search: no tested L converged; using L0 = {l0}"
            ));
            Ok(LineSearchOutcome {
                l: l0,
                trials,
                report,
            })
        }
    }
}
