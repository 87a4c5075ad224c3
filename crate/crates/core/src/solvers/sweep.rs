use serde::{Deserialize, Serialize};

use super::{solve, SolveConfig, SolveReport, SolveStatus};
use crate::egw::ProblemSpec;
use crate::error::{EgwError, Result};
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
    /// Why the sweep stopped before the end of the schedule, if it did.
    pub truncated: Option<String>,
}

/// Continuation in `eps`: solve along a strictly decreasing schedule, each
/// solve starting from the previous `final_a` (projected onto the new domain
/// if needed). Stops at the first `eps` whose solve fails and reports why.
pub fn eps_sweep(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    schedule: &[f64],
    cfg: &SolveConfig,
) -> Result<SweepOutcome> {
    if schedule.is_empty() {
        return Err(EgwError::InvalidArgument("empty eps schedule".into()));
    }
    if schedule.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(EgwError::InvalidArgument(
            "eps values must be positive".into(),
        ));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(EgwError::InvalidArgument(
            "eps schedule must be strictly decreasing".into(),
        ));
    }
    let mut entries: Vec<SweepEntry> = Vec::new();
    let mut truncated = None;
    for &eps in schedule {
        let step = (|| -> Result<SolveReport> {
            let spec = ProblemSpec::new(mu0.clone(), mu1.clone(), eps)?;
            let mut c = cfg.clone();
            if let Some(prev) = entries.last() {
                c.initial = Some(prev.report.final_a_matrix().project(spec.m));
            }
            solve(&spec, &c)
        })();
        match step {
            Ok(report) if report.status == SolveStatus::Aborted => {
                truncated = Some(format!(
                    "solve aborted at eps = {eps}: {}",
                    report.message.as_deref().unwrap_or("unknown")
                ));
                break;
            }
            Ok(report) => entries.push(SweepEntry { eps, report }),
            Err(e) => {
                truncated = Some(format!("stopped at eps = {eps}: {e}"));
                break;
            }
        }
    }
    Ok(SweepOutcome { entries, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn measures() -> (DiscreteMeasure, DiscreteMeasure) {
        let mu0 = DiscreteMeasure::uniform(array![[0.3], [-0.8], [-0.5]])
            .unwrap()
            .center();
        let mu1 = DiscreteMeasure::uniform(array![[0.2, 0.1], [-0.3, 0.4], [0.1, -0.5]])
            .unwrap()
            .center();
        (mu0, mu1)
    }

    #[test]
    fn three_step_schedule() {
        let (mu0, mu1) = measures();
        let cfg = SolveConfig {
            grad_tol: 1e-6,
            record_objective: false,
            ..SolveConfig::default()
        };
        let out = eps_sweep(&mu0, &mu1, &[1.0, 0.5, 0.25], &cfg).unwrap();
        assert!(out.truncated.is_none());
        assert_eq!(out.entries.len(), 3);
        for e in &out.entries {
            assert!(e.report.final_a_matrix().norm() <= e.report.m / 2.0 + 1e-12);
            assert!(e.report.grad_norm < e.report.stationarity_bound + cfg.grad_tol);
        }
    }

    #[test]
    fn rejects_non_decreasing() {
        let (mu0, mu1) = measures();
        let cfg = SolveConfig::default();
        assert!(eps_sweep(&mu0, &mu1, &[0.5, 0.5], &cfg).is_err());
        assert!(eps_sweep(&mu0, &mu1, &[0.5, 1.0], &cfg).is_err());
    }

    #[test]
    fn truncates_on_overflow() {
        let mu0 = DiscreteMeasure::uniform(array![[-30.0], [30.0]]).unwrap();
        let cfg = SolveConfig {
            grad_tol: 1e-3,
            max_outer_iters: 20,
            record_objective: false,
            ..SolveConfig::default()
        };
        let out = eps_sweep(&mu0, &mu0, &[1e9, 1e-6], &cfg).unwrap();
        assert_eq!(out.entries.len(), 1);
        assert!(out.truncated.is_some());
    }
}
