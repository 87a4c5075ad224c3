//! Timing harness over random instances.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::egw::ProblemSpec;
use crate::error::{EgwError, Result};
use crate::measures::{DiscreteMeasure, WeightPolicy};
use crate::solvers::{solve, SolveConfig, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    /// `1.05 * 16 sqrt(M4(mu0) M4(mu1))`, just inside the convex regime.
    ConvexMargin,
    Fixed(f64),
}

impl EpsRule {
    pub fn eps_for(&self, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> f64 {
        match *self {
            EpsRule::ConvexMargin => {
                let m4 = (mu0.moments().m4 * mu1.moments().m4).sqrt();
                1.05 * 16.0 * m4
            }
            EpsRule::Fixed(e) => e,
        }
    }
}

/// Gaussian point clouds with uniform-[0,1) weights, renormalized and centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub sigma0: f64,
    pub sigma1: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            sigma0: 0.05,
            sigma1: 0.1,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    /// Instance for cell `(d, n)` and trial `trial`; independent of the order
    /// in which instances are drawn.
    pub fn instance(
        &self,
        d: usize,
        n: usize,
        trial: usize,
    ) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let stream = (d as u64) << 48 ^ (n as u64) << 16 ^ trial as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mu0 = sample(&mut rng, d, n, self.sigma0)?;
        let mu1 = sample(&mut rng, d, n, self.sigma1)?;
        Ok((mu0.center(), mu1.center()))
    }
}

fn sample(rng: &mut ChaCha8Rng, d: usize, n: usize, sigma: f64) -> Result<DiscreteMeasure> {
    let normal = Normal::new(0.0, sigma).map_err(|e| EgwError::InvalidArgument(e.to_string()))?;
    let points = Array2::from_shape_fn((n, d), |_| normal.sample(rng));
    let weights = Array1::from_shape_fn(n, |_| rng.random::<f64>());
    DiscreteMeasure::with_policy(
        points,
        weights,
        WeightPolicy {
            renormalize: true,
            drop_zero_mass: true,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Seconds per `(d, N)` cell.
    pub time_budget: f64,
    pub eps_rule: EpsRule,
    pub generator: GeneratorSpec,
    pub solve: SolveConfig,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(EgwError::InvalidArgument(
                "trials must be at least 1".into(),
            ));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EgwError::InvalidArgument(
                "sizes must be nonempty and strictly increasing".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.contains(&0) || self.sizes.contains(&0) {
            return Err(EgwError::InvalidArgument(
                "dims and sizes must be positive".into(),
            ));
        }
        if !(self.time_budget >= 0.0) {
            return Err(EgwError::InvalidArgument(
                "time budget must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `(d, N)` cells in output order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.dims
            .iter()
            .flat_map(|&d| self.sizes.iter().map(move |&n| (d, n)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Aborted,
    Failed,
    /// Not run: the cell's time budget was already spent.
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub eps: f64,
    pub wall_time_seconds: f64,
    pub outer_iters: usize,
    pub total_sinkhorn_iters: usize,
    pub objective: Option<f64>,
    pub status: RunStatus,
}

/// One timed solve.
pub fn run_trial(spec: &BenchmarkSpec, d: usize, n: usize, trial: usize) -> RunRecord {
    let mut record = RunRecord {
        d,
        n,
        trial,
        eps: f64::NAN,
        wall_time_seconds: 0.0,
        outer_iters: 0,
        total_sinkhorn_iters: 0,
        objective: None,
        status: RunStatus::Failed,
    };
    let Ok((mu0, mu1)) = spec.generator.instance(d, n, trial) else {
        return record;
    };
    let eps = spec.eps_rule.eps_for(&mu0, &mu1);
    record.eps = eps;
    let start = Instant::now();
    let result = ProblemSpec::new(mu0, mu1, eps).and_then(|p| solve(&p, &spec.solve));
    record.wall_time_seconds = start.elapsed().as_secs_f64();
    if let Ok(report) = result {
        record.outer_iters = report.iterations;
        record.total_sinkhorn_iters = report.sinkhorn_iters;
        record.objective = report.egw.map(|v| v.total);
        record.status = match report.status {
            SolveStatus::Converged => RunStatus::Converged,
            SolveStatus::MaxIters => RunStatus::MaxIters,
            SolveStatus::Aborted => RunStatus::Aborted,
        };
    }
    record
}

/// All trials of one cell, in order. Once the cumulative time reaches the
/// budget, the remaining trials are recorded as `BudgetExceeded`.
pub fn run_cell(spec: &BenchmarkSpec, d: usize, n: usize) -> Vec<RunRecord> {
    let mut spent = 0.0;
    (0..spec.trials)
        .map(|trial| {
            if spent >= spec.time_budget {
                return RunRecord {
                    d,
                    n,
                    trial,
                    eps: f64::NAN,
                    wall_time_seconds: 0.0,
                    outer_iters: 0,
                    total_sinkhorn_iters: 0,
                    objective: None,
                    status: RunStatus::BudgetExceeded,
                };
            }
            let r = run_trial(spec, d, n, trial);
            spent += r.wall_time_seconds;
            r
        })
        .collect()
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    Ok(spec
        .cells()
        .into_iter()
        .flat_map(|(d, n)| run_cell(spec, d, n))
        .collect())
}

/// Mean wall time of the completed runs of each size, for one dimension.
pub fn mean_times(records: &[RunRecord], d: usize) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = records.iter().filter(|r| r.d == d).map(|r| r.n).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .filter_map(|n| {
            let times: Vec<f64> = records
                .iter()
                .filter(|r| {
                    r.d == d
                        && r.n == n
                        && matches!(r.status, RunStatus::Converged | RunStatus::MaxIters)
                })
                .map(|r| r.wall_time_seconds)
                .collect();
            (!times.is_empty()).then(|| (n, times.iter().sum::<f64>() / times.len() as f64))
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
