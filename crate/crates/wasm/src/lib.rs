//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes flat row-major point arrays and returns a JSON string,
//! so the page needs no extra glue beyond what `wasm-bindgen` generates.

use egw_core::egw::{phi, AuxMatrix, ProblemSpec};
use egw_core::measures::DiscreteMeasure;
use egw_core::sinkhorn::{self, OracleCertificate};
use egw_core::solvers::{self, SolveConfig};
use ndarray::{Array1, Array2};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn measure(points: &[f64], weights: &[f64], dim: usize) -> Result<DiscreteMeasure, String> {
    if dim == 0 || points.len() != weights.len() * dim {
        return Err(format!(
            "{} coordinates do not match {} weights in dimension {dim}",
            points.len(),
            weights.len()
        ));
    }
    let w = Array1::from(weights.to_vec());
    let total = w.sum();
    if total.is_nan() || total <= 0.0 {
        return Err("weights must have positive total mass".into());
    }
    let p =
        Array2::from_shape_vec((weights.len(), dim), points.to_vec()).map_err(|e| e.to_string())?;
    DiscreteMeasure::new(p, w / total).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn of(m: &Array2<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

#[derive(Serialize)]
struct SolveView {
    algorithm: String,
    status: String,
    iterations: usize,
    s_eps: Option<f64>,
    objective: f64,
    grad_norm: f64,
    convex: bool,
    threshold: f64,
    a: Vec<Vec<f64>>,
    plan: Matrix,
    /// `[iter, phi, residual, envelope]`; missing values are `null`.
    trace: Vec<(usize, Option<f64>, f64, Option<f64>)>,
}

/// Centered solve with the automatic algorithm choice.
#[allow(clippy::too_many_arguments)]
pub fn run_solve(
    x0: &[f64],
    w0: &[f64],
    d0: usize,
    x1: &[f64],
    w1: &[f64],
    d1: usize,
    eps: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<String, String> {
    let mu0 = measure(x0, w0, d0)?.center();
    let mu1 = measure(x1, w1, d1)?.center();
    let spec = ProblemSpec::new(mu0, mu1, eps).map_err(|e| e.to_string())?;
    let cfg = SolveConfig {
        grad_tol,
        max_outer_iters: max_iters,
        ..SolveConfig::default()
    };
    let r = solvers::solve(&spec, &cfg).map_err(|e| e.to_string())?;
    let view = SolveView {
        algorithm: format!("{:?}", r.algorithm).to_lowercase(),
        status: format!("{:?}", r.status).to_lowercase(),
        iterations: r.iterations,
        s_eps: r.egw.map(|v| v.total),
        objective: r.objective,
        grad_norm: r.grad_norm,
        convex: spec.is_certified_convex(),
        threshold: spec.convexity_threshold(),
        a: r.final_a.clone(),
        plan: Matrix::of(&r.plan),
        trace: r
            .trace
            .iter()
            .map(|t| (t.iter, t.phi, t.residual, t.envelope))
            .collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Landscape {
    a: Vec<f64>,
    phi: Vec<f64>,
    convex: bool,
    threshold: f64,
    radius: f64,
}

/// `Phi(A)` on a grid of scalar `A` for two measures on the line.
pub fn run_landscape(
    x0: &[f64],
    w0: &[f64],
    x1: &[f64],
    w1: &[f64],
    eps: f64,
    steps: usize,
) -> Result<String, String> {
    let mu0 = measure(x0, w0, 1)?.center();
    let mu1 = measure(x1, w1, 1)?.center();
    let spec = ProblemSpec::new(mu0, mu1, eps).map_err(|e| e.to_string())?;
    let radius = spec.m / 2.0;
    let steps = steps.clamp(2, 2000);
    let mut a = Vec::with_capacity(steps);
    let mut values = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = -radius + 2.0 * radius * k as f64 / (steps - 1) as f64;
        let v = phi(&spec, &AuxMatrix::from_elem(1, 1, t), 1e-8).map_err(|e| e.to_string())?;
        a.push(t);
        values.push(v.value);
    }
    let view = Landscape {
        a,
        phi: values,
        convex: spec.is_certified_convex(),
        threshold: spec.convexity_threshold(),
        radius,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SinkhornView {
    gamma: f64,
    plan: Matrix,
    cert: OracleCertificate,
}

/// Certified Sinkhorn run at a fixed auxiliary matrix (row-major `a`).
#[allow(clippy::too_many_arguments)]
pub fn run_sinkhorn(
    x0: &[f64],
    w0: &[f64],
    d0: usize,
    x1: &[f64],
    w1: &[f64],
    d1: usize,
    eps: f64,
    a: &[f64],
    delta: f64,
) -> Result<String, String> {
    let mu0 = measure(x0, w0, d0)?.center();
    let mu1 = measure(x1, w1, d1)?.center();
    let a = Array2::from_shape_vec((d0, d1), a.to_vec()).map_err(|e| e.to_string())?;
    let kernel =
        sinkhorn::build_kernel(&mu0, &mu1, &AuxMatrix(a), eps).map_err(|e| e.to_string())?;
    let b = mu1.weights();
    let gamma = sinkhorn::oracle_tolerance_schedule(delta, &kernel, b)
        .map_err(|e| e.to_string())?
        .max(egw_core::egw::gamma_floor(b));
    let (coupling, cert) =
        sinkhorn::sinkhorn(&kernel, mu0.weights(), b, gamma, 100_000).map_err(|e| e.to_string())?;
    let view = SinkhornView {
        gamma,
        plan: Matrix::of(&coupling.plan),
        cert,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn solve(
    x0: &[f64],
    w0: &[f64],
    d0: usize,
    x1: &[f64],
    w1: &[f64],
    d1: usize,
    eps: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<String, JsError> {
    run_solve(x0, w0, d0, x1, w1, d1, eps, grad_tol, max_iters).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn landscape(
    x0: &[f64],
    w0: &[f64],
    x1: &[f64],
    w1: &[f64],
    eps: f64,
    steps: usize,
) -> Result<String, JsError> {
    run_landscape(x0, w0, x1, w1, eps, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sinkhornAt)]
#[allow(clippy::too_many_arguments)]
pub fn sinkhorn_at(
    x0: &[f64],
    w0: &[f64],
    d0: usize,
    x1: &[f64],
    w1: &[f64],
    d1: usize,
    eps: f64,
    a: &[f64],
    delta: f64,
) -> Result<String, JsError> {
    run_sinkhorn(x0, w0, d0, x1, w1, d1, eps, a, delta).map_err(|e| JsError::new(&e))
}
