use egw_core::bench::{self, BenchmarkSpec, EpsRule, GeneratorSpec, RunRecord};
use egw_core::egw::{self, debiased_egw, AuxMatrix, ProblemSpec};
use egw_core::measures::{rotate_grid, AffineMap, DiscreteMeasure};
use egw_core::sinkhorn;
use egw_core::solvers::{self, Algorithm, SolveConfig, SolveReport, SolveStatus};
use rayon::prelude::*;
use serde_json::json;

use crate::args::{
    BenchmarkArgs, DebiasArgs, GlobalOpts, SinkhornArgs, SolveArgs, SweepArgs, ValidateArgs,
};
use crate::error::{CliError, CliResult};
use crate::input::{self, check_eps, load_pair, solve_config};
use crate::output::{num, opt_num, write_csv, write_json, write_plan, write_trace};

struct Out {
    quiet: bool,
}

impl Out {
    fn line(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }
}

fn warn(text: impl AsRef<str>) {
    eprintln!("warning: {}", text.as_ref());
}

fn problem(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    eps: f64,
    m: Option<f64>,
    uncentered: bool,
) -> CliResult<ProblemSpec> {
    let spec = ProblemSpec::new(mu0, mu1, eps)?.allowing_uncentered(uncentered);
    Ok(match m {
        Some(m) => spec.with_m(m)?,
        None => spec,
    })
}

pub fn solve(args: &SolveArgs, g: &GlobalOpts) -> CliResult<()> {
    let out = Out { quiet: g.quiet };
    check_eps(args.eps)?;
    let (mu0, mu1) = load_pair(&args.input)?;
    let spec = problem(mu0, mu1, args.eps, args.solver.m, args.input.no_center)?;
    let cfg = solve_config(&args.solver, g.seed)?;
    let report = solvers::solve(&spec, &cfg)?;
    for w in &report.warnings {
        warn(w);
    }

    if let Some(p) = &args.plan {
        write_plan(p, &report.plan)?;
    }
    if let Some(p) = &args.trace {
        write_trace(p, &report)?;
    }
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }

    out.line(format!("algorithm      {:?}", report.algorithm).to_lowercase());
    out.line(format!("status         {:?}", report.status).to_lowercase());
    out.line(format!("iterations     {}", report.iterations));
    match &report.egw {
        Some(v) => {
            out.line(format!("S_eps          {}", num(v.total)));
            out.line(format!("  S1           {}", num(v.s1)));
            out.line(format!("  S2           {}", num(v.s2)));
        }
        None => out.line(format!("objective      {}", num(report.objective))),
    }
    if let Some(note) = &report.decomposition_note {
        warn(note);
    }
    out.line(format!("grad norm      {}", num(report.grad_norm)));
    out.line(format!("stationarity   {}", num(report.stationarity_bound)));

    if args.compare {
        compare(&spec, &cfg, &report, &out)?;
    }
    match report.status {
        SolveStatus::Aborted => Err(CliError::Solver(
            report.message.unwrap_or_else(|| "solver aborted".into()),
        )),
        SolveStatus::MaxIters => {
            warn("iteration limit reached before the gradient tolerance");
            Ok(())
        }
        SolveStatus::Converged => Ok(()),
    }
}

/// Relative difference of the objectives found by the two algorithms,
/// `|a - b| / min(|a|, |b|)`; meaningful only when the minimizer is unique.
fn compare(
    spec: &ProblemSpec,
    cfg: &SolveConfig,
    report: &SolveReport,
    out: &Out,
) -> CliResult<()> {
    if !spec.is_certified_convex() {
        warn("--compare needs a certified-convex problem; skipped");
        return Ok(());
    }
    let other = match report.algorithm {
        Algorithm::Fgm => Algorithm::Adaptive,
        _ => Algorithm::Fgm,
    };
    let second = solvers::solve(
        spec,
        &SolveConfig {
            algorithm: other,
            ..cfg.clone()
        },
    )?;
    let (a, b) = (report.objective, second.objective);
    let rel = (a - b).abs() / a.abs().min(b.abs());
    out.line(
        format!(
            "{:?} objective {} ; relative difference {}",
            other,
            num(b),
            num(rel)
        )
        .to_lowercase(),
    );
    Ok(())
}

pub fn sinkhorn(args: &SinkhornArgs, g: &GlobalOpts) -> CliResult<()> {
    let out = Out { quiet: g.quiet };
    check_eps(args.eps)?;
    let (mu0, mu1) = load_pair(&args.input)?;
    let a = match &args.aux {
        Some(text) => input::parse_aux(text, mu0.dim(), mu1.dim())?,
        None => AuxMatrix::zeros(mu0.dim(), mu1.dim()),
    };
    let (wa, wb) = (mu0.weights(), mu1.weights());
    let kernel = sinkhorn::build_kernel(&mu0, &mu1, &a, args.eps)?;
    let gamma = match (args.gamma, args.delta) {
        (Some(gamma), _) => gamma,
        (None, Some(delta)) => {
            sinkhorn::oracle_tolerance_schedule(delta, &kernel, wb)?.max(egw::gamma_floor(wb))
        }
        (None, None) => egw::gamma_floor(wb),
    };
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(CliError::Validation(format!(
            "--gamma must be positive, got {gamma}"
        )));
    }
    let (coupling, cert) = if args.log_domain {
        let cost = egw::cost_matrix(&mu0, &mu1, &a)?;
        sinkhorn::sinkhorn_log_domain(&cost, args.eps, wa, wb, gamma, args.kmax)?
    } else {
        sinkhorn::sinkhorn(&kernel, wa, wb, gamma, args.kmax)?
    };
    if let Some(p) = &args.out {
        write_plan(p, &coupling.plan)?;
    }
    if let Some(p) = &args.cert {
        write_json(p, &cert)?;
    }
    out.line(format!("gamma              {}", num(gamma)));
    out.line(format!("iterations         {}", cert.iterations));
    out.line(format!("converged          {}", cert.converged));
    out.line(format!(
        "marginal violation {}",
        num(cert.marginal_violation)
    ));
    out.line(format!("lambda             {}", num(cert.lambda_k)));
    out.line(format!("delta_hilbert      {}", num(cert.delta_hilbert)));
    out.line(format!("delta_sup          {}", num(cert.delta_sup)));
    if !cert.certified {
        warn("log-domain output is not certified");
    }
    if !cert.converged && !cert.stalled {
        warn("iteration limit reached before the stopping threshold");
    }
    Ok(())
}

fn debias_inputs(args: &DebiasArgs) -> CliResult<(DiscreteMeasure, DiscreteMeasure)> {
    let images =
        args.image || (input::is_image(&args.input.mu0) && input::is_image(&args.input.mu1));
    if images {
        let r0 = input::load_raster(&args.input.mu0, args.max_side, args.pad)?;
        let mut r1 = input::load_raster(&args.input.mu1, args.max_side, args.pad)?;
        if let Some(deg) = args.rotate {
            r1 = rotate_grid(&r1, deg);
        }
        let side = r0.width.max(r0.height).max(r1.width).max(r1.height);
        let pixel = args.pixel_size.unwrap_or(1.0 / side as f64);
        if !(pixel > 0.0 && pixel.is_finite()) {
            return Err(CliError::Validation(format!(
                "--pixel-size must be positive, got {pixel}"
            )));
        }
        return Ok((r0.to_measure(pixel)?, r1.to_measure(pixel)?));
    }
    let p = input::policy(&args.input);
    let mu0 = input::load(&args.input.mu0, p)?;
    let mut mu1 = input::load(&args.input.mu1, p)?;
    if let Some(deg) = args.rotate {
        if mu1.dim() != 2 {
            return Err(CliError::Validation(format!(
                "--rotate needs a planar measure, second measure lives in R^{}",
                mu1.dim()
            )));
        }
        // Rotate about the barycenter.
        mu1 = mu1.center().transform(&AffineMap::rotation_2d(deg))?;
    }
    Ok((mu0, mu1))
}

pub fn debias(args: &DebiasArgs, g: &GlobalOpts) -> CliResult<()> {
    let out = Out { quiet: g.quiet };
    check_eps(args.eps)?;
    if args.input.no_center {
        warn("debiased values always center the measures; --no-center ignored");
    }
    let (mu0, mu1) = debias_inputs(args)?;
    let cfg = solve_config(&args.solver, g.seed)?;
    let v = debiased_egw(&mu0, &mu1, args.eps, &cfg)?;
    if let Some(p) = &args.out {
        write_json(p, &v)?;
    }
    out.line(format!("debiased S_eps     {}", num(v.value)));
    out.line(format!("S_eps(mu0, mu1)    {}", num(v.cross)));
    out.line(format!("S_eps(mu0, mu0)    {}", num(v.self0)));
    out.line(format!("S_eps(mu1, mu1)    {}", num(v.self1)));
    Ok(())
}

fn parse_eps_rule(text: &str) -> CliResult<EpsRule> {
    match text {
        "convex-margin" | "convex_margin" => Ok(EpsRule::ConvexMargin),
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(EpsRule::Fixed(v)),
            _ => Err(CliError::Validation(format!(
                "--eps-rule must be `convex-margin` or a positive number, got {other:?}"
            ))),
        },
    }
}

const BENCH_HEADER: [&str; 9] = [
    "d",
    "N",
    "trial",
    "eps",
    "outer_iters",
    "total_sinkhorn_iters",
    "objective",
    "status",
    "wall_time_seconds",
];

fn bench_row(r: &RunRecord) -> Vec<String> {
    vec![
        r.d.to_string(),
        r.n.to_string(),
        r.trial.to_string(),
        num(r.eps),
        r.outer_iters.to_string(),
        r.total_sinkhorn_iters.to_string(),
        opt_num(r.objective),
        serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        num(r.wall_time_seconds),
    ]
}

pub fn benchmark(args: &BenchmarkArgs, g: &GlobalOpts) -> CliResult<()> {
    let spec = BenchmarkSpec {
        dims: args.dims.clone(),
        sizes: args.sizes.clone(),
        trials: args.trials,
        time_budget: args.time_budget,
        eps_rule: parse_eps_rule(&args.eps_rule)?,
        generator: GeneratorSpec {
            sigma0: args.sigma0,
            sigma1: args.sigma1,
            seed: g.seed,
        },
        solve: solve_config(&args.solver, g.seed)?,
    };
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("--jobs: {e}")))?;
    // Cells in parallel; rows kept in (d, N, trial) order.
    let records: Vec<RunRecord> = pool.install(|| {
        spec.cells()
            .par_iter()
            .map(|&(d, n)| bench::run_cell(&spec, d, n))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let rows: Vec<Vec<String>> = records.iter().map(bench_row).collect();
    write_csv(args.out.as_deref(), &BENCH_HEADER, &rows)?;
    if args.out.is_some() && !g.quiet {
        for &d in &spec.dims {
            let means = bench::mean_times(&records, d);
            for (n, t) in &means {
                println!("d={d} N={n} mean wall time {}", num(*t));
            }
            if means.len() >= 2 {
                let xs: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
                let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
                println!("d={d} log-log slope {}", num(bench::loglog_slope(&xs, &ys)));
            }
        }
    }
    Ok(())
}

fn schedule(args: &SweepArgs) -> CliResult<Vec<f64>> {
    if let Some(list) = &args.eps_list {
        return Ok(list.clone());
    }
    match (args.eps_start, args.eps_factor, args.eps_count) {
        (Some(start), Some(factor), Some(count)) => {
            if !(factor > 0.0 && factor < 1.0) {
                return Err(CliError::Validation(format!(
                    "--eps-factor must lie in (0, 1), got {factor}"
                )));
            }
            if count == 0 {
                return Err(CliError::Validation(
                    "--eps-count must be at least 1".into(),
                ));
            }
            Ok((0..count).map(|k| start * factor.powi(k as i32)).collect())
        }
        _ => Err(CliError::Validation(
            "give --eps-list or all of --eps-start, --eps-factor, --eps-count".into(),
        )),
    }
}

pub fn sweep(args: &SweepArgs, g: &GlobalOpts) -> CliResult<()> {
    let eps = schedule(args)?;
    let (mu0, mu1) = load_pair(&args.input)?;
    let (d0, d1) = (mu0.dim(), mu1.dim());
    let cfg = solve_config(&args.solver, g.seed)?;
    let outcome = solvers::eps_sweep(&mu0, &mu1, &eps, &cfg)?;

    let mut header: Vec<String> = [
        "eps",
        "status",
        "objective",
        "s_eps",
        "residual",
        "grad_norm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..d0 {
        for j in 0..d1 {
            header.push(format!("a_{i}_{j}"));
        }
    }
    let rows: Vec<Vec<String>> = outcome
        .entries
        .iter()
        .map(|e| {
            let r = &e.report;
            let mut row = vec![
                num(e.eps),
                format!("{:?}", r.status).to_lowercase(),
                num(r.objective),
                opt_num(r.egw.map(|v| v.total)),
                num(r.residual),
                num(r.grad_norm),
            ];
            row.extend(r.final_a.iter().flatten().map(|x| num(*x)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(args.out.as_deref(), &header, &rows)?;
    match outcome.truncated {
        Some(why) => Err(CliError::Solver(why)),
        None => Ok(()),
    }
}

pub fn validate(args: &ValidateArgs, g: &GlobalOpts) -> CliResult<()> {
    let out = Out { quiet: g.quiet };
    let policy = egw_core::measures::WeightPolicy {
        renormalize: args.raw_weights,
        drop_zero_mass: args.drop_zero_mass,
    };
    let mut first_error = None;
    for path in &args.files {
        match input::load(path, policy) {
            Ok(mu) => {
                let m = mu.moments();
                out.line(
                    json!({
                        "file": path.display().to_string(),
                        "ok": true,
                        "atoms": mu.len(),
                        "dim": mu.dim(),
                        "m2": m.m2,
                        "m4": m.m4,
                        "mean_offset": mu.mean_offset(),
                    })
                    .to_string(),
                );
            }
            Err(e) => {
                out.line(
                    json!({"file": path.display().to_string(), "ok": false, "error": e.to_string()})
                        .to_string(),
                );
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}
