use std::path::Path;

use egw_core::egw::AuxMatrix;
use egw_core::measures::{load_measure, DiscreteMeasure, Raster, WeightPolicy};
use egw_core::solvers::{Algorithm, LMode, Projection, SolveConfig};
use image::imageops::FilterType;

use crate::args::{AlgoArg, InputOpts, SolverOpts};
use crate::error::{CliError, CliResult};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "pgm", "pbm", "ppm", "pnm", "bmp"];

pub fn policy(opts: &InputOpts) -> WeightPolicy {
    WeightPolicy {
        renormalize: opts.raw_weights,
        drop_zero_mass: opts.drop_zero_mass,
    }
}

pub fn load(path: &Path, policy: WeightPolicy) -> CliResult<DiscreteMeasure> {
    if !path.exists() {
        return Err(CliError::io(path.display(), "no such file"));
    }
    load_measure(path, policy).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Validation(m) | CliError::Solver(m) => {
            CliError::Validation(format!("{}: {m}", path.display()))
        }
    })
}

/// Both measures, centered unless `--no-center`.
pub fn load_pair(opts: &InputOpts) -> CliResult<(DiscreteMeasure, DiscreteMeasure)> {
    let p = policy(opts);
    let mu0 = load(&opts.mu0, p)?;
    let mu1 = load(&opts.mu1, p)?;
    Ok(if opts.no_center {
        (mu0, mu1)
    } else {
        (mu0.center(), mu1.center())
    })
}

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Grayscale raster in `[0, 1]`, downsampled so its longest side is at most
/// `max_side`, then padded with `pad` zero pixels.
pub fn load_raster(path: &Path, max_side: u32, pad: usize) -> CliResult<Raster> {
    if !path.exists() {
        return Err(CliError::io(path.display(), "no such file"));
    }
    let img = image::open(path)
        .map_err(|e| CliError::Validation(format!("{}: cannot decode image: {e}", path.display())))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let img = if w.max(h) > max_side {
        let scale = max_side as f64 / w.max(h) as f64;
        let nw = ((w as f64 * scale).round() as u32).max(1);
        let nh = ((h as f64 * scale).round() as u32).max(1);
        image::imageops::resize(&img, nw, nh, FilterType::Triangle)
    } else {
        img
    };
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    let raster = Raster::new(w as usize, h as usize, pixels)?;
    Ok(if pad > 0 { raster.pad(pad) } else { raster })
}

pub fn parse_aux(text: &str, d0: usize, d1: usize) -> CliResult<AuxMatrix> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("--aux: {e}")))?;
    let a = AuxMatrix::from_rows(&rows)?;
    if a.dim() != (d0, d1) {
        return Err(CliError::Validation(format!(
            "--aux is {:?}, expected {d0}x{d1}",
            a.dim()
        )));
    }
    Ok(a)
}

pub fn solve_config(opts: &SolverOpts, seed: u64) -> CliResult<SolveConfig> {
    let l_mode = match opts.l.as_str() {
        "theoretical" => LMode::Theoretical,
        "search" => LMode::LineSearch,
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => LMode::Fixed(v),
            _ => {
                return Err(CliError::Validation(format!(
                    "--L must be `theoretical`, `search` or a positive number, got {other:?}"
                )))
            }
        },
    };
    Ok(SolveConfig {
        algorithm: match opts.algo {
            AlgoArg::Fgm => Algorithm::Fgm,
            AlgoArg::Adaptive => Algorithm::Adaptive,
            AlgoArg::Auto => Algorithm::Auto,
        },
        grad_tol: opts.grad_tol,
        max_outer_iters: opts.max_iters,
        delta_oracle: opts.delta,
        l_mode,
        warm_start: !opts.no_warm_start,
        seed,
        projection: if opts.box_projection {
            Projection::Box
        } else {
            Projection::FrobeniusBall
        },
        eta: opts.eta,
        sinkhorn_max_iters: opts.sinkhorn_max_iters,
        sinkhorn_min_tol: opts.sinkhorn_min_tol,
        record_objective: !opts.no_objective,
        ..SolveConfig::default()
    })
}

pub fn check_eps(eps: f64) -> CliResult<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "--eps must be positive, got {eps}"
        )))
    }
}
