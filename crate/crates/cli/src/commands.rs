use std::fs;
use std::path::PathBuf;

use rayleigh_core::discretization::Grid;
use rayleigh_core::dispersion::{certified_eps_limit, continue_curve, CurveOptions};
use rayleigh_core::lyapunov_schmidt::RayleighOperators;
use rayleigh_core::neutral_modes::{line_grid, solve_neutral, solve_truncated_line, NeutralMode};
use rayleigh_core::output::{self, Table};
use rayleigh_core::profiles::{rescale_profile, ShearProfile};
use rayleigh_core::singular_limits::lambda_limit;
use rayleigh_core::validate::{run_validation, ValidateOptions};
use rayleigh_core::vortex_sheet::{coupling_scan, scaling_scan, solve_sheet_reduced, SheetSetup, DEFAULT_H_XI};
use serde_json::{json, Value};

use crate::config::{Family, RunConfig};
use crate::error::CliError;

/// Half-width of the truncated line used for the sheet profile.
pub const SHEET_HALF_WIDTH: f64 = 16.0;
/// Relative tolerance of the dispersion slope check.
pub const SLOPE_TOL: f64 = 0.05;
pub const COUPLING_K: f64 = 64.0;
pub const COUPLING_LS: [f64; 3] = [16.0, 32.0, 64.0];
pub const COUPLING_SLOPE: (f64, f64) = (-0.65, -0.35);
pub const GROWTH_RATIO: (f64, f64) = (1.4, 2.6);

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_outputs(cfg: &RunConfig, name: &str, table: &Table, results: Value) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let csv = cfg.out_dir.join(format!("{name}.csv"));
    fs::write(&csv, table.to_csv()?)?;
    let meta = output::metadata(cfg, results)?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(cfg.out_dir.join(format!("{name}.json")), text + "\n")?;
    Ok(csv)
}

fn channel_profile(cfg: &RunConfig) -> Result<ShearProfile, CliError> {
    let p = cfg.profile()?;
    Ok(match p.family {
        Family::Sine => ShearProfile::sine(p.beta.unwrap_or(2.0))?,
        Family::Rescaled => rescale_profile(&ShearProfile::sheet_base(), p.k.unwrap_or(cfg.k))?,
        Family::Sheet => ShearProfile::sheet_base(),
    })
}

fn neutral_mode(cfg: &RunConfig, profile: &ShearProfile) -> Result<NeutralMode, CliError> {
    if cfg.profile()?.family == Family::Sheet {
        let grid = line_grid(SHEET_HALF_WIDTH, 2.0 * SHEET_HALF_WIDTH / (cfg.n as f64 + 1.0))?;
        Ok(solve_truncated_line(profile, SHEET_HALF_WIDTH, &grid)?)
    } else {
        Ok(solve_neutral(profile, &Grid::channel(cfg.n)?)?)
    }
}

pub fn neutral(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = channel_profile(cfg)?;
    let mode = neutral_mode(cfg, &profile)?;
    let mut summary = output::neutral_summary(&mode);
    summary["alpha"] = json!(mode.alpha_sq.sqrt());
    let path = write_outputs(cfg, "neutral", &output::neutral_table(&mode)?, summary)?;
    println!("alpha_sq = {:.10}  ->  {}", mode.alpha_sq, path.display());
    Ok(())
}

pub fn lambda(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = channel_profile(cfg)?;
    let mode = neutral_mode(cfg, &profile)?;
    let l = lambda_limit(&profile, &mode, &cfg.taus())?;
    let path = write_outputs(cfg, "lambda", &output::lambda_table(&l)?, output::lambda_summary(&l))?;
    println!("lambda = {:.8} + {:.8}i  ->  {}", l.c, l.imag, path.display());
    Ok(())
}

pub fn dispersion(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.profile()?.family == Family::Sheet {
        return Err(CliError::Usage("dispersion needs a channel profile (sine or rescaled)".into()));
    }
    let profile = channel_profile(cfg)?;
    let mode = neutral_mode(cfg, &profile)?;
    let l = lambda_limit(&profile, &mode, &cfg.taus())?;
    let ops = RayleighOperators::new(&profile, &mode)?;
    let options = CurveOptions { warm_start: cfg.warm_start, parallel: cfg.parallel, tol: cfg.tol, pencil: true };
    let curve = continue_curve(&ops, &l, &cfg.eps_grid(), &options)?;
    let flagged: Vec<f64> = curve.points.iter().filter(|p| !p.is_ok()).map(|p| p.eps).collect();
    for p in curve.points.iter().filter(|p| !p.is_ok()) {
        eprintln!("warning: eps = {:.6e} not certified: {}", p.eps, p.failure.as_deref().unwrap_or("winding != 1"));
    }
    let limit = certified_eps_limit(&ops, &l, cfg.eps_min, 4.0, 12);
    let slope_pass = curve.slope_relative_deviation <= SLOPE_TOL;
    let results = json!({
        "lambda": { "re": l.as_complex.re, "im": l.as_complex.im },
        "slope": curve.slope,
        "slope_target": curve.slope_target,
        "slope_relative_deviation": curve.slope_relative_deviation,
        "slope_tolerance": SLOPE_TOL,
        "slope_check": verdict(slope_pass),
        "all_certified": flagged.is_empty(),
        "flagged_eps": flagged,
        "certified_eps_limit": limit,
        "max_pencil_gap": curve.points.iter().filter_map(|p| p.pencil_gap()).fold(0.0, f64::max),
    });
    let path = write_outputs(cfg, "dispersion", &output::dispersion_table(&curve)?, results)?;
    println!(
        "{} points, {} flagged, slope {:.6} (target {:.6}) {}  ->  {}",
        curve.points.len(),
        flagged.len(),
        curve.slope,
        curve.slope_target,
        verdict(slope_pass),
        path.display()
    );
    Ok(())
}

fn require_sheet(cfg: &RunConfig) -> Result<ShearProfile, CliError> {
    match &cfg.profile {
        None => Ok(ShearProfile::sheet_base()),
        Some(p) if p.family == Family::Sheet => Ok(ShearProfile::sheet_base()),
        Some(_) => Err(CliError::Usage(format!("{} works on the sheet profile only", cfg.command))),
    }
}

pub fn sheet(cfg: &RunConfig) -> Result<(), CliError> {
    let base = require_sheet(cfg)?;
    let scan = scaling_scan(&base, &cfg.k_list, cfg.eps_hat, cfg.l, DEFAULT_H_XI, cfg.parallel)?;
    let ok: Vec<_> = scan.rows.iter().filter(|r| r.failure.is_none()).collect();
    for r in scan.rows.iter().filter(|r| r.failure.is_some()) {
        eprintln!("warning: k = {} failed: {}", r.k, r.failure.as_deref().unwrap_or(""));
    }
    let growth_ratios: Vec<f64> = ok.windows(2).map(|w| w[1].growth_rate / w[0].growth_rate).collect();
    let growth_pass = !growth_ratios.is_empty() && growth_ratios.iter().all(|r| (GROWTH_RATIO.0..=GROWTH_RATIO.1).contains(r));
    let im_ratios: Vec<f64> = ok.windows(2).map(|w| w[0].im_c_glued / w[1].im_c_glued).collect();
    let im_pass = im_ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let monotone = ok.windows(2).all(|w| (w[1].alpha_ratio - scan.alpha0).abs() <= (w[0].alpha_ratio - scan.alpha0).abs());
    let reference = ok.first().map(|r| r.multiscale_constant);
    let multiscale_pass = reference.is_some_and(|c0| ok.iter().all(|r| r.multiscale_constant <= c0 * (1.0 + 1e-9)));

    let coupling = coupling_scan(&base, COUPLING_K, &COUPLING_LS, cfg.eps_hat * COUPLING_K * COUPLING_K, DEFAULT_H_XI)?;
    let in_band = |s: f64| (COUPLING_SLOPE.0..=COUPLING_SLOPE.1).contains(&s);
    let coupling_pass = in_band(coupling.slope_b) && in_band(coupling.slope_c);

    let rows: Vec<Value> = scan
        .rows
        .iter()
        .map(|r| {
            json!({
                "k": r.k,
                "xi_max": r.xi_max,
                "lambda0": { "re": r.lambda0.re, "im": r.lambda0.im },
                "c_channel": { "re": r.c_channel.re, "im": r.c_channel.im },
                "c_glued": { "re": r.c_glued.re, "im": r.c_glued.im },
                "certificate_radius": r.certificate_radius,
                "multiscale_constant": r.multiscale_constant,
                "failure": r.failure,
            })
        })
        .collect();
    let results = json!({
        "L": scan.l,
        "h_xi": scan.h_xi,
        "alpha0": scan.alpha0,
        "rows": rows,
        "growth_ratios": growth_ratios,
        "growth_ratio_band": [GROWTH_RATIO.0, GROWTH_RATIO.1],
        "growth_check": verdict(growth_pass),
        "im_c_ratios": im_ratios,
        "im_c_check": verdict(im_pass),
        "alpha_ratio_monotone": monotone,
        "multiscale_reference_constant": reference,
        "multiscale_check": verdict(multiscale_pass),
        "coupling": {
            "k": coupling.k,
            "rows": coupling.rows.iter().map(|r| json!({ "L": r.l, "B": r.b, "C": r.c })).collect::<Vec<_>>(),
            "slope_B": coupling.slope_b,
            "slope_C": coupling.slope_c,
            "slope_band": [COUPLING_SLOPE.0, COUPLING_SLOPE.1],
            "check": verdict(coupling_pass),
        },
    });
    let path = write_outputs(cfg, "sheet_scan", &output::sheet_table(&scan)?, results)?;
    println!(
        "{} rows, growth {}, Im c {}, coupling slopes {:.3}/{:.3} {}  ->  {}",
        scan.rows.len(),
        verdict(growth_pass),
        verdict(im_pass),
        coupling.slope_b,
        coupling.slope_c,
        verdict(coupling_pass),
        path.display()
    );
    Ok(())
}

pub fn glue(cfg: &RunConfig) -> Result<(), CliError> {
    let base = require_sheet(cfg)?;
    let setup = SheetSetup::new(&base, cfg.k, cfg.l, DEFAULT_H_XI)?;
    let g = solve_sheet_reduced(&setup, cfg.eps_hat * cfg.k * cfg.k, cfg.tol)?;
    let results = json!({
        "k": g.k,
        "L": g.l,
        "L_eff": g.l_eff,
        "eps": g.eps,
        "delta": g.delta,
        "c": { "re": g.c.re, "im": g.c.im },
        "winding": g.winding,
        "certificate_radius": g.certificate_radius,
        "assembled_residual": g.assembled_residual,
        "block_iterations": g.block_iterations,
        "block_contraction": g.block_contraction,
        "psi_h1": g.psi_h1,
        "phiout_z": g.phiout_z,
        "multiscale_constant": g.multiscale_constant,
        "xi_max": setup.xi_max,
        "alpha0": setup.alpha0,
        "lambda0": { "re": setup.lambda0.as_complex.re, "im": setup.lambda0.as_complex.im },
    });
    let path = write_outputs(cfg, "glue", &output::glue_table(&setup, &g)?, results)?;
    println!("c = {:.10e} + {:.10e}i, residual {:.3e}  ->  {}", g.c.re, g.c.im, g.assembled_residual, path.display());
    Ok(())
}

pub fn validate(n: usize, flip_lambda_sign: bool) -> Result<(), CliError> {
    let report = run_validation(ValidateOptions { n, flip_lambda_sign });
    print!("{}", report.table());
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join("; ")))
    }
}
