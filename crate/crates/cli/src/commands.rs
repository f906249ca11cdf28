//! Subcommand implementations. Each returns a [`RunReport`] and the exit
//! status it implies; the caller adds timing and prints it.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fbnorm::special::ln_sphere_area;
use fbnorm::{
    complex_bingham_exact, complex_to_real_theta, mc_sphere_estimate, norm_const, norm_const_grad,
    norm_const_ungated, sample_fb, sufficient_stats, CanonicalParams, ContourRule, FitConfig,
    FitInit, Optimizer, QuadSettings,
};
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{exit, CliError, CliResult};
use crate::fixtures::{self, Family};
use crate::io::{format_csv, write_atomic, DataMatrix, LoadedParams};
use crate::report::RunReport;

pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(report: RunReport) -> Self {
        Self {
            report,
            exit_code: exit::OK,
        }
    }
}

/// Quadrature flags shared by several subcommands.
#[derive(Debug, Clone, Copy)]
pub struct QuadArgs {
    pub n_points: usize,
    pub omega_d: f64,
    pub omega_u: f64,
    /// Fixed contour distance; `None` selects the saddle-point contour.
    pub d: Option<f64>,
}

impl Default for QuadArgs {
    fn default() -> Self {
        let q = QuadSettings::default();
        Self {
            n_points: q.n_points,
            omega_d: q.omega_d,
            omega_u: q.omega_u,
            d: None,
        }
    }
}

impl QuadArgs {
    pub fn settings(&self) -> QuadSettings {
        QuadSettings {
            n_points: self.n_points,
            omega_d: self.omega_d,
            omega_u: self.omega_u,
            contour: self.d.map_or(ContourRule::Saddlepoint, ContourRule::Fixed),
        }
    }
}

fn params_json(params: &LoadedParams) -> Value {
    json!({
        "theta": params.canonical.theta(),
        "gamma": params.canonical.gamma(),
        "frame": params.frame.as_ref().map(matrix_rows),
        "log_scale": params.log_scale,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn normconst(params: &LoadedParams, quad: &QuadArgs, log_only: bool) -> CliResult<Outcome> {
    let settings = quad.settings();
    let r = norm_const(&params.canonical, &settings)?;
    let mut report = RunReport::new(
        "normconst",
        json!({ "params": params_json(params), "quad": settings }),
    );
    // full parameters carry a constant factor e^{log_scale} in front of the canonical kernel
    let log_value = r.log_value + params.log_scale;
    let value = Some(log_value.exp()).filter(|v| v.is_finite() && *v > 0.0);
    report.outputs = json!({
        "value": if log_only { None } else { value },
        "log_value": log_value,
        "imag_residual": r.imag_residual,
    });
    if !log_only && value.is_none() {
        report
            .warnings
            .push("value is not representable as f64; see log_value".into());
    }
    Ok(Outcome::ok(report))
}

pub fn grad(params: &LoadedParams, quad: &QuadArgs) -> CliResult<Outcome> {
    let settings = quad.settings();
    let g = norm_const_grad(&params.canonical, &settings)?;
    let mut report = RunReport::new(
        "grad",
        json!({ "params": params_json(params), "quad": settings }),
    );
    report.outputs = json!({
        "log_value": g.log_value + params.log_scale,
        "imag_residual": g.imag_residual,
        "dtheta": g.dtheta,
        "dgamma": g.dgamma,
        "dlog_theta": g.dlog_theta,
        "dlog_gamma": g.dlog_gamma,
    });
    Ok(Outcome::ok(report))
}

/// Initial point for `fit`, read from JSON.
#[derive(Debug, Clone, Deserialize)]
pub struct InitFile {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub o: Option<Vec<Vec<f64>>>,
}

impl InitFile {
    pub fn parse(text: &str) -> CliResult<FitInit> {
        let f: InitFile = serde_json::from_str(text).map_err(|e| {
            CliError::Usage(format!(
                "init JSON must be {{\"theta\", \"gamma\", optional \"o\"}}: {e}"
            ))
        })?;
        let o = match f.o {
            None => None,
            Some(rows) => {
                let p = rows.len();
                if rows.iter().any(|r| r.len() != p) {
                    return Err(CliError::Usage("init frame o must be square".into()));
                }
                Some(DMatrix::from_row_iterator(p, p, rows.into_iter().flatten()))
            }
        };
        Ok(FitInit {
            theta: f.theta,
            gamma: f.gamma,
            o,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub optimizer: Optimizer,
    pub max_iter: usize,
    pub tol: f64,
    pub optimize_frame: bool,
    pub init: Option<FitInit>,
    pub quad: QuadArgs,
}

impl Default for FitArgs {
    fn default() -> Self {
        let c = FitConfig::default();
        Self {
            optimizer: c.optimizer,
            max_iter: c.max_iter,
            tol: c.grad_tol,
            optimize_frame: c.optimize_frame,
            init: None,
            quad: QuadArgs::default(),
        }
    }
}

pub fn fit(data: &DataMatrix, args: &FitArgs) -> CliResult<Outcome> {
    let stats = sufficient_stats(&data.values, data.p)?;
    let config = FitConfig {
        max_iter: args.max_iter,
        grad_tol: args.tol,
        optimize_frame: args.optimize_frame,
        optimizer: args.optimizer,
        init: args.init.clone(),
        quad: args.quad.settings(),
        ..FitConfig::default()
    };
    let r = fbnorm::fit(&stats, &config)?;
    let mut report = RunReport::new(
        "fit",
        json!({
            "n": data.n(),
            "p": data.p,
            "optimizer": config.optimizer,
            "max_iter": config.max_iter,
            "grad_tol": config.grad_tol,
            "optimize_frame": config.optimize_frame,
            "init": config.init.as_ref().map(|i| json!({
                "theta": i.theta, "gamma": i.gamma, "o": i.o.as_ref().map(matrix_rows),
            })),
            "quad": config.quad,
        }),
    );
    report.warnings.extend(data.warnings.iter().cloned());
    report.outputs = json!({
        "theta_hat": r.theta_hat,
        "theta_aligned": r.theta_aligned,
        "gamma_hat": r.gamma_hat,
        "o_hat": matrix_rows(&r.o_hat),
        "objective_trace": r.objective_trace,
        "iterations": r.iterations,
        "converged": r.converged,
        "final_grad_norm": r.final_grad_norm,
        "vhat_norm": r.vhat_norm,
    });
    let exit_code = if r.converged {
        exit::OK
    } else {
        report.status = "not_converged".into();
        exit::NON_CONVERGENCE
    };
    Ok(Outcome { report, exit_code })
}

pub fn sample(
    params: &LoadedParams,
    n: usize,
    seed: u64,
    max_tries: u64,
    out: &Path,
) -> CliResult<Outcome> {
    let batch = sample_fb(&params.canonical, n, seed, max_tries)?;
    let p = batch.dim();
    let data: Vec<f64> = match &params.frame {
        // canonical coordinates are y = O x, so x = Oᵀ y
        Some(o) => batch
            .rows()
            .flat_map(|y| {
                let x = o.transpose() * nalgebra::DVector::from_column_slice(y);
                x.iter().copied().collect::<Vec<_>>()
            })
            .collect(),
        None => batch.as_slice().to_vec(),
    };
    write_atomic(out, format_csv(p, &data).as_bytes())?;
    let mut report = RunReport::new(
        "sample",
        json!({ "params": params_json(params), "n": n, "seed": seed, "max_tries": max_tries }),
    );
    report.outputs = json!({
        "out": out.display().to_string(),
        "rows": batch.len(),
        "acceptance_rate": batch.acceptance_rate,
        "proposals": batch.proposals,
    });
    Ok(Outcome::ok(report))
}

/// One verification check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(group: &str, name: String, expected: f64, got: f64, error: f64, tolerance: f64) -> Self {
        Self {
            group: group.into(),
            name,
            expected,
            got,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }

    fn absolute(group: &str, name: String, expected: f64, got: f64, tolerance: f64) -> Self {
        Self::new(
            group,
            name,
            expected,
            got,
            (got - expected).abs(),
            tolerance,
        )
    }

    fn failed(group: &str, name: String, expected: f64, message: &str) -> Self {
        let mut c = Self::new(group, name, expected, f64::NAN, f64::INFINITY, 0.0);
        c.name.push_str(&format!(" ({message})"));
        c
    }
}

/// Table fixtures at N = 200, ω_d = 1, ω_u = 2, d = 1, each within 1e-6 absolute.
pub fn table_checks() -> Vec<Check> {
    let quad = QuadSettings::fixed_distance(1.0);
    fixtures::all()
        .into_iter()
        .map(|f| {
            let theta = match f.family {
                Family::Bingham => f.theta.clone(),
                Family::ComplexBingham => complex_to_real_theta(&f.theta),
            };
            let params = CanonicalParams::bingham(theta).expect("fixture parameters are valid");
            match norm_const(&params, &quad) {
                Ok(r) => Check::absolute("table", f.name(), f.expected, r.log_value.exp(), 1e-6),
                Err(e) => Check::failed("table", f.name(), f.expected, &e.to_string()),
            }
        })
        .collect()
}

/// Closed-form, Monte Carlo and convergence cross-checks.
pub fn oracle_checks(mc_samples: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let quad = QuadSettings::default();
    for f in fixtures::all()
        .into_iter()
        .filter(|f| f.family == Family::ComplexBingham)
    {
        match complex_bingham_exact(&f.theta) {
            Ok(exact) => checks.push(Check::absolute(
                "complex_exact",
                f.name(),
                f.expected,
                exact,
                1e-6,
            )),
            Err(e) => checks.push(Check::failed(
                "complex_exact",
                f.name(),
                f.expected,
                &e.to_string(),
            )),
        }
    }
    for p in 2..=10 {
        let exact = ln_sphere_area(p).exp();
        let name = format!("uniform p={p}");
        match norm_const(&CanonicalParams::uniform(p), &quad) {
            Ok(r) => checks.push(Check::absolute(
                "uniform",
                name,
                exact,
                r.log_value.exp(),
                1e-8,
            )),
            Err(e) => checks.push(Check::failed("uniform", name, exact, &e.to_string())),
        }
    }
    for kappa in [0.5f64, 1.0, 5.0, 20.0] {
        let exact = 4.0 * PI * kappa.sinh() / kappa;
        let params = CanonicalParams::new(vec![0.0; 3], vec![0.0, 0.0, kappa]).expect("valid");
        let name = format!("vmf S^2 kappa={kappa}");
        match norm_const(&params, &quad) {
            Ok(r) => checks.push(Check::absolute("vmf", name, exact, r.log_value.exp(), 1e-6)),
            Err(e) => checks.push(Check::failed("vmf", name, exact, &e.to_string())),
        }
    }
    let table1 = CanonicalParams::bingham(vec![0.0, 1.0, 2.0, 5.0]).expect("valid");
    if mc_samples >= 1000 {
        match mc_sphere_estimate(&table1, mc_samples, 20240601) {
            Ok(mc) => checks.push(Check::new(
                "monte_carlo",
                format!("table1 4-dim kappa=5, {mc_samples} samples (tolerance 3 stderr)"),
                4.238950,
                mc.estimate,
                (mc.estimate - 4.238950).abs(),
                3.0 * mc.stderr,
            )),
            Err(e) => checks.push(Check::failed(
                "monte_carlo",
                "table1 kappa=5".into(),
                4.238950,
                &e.to_string(),
            )),
        }
    }
    let fixed = QuadSettings::fixed_distance(1.0);
    match convergence_errors(&table1, &fixed, &[50, 100, 200], 800) {
        Ok(errs) => {
            let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
            checks.push(Check::new(
                "convergence",
                format!(
                    "table1 4-dim kappa=5 errors vs N=800 at N=50,100,200: {:.3e}, {:.3e}, {:.3e} (strictly decreasing: {decreasing})",
                    errs[0], errs[1], errs[2]
                ),
                0.0,
                errs[2],
                if decreasing { errs[2] } else { f64::INFINITY },
                1e-6,
            ))
        }
        Err(e) => checks.push(Check::failed(
            "convergence",
            "table1 kappa=5".into(),
            0.0,
            &e.to_string(),
        )),
    }
    checks
}

/// `|C_N - C_ref|` for each N, with the reference at `n_ref` nodes.
pub fn convergence_errors(
    params: &CanonicalParams,
    quad: &QuadSettings,
    ns: &[usize],
    n_ref: usize,
) -> fbnorm::Result<Vec<f64>> {
    let reference = fbnorm::reference_quadrature(params, n_ref, &quad.with_points(n_ref / 4))?;
    ns.iter()
        .map(|&n| {
            Ok((norm_const_ungated(params, &quad.with_points(n))?
                .log_value
                .exp()
                - reference)
                .abs())
        })
        .collect()
}

pub fn verify(mc_samples: u64) -> CliResult<Outcome> {
    let start = Instant::now();
    let tables = table_checks();
    let table_ms = start.elapsed().as_secs_f64() * 1e3;
    let oracles = oracle_checks(mc_samples);
    let passed = tables.iter().chain(&oracles).filter(|c| c.pass).count();
    let total = tables.len() + oracles.len();
    let mut report = RunReport::new(
        "verify",
        json!({ "quad": QuadSettings::fixed_distance(1.0), "tolerance": 1e-6, "mc_samples": mc_samples }),
    );
    report.outputs = json!({
        "passed": passed,
        "total": total,
        "table_suite_ms": table_ms,
        "tables": tables,
        "oracles": oracles,
    });
    let exit_code = if passed == total {
        exit::OK
    } else {
        report.status = "failed".into();
        exit::ACCURACY
    };
    Ok(Outcome { report, exit_code })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub p: usize,
    pub median_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy > 0.0 {
            sxy * sxy / (sxx * syy)
        } else {
            1.0
        },
    }
}

/// Random parameters for timing: θ_i ~ U(0, 10), γ_i ~ U(-1, 1).
pub fn bench_params(p: usize, rng: &mut ChaCha8Rng) -> CanonicalParams {
    let theta = (0..p).map(|_| 10.0 * rng.random::<f64>()).collect();
    let gamma = (0..p).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    CanonicalParams::new(theta, gamma).expect("finite parameters")
}

/// Median wall time of `norm_const` per dimension.
pub fn bench_rows(
    p_list: &[usize],
    quad: &QuadSettings,
    repeats: usize,
    seed: u64,
) -> CliResult<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let params = bench_params(p, &mut rng);
        norm_const(&params, quad)?;
        let mut times: Vec<f64> = (0..repeats.max(1))
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(norm_const(std::hint::black_box(&params), quad)).ok();
                t.elapsed().as_secs_f64() * 1e3
            })
            .collect();
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            p,
            median_ms: times[times.len() / 2],
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("p,median_ms\n");
    for r in rows {
        s.push_str(&format!("{},{}\n", r.p, r.median_ms));
    }
    s
}

pub fn bench(
    p_list: &[usize],
    quad: &QuadArgs,
    repeats: usize,
    seed: u64,
    csv_out: Option<&Path>,
) -> CliResult<Outcome> {
    if p_list.is_empty() || p_list.iter().any(|&p| p < 2) {
        return Err(CliError::Usage(
            "p list must be non-empty with every p >= 2".into(),
        ));
    }
    let settings = quad.settings();
    let rows = bench_rows(p_list, &settings, repeats, seed)?;
    if let Some(path) = csv_out {
        write_atomic(path, bench_csv(&rows).as_bytes())?;
    }
    let x: Vec<f64> = rows.iter().map(|r| r.p as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.median_ms).collect();
    let fit = (rows.len() >= 2).then(|| linear_fit(&x, &y));
    let mut report = RunReport::new(
        "bench",
        json!({ "p_list": p_list, "quad": settings, "repeats": repeats, "seed": seed }),
    );
    report.outputs = json!({
        "rows": rows,
        "linear_fit": fit,
        "csv": csv_out.map(|p| p.display().to_string()),
    });
    Ok(Outcome::ok(report))
}
