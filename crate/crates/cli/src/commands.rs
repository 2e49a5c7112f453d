//! The subcommands. Every CSV row is self-describing and bit-identical for
//! identical configurations.

use std::path::Path;
use std::time::Instant;

use pnp_kernel::bounds;
use pnp_kernel::denoiser::{guide_for, DENSE_CHECK_LIMIT};
use pnp_kernel::forward::Task;
use pnp_kernel::image::{add_noise, psnr, write_pgm};
use pnp_kernel::linop::{d_inner, d_norm, norm2, LinearMap};
use pnp_kernel::solver::{self, Algorithm, LossSpec};
use pnp_kernel::spectral::{
    self, make_update_operator, measure_contraction, ContractionReport, OperatorKind,
};
use pnp_kernel::{KernelDenoiser, VecImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GuideSource};
use crate::{CliError, Context};

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn save_pgm(path: &Path, img: &VecImage) -> Result<(), CliError> {
    write_pgm(path, img).map_err(|e| CliError::from_core(e, Some(path)))
}

/// A degraded instance with its denoiser.
struct Instance {
    truth: VecImage,
    loss: LossSpec,
    den: KernelDenoiser,
}

fn instance(
    cfg: &ExperimentConfig,
    truth: &VecImage,
    mu: f64,
    stride: usize,
    h: f64,
    source: GuideSource,
) -> Result<Instance, CliError> {
    let model = cfg.model(truth.width(), truth.height(), mu, stride)?;
    let clean = model.apply(truth.as_slice())?;
    let b = add_noise(&clean, cfg.noise, cfg.seed)?;
    let guide = match source {
        GuideSource::Observed => guide_for(&model, &b)?,
        GuideSource::Clean => truth.clone(),
    };
    let den = KernelDenoiser::build(&guide, &cfg.kernel_params(h)?)?.with_mode(cfg.mode()?)?;
    Ok(Instance {
        truth: truth.clone(),
        loss: LossSpec::new(model, b)?,
        den,
    })
}

fn parameter_of(alg: Algorithm, gamma: f64, rho: f64) -> (&'static str, f64) {
    if alg.is_admm() {
        ("rho", rho)
    } else {
        ("gamma", gamma)
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    k: usize,
    residual: f64,
    psnr: Option<f64>,
    cumulative_cg_iters: usize,
}

#[derive(Serialize)]
struct RunReport {
    task: String,
    algorithm: String,
    denoiser: String,
    width: usize,
    height: usize,
    iterations: usize,
    converged: bool,
    psnr_guide: f64,
    psnr_final: f64,
    measured_contraction: Option<f64>,
    bound: Option<f64>,
    formula: Option<String>,
    wall_time_s: f64,
}

pub fn reconstruct(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let start = Instant::now();
    let truth = cfg.load_image(false)?;
    let source = cfg.guide_source(false)?;
    let inst = instance(cfg, &truth, cfg.mask.mu, cfg.stride, cfg.kernel.h, source)?;
    let alg = cfg.algorithms()?[0];
    let scfg = cfg.solver_config(alg, cfg.gamma, cfg.rho)?;
    let traj = solver::run(&inst.loss, &inst.den, &scfg, Some(truth.as_slice()))?;

    let rows: Vec<TrajectoryRow> = traj
        .records
        .iter()
        .map(|r| TrajectoryRow {
            k: r.k,
            residual: r.residual,
            psnr: r.psnr,
            cumulative_cg_iters: r.cumulative_cg_iters,
        })
        .collect();
    write_csv(&ctx.path("trajectory.csv"), &rows)?;

    let model = inst.loss.model();
    let output = truth.with_data(traj.x.clone())?.clipped();
    save_pgm(&ctx.path("reconstruction.pgm"), &output)?;
    let (mw, mh) = model.output_dims();
    save_pgm(
        &ctx.path("degraded.pgm"),
        &VecImage::new(inst.loss.b().to_vec(), mw, mh)?,
    )?;
    let guide = guide_for(model, inst.loss.b())?;

    let (_, param) = parameter_of(alg, cfg.gamma, cfg.rho);
    let contraction = if cfg.measure {
        Some(measure_contraction(
            model,
            &inst.den,
            alg,
            param,
            &cfg.power(),
        )?)
    } else {
        None
    };
    let report = RunReport {
        task: model.task().to_string(),
        algorithm: alg.to_string(),
        denoiser: inst.den.mode().to_string(),
        width: truth.width(),
        height: truth.height(),
        iterations: traj.iterations(),
        converged: traj.converged(),
        psnr_guide: psnr(guide.as_slice(), truth.as_slice())?,
        psnr_final: psnr(output.as_slice(), inst.truth.as_slice())?,
        measured_contraction: contraction.as_ref().map(|c| c.measured.value),
        bound: contraction
            .as_ref()
            .and_then(ContractionReport::factor_bound),
        formula: contraction
            .as_ref()
            .and_then(|c| c.bound.as_ref())
            .map(|b| b.formula.to_string()),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&ctx.path("report.json"), &report)?;
    println!(
        "{} {}: {} iterations ({}), PSNR {:.2} dB (guide {:.2} dB)",
        report.task,
        report.algorithm,
        report.iterations,
        if report.converged {
            "converged"
        } else {
            "iteration cap"
        },
        report.psnr_final,
        report.psnr_guide
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    task: String,
    algorithm: String,
    denoiser: String,
    guide: String,
    width: usize,
    height: usize,
    mu: f64,
    stride: Option<usize>,
    blur_size: Option<usize>,
    blur_std: Option<f64>,
    patch_radius: usize,
    window_radius: usize,
    h: f64,
    profile: String,
    noise: f64,
    seed: u64,
    parameter_name: String,
    parameter_value: f64,
    measured: f64,
    gap_name: String,
    gap_value: f64,
    formula: Option<String>,
    bound: Option<f64>,
    converged: bool,
    iterations: usize,
    gap_converged: bool,
    status: String,
}

struct GridPoint {
    algorithm: Algorithm,
    mu: f64,
    stride: usize,
    h: f64,
    parameter: f64,
}

fn sweep_row(
    cfg: &ExperimentConfig,
    truth: &VecImage,
    source: GuideSource,
    p: &GridPoint,
) -> Result<SweepRow, CliError> {
    let inst = instance(cfg, truth, p.mu, p.stride, p.h, source)?;
    let model = inst.loss.model();
    let report = measure_contraction(model, &inst.den, p.algorithm, p.parameter, &cfg.power())?;
    let (name, value) = parameter_of(p.algorithm, p.parameter, p.parameter);
    let task = model.task();
    let blur = (task != Task::Inpainting && cfg.blur.path.is_none())
        .then_some((cfg.blur.size, cfg.blur.std));
    let status = match (&report.bound, report.check()) {
        (None, _) => "no_bound",
        (Some(_), Ok(())) => "ok",
        (Some(_), Err(_)) => "violation",
    };
    Ok(SweepRow {
        task: task.to_string(),
        algorithm: p.algorithm.to_string(),
        denoiser: inst.den.mode().to_string(),
        guide: match source {
            GuideSource::Observed => "observed".into(),
            GuideSource::Clean => "clean".into(),
        },
        width: truth.width(),
        height: truth.height(),
        mu: model.mu(),
        stride: (task == Task::Superresolution).then_some(p.stride),
        blur_size: blur.map(|b| b.0),
        blur_std: blur.map(|b| b.1),
        patch_radius: cfg.kernel.patch_radius,
        window_radius: cfg.kernel.window_radius,
        h: p.h,
        profile: cfg.kernel.profile.clone(),
        noise: cfg.noise,
        seed: cfg.seed,
        parameter_name: name.into(),
        parameter_value: value,
        measured: report.measured.value,
        gap_name: if p.algorithm.is_admm() {
            "zeta_star"
        } else {
            "lambda2"
        }
        .into(),
        gap_value: report.gap_quantity.value,
        formula: report.bound.as_ref().map(|b| b.formula.to_string()),
        bound: report.factor_bound(),
        converged: report.measured.converged,
        iterations: report.measured.iterations,
        gap_converged: report.gap_quantity.converged,
        status: status.into(),
    })
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let truth = cfg.load_image(true)?;
    let source = cfg.guide_source(true)?;
    let mut points = Vec::new();
    for algorithm in cfg.algorithms()? {
        let params = if algorithm.is_admm() {
            cfg.rho_grid()
        } else {
            cfg.gamma_grid()
        };
        for &mu in &cfg.mu_grid() {
            for &stride in &cfg.stride_grid() {
                for &h in &cfg.h_grid() {
                    for &parameter in &params {
                        points.push(GridPoint {
                            algorithm,
                            mu,
                            stride,
                            h,
                            parameter,
                        });
                    }
                }
            }
        }
    }
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|p| sweep_row(cfg, &truth, source, p))
        .collect::<Result<_, _>>()?;
    write_csv(&ctx.path("sweep.csv"), &rows)?;
    let bad: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == "violation")
        .map(|(i, r)| {
            format!(
                "row {}: {} mu={} h={} {}={} measured {} bound {:?}",
                i + 1,
                r.algorithm,
                r.mu,
                r.h,
                r.parameter_name,
                r.parameter_value,
                r.measured,
                r.bound
            )
        })
        .collect();
    println!(
        "{} grid points written to {}",
        rows.len(),
        ctx.path("sweep.csv").display()
    );
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "bound violated at\n  {}",
            bad.join("\n  ")
        )))
    }
}

#[derive(Serialize)]
struct CounterexampleRow {
    n: usize,
    dense_norm: f64,
    closed_form: f64,
    ratio: f64,
}

pub fn counterexample(ctx: &Context) -> Result<(), CliError> {
    let rows: Vec<CounterexampleRow> = (3..=ctx.cfg.counterexample.n_max)
        .into_par_iter()
        .map(|n| {
            let dense_norm = bounds::counterexample_norm(n)?;
            let closed_form = bounds::counterexample_closed_form(n);
            if !(dense_norm > 1.0) {
                return Err(CliError::Verification(format!(
                    "n = {n}: norm {dense_norm} is not above 1"
                )));
            }
            Ok(CounterexampleRow {
                n,
                dense_norm,
                closed_form,
                ratio: dense_norm / closed_form,
            })
        })
        .collect::<Result<_, _>>()?;
    write_csv(&ctx.path("counterexample.csv"), &rows)?;
    println!("{} rows, all norms above 1", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct DenoiseReport {
    denoiser: String,
    width: usize,
    height: usize,
    nnz: usize,
    noise: f64,
    psnr_noisy: f64,
    psnr_denoised: f64,
}

pub fn denoise(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let truth = cfg.load_image(false)?;
    let noisy = truth.with_data(add_noise(truth.as_slice(), cfg.noise, cfg.seed)?)?;
    let guide = match cfg.guide_source(false)? {
        GuideSource::Observed => noisy.clone(),
        GuideSource::Clean => truth.clone(),
    };
    let den =
        KernelDenoiser::build(&guide, &cfg.kernel_params(cfg.kernel.h)?)?.with_mode(cfg.mode()?)?;
    let out = noisy.with_data(den.apply(noisy.as_slice())?)?;
    save_pgm(&ctx.path("noisy.pgm"), &noisy.clipped())?;
    save_pgm(&ctx.path("denoised.pgm"), &out.clipped())?;
    let report = DenoiseReport {
        denoiser: den.mode().to_string(),
        width: truth.width(),
        height: truth.height(),
        nnz: den.nnz(),
        noise: cfg.noise,
        psnr_noisy: psnr(noisy.as_slice(), truth.as_slice())?,
        psnr_denoised: psnr(out.as_slice(), truth.as_slice())?,
    };
    write_json(&ctx.path("denoise.json"), &report)?;
    println!(
        "PSNR {:.2} dB -> {:.2} dB",
        report.psnr_noisy, report.psnr_denoised
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    passed: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

struct Checks(Vec<CheckRow>);

impl Checks {
    /// Records `value <= tolerance`.
    fn at_most(&mut self, check: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.0.push(CheckRow {
            check: check.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        });
    }

    fn holds(&mut self, check: &str, ok: bool, detail: impl Into<String>) {
        self.at_most(check, if ok { 0.0 } else { 1.0 }, 0.0, detail);
    }
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let truth = cfg.load_image(true)?;
    let inst = instance(
        cfg,
        &truth,
        cfg.mask.mu,
        cfg.stride,
        cfg.kernel.h,
        cfg.guide_source(false)?,
    )?;
    let (model, den) = (inst.loss.model(), &inst.den);
    let power = cfg.power();
    let n = den.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Checks(Vec::new());

    let report = den.verify_assumptions();
    checks.holds(
        "kernel_symmetric_unit_diagonal_nonnegative",
        report.symmetry_residual == 0.0 && report.diagonal_residual == 0.0 && report.nonnegative,
        format!(
            "symmetry {:e}, diagonal {:e}",
            report.symmetry_residual, report.diagonal_residual
        ),
    );
    checks.holds("kernel_irreducible", report.irreducible, "");
    match report.min_eigenvalue {
        Some(m) => checks.at_most("kernel_psd", -m, 1e-8, format!("min eigenvalue {m:e}")),
        None => checks.holds(
            "kernel_psd",
            true,
            format!("skipped above {DENSE_CHECK_LIMIT} pixels"),
        ),
    }
    let tol = if den.scaling().is_some() {
        1e-10
    } else {
        1e-12
    };
    checks.at_most(
        "constants_preserved",
        report.row_sum_residual,
        tol,
        "max |We - e|",
    );

    let weights = den.inner_weights();
    let (x, y) = (random_vec(n, &mut rng), random_vec(n, &mut rng));
    let lhs = d_inner(&den.apply(&x)?, &y, weights)?;
    let rhs = d_inner(&x, &den.apply(&y)?, weights)?;
    let scale = d_norm(&x, weights)? * d_norm(&y, weights)?;
    checks.at_most(
        "denoiser_self_adjoint",
        (lhs - rhs).abs() / scale,
        1e-10,
        "relative, in the inner product of W",
    );
    let w_norm = spectral::power_sigma_d(den, weights, &power)?.value;
    checks.at_most(
        "denoiser_unit_norm",
        (w_norm - 1.0).abs(),
        1e-6,
        format!("power estimate {w_norm}"),
    );

    checks.holds("restricted_nullity", model.check_rnp(), "");
    let a_norm = spectral::power_sigma(model, &power)?.value;
    checks.at_most(
        "forward_nonexpansive",
        a_norm - 1.0,
        1e-8,
        format!("||A||_2 = {a_norm}"),
    );
    let ym = random_vec(model.m(), &mut rng);
    let (lhs, rhs) = (
        pnp_kernel::linop::dot(&model.apply(&x)?, &ym),
        pnp_kernel::linop::dot(&x, &model.adjoint(&ym)?),
    );
    checks.at_most(
        "forward_adjoint",
        (lhs - rhs).abs() / (norm2(&x) * norm2(&ym)),
        1e-10,
        "relative",
    );
    for kind in OperatorKind::ALL {
        let param = if kind.uses_rho() { cfg.rho } else { cfg.gamma };
        let op = make_update_operator(kind, model, den, param)?;
        let lhs = pnp_kernel::linop::dot(&op.apply(&x)?, &y);
        let rhs = pnp_kernel::linop::dot(&x, &op.adjoint(&y)?);
        let rel = (lhs - rhs).abs() / (norm2(&x) * norm2(&y) * den.d().max());
        checks.at_most(
            &format!("adjoint_{kind}"),
            rel,
            1e-10,
            format!("parameter {param}"),
        );
    }

    let (l2s, zs) = spectral::symmetric_cross_check(den, &power)?;
    let pairs = [
        ("lambda2", spectral::lambda2(den, &power)?, l2s),
        ("zeta_star", spectral::zeta_star(den, &power)?, zs),
    ];
    for (name, deflated, symmetric) in pairs {
        let rel = (deflated.value - symmetric.value).abs() / symmetric.value.max(1e-300);
        let status = |r: &pnp_kernel::SpectralReport| {
            format!(
                "{} iterations{}",
                r.iterations,
                if r.converged { "" } else { ", not converged" }
            )
        };
        checks.at_most(
            &format!("{name}_cross_check"),
            rel,
            1e-6,
            format!(
                "deflated {} ({}) vs symmetric {} ({})",
                deflated.value,
                status(&deflated),
                symmetric.value,
                status(&symmetric)
            ),
        );
    }

    if model.task() != Task::Superresolution {
        for rho in [0.5, 1.0, 3.0] {
            let ok = bounds::verify_fe(model, den, rho);
            checks.holds(
                &format!("fe_closed_form_rho_{rho}"),
                ok.is_ok(),
                ok.err().map(|e| e.to_string()).unwrap_or_default(),
            );
        }
    }

    for alg in cfg.algorithms()? {
        let (name, param) = parameter_of(alg, cfg.gamma, cfg.rho);
        let r = measure_contraction(model, den, alg, param, &power)?;
        let detail = match (&r.bound, r.factor_bound()) {
            (Some(b), Some(f)) => format!("{name} {param}, {} bound {f}", b.formula),
            _ => format!("{name} {param}, no bound applies"),
        };
        checks.at_most(
            &format!("contraction_{alg}"),
            r.measured.value,
            r.factor_bound().unwrap_or(1.0) + 1e-6,
            detail.clone(),
        );
        checks.holds(
            &format!("contraction_{alg}_below_one"),
            r.measured.value < 1.0 || r.bound.is_none(),
            detail,
        );
    }

    let passed = checks.0.iter().filter(|c| c.passed).count();
    write_csv(&ctx.path("verify.csv"), &checks.0)?;
    println!("{passed} of {} checks passed", checks.0.len());
    let failed: Vec<String> = checks
        .0
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {} > {} {}", c.check, c.value, c.tolerance, c.detail))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join("; ")))
    }
}
