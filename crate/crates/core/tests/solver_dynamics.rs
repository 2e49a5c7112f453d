//! Residual sequences of the solvers against measured contraction factors.

mod common;

use common::*;
use pnp_kernel::forward::{BlurKernel, ForwardModel, InpaintingMask, Subsampler};
use pnp_kernel::image::{phantom, random_image};
use pnp_kernel::linop::LinearMap;
use pnp_kernel::solver::{self, Algorithm, Init, LossSpec, SolverConfig};
use pnp_kernel::spectral::{self, make_update_operator, OperatorKind, PowerConfig};

fn observe(model: &ForwardModel, truth: &[f64]) -> LossSpec {
    LossSpec::new(model.clone(), model.apply(truth).unwrap()).unwrap()
}

/// Slope of the least-squares line through `(k, ln r_k)`.
fn log_slope(residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .map(|(k, r)| (k as f64, r.ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

/// Residuals well above the floor set by rounding.
fn usable(residuals: &[f64]) -> Vec<f64> {
    let first = residuals[0];
    residuals
        .iter()
        .copied()
        .take_while(|r| *r > first * 1e-11)
        .collect()
}

#[test]
fn symmetric_ista_ratios_bounded_by_operator_norm() {
    let (w, h) = (16, 16);
    let truth = phantom(w, h).into_vec();
    let den = plain_denoiser(w, h, 21, 1.0).symmetrized().unwrap();
    let model =
        ForwardModel::inpainting(InpaintingMask::random(w * h, 0.3, 3).unwrap(), w, h).unwrap();
    let loss = observe(&model, &truth);
    let p = make_update_operator(OperatorKind::P, &model, &den, 1.0).unwrap();
    let norm = spectral::power_sigma(&*p, &PowerConfig::default())
        .unwrap()
        .value;
    assert!(norm < 1.0);
    let mut cfg = SolverConfig::new(Algorithm::PnpIsta);
    cfg.max_iters = 300;
    cfg.stop_tol = 1e-13;
    let r = usable(&solver::run(&loss, &den, &cfg, None).unwrap().residuals());
    for k in 2..r.len() {
        assert!(
            r[k] / r[k - 1] <= norm + 1e-6,
            "k = {k}: {} > {norm}",
            r[k] / r[k - 1]
        );
    }
}

#[test]
fn scaled_ista_rate_bounded_on_deblurring() {
    let (w, h) = (16, 16);
    let truth = phantom(w, h).into_vec();
    let den = plain_denoiser(w, h, 22, 1.0);
    let model = ForwardModel::deblurring(BlurKernel::gaussian(5, 1.0).unwrap(), w, h).unwrap();
    let loss = observe(&model, &truth);
    let ps = make_update_operator(OperatorKind::Ps, &model, &den, 1.0).unwrap();
    let norm = spectral::power_sigma_d(&*ps, den.d(), &PowerConfig::default())
        .unwrap()
        .value;
    let mut cfg = SolverConfig::new(Algorithm::ScPnpIsta);
    cfg.max_iters = 400;
    cfg.stop_tol = 1e-13;
    let r = usable(&solver::run(&loss, &den, &cfg, None).unwrap().residuals());
    assert!(r.len() > 10);
    for k in 1..r.len() {
        assert!(r[k] / r[k - 1] <= norm + 1e-6);
    }
    assert!(log_slope(&r) <= norm.ln() + 1e-3);
}

#[test]
fn symmetric_admm_y_residuals_bounded() {
    let (w, h) = (16, 16);
    let truth = phantom(w, h).into_vec();
    let den = plain_denoiser(w, h, 23, 1.0).symmetrized().unwrap();
    let model =
        ForwardModel::inpainting(InpaintingMask::random(w * h, 0.3, 4).unwrap(), w, h).unwrap();
    let loss = observe(&model, &truth);
    let j = make_update_operator(OperatorKind::J, &model, &den, 1.0).unwrap();
    let factor = 0.5
        * (1.0
            + spectral::power_sigma(&*j, &PowerConfig::default())
                .unwrap()
                .value);
    let mut cfg = SolverConfig::new(Algorithm::PnpAdmm);
    cfg.max_iters = 400;
    cfg.stop_tol = 1e-13;
    let r = usable(&solver::run(&loss, &den, &cfg, None).unwrap().residuals());
    assert!(r.len() > 10);
    assert!(log_slope(&r[r.len() / 2..]) <= factor.ln() + 1e-6);
}

#[test]
fn scaled_admm_rate_bounded_on_superresolution() {
    let (w, h) = (16, 16);
    let truth = phantom(w, h).into_vec();
    let den = plain_denoiser(w, h, 24, 1.0);
    let model = ForwardModel::superresolution(
        BlurKernel::gaussian(3, 1.0).unwrap(),
        Subsampler::new(2).unwrap(),
        w,
        h,
    )
    .unwrap();
    let loss = observe(&model, &truth);
    let js = make_update_operator(OperatorKind::Js, &model, &den, 1.0).unwrap();
    let factor = 0.5
        * (1.0
            + spectral::power_sigma_d(&*js, den.d(), &PowerConfig::default())
                .unwrap()
                .value);
    let mut cfg = SolverConfig::new(Algorithm::ScPnpAdmm);
    cfg.max_iters = 600;
    cfg.stop_tol = 1e-13;
    let r = usable(&solver::run(&loss, &den, &cfg, None).unwrap().residuals());
    assert!(r.len() > 10);
    assert!(log_slope(&r[r.len() / 2..]) <= factor.ln() + 1e-6);
}

#[test]
fn runs_from_different_starts_agree() {
    let (w, h) = (16, 16);
    let truth = phantom(w, h).into_vec();
    let den = plain_denoiser(w, h, 25, 1.0);
    let model =
        ForwardModel::inpainting(InpaintingMask::random(w * h, 0.5, 6).unwrap(), w, h).unwrap();
    let loss = observe(&model, &truth);
    for alg in [Algorithm::ScPnpIsta, Algorithm::ScPnpAdmm] {
        let mut cfg = SolverConfig::new(alg);
        cfg.max_iters = 5000;
        cfg.gamma = 1.5;
        cfg.init = Init::Zero;
        let a = solver::run(&loss, &den, &cfg, None).unwrap();
        cfg.init = Init::Image(random_image(w, h, 77).into_vec());
        let b = solver::run(&loss, &den, &cfg, None).unwrap();
        assert!(a.converged() && b.converged(), "{alg}");
        let diff: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect();
        let dist = pnp_kernel::d_norm(&diff, den.d()).unwrap();
        let scale = pnp_kernel::d_norm(&a.x, den.d()).unwrap();
        assert!(dist <= 1e-7 * scale, "{alg}: {dist}");
    }
}

#[test]
fn reconstruction_improves_on_observation() {
    let (w, h) = (32, 32);
    let truth = phantom(w, h).into_vec();
    let model = ForwardModel::deblurring(BlurKernel::gaussian(7, 1.6).unwrap(), w, h).unwrap();
    let b = pnp_kernel::image::add_noise(&model.apply(&truth).unwrap(), 0.01, 3).unwrap();
    let loss = LossSpec::new(model, b.clone()).unwrap();
    let guide = pnp_kernel::denoiser::guide_for(loss.model(), &b).unwrap();
    let den = pnp_kernel::KernelDenoiser::build(
        &guide,
        &pnp_kernel::KernelParams::new(1, 2, 0.3).unwrap(),
    )
    .unwrap()
    .symmetrized()
    .unwrap();
    let mut cfg = SolverConfig::new(Algorithm::PnpIsta);
    cfg.gamma = 1.0;
    cfg.max_iters = 200;
    let traj = solver::run(&loss, &den, &cfg, Some(&truth)).unwrap();
    let before = pnp_kernel::image::psnr(&b, &truth).unwrap();
    let after = traj.records.last().unwrap().psnr.unwrap();
    assert!(after > before, "{after} <= {before}");
}
