//! Randomized invariants shared by the property suite and the acceptance run.
#![allow(dead_code)]

use crate::common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use pnp_kernel::denoiser::{KernelDenoiser, KernelParams};
use pnp_kernel::forward::{BlurKernel, ForwardModel, InpaintingMask, Subsampler};
use pnp_kernel::image::random_image;
use pnp_kernel::linop::{d_inner, d_norm, norm2, LinearMap};
use pnp_kernel::spectral::{self, make_update_operator, OperatorKind, PowerConfig};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = std::result::Result<(), TestCaseError>;

pub fn denoiser_strategy() -> impl Strategy<Value = KernelDenoiser> {
    (
        3usize..=8,
        3usize..=8,
        0usize..=1,
        0.2f64..2.0,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(w, h, patch, bandwidth, seed, sym)| {
            let guide = random_image(w, h, seed);
            let den =
                KernelDenoiser::build(&guide, &KernelParams::new(patch, 1, bandwidth).unwrap())
                    .unwrap();
            if sym {
                den.symmetrized().unwrap()
            } else {
                den
            }
        })
}

/// `(task, width, height, seed, parameter)`.
pub type Instance = (u8, usize, usize, u64, f64);

pub fn instance_strategy(
    max_side: usize,
    tasks: u8,
    param: std::ops::Range<f64>,
) -> impl Strategy<Value = Instance> {
    (
        0..tasks,
        4usize..=max_side,
        4usize..=max_side,
        any::<u64>(),
        param,
    )
}

pub fn model_for(task: u8, w: usize, h: usize, seed: u64) -> ForwardModel {
    match task % 3 {
        0 => ForwardModel::inpainting(
            InpaintingMask::random(w * h, 0.1 + (seed % 9) as f64 / 10.0, seed).unwrap(),
            w,
            h,
        )
        .unwrap(),
        1 => ForwardModel::deblurring(
            BlurKernel::gaussian(3, 0.5 + (seed % 5) as f64 * 0.3).unwrap(),
            w,
            h,
        )
        .unwrap(),
        _ => ForwardModel::superresolution(
            BlurKernel::gaussian(3, 1.0).unwrap(),
            Subsampler::new(2 + (seed % 2) as usize).unwrap(),
            w,
            h,
        )
        .unwrap(),
    }
}

pub fn vec_of(n: usize, seed: u64) -> Vec<f64> {
    random_image(n, 1, seed)
        .as_slice()
        .iter()
        .map(|v| 2.0 * v - 1.0)
        .collect()
}

pub fn preserves_constants(den: &KernelDenoiser) -> Check {
    let we = den.apply(&vec![1.0; den.n()]).unwrap();
    let tol = if den.scaling().is_some() {
        1e-10
    } else {
        1e-12
    };
    prop_assert!(we.iter().all(|v| (v - 1.0).abs() <= tol));
    Ok(())
}

pub fn self_adjoint(den: &KernelDenoiser, seed: u64) -> Check {
    let n = den.n();
    let (x, y) = (vec_of(n, seed), vec_of(n, seed ^ 0x5555));
    let d = den.inner_weights();
    let lhs = d_inner(&den.apply(&x).unwrap(), &y, d).unwrap();
    let rhs = d_inner(&x, &den.apply(&y).unwrap(), d).unwrap();
    prop_assert!((lhs - rhs).abs() <= 1e-10 * d_norm(&x, d).unwrap() * d_norm(&y, d).unwrap());
    Ok(())
}

pub fn assumptions_hold(den: &KernelDenoiser) -> Check {
    let report = den.verify_assumptions();
    prop_assert!(report.min_eigenvalue.unwrap() >= -1e-8);
    prop_assert!(report.irreducible);
    prop_assert_eq!(report.symmetry_residual, 0.0);
    prop_assert_eq!(report.diagonal_residual, 0.0);
    // Eigenvalues of W lie in [0, 1], with 1 simple; a tiny bandwidth can
    // push lambda_2 within rounding of 1, so only the range is checked.
    let eig = report.w_eigenvalues.unwrap();
    prop_assert!((eig[0] - 1.0).abs() <= 1e-9);
    prop_assert!(eig.iter().all(|l| *l >= -1e-9 && *l <= 1.0 + 1e-9));
    Ok(())
}

pub fn unit_inner_norm(den: &KernelDenoiser) -> Check {
    let exact = sigma_max_d(&dense(den), den.inner_weights());
    prop_assert!((exact - 1.0).abs() < 1e-9, "norm {}", exact);
    // The power estimate is a Rayleigh quotient, so it never overshoots.
    let r = spectral::power_sigma_d(den, den.inner_weights(), &PowerConfig::default()).unwrap();
    prop_assert!(r.value <= 1.0 + 1e-9, "estimate {}", r.value);
    Ok(())
}

pub fn euclidean_norm_at_least_one(den: &KernelDenoiser) -> Check {
    prop_assert!(sigma_max(&dense(den)) >= 1.0 - 1e-9);
    Ok(())
}

pub fn adjoints_consistent(&(task, w, h, seed, param): &Instance) -> Check {
    let den = plain_denoiser(w, h, seed, 0.8);
    let model = model_for(task, w, h, seed);
    let n = w * h;
    let (x, y) = (vec_of(n, seed ^ 1), vec_of(n, seed ^ 2));
    let ym = vec_of(model.m(), seed ^ 3);
    let lhs = dot(&model.apply(&x).unwrap(), &ym);
    let rhs = dot(&x, &model.adjoint(&ym).unwrap());
    prop_assert!((lhs - rhs).abs() <= 1e-10 * norm2(&x) * norm2(&ym));
    for kind in OperatorKind::ALL {
        let op = make_update_operator(kind, &model, &den, param).unwrap();
        let lhs = dot(&op.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &op.adjoint(&y).unwrap());
        // Operators here have norm at most about sqrt(max D) in the Euclidean norm.
        let scale = norm2(&x) * norm2(&y) * den.d().max();
        prop_assert!(
            (lhs - rhs).abs() <= 1e-10 * scale,
            "{}: {} vs {}",
            kind,
            lhs,
            rhs
        );
    }
    Ok(())
}

pub fn forward_nonexpansive(&(task, w, h, seed, _): &Instance) -> Check {
    let model = model_for(task, w, h, seed);
    prop_assert!(model.check_rnp());
    let r = spectral::power_sigma(&model, &PowerConfig::default()).unwrap();
    prop_assert!(r.value <= 1.0 + 1e-8);
    Ok(())
}

/// `||F_s x||_D^2 <= ||x||_D^2 - (1 - xi^2) <w, x>_D^2` for every D-unit
/// eigenpair `(xi, w)` of the dense `F_s`.
pub fn prox_reflection_eigen_inequality(&(task, w, h, seed, rho): &Instance) -> Check {
    let den = plain_denoiser(w, h, seed, 0.7);
    let model = model_for(task, w, h, seed);
    let n = w * h;
    let fs = dense(&*make_update_operator(OperatorKind::Fs, &model, &den, rho).unwrap());
    let d = den.d();
    let s: Vec<f64> = d.as_slice().iter().map(|v| v.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| s[i] * fs[(i, j)] / s[j]);
    let eig = SymmetricEigen::new((&sym + sym.transpose()) * 0.5);
    let x = vec_of(n, seed ^ 7);
    let fx: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| fs[(i, j)] * x[j]).sum())
        .collect();
    let lhs = d_norm(&fx, d).unwrap().powi(2);
    let xx = d_norm(&x, d).unwrap().powi(2);
    for k in 0..n {
        let xi = eig.eigenvalues[k];
        let wv: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, k)] / s[i]).collect();
        let c = d_inner(&wv, &x, d).unwrap();
        prop_assert!(lhs <= xx - (1.0 - xi * xi) * c * c + 1e-9 * xx);
    }
    Ok(())
}
