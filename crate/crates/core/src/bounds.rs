//! Closed-form contraction bounds, the closed form of `F e`, and the
//! non-contractive counterexample for unscaled PnP-ISTA.
//!
//! Every bound is evaluated in squared form and reported together with its
//! square root, which is what gets compared with measured norms.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::forward::{ForwardModel, Task};
use crate::linop::{DiagonalWeights, LinearMap};
use crate::spectral::{make_update_operator, OperatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formula {
    /// `(l1^2 - l2^2) c + l2^2`.
    Lemma2,
    /// Scaled ISTA.
    Thm5,
    /// Unscaled ISTA, deblurring.
    Eq29,
    /// Unscaled ISTA, inpainting and superresolution.
    Eq30,
    /// Symmetric ADMM, deblurring.
    Eq32,
    /// Symmetric ADMM, inpainting.
    Eq33,
    /// Scaled ADMM, inpainting.
    Thm7,
    /// Scaled ADMM, deblurring and superresolution.
    Thm8,
    /// Bound on `||G_s q_1||_D^2`.
    Prop5,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::Lemma2 => "lemma2",
            Formula::Thm5 => "thm5",
            Formula::Eq29 => "eq29",
            Formula::Eq30 => "eq30",
            Formula::Eq32 => "eq32",
            Formula::Eq33 => "eq33",
            Formula::Thm7 => "thm7",
            Formula::Thm8 => "thm8",
            Formula::Prop5 => "prop5",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub squared_bound: f64,
    pub bound: f64,
    pub formula: Formula,
}

impl BoundReport {
    fn new(squared_bound: f64, formula: Formula) -> Self {
        Self {
            squared_bound,
            bound: squared_bound.max(0.0).sqrt(),
            formula,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

fn fraction(mu: f64) -> Result<()> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("mu must lie in (0, 1], got {mu}")))
    }
}

fn step(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "gamma must lie in (0, 2), got {gamma}"
        )))
    }
}

fn penalty(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("rho must be positive, got {rho}")))
    }
}

fn weight_norm(norm_d: f64) -> Result<()> {
    if norm_d >= 1.0 && norm_d.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "||D||_2 must be at least 1, got {norm_d}"
        )))
    }
}

/// `(l1^2 - l2^2) c + l2^2` where `c = ||N q_1||^2`.
pub fn lemma2_bound(lambda1: f64, lambda2: f64, norm_nq1_sq: f64) -> Result<f64> {
    if lambda1.abs() < lambda2.abs() {
        return Err(Error::invalid("|lambda1| must be at least |lambda2|"));
    }
    unit_interval("||N q1||^2", norm_nq1_sq)?;
    let (a, b) = (lambda1 * lambda1, lambda2 * lambda2);
    Ok((a - b) * norm_nq1_sq + b)
}

/// `1 - gamma (2 - gamma) (||Ae||^2 / n) / ||D||_2`.
pub fn prop5_gs_bound(gamma: f64, norm_d: f64, norm_ae_sq: f64, n: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::invalid(format!(
            "gamma must lie in (0, 2], got {gamma}"
        )));
    }
    weight_norm(norm_d)?;
    if n == 0 || !(norm_ae_sq > 0.0 && norm_ae_sq <= n as f64) {
        return Err(Error::invalid("||Ae||^2 must lie in (0, n]"));
    }
    Ok(1.0 - gamma * (2.0 - gamma) * (norm_ae_sq / n as f64) / norm_d)
}

/// Scaled ISTA: `l2^2 + (1 - l2^2)(1 - gamma (2 - gamma) mu / ||D||_2)`,
/// with `mu = 1` for deblurring.
pub fn bound_ista_scaled(lambda2: f64, gamma: f64, mu: f64, norm_d: f64) -> Result<BoundReport> {
    unit_interval("lambda2", lambda2)?;
    step(gamma)?;
    fraction(mu)?;
    weight_norm(norm_d)?;
    let l = lambda2 * lambda2;
    let c = 1.0 - gamma * (2.0 - gamma) * mu / norm_d;
    Ok(BoundReport::new(l + (1.0 - l) * c, Formula::Thm5))
}

/// Unscaled ISTA with a symmetric denoiser.
pub fn bound_ista_plain(task: Task, lambda2: f64, gamma: f64, mu: f64) -> Result<BoundReport> {
    unit_interval("lambda2", lambda2)?;
    step(gamma)?;
    fraction(mu)?;
    let l = lambda2 * lambda2;
    Ok(match task {
        Task::Deblurring => BoundReport::new(l + (1.0 - l) * (1.0 - gamma).powi(2), Formula::Eq29),
        _ => BoundReport::new(
            l + (1.0 - l) * (1.0 - gamma * (2.0 - gamma) * mu),
            Formula::Eq30,
        ),
    })
}

/// Bound on `||J||_2^2` for ADMM with a symmetric denoiser.
pub fn bound_admm_sym(task: Task, zeta_star: f64, rho: f64, mu: f64) -> Result<BoundReport> {
    unit_interval("zeta*", zeta_star)?;
    penalty(rho)?;
    let z = zeta_star * zeta_star;
    match task {
        Task::Deblurring => {
            let t = (1.0 - rho) / (1.0 + rho);
            Ok(BoundReport::new(z + (1.0 - z) * t * t, Formula::Eq32))
        }
        Task::Inpainting => {
            fraction(mu)?;
            let c = 1.0 - 4.0 * mu * rho / ((1.0 + rho) * (1.0 + rho));
            Ok(BoundReport::new(z + (1.0 - z) * c, Formula::Eq33))
        }
        Task::Superresolution => Err(Error::invalid(
            "no symmetric-ADMM bound is available for superresolution",
        )),
    }
}

/// `max_i |(1 - rho / D_ii) / (1 + rho / D_ii)|`.
pub fn theta(d: &DiagonalWeights, rho: f64) -> Result<f64> {
    penalty(rho)?;
    Ok(d.as_slice()
        .iter()
        .map(|di| {
            let t = rho / di;
            ((1.0 - t) / (1.0 + t)).abs()
        })
        .fold(0.0, f64::max))
}

/// Scaled ADMM for inpainting:
/// `z^2 + (1 - z^2)(1 - (1 - theta^2) mu / ||D||_2)`.
pub fn bound_admm_scaled_inpaint(
    zeta_star: f64,
    theta: f64,
    mu: f64,
    norm_d: f64,
) -> Result<BoundReport> {
    unit_interval("zeta*", zeta_star)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "theta must lie in [0, 1), got {theta}"
        )));
    }
    fraction(mu)?;
    weight_norm(norm_d)?;
    let z = zeta_star * zeta_star;
    let c = 1.0 - (1.0 - theta * theta) * mu / norm_d;
    Ok(BoundReport::new(z + (1.0 - z) * c, Formula::Thm7))
}

/// Scaled ADMM for deblurring and superresolution:
/// `z^2 + (1 - z^2)(1 - (mu / (n ||D||_2^2)) 4 rho / (1 + rho)^2)`, with
/// `mu = 1` for deblurring.
pub fn bound_admm_scaled_smooth(
    task: Task,
    zeta_star: f64,
    rho: f64,
    mu: f64,
    n: usize,
    norm_d: f64,
) -> Result<BoundReport> {
    unit_interval("zeta*", zeta_star)?;
    penalty(rho)?;
    weight_norm(norm_d)?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mu = match task {
        Task::Deblurring => 1.0,
        Task::Superresolution => {
            fraction(mu)?;
            mu
        }
        Task::Inpainting => {
            return Err(Error::invalid(
                "use the inpainting form for scaled ADMM inpainting",
            ))
        }
    };
    let z = zeta_star * zeta_star;
    let c = 1.0 - mu / (n as f64 * norm_d * norm_d) * 4.0 * rho / ((1.0 + rho) * (1.0 + rho));
    Ok(BoundReport::new(z + (1.0 - z) * c, Formula::Thm8))
}

/// `F e` in closed form: `e - 2 rho / (1 + rho) diag(A)` for inpainting and
/// `(1 - rho) / (1 + rho) e` for deblurring.
pub fn fe_closed_form(model: &ForwardModel, rho: f64) -> Result<Vec<f64>> {
    penalty(rho)?;
    let n = model.n();
    match model.task() {
        Task::Inpainting => {
            let mask = model.mask_diagonal().expect("inpainting model is diagonal");
            Ok(mask
                .iter()
                .map(|m| 1.0 - 2.0 * rho / (1.0 + rho) * m)
                .collect())
        }
        Task::Deblurring => Ok(vec![(1.0 - rho) / (1.0 + rho); n]),
        Task::Superresolution => Err(Error::invalid("no closed form of F e for superresolution")),
    }
}

/// Compares [`fe_closed_form`] with the operator `F` applied to `e` and
/// returns the closed form; the largest deviation must not exceed `1e-9`.
pub fn verify_fe(
    model: &ForwardModel,
    den: &crate::denoiser::KernelDenoiser,
    rho: f64,
) -> Result<Vec<f64>> {
    let closed = fe_closed_form(model, rho)?;
    let f = make_update_operator(OperatorKind::F, model, den, rho)?;
    let applied = f.apply(&vec![1.0; model.n()])?;
    let dev = closed
        .iter()
        .zip(&applied)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::Verification(format!(
            "F e deviates from its closed form by {dev:.3e} at rho = {rho}"
        )));
    }
    Ok(closed)
}

/// `(1/n) sqrt(2 n^2 - 4 n + 4)`.
pub fn counterexample_closed_form(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * n * n - 4.0 * n + 4.0).sqrt() / n
}

/// Dense `||W_0 (I - A^T A)||_{D_0}` for `A = (1/n) e e^T`,
/// `D_0 = diag(n-1, ..., n-1, 1)` and `K_0` the all-ones `(n-1)` block plus
/// an isolated last pixel; checked against the closed form to `1e-10`.
pub fn counterexample_norm(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "counterexample needs n >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    let k0 = DMatrix::from_fn(n, n, |i, j| {
        if (i < n - 1 && j < n - 1) || (i == n - 1 && j == n - 1) {
            1.0
        } else {
            0.0
        }
    });
    let d0: Vec<f64> = (0..n)
        .map(|i| if i < n - 1 { nf - 1.0 } else { 1.0 })
        .collect();
    let w0 = DMatrix::from_fn(n, n, |i, j| k0[(i, j)] / d0[i]);
    let a = DMatrix::from_element(n, n, 1.0 / nf);
    let g = DMatrix::identity(n, n) - a.transpose() * &a;
    let p = w0 * g;
    let sim = DMatrix::from_fn(n, n, |i, j| d0[i].sqrt() * p[(i, j)] / d0[j].sqrt());
    let norm = sim.singular_values().max();
    let closed = counterexample_closed_form(n);
    if (norm - closed).abs() > 1e-10 {
        return Err(Error::Verification(format!(
            "counterexample norm {norm} differs from closed form {closed} at n = {n}"
        )));
    }
    Ok(norm)
}
