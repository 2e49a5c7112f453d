//! PnP-ISTA, PnP-ADMM and their scaled variants, with the `D`-weighted
//! proximal map of the quadratic loss solved by conjugate gradients.

use std::fmt;
use std::str::FromStr;

use crate::denoiser::{guide_for, KernelDenoiser};
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::image::psnr;
use crate::linop::{d_norm, norm2, sub, DiagonalWeights, LinearMap};

/// `f(x) = 0.5 ||Ax - b||^2`.
#[derive(Debug, Clone)]
pub struct LossSpec {
    model: ForwardModel,
    b: Vec<f64>,
}

impl LossSpec {
    pub fn new(model: ForwardModel, b: Vec<f64>) -> Result<Self> {
        Error::check_len("measurement", model.m(), b.len())?;
        Ok(Self { model, b })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.model.apply(x)?;
        Ok(0.5
            * ax.iter()
                .zip(&self.b)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
    }

    /// `A^T (Ax - b)`.
    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.model.apply(x)?;
        r.iter_mut().zip(&self.b).for_each(|(a, b)| *a -= b);
        self.model.adjoint(&r)
    }

    /// `A^T b`.
    pub fn adjoint_data(&self) -> Result<Vec<f64>> {
        self.model.adjoint(&self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    PnpIsta,
    PnpAdmm,
    ScPnpIsta,
    ScPnpAdmm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::PnpIsta,
        Algorithm::PnpAdmm,
        Algorithm::ScPnpIsta,
        Algorithm::ScPnpAdmm,
    ];

    pub fn is_admm(self) -> bool {
        matches!(self, Algorithm::PnpAdmm | Algorithm::ScPnpAdmm)
    }

    pub fn is_scaled(self) -> bool {
        matches!(self, Algorithm::ScPnpIsta | Algorithm::ScPnpAdmm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::PnpIsta => "pnp_ista",
            Algorithm::PnpAdmm => "pnp_admm",
            Algorithm::ScPnpIsta => "sc_pnp_ista",
            Algorithm::ScPnpAdmm => "sc_pnp_admm",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Starting point of a run. For ADMM this is `y_0`, with `z_0 = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    Zero,
    /// The task guide (observation, filled observation, or upsampling).
    #[default]
    Guide,
    AdjointData,
    Image(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub cg: CgConfig,
    pub init: Init,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            gamma: 1.0,
            rho: 1.0,
            max_iters: 1000,
            stop_tol: 1e-9,
            cg: CgConfig::default(),
            init: Init::Guide,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm.is_admm() {
            if !(self.rho > 0.0 && self.rho.is_finite()) {
                return Err(Error::invalid(format!(
                    "rho must be positive, got {}",
                    self.rho
                )));
            }
        } else if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 2), got {}",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop_tol must be nonnegative"));
        }
        if !(self.cg.tol > 0.0) || self.cg.max_iters == 0 {
            return Err(Error::invalid(
                "CG tolerance and iteration cap must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    /// `||x_k - x_{k-1}||` (ISTA) or `||y_k - y_{k-1}||` (ADMM), in the
    /// `D`-norm for scaled variants.
    pub residual: f64,
    pub psnr: Option<f64>,
    pub cumulative_cg_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<IterRecord>,
    pub x: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive-definite operator, stopping
/// at relative residual `tol`.
pub fn cg_solve<F>(op: F, rhs: &[f64], x0: Option<&[f64]>, cfg: CgConfig) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = match x0 {
        Some(x0) => {
            Error::check_len("CG warm start", n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut ap = vec![0.0; n];
    op(&x, &mut ap)?;
    let mut r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = r.iter().map(|v| v * v).sum::<f64>();
    for it in 0..=cfg.max_iters {
        let residual = rr.sqrt() / rhs_norm;
        if residual <= cfg.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual,
            });
        }
        if it == cfg.max_iters {
            return Err(Error::CgNotConverged {
                residual,
                iterations: it,
            });
        }
        op(&p, &mut ap)?;
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged {
                residual,
                iterations: it,
            });
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_next = r.iter().map(|v| v * v).sum::<f64>();
        let beta = rr_next / rr;
        rr = rr_next;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
    }
    unreachable!("loop returns on its last iteration")
}

/// Solves `(D + rho A^T A) z = rhs`. Diagonal `A` is inverted exactly.
pub(crate) fn solve_shifted_normal(
    model: &ForwardModel,
    d: &DiagonalWeights,
    rho: f64,
    rhs: &[f64],
    warm: Option<&[f64]>,
    cg: CgConfig,
) -> Result<CgOutcome> {
    Error::check_len("normal-equation right-hand side", model.n(), rhs.len())?;
    let dd = d.as_slice();
    if let Some(mask) = model.mask_diagonal() {
        let x = rhs
            .iter()
            .zip(dd)
            .zip(&mask)
            .map(|((r, d), m)| r / (d + rho * m))
            .collect();
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = model.m();
    cg_solve(
        |v, out| {
            let mut av = vec![0.0; m];
            model.apply_into(v, &mut av)?;
            model.adjoint_into(&av, out)?;
            out.iter_mut()
                .zip(v)
                .zip(dd)
                .for_each(|((o, v), d)| *o = d * v + rho * *o);
            Ok(())
        },
        rhs,
        warm,
        cg,
    )
}

/// `argmin_z 0.5 ||z - v||_D^2 + rho f(z)`, i.e. the solution of
/// `(D + rho A^T A) z = D v + rho A^T b`.
pub fn d_prox_f(
    loss: &LossSpec,
    d: &DiagonalWeights,
    rho: f64,
    v: &[f64],
    warm: Option<&[f64]>,
    cg: CgConfig,
) -> Result<CgOutcome> {
    if !(rho >= 0.0) {
        return Err(Error::invalid(format!(
            "rho must be nonnegative, got {rho}"
        )));
    }
    Error::check_len("prox argument", loss.n(), v.len())?;
    Error::check_len("prox weights", loss.n(), d.len())?;
    if rho == 0.0 {
        return Ok(CgOutcome {
            x: v.to_vec(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let atb = loss.adjoint_data()?;
    let rhs: Vec<f64> = v
        .iter()
        .zip(d.as_slice())
        .zip(&atb)
        .map(|((v, d), a)| d * v + rho * a)
        .collect();
    solve_shifted_normal(loss.model(), d, rho, &rhs, warm, cg)
}

fn initial_point(loss: &LossSpec, init: &Init) -> Result<Vec<f64>> {
    let n = loss.n();
    match init {
        Init::Zero => Ok(vec![0.0; n]),
        Init::Guide => Ok(guide_for(loss.model(), loss.b())?.into_vec()),
        Init::AdjointData => loss.adjoint_data(),
        Init::Image(x) => {
            Error::check_len("initial image", n, x.len())?;
            Ok(x.clone())
        }
    }
}

fn weighted_norm(x: &[f64], d: Option<&DiagonalWeights>) -> f64 {
    match d {
        Some(d) => d_norm(x, d).unwrap_or(f64::NAN),
        None => norm2(x),
    }
}

/// Runs the configured algorithm. `reference`, when given, adds PSNR to
/// each record.
pub fn run(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
    reference: Option<&[f64]>,
) -> Result<Trajectory> {
    cfg.validate()?;
    Error::check_len("denoiser", loss.n(), den.n())?;
    if let Some(r) = reference {
        Error::check_len("reference image", loss.n(), r.len())?;
    }
    let weights = cfg.algorithm.is_scaled().then(|| den.inner_weights());
    let start = initial_point(loss, &cfg.init)?;
    if cfg.algorithm.is_admm() {
        run_admm(loss, den, cfg, weights, start, reference)
    } else {
        run_ista(loss, den, cfg, weights, start, reference)
    }
}

fn record(
    records: &mut Vec<IterRecord>,
    diff: f64,
    current: &[f64],
    reference: Option<&[f64]>,
    cg_iters: usize,
) -> Result<()> {
    let psnr = reference.map(|r| psnr(current, r)).transpose()?;
    records.push(IterRecord {
        k: records.len() + 1,
        residual: diff,
        psnr,
        cumulative_cg_iters: cg_iters,
    });
    Ok(())
}

fn stop(diff: f64, current_norm: f64, tol: f64) -> bool {
    if current_norm > 0.0 {
        diff / current_norm < tol
    } else {
        diff <= tol
    }
}

fn run_ista(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
    weights: Option<&DiagonalWeights>,
    mut x: Vec<f64>,
    reference: Option<&[f64]>,
) -> Result<Trajectory> {
    let n = x.len();
    let mut records = Vec::new();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..cfg.max_iters {
        let grad = loss.grad_f(&x)?;
        match weights {
            Some(d) => {
                for (((v, x), g), d) in v.iter_mut().zip(&x).zip(&grad).zip(d.as_slice()) {
                    *v = x - cfg.gamma * g / d;
                }
            }
            None => {
                for ((v, x), g) in v.iter_mut().zip(&x).zip(&grad) {
                    *v = x - cfg.gamma * g;
                }
            }
        }
        den.apply_into(&v, &mut next)?;
        let delta = sub(&next, &x);
        let diff = weighted_norm(&delta, weights);
        std::mem::swap(&mut x, &mut next);
        record(&mut records, diff, &x, reference, 0)?;
        if stop(diff, weighted_norm(&x, weights), cfg.stop_tol) {
            return Ok(Trajectory {
                records,
                x,
                termination: Termination::Converged,
            });
        }
    }
    Ok(Trajectory {
        records,
        x,
        termination: Termination::MaxIters,
    })
}

fn run_admm(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
    weights: Option<&DiagonalWeights>,
    mut y: Vec<f64>,
    reference: Option<&[f64]>,
) -> Result<Trajectory> {
    let n = y.len();
    let identity = DiagonalWeights::identity(n);
    let prox_weights = weights.unwrap_or(&identity);
    let mut z = vec![0.0; n];
    let mut x = y.clone();
    let mut y_next = vec![0.0; n];
    let mut cg_total = 0;
    let mut records = Vec::new();
    for _ in 0..cfg.max_iters {
        let v: Vec<f64> = y.iter().zip(&z).map(|(y, z)| y - z).collect();
        let prox = d_prox_f(loss, prox_weights, cfg.rho, &v, Some(&x), cfg.cg)?;
        cg_total += prox.iterations;
        x = prox.x;
        let u: Vec<f64> = x.iter().zip(&z).map(|(x, z)| x + z).collect();
        den.apply_into(&u, &mut y_next)?;
        z.iter_mut()
            .zip(&x)
            .zip(&y_next)
            .for_each(|((z, x), y)| *z += x - y);
        let delta = sub(&y_next, &y);
        let diff = weighted_norm(&delta, weights);
        std::mem::swap(&mut y, &mut y_next);
        record(&mut records, diff, &y, reference, cg_total)?;
        if stop(diff, weighted_norm(&y, weights), cfg.stop_tol) {
            return Ok(Trajectory {
                records,
                x: y,
                termination: Termination::Converged,
            });
        }
    }
    Ok(Trajectory {
        records,
        x: y,
        termination: Termination::MaxIters,
    })
}

fn run_as(
    algorithm: Algorithm,
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let cfg = SolverConfig {
        algorithm,
        ..cfg.clone()
    };
    run(loss, den, &cfg, None)
}

pub fn pnp_ista_run(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    run_as(Algorithm::PnpIsta, loss, den, cfg)
}

pub fn sc_pnp_ista_run(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    run_as(Algorithm::ScPnpIsta, loss, den, cfg)
}

pub fn pnp_admm_run(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    run_as(Algorithm::PnpAdmm, loss, den, cfg)
}

pub fn sc_pnp_admm_run(
    loss: &LossSpec,
    den: &KernelDenoiser,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    run_as(Algorithm::ScPnpAdmm, loss, den, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::KernelParams;
    use crate::forward::{BlurKernel, InpaintingMask};
    use crate::linop::{DenseMap, VecImage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    fn identity_model(w: usize, h: usize) -> ForwardModel {
        ForwardModel::inpainting(InpaintingMask::new(vec![true; w * h]).unwrap(), w, h).unwrap()
    }

    fn denoiser(w: usize, h: usize, seed: u64) -> KernelDenoiser {
        let guide = VecImage::new(random_vec(w * h, seed), w, h).unwrap();
        KernelDenoiser::build(&guide, &KernelParams::new(1, 1, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let model = identity_model(4, 4);
        let (x, b) = (random_vec(16, 1), random_vec(16, 2));
        let loss = LossSpec::new(model.clone(), b.clone()).unwrap();
        let g = loss.grad_f(&x).unwrap();
        assert!(g
            .iter()
            .zip(x.iter().zip(&b))
            .all(|(g, (x, b))| (g - (x - b)).abs() < 1e-15));
        let exact = LossSpec::new(model, x.clone()).unwrap();
        assert!(exact.grad_f(&x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_matches_dense_deblurring() {
        let model = ForwardModel::deblurring(BlurKernel::gaussian(3, 0.9).unwrap(), 8, 8).unwrap();
        let a = DenseMap::from_map(&model).unwrap();
        let (x, b) = (random_vec(64, 3), random_vec(64, 4));
        let loss = LossSpec::new(model, b.clone()).unwrap();
        let ax = a.apply(&x).unwrap();
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let dense = a.adjoint(&r).unwrap();
        let g = loss.grad_f(&x).unwrap();
        assert!(g.iter().zip(&dense).all(|(p, q)| (p - q).abs() < 1e-13));
    }

    #[test]
    fn cg_solves_small_spd_system() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let op = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i * 3 + j] * v[j]).sum();
            }
            Ok(())
        };
        let sol = cg_solve(op, &[1.0, 2.0, 3.0], None, CgConfig::default()).unwrap();
        let mut check = [0.0; 3];
        op(&sol.x, &mut check).unwrap();
        assert!(check
            .iter()
            .zip([1.0, 2.0, 3.0])
            .all(|(p, q)| (p - q).abs() < 1e-9));
        let fail = cg_solve(
            op,
            &[1.0, 2.0, 3.0],
            None,
            CgConfig {
                tol: 1e-14,
                max_iters: 1,
            },
        );
        assert!(matches!(
            fail,
            Err(Error::CgNotConverged { iterations: 1, .. })
        ));
    }

    #[test]
    fn prox_examples() {
        let model = identity_model(3, 3);
        let b = random_vec(9, 5);
        let v = random_vec(9, 6);
        let loss = LossSpec::new(model, b.clone()).unwrap();
        let id = DiagonalWeights::identity(9);
        let z = d_prox_f(&loss, &id, 0.0, &v, None, CgConfig::default())
            .unwrap()
            .x;
        assert_eq!(z, v);
        let z = d_prox_f(&loss, &id, 2.0, &v, None, CgConfig::default())
            .unwrap()
            .x;
        assert!(z
            .iter()
            .zip(v.iter().zip(&b))
            .all(|(z, (v, b))| (z - (v + 2.0 * b) / 3.0).abs() < 1e-14));
        assert!(d_prox_f(&loss, &id, -1.0, &v, None, CgConfig::default()).is_err());
    }

    #[test]
    fn ista_identity_gamma_one_is_one_step() {
        let (w, h) = (6, 6);
        let den = denoiser(w, h, 7);
        let b = random_vec(36, 8);
        let loss = LossSpec::new(identity_model(w, h), b.clone()).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::PnpIsta);
        cfg.init = Init::Image(random_vec(36, 9));
        let traj = run(&loss, &den, &cfg, None).unwrap();
        assert!(traj.converged());
        assert_eq!(traj.iterations(), 2);
        let wb = den.apply(&b).unwrap();
        assert!(traj.x.iter().zip(&wb).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn scaled_equals_unscaled_when_d_is_identity() {
        let (w, h) = (6, 6);
        let den = denoiser(w, h, 10).symmetrized().unwrap();
        let model = ForwardModel::deblurring(BlurKernel::gaussian(3, 1.0).unwrap(), w, h).unwrap();
        let loss = LossSpec::new(model, random_vec(36, 11)).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::PnpIsta);
        cfg.max_iters = 40;
        let a = pnp_ista_run(&loss, &den, &cfg).unwrap();
        let b = sc_pnp_ista_run(&loss, &den, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        let a = pnp_admm_run(&loss, &den, &cfg).unwrap();
        let b = sc_pnp_admm_run(&loss, &den, &cfg).unwrap();
        assert!(a.x.iter().zip(&b.x).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn constant_image_is_admm_fixed_point() {
        let (w, h) = (6, 6);
        let den = denoiser(w, h, 12);
        let model = ForwardModel::deblurring(BlurKernel::gaussian(5, 1.2).unwrap(), w, h).unwrap();
        let loss = LossSpec::new(model, vec![0.4; 36]).unwrap();
        for alg in [Algorithm::PnpAdmm, Algorithm::ScPnpAdmm] {
            let mut cfg = SolverConfig::new(alg);
            cfg.init = Init::Guide;
            let traj = run(&loss, &den, &cfg, None).unwrap();
            assert!(traj.records[0].residual < 1e-12, "{alg}");
            assert!(traj.x.iter().all(|v| (v - 0.4).abs() < 1e-12));
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let den = denoiser(4, 4, 1);
        let loss = LossSpec::new(identity_model(4, 4), vec![0.0; 16]).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::ScPnpIsta);
        cfg.gamma = 2.0;
        assert!(matches!(
            run(&loss, &den, &cfg, None),
            Err(Error::InvalidParameter(_))
        ));
        let mut cfg = SolverConfig::new(Algorithm::PnpAdmm);
        cfg.rho = 0.0;
        assert!(run(&loss, &den, &cfg, None).is_err());
        assert!("fista".parse::<Algorithm>().is_err());
        assert_eq!(
            "sc_pnp_admm".parse::<Algorithm>().unwrap(),
            Algorithm::ScPnpAdmm
        );
    }

    #[test]
    fn psnr_recorded_against_reference() {
        let (w, h) = (6, 6);
        let den = denoiser(w, h, 13);
        let truth = random_vec(36, 14);
        let loss = LossSpec::new(identity_model(w, h), truth.clone()).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::ScPnpIsta);
        cfg.max_iters = 5;
        let traj = run(&loss, &den, &cfg, Some(&truth)).unwrap();
        assert!(traj
            .records
            .iter()
            .all(|r| r.psnr.is_some_and(f64::is_finite)));
    }
}
