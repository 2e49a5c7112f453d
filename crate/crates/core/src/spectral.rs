//! Power iteration for operator norms and deflated eigenvalues, the update
//! operators of each algorithm, and contraction factors paired with bounds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{self, BoundReport};
use crate::denoiser::{DenoiserMode, KernelDenoiser};
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, Task};
use crate::linop::{
    compose, norm2, BoxedMap, Deflated, DiagonalWeights, LinearMap, ShiftScale, Similarity,
};
use crate::solver::{solve_shifted_normal, Algorithm, CgConfig};

/// CG settings inside operators that embed an inverse.
pub const OPERATOR_CG: CgConfig = CgConfig {
    tol: 1e-12,
    max_iters: 2000,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative eigen-residual of the final iterate.
    pub residual: f64,
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    x
}

/// Stopping rule on a scalar estimate sequence. The relative change is
/// scaled by `q / (1 - q)`, with `q` the observed ratio of successive
/// changes, which estimates the remaining distance to the limit for a
/// linearly converging sequence. Two consecutive passes are required.
struct Stopper {
    tol: f64,
    estimate: f64,
    change: f64,
    calm: usize,
}

impl Stopper {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            estimate: f64::NAN,
            change: f64::NAN,
            calm: 0,
        }
    }

    fn push(&mut self, value: f64) -> bool {
        let change = (value - self.estimate).abs() / value.abs().max(f64::MIN_POSITIVE);
        let q = change / self.change;
        let remaining = if change < 1e-15 {
            change
        } else if q < 1.0 {
            change * (q / (1.0 - q)).max(1.0)
        } else {
            f64::INFINITY
        };
        self.estimate = value;
        self.change = change;
        self.calm = if remaining < self.tol {
            self.calm + 1
        } else {
            0
        };
        self.calm >= 2
    }
}

/// Power iteration on a positive semidefinite action `step` (`x -> S x`):
/// returns the dominant eigenvalue of `S`.
fn power_psd<F>(n: usize, cfg: &PowerConfig, mut step: F) -> Result<SpectralReport>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("power-method tolerance must be positive"));
    }
    let mut x = start_vector(n, cfg.seed);
    let mut y = vec![0.0; n];
    let mut estimate = f64::NAN;
    let mut stopper = Stopper::new(cfg.tol);
    for it in 1..=cfg.max_iters {
        step(&x, &mut y)?;
        let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(SpectralReport {
                value: 0.0,
                iterations: it,
                converged: true,
                residual: 0.0,
            });
        }
        let residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - rayleigh * a).powi(2))
            .sum::<f64>()
            .sqrt()
            / ny;
        estimate = rayleigh;
        if stopper.push(rayleigh) {
            return Ok(SpectralReport {
                value: estimate.max(0.0),
                iterations: it,
                converged: true,
                residual,
            });
        }
        x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / ny);
    }
    let residual = {
        step(&x, &mut y)?;
        let r: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        x.iter()
            .zip(&y)
            .map(|(a, b)| (b - r * a).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm2(&y).max(f64::MIN_POSITIVE)
    };
    Ok(SpectralReport {
        value: estimate.max(0.0),
        iterations: cfg.max_iters,
        converged: false,
        residual,
    })
}

/// `||M||_2`, from power iteration on `M^T M`.
pub fn power_sigma(op: &dyn LinearMap, cfg: &PowerConfig) -> Result<SpectralReport> {
    let mut mx = vec![0.0; op.dim_out()];
    let mut report = power_psd(op.dim_in(), cfg, |x, out| {
        op.apply_into(x, &mut mx)?;
        op.adjoint_into(&mx, out)
    })?;
    report.value = report.value.sqrt();
    Ok(report)
}

/// `||M||_D = ||D^{1/2} M D^{-1/2}||_2`.
pub fn power_sigma_d(
    op: &dyn LinearMap,
    d: &DiagonalWeights,
    cfg: &PowerConfig,
) -> Result<SpectralReport> {
    power_sigma(&Similarity::new(op, d)?, cfg)
}

/// Dominant eigenvalue magnitude of a square map with real spectrum.
///
/// Iterates `T^2`, so a pair `+-lambda` does not stall the estimate
/// `sqrt(||T^2 x||)`; the report's residual is that of `T^2`.
pub fn dominant_eigen_magnitude(op: &dyn LinearMap, cfg: &PowerConfig) -> Result<SpectralReport> {
    Error::check_len(
        "eigenvalue iteration (square map)",
        op.dim_in(),
        op.dim_out(),
    )?;
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("power-method tolerance must be positive"));
    }
    let n = op.dim_in();
    let mut x = start_vector(n, cfg.seed);
    let mut tx = vec![0.0; n];
    let mut ttx = vec![0.0; n];
    let mut estimate = f64::NAN;
    let mut stopper = Stopper::new(cfg.tol);
    let mut residual = f64::NAN;
    for it in 1..=cfg.max_iters {
        op.apply_into(&x, &mut tx)?;
        op.apply_into(&tx, &mut ttx)?;
        let n2 = norm2(&ttx);
        if n2 == 0.0 {
            return Ok(SpectralReport {
                value: 0.0,
                iterations: it,
                converged: true,
                residual: 0.0,
            });
        }
        let value = n2.sqrt();
        // Residual of x against the best scalar multiple of T^2 x.
        let proj: f64 = x.iter().zip(&ttx).map(|(a, b)| a * b).sum();
        residual = x
            .iter()
            .zip(&ttx)
            .map(|(a, b)| (b - proj * a).powi(2))
            .sum::<f64>()
            .sqrt()
            / n2;
        estimate = value;
        if stopper.push(value) {
            return Ok(SpectralReport {
                value,
                iterations: it,
                converged: residual < 1e-3,
                residual,
            });
        }
        x.iter_mut().zip(&ttx).for_each(|(a, b)| *a = b / n2);
    }
    Ok(SpectralReport {
        value: estimate,
        iterations: cfg.max_iters,
        converged: false,
        residual,
    })
}

/// Second eigenvalue of a map with `W e = e`, via `W - (1/n) e e^T`.
pub fn lambda2_of(w: &dyn LinearMap, cfg: &PowerConfig) -> Result<SpectralReport> {
    dominant_eigen_magnitude(&Deflated(w), cfg)
}

/// `max |2 lambda - 1|` over the non-unit eigenvalues of `W`, via
/// `(2W - I) - (1/n) e e^T`.
pub fn zeta_star_of(w: &dyn LinearMap, cfg: &PowerConfig) -> Result<SpectralReport> {
    let v = ShiftScale::new(-1.0, 2.0, w)?;
    dominant_eigen_magnitude(&Deflated(v), cfg)
}

pub fn lambda2(den: &KernelDenoiser, cfg: &PowerConfig) -> Result<SpectralReport> {
    lambda2_of(den, cfg)
}

pub fn zeta_star(den: &KernelDenoiser, cfg: &PowerConfig) -> Result<SpectralReport> {
    zeta_star_of(den, cfg)
}

/// Symmetric map `S - u u^T` with `u` a unit vector.
struct RankOneDeflated<M> {
    map: M,
    u: Vec<f64>,
}

impl<M: LinearMap> LinearMap for RankOneDeflated<M> {
    fn dim_in(&self) -> usize {
        self.map.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.map.dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.map.apply_into(x, out)?;
        let c: f64 = self.u.iter().zip(x).map(|(a, b)| a * b).sum();
        out.iter_mut().zip(&self.u).for_each(|(o, u)| *o -= c * u);
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.map.adjoint_into(y, out)?;
        let c: f64 = self.u.iter().zip(y).map(|(a, b)| a * b).sum();
        out.iter_mut().zip(&self.u).for_each(|(o, u)| *o -= c * u);
        Ok(())
    }
}

/// `(lambda_2, zeta*)` from the symmetric form `D^{1/2} W D^{-1/2}` deflated
/// by its unit Perron vector `D^{1/2} e / sqrt(tr D)`. Cross-check for the
/// nonsymmetric deflation.
pub fn symmetric_cross_check(
    den: &KernelDenoiser,
    cfg: &PowerConfig,
) -> Result<(SpectralReport, SpectralReport)> {
    let d = den.inner_weights();
    let trace = d.trace();
    let u: Vec<f64> = d.as_slice().iter().map(|v| (v / trace).sqrt()).collect();
    let sym = Similarity::new(den, d)?;
    let l2 = power_sigma(
        &RankOneDeflated {
            map: &sym,
            u: u.clone(),
        },
        cfg,
    )?;
    let v = ShiftScale::new(-1.0, 2.0, &sym)?;
    let zeta = power_sigma(&RankOneDeflated { map: v, u }, cfg)?;
    Ok((l2, zeta))
}

/// Update operators and their building blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    /// `I - gamma A^T A`.
    G,
    /// `I - gamma D^{-1} A^T A`.
    Gs,
    /// `W G`.
    P,
    /// `W G_s`.
    Ps,
    /// `2 (I + rho A^T A)^{-1} - I`.
    F,
    /// `2 (I + rho D^{-1} A^T A)^{-1} - I`.
    Fs,
    /// `2W - I`.
    V,
    /// `F V`.
    J,
    /// `F_s V`.
    Js,
    /// `(I + J) / 2`.
    R,
    /// `(I + J_s) / 2`.
    Rs,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 11] = [
        OperatorKind::G,
        OperatorKind::Gs,
        OperatorKind::P,
        OperatorKind::Ps,
        OperatorKind::F,
        OperatorKind::Fs,
        OperatorKind::V,
        OperatorKind::J,
        OperatorKind::Js,
        OperatorKind::R,
        OperatorKind::Rs,
    ];

    pub fn is_scaled(self) -> bool {
        matches!(
            self,
            OperatorKind::Gs
                | OperatorKind::Ps
                | OperatorKind::Fs
                | OperatorKind::Js
                | OperatorKind::Rs
        )
    }

    /// Whether the scalar parameter is `rho` rather than `gamma`.
    pub fn uses_rho(self) -> bool {
        matches!(
            self,
            OperatorKind::F
                | OperatorKind::Fs
                | OperatorKind::J
                | OperatorKind::Js
                | OperatorKind::R
                | OperatorKind::Rs
        )
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| {
                k.to_string().eq_ignore_ascii_case(s) || format!("{k:?}").replace('s', "_s") == s
            })
            .ok_or_else(|| Error::invalid(format!("unknown operator kind {s:?}")))
    }
}

/// `I - gamma D^{-1} A^T A`; unscaled when `dinv` is `None`.
pub struct GradientStep<'a> {
    model: &'a ForwardModel,
    gamma: f64,
    dinv: Option<Vec<f64>>,
}

impl<'a> GradientStep<'a> {
    pub fn new(model: &'a ForwardModel, gamma: f64, d: Option<&DiagonalWeights>) -> Result<Self> {
        if let Some(d) = d {
            Error::check_len("gradient-step weights", model.n(), d.len())?;
        }
        Ok(Self {
            model,
            gamma,
            dinv: d.map(|d| d.as_slice().iter().map(|v| 1.0 / v).collect()),
        })
    }
}

impl LinearMap for GradientStep<'_> {
    fn dim_in(&self) -> usize {
        self.model.n()
    }
    fn dim_out(&self) -> usize {
        self.model.n()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ax = self.model.apply(x)?;
        self.model.adjoint_into(&ax, out)?;
        match &self.dinv {
            Some(dinv) => {
                for ((o, x), di) in out.iter_mut().zip(x).zip(dinv) {
                    *o = x - self.gamma * di * *o;
                }
            }
            None => {
                for (o, x) in out.iter_mut().zip(x) {
                    *o = x - self.gamma * *o;
                }
            }
        }
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let scaled: Vec<f64> = match &self.dinv {
            Some(dinv) => y.iter().zip(dinv).map(|(a, b)| a * b).collect(),
            None => y.to_vec(),
        };
        let ay = self.model.apply(&scaled)?;
        self.model.adjoint_into(&ay, out)?;
        for (o, y) in out.iter_mut().zip(y) {
            *o = y - self.gamma * *o;
        }
        Ok(())
    }
}

/// `2 (I + rho D^{-1} A^T A)^{-1} - I`; unscaled when `d` is the identity.
pub struct ProxReflection<'a> {
    model: &'a ForwardModel,
    rho: f64,
    d: DiagonalWeights,
    cg: CgConfig,
}

impl<'a> ProxReflection<'a> {
    pub fn new(
        model: &'a ForwardModel,
        rho: f64,
        d: Option<&DiagonalWeights>,
        cg: CgConfig,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        let d = match d {
            Some(d) => {
                Error::check_len("prox-reflection weights", model.n(), d.len())?;
                d.clone()
            }
            None => DiagonalWeights::identity(model.n()),
        };
        Ok(Self { model, rho, d, cg })
    }
}

impl LinearMap for ProxReflection<'_> {
    fn dim_in(&self) -> usize {
        self.model.n()
    }
    fn dim_out(&self) -> usize {
        self.model.n()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        // (I + rho D^{-1} A^T A)^{-1} x = (D + rho A^T A)^{-1} D x
        let dx: Vec<f64> = x
            .iter()
            .zip(self.d.as_slice())
            .map(|(a, b)| a * b)
            .collect();
        let z = solve_shifted_normal(self.model, &self.d, self.rho, &dx, Some(x), self.cg)?.x;
        for ((o, z), x) in out.iter_mut().zip(&z).zip(x) {
            *o = 2.0 * z - x;
        }
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        // ((D + rho A^T A)^{-1} D)^T = D (D + rho A^T A)^{-1}
        let warm: Vec<f64> = y
            .iter()
            .zip(self.d.as_slice())
            .map(|(a, b)| a / b)
            .collect();
        let z = solve_shifted_normal(self.model, &self.d, self.rho, y, Some(&warm), self.cg)?.x;
        for (((o, z), y), d) in out.iter_mut().zip(&z).zip(y).zip(self.d.as_slice()) {
            *o = 2.0 * d * z - y;
        }
        Ok(())
    }
}

/// Builds the named operator. `param` is `gamma` for `G, G_s, P, P_s` and
/// `rho` for `F, F_s, J, J_s, R, R_s`; it is ignored for `V`. Scaled kinds
/// use the denoiser's inner-product weights.
pub fn make_update_operator<'a>(
    kind: OperatorKind,
    model: &'a ForwardModel,
    den: &'a KernelDenoiser,
    param: f64,
) -> Result<BoxedMap<'a>> {
    Error::check_len("denoiser", model.n(), den.n())?;
    let d = kind.is_scaled().then(|| den.inner_weights());
    let v = || ShiftScale::new(-1.0, 2.0, den);
    Ok(match kind {
        OperatorKind::G | OperatorKind::Gs => Box::new(GradientStep::new(model, param, d)?),
        OperatorKind::P | OperatorKind::Ps => {
            Box::new(compose(den, GradientStep::new(model, param, d)?)?)
        }
        OperatorKind::F | OperatorKind::Fs => {
            Box::new(ProxReflection::new(model, param, d, OPERATOR_CG)?)
        }
        OperatorKind::V => Box::new(v()?),
        OperatorKind::J | OperatorKind::Js => Box::new(compose(
            ProxReflection::new(model, param, d, OPERATOR_CG)?,
            v()?,
        )?),
        OperatorKind::R | OperatorKind::Rs => {
            let j = compose(ProxReflection::new(model, param, d, OPERATOR_CG)?, v()?)?;
            Box::new(ShiftScale::new(0.5, 0.5, j)?)
        }
    })
}

/// Measured contraction factor of an algorithm's update operator, with the
/// matching closed-form bound when one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub algorithm: Algorithm,
    pub parameter: f64,
    /// `||P||_2`, `||P_s||_D`, `(1 + ||J||_2) / 2` or `(1 + ||J_s||_D) / 2`.
    pub measured: SpectralReport,
    /// `lambda_2` for ISTA variants, `zeta*` for ADMM variants.
    pub gap_quantity: SpectralReport,
    pub bound: Option<BoundReport>,
}

impl ContractionReport {
    /// Bound on the contraction factor itself (ADMM bounds are converted
    /// from `J` to `R` by `(1 + sqrt(bound)) / 2`).
    pub fn factor_bound(&self) -> Option<f64> {
        self.bound.as_ref().map(|b| {
            if self.algorithm.is_admm() {
                0.5 * (1.0 + b.bound)
            } else {
                b.bound
            }
        })
    }

    /// Fails when a bound applies and the measurement is not below one or
    /// exceeds the bound by more than `1e-6`.
    pub fn check(&self) -> Result<()> {
        if let Some(bound) = self.factor_bound() {
            let m = self.measured.value;
            if !(m < 1.0) || m > bound + 1e-6 {
                return Err(Error::Verification(format!(
                    "{} with parameter {}: measured contraction {m} against bound {bound}",
                    self.algorithm, self.parameter
                )));
            }
        }
        Ok(())
    }
}

/// Measures the contraction factor and evaluates the matching bound
/// without asserting anything.
pub fn measure_contraction(
    model: &ForwardModel,
    den: &KernelDenoiser,
    algorithm: Algorithm,
    parameter: f64,
    cfg: &PowerConfig,
) -> Result<ContractionReport> {
    let weights = den.inner_weights();
    let measured = match algorithm {
        Algorithm::PnpIsta => power_sigma(
            &*make_update_operator(OperatorKind::P, model, den, parameter)?,
            cfg,
        )?,
        Algorithm::ScPnpIsta => power_sigma_d(
            &*make_update_operator(OperatorKind::Ps, model, den, parameter)?,
            weights,
            cfg,
        )?,
        Algorithm::PnpAdmm | Algorithm::ScPnpAdmm => {
            let j = if algorithm == Algorithm::PnpAdmm {
                power_sigma(
                    &*make_update_operator(OperatorKind::J, model, den, parameter)?,
                    cfg,
                )?
            } else {
                power_sigma_d(
                    &*make_update_operator(OperatorKind::Js, model, den, parameter)?,
                    weights,
                    cfg,
                )?
            };
            SpectralReport {
                value: 0.5 * (1.0 + j.value),
                ..j
            }
        }
    };
    let gap_quantity = if algorithm.is_admm() {
        zeta_star(den, cfg)?
    } else {
        lambda2(den, cfg)?
    };
    let (task, mu, n) = (model.task(), model.mu(), model.n());
    let norm_d = weights.max();
    let symmetric = den.mode() == DenoiserMode::Symmetrized;
    let g = gap_quantity.value.min(1.0);
    let bound = match algorithm {
        Algorithm::PnpIsta if symmetric => Some(bounds::bound_ista_plain(task, g, parameter, mu)?),
        Algorithm::ScPnpIsta => Some(bounds::bound_ista_scaled(g, parameter, mu, norm_d)?),
        Algorithm::PnpAdmm if symmetric && task != Task::Superresolution => {
            Some(bounds::bound_admm_sym(task, g, parameter, mu)?)
        }
        Algorithm::ScPnpAdmm => Some(match task {
            Task::Inpainting => {
                let theta = bounds::theta(weights, parameter)?;
                bounds::bound_admm_scaled_inpaint(g, theta, mu, norm_d)?
            }
            _ => bounds::bound_admm_scaled_smooth(task, g, parameter, mu, n, norm_d)?,
        }),
        _ => None,
    };
    Ok(ContractionReport {
        algorithm,
        parameter,
        measured,
        gap_quantity,
        bound,
    })
}

/// [`measure_contraction`] followed by [`ContractionReport::check`].
pub fn contraction_report(
    model: &ForwardModel,
    den: &KernelDenoiser,
    algorithm: Algorithm,
    parameter: f64,
    cfg: &PowerConfig,
) -> Result<ContractionReport> {
    let report = measure_contraction(model, den, algorithm, parameter, cfg)?;
    report.check()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::KernelParams;
    use crate::forward::{BlurKernel, InpaintingMask};
    use crate::linop::{DenseMap, Diagonal, VecImage};

    fn random_guide(w: usize, h: usize, seed: u64) -> VecImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VecImage::new((0..w * h).map(|_| rng.random::<f64>()).collect(), w, h).unwrap()
    }

    #[test]
    fn sigma_of_diagonal_and_zero() {
        let cfg = PowerConfig::default();
        let r = power_sigma(&Diagonal(vec![3.0, 1.0]), &cfg).unwrap();
        assert!((r.value - 3.0).abs() < 1e-8 && r.converged);
        let r = power_sigma(&Diagonal(vec![0.0; 4]), &cfg).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn sigma_d_with_identity_weights() {
        let m = DenseMap::new(2, 2, vec![1.0, 2.0, 0.5, -1.0]).unwrap();
        let cfg = PowerConfig::default();
        let a = power_sigma(&m, &cfg).unwrap().value;
        let b = power_sigma_d(&m, &DiagonalWeights::identity(2), &cfg)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn lambda2_two_pixel() {
        let den = KernelDenoiser::from_dense(2, &[1.0, 0.25, 0.25, 1.0]).unwrap();
        let r = lambda2(&den, &PowerConfig::default()).unwrap();
        assert!((r.value - 0.6).abs() < 1e-10);
    }

    #[test]
    fn lambda2_of_rank_one_denoiser() {
        let den = KernelDenoiser::from_dense(5, &[1.0; 25]).unwrap();
        let cfg = PowerConfig::default();
        assert!(lambda2(&den, &cfg).unwrap().value < 1e-12);
        // every non-unit eigenvalue is 0, so |2*0 - 1| = 1
        assert!((zeta_star(&den, &cfg).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zeta_star_from_explicit_spectrum() {
        // symmetric W with eigenvalues {1, 0.9, 0.1} and eigenvector e / sqrt(3)
        let s3 = 3f64.sqrt();
        let q = [
            [1.0 / s3, 1.0 / s3, 1.0 / s3],
            [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0],
            [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()],
        ];
        let lam = [1.0, 0.9, 0.1];
        let w: Vec<f64> = (0..9)
            .map(|k| (0..3).map(|t| lam[t] * q[t][k / 3] * q[t][k % 3]).sum())
            .collect();
        let w = DenseMap::new(3, 3, w).unwrap();
        let cfg = PowerConfig::default();
        assert!((zeta_star_of(&w, &cfg).unwrap().value - 0.8).abs() < 1e-9);
        assert!((lambda2_of(&w, &cfg).unwrap().value - 0.9).abs() < 1e-9);

        let half: Vec<f64> = (0..9)
            .map(|k| {
                let lam = [1.0, 0.5, 0.5];
                (0..3).map(|t| lam[t] * q[t][k / 3] * q[t][k % 3]).sum()
            })
            .collect();
        let half = DenseMap::new(3, 3, half).unwrap();
        assert!(zeta_star_of(&half, &cfg).unwrap().value < 1e-12);
    }

    #[test]
    fn nonsymmetric_deflation_agrees_with_symmetric_route() {
        let den = KernelDenoiser::build(
            &random_guide(8, 8, 4),
            &KernelParams::new(1, 1, 0.4).unwrap(),
        )
        .unwrap();
        let cfg = PowerConfig::default();
        let (l2s, zs) = symmetric_cross_check(&den, &cfg).unwrap();
        assert!((lambda2(&den, &cfg).unwrap().value - l2s.value).abs() < 1e-6);
        assert!((zeta_star(&den, &cfg).unwrap().value - zs.value).abs() < 1e-6);
    }

    #[test]
    fn operator_factory_examples() {
        let model =
            ForwardModel::inpainting(InpaintingMask::new(vec![true; 16]).unwrap(), 4, 4).unwrap();
        let den = KernelDenoiser::build(
            &random_guide(4, 4, 1),
            &KernelParams::new(0, 1, 0.5).unwrap(),
        )
        .unwrap();
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let g = make_update_operator(OperatorKind::G, &model, &den, 1.0).unwrap();
        assert!(g.apply(&x).unwrap().iter().all(|v| *v == 0.0));
        let v = make_update_operator(OperatorKind::V, &model, &den, 0.0).unwrap();
        assert!(v
            .apply(&[1.0; 16])
            .unwrap()
            .iter()
            .all(|t| (t - 1.0).abs() < 1e-14));
        let f = make_update_operator(OperatorKind::F, &model, &den, 1.0).unwrap();
        assert!(f.apply(&[1.0; 16]).unwrap().iter().all(|t| t.abs() < 1e-14));
        assert!(make_update_operator(OperatorKind::F, &model, &den, 0.0).is_err());
    }

    #[test]
    fn operator_kind_names() {
        assert_eq!("Ps".parse::<OperatorKind>().unwrap(), OperatorKind::Ps);
        assert_eq!("P_s".parse::<OperatorKind>().unwrap(), OperatorKind::Ps);
        assert_eq!("j".parse::<OperatorKind>().unwrap(), OperatorKind::J);
        assert!("Q".parse::<OperatorKind>().is_err());
    }

    #[test]
    fn adjoints_of_factory_operators() {
        let model = ForwardModel::deblurring(
            BlurKernel::new(2, 2, vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
            5,
            5,
        )
        .unwrap();
        let den = KernelDenoiser::build(
            &random_guide(5, 5, 2),
            &KernelParams::new(1, 1, 0.5).unwrap(),
        )
        .unwrap();
        let x = random_guide(5, 5, 3).into_vec();
        let y = random_guide(5, 5, 4).into_vec();
        for kind in OperatorKind::ALL {
            let op = make_update_operator(kind, &model, &den, 0.7).unwrap();
            let lhs: f64 = op
                .apply(&x)
                .unwrap()
                .iter()
                .zip(&y)
                .map(|(a, b)| a * b)
                .sum();
            let rhs: f64 = x
                .iter()
                .zip(&op.adjoint(&y).unwrap())
                .map(|(a, b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()), "{kind}");
        }
    }

    #[test]
    fn contraction_with_scaled_ista_is_bounded() {
        let den = KernelDenoiser::build(
            &random_guide(12, 12, 9),
            &KernelParams::new(1, 1, 0.5).unwrap(),
        )
        .unwrap();
        let mask = InpaintingMask::random(144, 0.3, 2).unwrap();
        let model = ForwardModel::inpainting(mask, 12, 12).unwrap();
        let report = contraction_report(
            &model,
            &den,
            Algorithm::ScPnpIsta,
            1.0,
            &PowerConfig::default(),
        )
        .unwrap();
        assert!(report.measured.value < 1.0);
        assert!(report.measured.value <= report.factor_bound().unwrap() + 1e-6);
    }

    #[test]
    fn plain_ista_carries_no_bound() {
        let den = KernelDenoiser::build(
            &random_guide(8, 8, 9),
            &KernelParams::new(1, 1, 0.5).unwrap(),
        )
        .unwrap();
        let model = ForwardModel::deblurring(BlurKernel::gaussian(3, 1.0).unwrap(), 8, 8).unwrap();
        let r = measure_contraction(
            &model,
            &den,
            Algorithm::PnpIsta,
            1.0,
            &PowerConfig::default(),
        )
        .unwrap();
        assert!(r.bound.is_none());
        assert!(r.check().is_ok());
    }
}
