//! JSON experiment configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use pnp_kernel::denoiser::{KernelParams, WindowProfile};
use pnp_kernel::forward::{BlurKernel, ForwardModel, InpaintingMask, Subsampler, Task};
use pnp_kernel::image::{downscale_to, phantom, read_mask, read_pgm};
use pnp_kernel::solver::{Algorithm, CgConfig, Init, SolverConfig};
use pnp_kernel::{DenoiserMode, Error, VecImage};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: String,
    /// Input PGM; a synthetic phantom of `synthetic_size` when absent.
    pub image: Option<PathBuf>,
    pub synthetic_size: [usize; 2],
    /// Sweeps, verification and denoising downscale the input to this side.
    pub max_side: usize,
    pub seed: u64,
    /// Standard deviation of the additive noise, as a fraction of `[0, 1]`.
    pub noise: f64,
    pub mask: MaskConfig,
    pub blur: BlurConfig,
    pub stride: usize,
    pub kernel: KernelConfig,
    pub denoiser: String,
    /// `observed` builds the guide from the measurement, `clean` from the
    /// input image. Sweeps default to `clean`, other commands to `observed`.
    pub guide: Option<String>,
    pub algorithm: String,
    pub gamma: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub init: String,
    /// Measure the contraction factor in `reconstruct`.
    pub measure: bool,
    pub power_tol: f64,
    pub power_max_iters: usize,
    pub sweep: SweepConfig,
    pub counterexample: CounterexampleConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    pub mu: f64,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
    /// PGM whose nonzero pixels are observed; overrides `mu`.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlurConfig {
    pub size: usize,
    pub std: f64,
    /// Plain-text kernel file (`rows cols` then weights); overrides the Gaussian.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub patch_radius: usize,
    pub window_radius: usize,
    pub h: f64,
    pub profile: String,
}

/// Grid axes; an empty list keeps the base value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub algorithms: Vec<String>,
    pub mu: Vec<f64>,
    pub stride: Vec<usize>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub n_max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: "deblur".into(),
            image: None,
            synthetic_size: [64, 64],
            max_side: 64,
            seed: 0,
            noise: 0.03,
            mask: MaskConfig::default(),
            blur: BlurConfig::default(),
            stride: 2,
            kernel: KernelConfig::default(),
            denoiser: "plain".into(),
            guide: None,
            algorithm: "sc_pnp_ista".into(),
            gamma: 1.0,
            rho: 1.0,
            max_iters: 1000,
            stop_tol: 1e-9,
            cg_tol: 1e-10,
            cg_max_iters: 500,
            init: "guide".into(),
            measure: true,
            power_tol: 1e-8,
            power_max_iters: 50_000,
            sweep: SweepConfig::default(),
            counterexample: CounterexampleConfig::default(),
        }
    }
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            seed: None,
            path: None,
        }
    }
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            size: 5,
            std: 1.0,
            path: None,
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            patch_radius: 1,
            window_radius: 2,
            h: 0.5,
            profile: "hat".into(),
        }
    }
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { n_max: 64 }
    }
}

/// Which image the denoiser's guide is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuideSource {
    Observed,
    Clean,
}

fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every range check the library would make later, done up front.
    pub fn validate(&self) -> Result<(), CliError> {
        let task = self.task()?;
        self.kernel_params(self.kernel.h)?;
        self.mode()?;
        self.guide_source(false)?;
        for alg in self.algorithms()? {
            self.solver_config(alg, self.gamma, self.rho)?
                .validate()
                .map_err(config_err)?;
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::Config(format!(
                "noise must be nonnegative, got {}",
                self.noise
            )));
        }
        if self.max_side == 0 || self.synthetic_size.contains(&0) {
            return Err(CliError::Config("image sizes must be positive".into()));
        }
        if self.counterexample.n_max < 3 {
            return Err(CliError::Config(format!(
                "counterexample.n_max must be at least 3, got {}",
                self.counterexample.n_max
            )));
        }
        if !(self.power_tol > 0.0) || self.power_max_iters == 0 {
            return Err(CliError::Config(
                "power-method settings must be positive".into(),
            ));
        }
        for mu in self.mu_grid() {
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(CliError::Config(format!("mu must lie in (0, 1], got {mu}")));
            }
        }
        if !self.sweep.mu.is_empty() && task != Task::Inpainting {
            return Err(CliError::Config(
                "a mu grid applies to inpainting; use a stride grid for sr".into(),
            ));
        }
        if !self.sweep.stride.is_empty() && task != Task::Superresolution {
            return Err(CliError::Config("a stride grid applies to sr only".into()));
        }
        for s in self.stride_grid() {
            Subsampler::new(s).map_err(config_err)?;
        }
        if self.blur.path.is_none() {
            BlurKernel::gaussian(self.blur.size, self.blur.std).map_err(config_err)?;
        }
        for h in self.h_grid() {
            self.kernel_params(h)?;
        }
        for g in self.gamma_grid() {
            SolverConfig {
                gamma: g,
                ..SolverConfig::new(Algorithm::PnpIsta)
            }
            .validate()
            .map_err(config_err)?;
        }
        for r in self.rho_grid() {
            SolverConfig {
                rho: r,
                ..SolverConfig::new(Algorithm::PnpAdmm)
            }
            .validate()
            .map_err(config_err)?;
        }
        Ok(())
    }

    pub fn task(&self) -> Result<Task, CliError> {
        self.task.parse().map_err(config_err)
    }

    pub fn mode(&self) -> Result<DenoiserMode, CliError> {
        self.denoiser.parse().map_err(config_err)
    }

    pub fn guide_source(&self, sweep: bool) -> Result<GuideSource, CliError> {
        match self.guide.as_deref() {
            None if sweep => Ok(GuideSource::Clean),
            None | Some("observed") => Ok(GuideSource::Observed),
            Some("clean") => Ok(GuideSource::Clean),
            Some(other) => Err(CliError::Config(format!("unknown guide source {other:?}"))),
        }
    }

    pub fn kernel_params(&self, h: f64) -> Result<KernelParams, CliError> {
        let profile = match self.kernel.profile.as_str() {
            "hat" => WindowProfile::Hat,
            "box" => WindowProfile::Box,
            other => {
                return Err(CliError::Config(format!(
                    "unknown window profile {other:?}"
                )))
            }
        };
        Ok(
            KernelParams::new(self.kernel.patch_radius, self.kernel.window_radius, h)
                .map_err(config_err)?
                .with_profile(profile),
        )
    }

    /// The sweep's algorithms, or the single configured one.
    pub fn algorithms(&self) -> Result<Vec<Algorithm>, CliError> {
        let names = if self.sweep.algorithms.is_empty() {
            std::slice::from_ref(&self.algorithm)
        } else {
            &self.sweep.algorithms[..]
        };
        names
            .iter()
            .map(|a| a.parse().map_err(config_err))
            .collect()
    }

    pub fn mu_grid(&self) -> Vec<f64> {
        grid(&self.sweep.mu, self.mask.mu)
    }

    pub fn stride_grid(&self) -> Vec<usize> {
        if self.sweep.stride.is_empty() {
            vec![self.stride]
        } else {
            self.sweep.stride.clone()
        }
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        grid(&self.sweep.gamma, self.gamma)
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        grid(&self.sweep.rho, self.rho)
    }

    pub fn h_grid(&self) -> Vec<f64> {
        grid(&self.sweep.h, self.kernel.h)
    }

    pub fn solver_config(
        &self,
        algorithm: Algorithm,
        gamma: f64,
        rho: f64,
    ) -> Result<SolverConfig, CliError> {
        let init = match self.init.as_str() {
            "guide" => Init::Guide,
            "zero" => Init::Zero,
            "adjoint" => Init::AdjointData,
            other => return Err(CliError::Config(format!("unknown init rule {other:?}"))),
        };
        Ok(SolverConfig {
            algorithm,
            gamma,
            rho,
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            cg: CgConfig {
                tol: self.cg_tol,
                max_iters: self.cg_max_iters,
            },
            init,
        })
    }

    pub fn power(&self) -> pnp_kernel::PowerConfig {
        pnp_kernel::PowerConfig {
            tol: self.power_tol,
            max_iters: self.power_max_iters,
            seed: self.seed,
        }
    }

    /// The input image, downscaled to `max_side` when `desk_scale` is set.
    pub fn load_image(&self, desk_scale: bool) -> Result<VecImage, CliError> {
        let img = match &self.image {
            Some(path) => read_pgm(path).map_err(|e| CliError::from_core(e, Some(path)))?,
            None => phantom(self.synthetic_size[0], self.synthetic_size[1]),
        };
        if desk_scale {
            downscale_to(&img, self.max_side).map_err(config_err)
        } else {
            Ok(img)
        }
    }

    pub fn blur_kernel(&self) -> Result<BlurKernel, CliError> {
        match &self.blur.path {
            Some(path) => BlurKernel::load(path).map_err(|e| CliError::from_core(e, Some(path))),
            None => BlurKernel::gaussian(self.blur.size, self.blur.std).map_err(config_err),
        }
    }

    /// Forward model for an image of the given size, with the grid's `mu`
    /// (inpainting) or `stride` (superresolution).
    pub fn model(
        &self,
        width: usize,
        height: usize,
        mu: f64,
        stride: usize,
    ) -> Result<ForwardModel, CliError> {
        let model = match self.task()? {
            Task::Inpainting => {
                let mask = match &self.mask.path {
                    Some(path) => read_mask(path, width, height)
                        .map_err(|e| CliError::from_core(e, Some(path)))?,
                    None => InpaintingMask::random(
                        width * height,
                        mu,
                        self.mask.seed.unwrap_or(self.seed),
                    )
                    .map_err(config_err)?,
                };
                ForwardModel::inpainting(mask, width, height)
            }
            Task::Deblurring => ForwardModel::deblurring(self.blur_kernel()?, width, height),
            Task::Superresolution => ForwardModel::superresolution(
                self.blur_kernel()?,
                Subsampler::new(stride).map_err(config_err)?,
                width,
                height,
            ),
        };
        model.map_err(config_err)
    }
}

fn grid(values: &[f64], base: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}
