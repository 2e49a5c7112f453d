//! Measurement operators: inpainting masks, circular blur, and blur followed by
//! decimation. All three satisfy `||A||_2 <= 1` and `A e != 0`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linop::{dot, LinearMap};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Inpainting,
    Deblurring,
    Superresolution,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Inpainting => "inpaint",
            Task::Deblurring => "deblur",
            Task::Superresolution => "sr",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inpaint" | "inpainting" => Ok(Task::Inpainting),
            "deblur" | "deblurring" => Ok(Task::Deblurring),
            "sr" | "superresolution" => Ok(Task::Superresolution),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

/// Set of observed pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintingMask {
    observed: Vec<bool>,
    count: usize,
}

impl InpaintingMask {
    pub fn new(observed: Vec<bool>) -> Result<Self> {
        let count = observed.iter().filter(|o| **o).count();
        if count == 0 {
            return Err(Error::invalid(
                "inpainting mask must observe at least one pixel",
            ));
        }
        Ok(Self { observed, count })
    }

    /// Observes `round(mu * n)` pixels (at least one) drawn uniformly without
    /// replacement. For a fixed seed the observed sets are nested in `mu`.
    pub fn random(n: usize, mu: f64, seed: u64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::invalid(format!(
                "sampling fraction must lie in (0, 1], got {mu}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let keep = ((mu * n as f64).round() as usize).clamp(1, n);
        let mut observed = vec![false; n];
        for &i in &order[..keep] {
            observed[i] = true;
        }
        Self::new(observed)
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Fraction of observed pixels.
    pub fn mu(&self) -> f64 {
        self.count as f64 / self.observed.len() as f64
    }
}

/// Nonnegative blur taps summing to one, centered at `(rows / 2, cols / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
}

impl BlurKernel {
    /// Validates nonnegativity and renormalizes to unit sum.
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("blur kernel dimensions must be positive"));
        }
        Error::check_len("blur kernel taps", rows * cols, weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("blur taps must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("blur taps must not all be zero"));
        }
        Ok(Self {
            rows,
            cols,
            taps: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// `size x size` Gaussian sampled on the integer grid, then renormalized.
    pub fn gaussian(size: usize, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::invalid(format!(
                "Gaussian blur std must be positive, got {std}"
            )));
        }
        let c = (size / 2) as f64;
        let mut w = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let (di, dj) = (i as f64 - c, j as f64 - c);
                w.push((-(di * di + dj * dj) / (2.0 * std * std)).exp());
            }
        }
        Self::new(size, size, w)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(size, size, vec![1.0; size * size])
    }

    pub fn identity() -> Self {
        Self {
            rows: 1,
            cols: 1,
            taps: vec![1.0],
        }
    }

    /// Plain-text format: a header line `h w` followed by `h * w`
    /// whitespace-separated weights.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("blur kernel file: missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("blur kernel file: bad {what}: {e}")))
        };
        let rows = next_usize("height")?;
        let cols = next_usize("width")?;
        let weights = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Format(format!("blur kernel file: bad weight {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if weights.len() != rows * cols {
            return Err(Error::Format(format!(
                "blur kernel file: expected {} weights, found {}",
                rows * cols,
                weights.len()
            )));
        }
        Self::new(rows, cols, weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.rows).all(|i| {
            (0..self.cols).all(|j| {
                self.taps[i * self.cols + j]
                    == self.taps[(self.rows - 1 - i) * self.cols + (self.cols - 1 - j)]
            })
        })
    }
}

/// Keeps every `stride`-th pixel in each direction, anchored at the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsampler {
    stride: usize,
}

impl Subsampler {
    pub fn new(stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("subsampling stride must be positive"));
        }
        Ok(Self { stride })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn output_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (width.div_ceil(self.stride), height.div_ceil(self.stride))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardKind {
    Inpainting(InpaintingMask),
    Deblurring(BlurKernel),
    Superresolution(BlurKernel, Subsampler),
}

/// A measurement operator `A` on a `width x height` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    kind: ForwardKind,
    width: usize,
    height: usize,
}

impl ForwardModel {
    pub fn inpainting(mask: InpaintingMask, width: usize, height: usize) -> Result<Self> {
        Error::check_len("inpainting mask", width * height, mask.len())?;
        Ok(Self {
            kind: ForwardKind::Inpainting(mask),
            width,
            height,
        })
    }

    pub fn deblurring(kernel: BlurKernel, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Ok(Self {
            kind: ForwardKind::Deblurring(kernel),
            width,
            height,
        })
    }

    pub fn superresolution(
        kernel: BlurKernel,
        sampler: Subsampler,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Ok(Self {
            kind: ForwardKind::Superresolution(kernel, sampler),
            width,
            height,
        })
    }

    pub fn kind(&self) -> &ForwardKind {
        &self.kind
    }

    pub fn task(&self) -> Task {
        match self.kind {
            ForwardKind::Inpainting(_) => Task::Inpainting,
            ForwardKind::Deblurring(_) => Task::Deblurring,
            ForwardKind::Superresolution(..) => Task::Superresolution,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    /// Grid of the measurement vector.
    pub fn output_dims(&self) -> (usize, usize) {
        match &self.kind {
            ForwardKind::Superresolution(_, s) => s.output_dims(self.width, self.height),
            _ => (self.width, self.height),
        }
    }

    pub fn m(&self) -> usize {
        let (w, h) = self.output_dims();
        w * h
    }

    /// `||Ae||^2 / n`: observed fraction for inpainting, `m/n` for
    /// superresolution, 1 for deblurring.
    pub fn mu(&self) -> f64 {
        match &self.kind {
            ForwardKind::Inpainting(mask) => mask.mu(),
            ForwardKind::Deblurring(_) => 1.0,
            ForwardKind::Superresolution(..) => self.m() as f64 / self.n() as f64,
        }
    }

    /// The inpainting mask as a 0/1 vector, when `A` is diagonal.
    pub fn mask_diagonal(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ForwardKind::Inpainting(mask) => Some(
                mask.observed()
                    .iter()
                    .map(|o| if *o { 1.0 } else { 0.0 })
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn apply_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.adjoint(y)
    }

    /// `A e != 0`; equivalent to the restricted nullity property for any
    /// denoiser whose fixed points are the constants.
    pub fn check_rnp(&self) -> bool {
        let ones = vec![1.0; self.n()];
        match self.apply(&ones) {
            Ok(ae) => ae.iter().any(|v| *v != 0.0),
            Err(_) => false,
        }
    }

    /// `||Ae||_2^2`, computed by applying `A` and checked against the closed
    /// form (`mu n` for inpainting and superresolution, `n` for deblurring).
    pub fn norm_ae_squared(&self) -> Result<f64> {
        let ones = vec![1.0; self.n()];
        let ae = self.apply(&ones)?;
        let measured = dot(&ae, &ae);
        let closed = match &self.kind {
            ForwardKind::Inpainting(mask) => mask.count() as f64,
            ForwardKind::Deblurring(_) => self.n() as f64,
            ForwardKind::Superresolution(..) => self.m() as f64,
        };
        if (measured - closed).abs() > 1e-9 * closed.max(1.0) {
            return Err(Error::Verification(format!(
                "||Ae||^2 = {measured} disagrees with closed form {closed}"
            )));
        }
        Ok(measured)
    }

    fn convolve(&self, kernel: &BlurKernel, x: &[f64], out: &mut [f64], transpose: bool) {
        let (w, h) = (self.width as isize, self.height as isize);
        let (ci, cj) = ((kernel.rows / 2) as isize, (kernel.cols / 2) as isize);
        let sign = if transpose { 1 } else { -1 };
        let col_src: Vec<Vec<usize>> = (0..kernel.cols as isize)
            .map(|j| {
                (0..w)
                    .map(|c| (c + sign * (j - cj)).rem_euclid(w) as usize)
                    .collect()
            })
            .collect();
        par::for_each_row(out, self.width, |r, row| {
            row.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..kernel.rows {
                let src_row = (r as isize + sign * (i as isize - ci)).rem_euclid(h) as usize;
                let src = &x[src_row * self.width..(src_row + 1) * self.width];
                let taps = &kernel.taps[i * kernel.cols..(i + 1) * kernel.cols];
                for (&t, cols) in taps.iter().zip(&col_src) {
                    if t == 0.0 {
                        continue;
                    }
                    for (v, &c) in row.iter_mut().zip(cols) {
                        *v += t * src[c];
                    }
                }
            }
        });
    }
}

impl LinearMap for ForwardModel {
    fn dim_in(&self) -> usize {
        self.n()
    }

    fn dim_out(&self) -> usize {
        self.m()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ForwardKind::Inpainting(mask) => {
                for ((o, v), m) in out.iter_mut().zip(x).zip(mask.observed()) {
                    *o = if *m { *v } else { 0.0 };
                }
            }
            ForwardKind::Deblurring(kernel) => self.convolve(kernel, x, out, false),
            ForwardKind::Superresolution(kernel, sampler) => {
                let mut blurred = vec![0.0; self.n()];
                self.convolve(kernel, x, &mut blurred, false);
                let s = sampler.stride();
                let (mw, _) = self.output_dims();
                for (k, o) in out.iter_mut().enumerate() {
                    let (i, j) = (k / mw, k % mw);
                    *o = blurred[(s * i) * self.width + s * j];
                }
            }
        }
        Ok(())
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ForwardKind::Inpainting(_) => self.apply_into(y, out)?,
            ForwardKind::Deblurring(kernel) => self.convolve(kernel, y, out, true),
            ForwardKind::Superresolution(kernel, sampler) => {
                let s = sampler.stride();
                let (mw, _) = self.output_dims();
                let mut upsampled = vec![0.0; self.n()];
                for (k, v) in y.iter().enumerate() {
                    let (i, j) = (k / mw, k % mw);
                    upsampled[(s * i) * self.width + s * j] = *v;
                }
                self.convolve(kernel, &upsampled, out, true);
            }
        }
        Ok(())
    }
}
