//! Kernel denoisers `W = D^{-1} K` built from a guide image, and their
//! symmetric doubly stochastic counterpart `diag(s) K diag(s)`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::forward::{ForwardKind, ForwardModel};
use crate::linop::{DiagonalWeights, LinearMap, VecImage};
use crate::par;

/// Largest `n` for which dense eigenvalue checks run.
pub const DENSE_CHECK_LIMIT: usize = 1024;

/// Spatial weighting over the search window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowProfile {
    /// Separable triangle `1 - |t| / (r + 1)`; keeps `K` positive semidefinite.
    #[default]
    Hat,
    /// Flat window. `K` may fail to be positive semidefinite.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub patch_radius: usize,
    pub window_radius: usize,
    pub h: f64,
    pub profile: WindowProfile,
}

impl KernelParams {
    pub fn new(patch_radius: usize, window_radius: usize, h: f64) -> Result<Self> {
        let params = Self {
            patch_radius,
            window_radius,
            h,
            profile: WindowProfile::Hat,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_profile(mut self, profile: WindowProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth h must be positive, got {}",
                self.h
            )));
        }
        if self.window_radius == 0 {
            return Err(Error::invalid(
                "window radius must be at least 1 so that the kernel is irreducible",
            ));
        }
        Ok(())
    }

    fn spatial_weight(&self, t: isize) -> f64 {
        match self.profile {
            WindowProfile::Hat => 1.0 - t.unsigned_abs() as f64 / (self.window_radius + 1) as f64,
            WindowProfile::Box => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenoiserMode {
    #[default]
    Plain,
    Symmetrized,
}

impl fmt::Display for DenoiserMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenoiserMode::Plain => "plain",
            DenoiserMode::Symmetrized => "symmetrized",
        })
    }
}

impl FromStr for DenoiserMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DenoiserMode::Plain),
            "symmetrized" | "symmetric" => Ok(DenoiserMode::Symmetrized),
            other => Err(Error::invalid(format!("unknown denoiser mode {other:?}"))),
        }
    }
}

/// Symmetric sparse kernel in compressed-row form.
#[derive(Debug, Clone)]
struct SparseKernel {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseKernel {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(j, v)| v * x[*j]).sum()
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        par::fill_indexed(out, |i| self.row_dot(i, x));
    }

    fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                out[i * n + j] += v;
            }
        }
        out
    }

    fn scaled(&self, s: &[f64]) -> Self {
        let mut vals = self.vals.clone();
        for i in 0..self.n() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                vals[k] = self.vals[k] * (s[i] * s[self.cols[k]]);
            }
        }
        Self {
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
        }
    }
}

/// Outcome of the structural checks on `K` and `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Smallest eigenvalue of `K`; `None` above [`DENSE_CHECK_LIMIT`].
    pub min_eigenvalue: Option<f64>,
    /// Eigenvalues of `W` sorted in decreasing order; `None` above the limit.
    pub w_eigenvalues: Option<Vec<f64>>,
    pub symmetry_residual: f64,
    pub diagonal_residual: f64,
    pub nonnegative: bool,
    pub irreducible: bool,
    /// `max_i |(We)_i - 1|`.
    pub row_sum_residual: f64,
}

impl AssumptionReport {
    pub fn psd(&self) -> bool {
        self.min_eigenvalue.is_none_or(|m| m >= -1e-8)
    }

    pub fn passes(&self) -> bool {
        self.psd()
            && self.symmetry_residual == 0.0
            && self.diagonal_residual == 0.0
            && self.nonnegative
            && self.irreducible
            && self.row_sum_residual <= 1e-10
    }
}

/// A linear denoiser `W` on an image grid, immutable once built.
#[derive(Debug, Clone)]
pub struct KernelDenoiser {
    width: usize,
    height: usize,
    kernel: SparseKernel,
    d: DiagonalWeights,
    mode: DenoiserMode,
    params: Option<KernelParams>,
    /// Symmetric Sinkhorn scaling and the scaled kernel, in symmetrized mode.
    scaling: Option<(Vec<f64>, SparseKernel)>,
    identity_weights: DiagonalWeights,
}

impl KernelDenoiser {
    /// Builds the plain denoiser from a guide image with torus boundaries.
    pub fn build(guide: &VecImage, params: &KernelParams) -> Result<Self> {
        params.validate()?;
        if guide.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("guide intensities must be finite"));
        }
        let (w, h) = (guide.width(), guide.height());
        let r = params.window_radius;
        let axis_radius = |len: usize, name: &str| -> Result<usize> {
            match len {
                1 => Ok(0),
                l if l > 2 * r => Ok(r),
                l => Err(Error::invalid(format!(
                    "image {name} {l} is too small for window radius {r}; need 1 or at least {}",
                    2 * r + 1
                ))),
            }
        };
        let (rx, ry) = (
            axis_radius(w, "width")? as isize,
            axis_radius(h, "height")? as isize,
        );
        let pr = params.patch_radius as isize;
        let (wi, hi) = (w as isize, h as isize);
        let g = guide.as_slice();
        let wrap = |row: isize, col: isize| -> usize {
            (row.rem_euclid(hi) * wi + col.rem_euclid(wi)) as usize
        };
        let patch_offsets: Vec<(isize, isize)> = (-pr..=pr)
            .flat_map(|a| (-pr..=pr).map(move |b| (a, b)))
            .collect();
        let window: Vec<(isize, isize, f64)> = (-ry..=ry)
            .flat_map(|dy| (-rx..=rx).map(move |dx| (dy, dx)))
            .map(|(dy, dx)| {
                (
                    dy,
                    dx,
                    params.spatial_weight(dy) * params.spatial_weight(dx),
                )
            })
            .collect();
        let two_h2 = 2.0 * params.h * params.h;

        let rows = par::collect_indexed(w * h, |p| {
            let (pr_, pc) = ((p / w) as isize, (p % w) as isize);
            window
                .iter()
                .filter_map(|&(dy, dx, spatial)| {
                    let q = wrap(pr_ + dy, pc + dx);
                    if q == p {
                        return Some((q, 1.0));
                    }
                    let (qr, qc) = ((q / w) as isize, (q % w) as isize);
                    let dist: f64 = patch_offsets
                        .iter()
                        .map(|&(a, b)| {
                            let t = g[wrap(pr_ + a, pc + b)] - g[wrap(qr + a, qc + b)];
                            t * t
                        })
                        .sum();
                    let v = (-dist / two_h2).exp() * spatial;
                    (v > 0.0).then_some((q, v))
                })
                .collect::<Vec<_>>()
        });
        let kernel = SparseKernel::from_rows(rows);
        let d = DiagonalWeights::new(kernel.row_sums())?;
        Ok(Self {
            width: w,
            height: h,
            identity_weights: DiagonalWeights::identity(w * h),
            kernel,
            d,
            mode: DenoiserMode::Plain,
            params: Some(*params),
            scaling: None,
        })
    }

    /// Plain denoiser from an explicit symmetric nonnegative `n x n` kernel,
    /// laid out on an `n x 1` grid.
    pub fn from_dense(n: usize, k: &[f64]) -> Result<Self> {
        Error::check_len("dense kernel", n * n, k.len())?;
        if n == 0 {
            return Err(Error::invalid("kernel must be nonempty"));
        }
        for i in 0..n {
            for j in 0..n {
                let v = k[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "kernel entries must be finite and nonnegative",
                    ));
                }
                if v != k[j * n + i] {
                    return Err(Error::invalid("kernel must be symmetric"));
                }
            }
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| k[i * n + j] != 0.0)
                    .map(|j| (j, k[i * n + j]))
                    .collect()
            })
            .collect();
        let kernel = SparseKernel::from_rows(rows);
        let d = DiagonalWeights::new(kernel.row_sums())?;
        Ok(Self {
            width: n,
            height: 1,
            identity_weights: DiagonalWeights::identity(n),
            kernel,
            d,
            mode: DenoiserMode::Plain,
            params: None,
            scaling: None,
        })
    }

    /// Symmetric Sinkhorn scaling `s <- sqrt(s / (K s))` until every row sum
    /// of `diag(s) K diag(s)` is within `tol` of one.
    pub fn symmetrize(&self, tol: f64, max_iter: usize) -> Result<Self> {
        if self.mode == DenoiserMode::Symmetrized {
            return Err(Error::invalid("denoiser is already symmetrized"));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("Sinkhorn tolerance must be positive"));
        }
        let n = self.n();
        let mut s: Vec<f64> = self.d.as_slice().iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut ks = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for _ in 0..=max_iter {
            self.kernel.matvec(&s, &mut ks);
            residual = s
                .iter()
                .zip(&ks)
                .map(|(a, b)| (a * b - 1.0).abs())
                .fold(0.0, f64::max);
            if residual < tol {
                let scaled = self.kernel.scaled(&s);
                let mut out = self.clone();
                out.mode = DenoiserMode::Symmetrized;
                out.scaling = Some((s, scaled));
                return Ok(out);
            }
            for (si, ki) in s.iter_mut().zip(&ks) {
                *si = (*si / ki).sqrt();
            }
        }
        Err(Error::SinkhornNotConverged {
            residual,
            iterations: max_iter,
        })
    }

    /// [`symmetrize`](Self::symmetrize) with tolerance `1e-10` and 10000 iterations.
    pub fn symmetrized(&self) -> Result<Self> {
        self.symmetrize(1e-10, 10_000)
    }

    pub fn with_mode(&self, mode: DenoiserMode) -> Result<Self> {
        match (self.mode, mode) {
            (a, b) if a == b => Ok(self.clone()),
            (DenoiserMode::Plain, DenoiserMode::Symmetrized) => self.symmetrized(),
            _ => {
                let mut out = self.clone();
                out.mode = DenoiserMode::Plain;
                out.scaling = None;
                Ok(out)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mode(&self) -> DenoiserMode {
        self.mode
    }

    pub fn params(&self) -> Option<&KernelParams> {
        self.params.as_ref()
    }

    /// `D = diag(K e)` of the underlying kernel.
    pub fn d(&self) -> &DiagonalWeights {
        &self.d
    }

    /// Weights of the inner product in which `W` is self-adjoint: `D` for
    /// the plain denoiser, the identity once symmetrized.
    pub fn inner_weights(&self) -> &DiagonalWeights {
        match self.mode {
            DenoiserMode::Plain => &self.d,
            DenoiserMode::Symmetrized => &self.identity_weights,
        }
    }

    pub fn scaling(&self) -> Option<&[f64]> {
        self.scaling.as_ref().map(|(s, _)| s.as_slice())
    }

    pub fn nnz(&self) -> usize {
        self.kernel.vals.len()
    }

    pub fn apply_w(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }

    /// Row-major dense `K`. Intended for small test instances.
    pub fn dense_kernel(&self) -> Vec<f64> {
        self.kernel.to_dense()
    }

    /// Row-major dense `W`.
    pub fn dense_w(&self) -> Vec<f64> {
        let n = self.n();
        match &self.scaling {
            Some((_, sym)) => sym.to_dense(),
            None => {
                let mut k = self.kernel.to_dense();
                for i in 0..n {
                    let di = self.d.as_slice()[i];
                    k[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= di);
                }
                k
            }
        }
    }

    pub fn verify_assumptions(&self) -> AssumptionReport {
        let n = self.n();
        let mut symmetry_residual: f64 = 0.0;
        let mut diagonal_residual: f64 = 0.0;
        let mut nonnegative = true;
        let lookup = |i: usize, j: usize| -> f64 {
            let (cols, vals) = self.kernel.row(i);
            cols.iter()
                .zip(vals)
                .filter(|(c, _)| **c == j)
                .map(|(_, v)| *v)
                .sum()
        };
        for i in 0..n {
            let (cols, vals) = self.kernel.row(i);
            diagonal_residual = diagonal_residual.max((lookup(i, i) - 1.0).abs());
            for (j, v) in cols.iter().zip(vals) {
                nonnegative &= *v >= 0.0;
                symmetry_residual = symmetry_residual.max((v - lookup(*j, i)).abs());
            }
        }

        let ones = vec![1.0; n];
        let we = self.apply(&ones).unwrap_or_default();
        let row_sum_residual = we.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);

        let (min_eigenvalue, w_eigenvalues) = if n <= DENSE_CHECK_LIMIT {
            let k = DMatrix::from_row_slice(n, n, &self.dense_kernel());
            let min_k = SymmetricEigen::new(k.clone()).eigenvalues.min();
            // W is similar to the symmetric matrix D^{-1/2} K D^{-1/2}, or is
            // itself symmetric once scaled.
            let sym = match &self.scaling {
                Some((_, scaled)) => DMatrix::from_row_slice(n, n, &scaled.to_dense()),
                None => {
                    let inv_sqrt: Vec<f64> =
                        self.d.as_slice().iter().map(|d| 1.0 / d.sqrt()).collect();
                    DMatrix::from_fn(n, n, |i, j| k[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
                }
            };
            let mut eig: Vec<f64> = SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            (Some(min_k), Some(eig))
        } else {
            (None, None)
        };

        AssumptionReport {
            min_eigenvalue,
            w_eigenvalues,
            symmetry_residual,
            diagonal_residual,
            nonnegative,
            irreducible: self.is_irreducible(),
            row_sum_residual,
        }
    }

    /// Connectivity of the sparsity graph of `K`.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            let (cols, vals) = self.kernel.row(i);
            for (j, v) in cols.iter().zip(vals) {
                if *v > 0.0 && !seen[*j] {
                    seen[*j] = true;
                    count += 1;
                    queue.push_back(*j);
                }
            }
        }
        count == n
    }
}

impl LinearMap for KernelDenoiser {
    fn dim_in(&self) -> usize {
        self.n()
    }

    fn dim_out(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.scaling {
            Some((_, sym)) => sym.matvec(x, out),
            None => {
                let d = self.d.as_slice();
                par::fill_indexed(out, |i| self.kernel.row_dot(i, x) / d[i]);
            }
        }
        Ok(())
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.scaling {
            Some((_, sym)) => sym.matvec(y, out),
            None => {
                let scaled: Vec<f64> = y
                    .iter()
                    .zip(self.d.as_slice())
                    .map(|(v, d)| v / d)
                    .collect();
                self.kernel.matvec(&scaled, out);
            }
        }
        Ok(())
    }
}

/// The guide from which the denoiser is built for a given measurement:
/// the observation itself for deblurring, a neighbourhood-mean fill of the
/// observed pixels for inpainting, and nearest-neighbour upsampling for
/// superresolution.
pub fn guide_for(model: &ForwardModel, b: &[f64]) -> Result<VecImage> {
    Error::check_len("measurement", model.m(), b.len())?;
    let (w, h) = (model.width(), model.height());
    match model.kind() {
        ForwardKind::Deblurring(_) => VecImage::new(b.to_vec(), w, h),
        ForwardKind::Inpainting(mask) => inpaint_fill(b, mask.observed(), w, h),
        ForwardKind::Superresolution(_, sampler) => {
            let s = sampler.stride();
            let (mw, _) = model.output_dims();
            let data = (0..w * h)
                .map(|k| {
                    let (r, c) = (k / w, k % w);
                    let (i, j) = (
                        ((r + s / 2) / s).min((h - 1) / s),
                        ((c + s / 2) / s).min((w - 1) / s),
                    );
                    b[i * mw + j]
                })
                .collect();
            VecImage::new(data, w, h)
        }
    }
}

/// Repeatedly replaces each missing pixel that has known 3x3 torus
/// neighbours by their mean, until every pixel is known.
pub fn inpaint_fill(
    values: &[f64],
    observed: &[bool],
    width: usize,
    height: usize,
) -> Result<VecImage> {
    let n = width * height;
    Error::check_len("inpainting fill", n, values.len())?;
    Error::check_len("inpainting fill mask", n, observed.len())?;
    if !observed.iter().any(|o| *o) {
        return Err(Error::invalid(
            "cannot fill an image with no observed pixels",
        ));
    }
    let mut data: Vec<f64> = values
        .iter()
        .zip(observed)
        .map(|(v, o)| if *o { *v } else { 0.0 })
        .collect();
    let mut known = observed.to_vec();
    let (wi, hi) = (width as isize, height as isize);
    while known.iter().any(|k| !*k) {
        let mut next_data = data.clone();
        let mut next_known = known.clone();
        for p in (0..n).filter(|&p| !known[p]) {
            let (r, c) = ((p / width) as isize, (p % width) as isize);
            let (mut total, mut count) = (0.0, 0usize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = ((r + dy).rem_euclid(hi) * wi + (c + dx).rem_euclid(wi)) as usize;
                    if known[q] && q != p {
                        total += data[q];
                        count += 1;
                    }
                }
            }
            if count > 0 {
                next_data[p] = total / count as f64;
                next_known[p] = true;
            }
        }
        data = next_data;
        known = next_known;
    }
    VecImage::new(data, width, height)
}
