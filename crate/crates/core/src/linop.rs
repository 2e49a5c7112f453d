//! Matrix-free linear maps and the diagonally weighted inner-product space.
//!
//! Every operator in the crate (forward models, denoisers, update operators)
//! implements [`LinearMap`]: an action `x -> Mx` and its Euclidean transpose
//! `y -> M^T y`. Nothing here stores a full-size matrix; [`DenseMap`] exists
//! for small explicit matrices such as the counterexample construction.

use crate::error::{Error, Result};

/// Vectors longer than this are reduced with pairwise summation.
const PAIRWISE_CUTOFF: usize = 100_000;
const PAIRWISE_BLOCK: usize = 1024;

/// A grayscale image stored row-major as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VecImage {
    data: Vec<f64>,
    width: usize,
    height: usize,
}

impl VecImage {
    pub fn new(data: Vec<f64>, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Error::check_len("image data", width * height, data.len())?;
        Ok(Self {
            data,
            width,
            height,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            data: vec![value; width * height],
            width,
            height,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Same grid, new pixel values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(data, self.width, self.height)
    }

    /// True when every intensity lies in `[0, 1]`.
    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn clipped(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            width: self.width,
            height: self.height,
        }
    }
}

impl AsRef<[f64]> for VecImage {
    fn as_ref(&self) -> &[f64] {
        &self.data
    }
}

/// Positive diagonal of a weighting matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights(Vec<f64>);

impl DiagonalWeights {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::invalid("diagonal weights must be nonempty"));
        }
        if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!(
                "diagonal weights must be positive and finite, found {bad}"
            )));
        }
        Ok(Self(d))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Spectral norm of `D`, i.e. its largest entry.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn trace(&self) -> f64 {
        sum(&self.0)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|v| *v == 1.0)
    }
}

/// Sum with pairwise reduction on long inputs.
pub fn sum(x: &[f64]) -> f64 {
    if x.len() <= PAIRWISE_CUTOFF {
        return x.iter().sum();
    }
    pairwise(x.len(), &|i| x[i])
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    if x.len() <= PAIRWISE_CUTOFF {
        return x.iter().zip(y).map(|(a, b)| a * b).sum();
    }
    pairwise(x.len(), &|i| x[i] * y[i])
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn pairwise(n: usize, term: &dyn Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, term: &dyn Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            (lo..hi).map(term).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, term) + go(mid, hi, term)
        }
    }
    go(0, n, term)
}

/// `<x, y>_D = sum_i d_i x_i y_i`.
pub fn d_inner(x: &[f64], y: &[f64], d: &DiagonalWeights) -> Result<f64> {
    Error::check_len("d_inner", d.len(), x.len())?;
    Error::check_len("d_inner", d.len(), y.len())?;
    let w = d.as_slice();
    if x.len() <= PAIRWISE_CUTOFF {
        return Ok(x.iter().zip(y).zip(w).map(|((a, b), c)| a * b * c).sum());
    }
    Ok(pairwise(x.len(), &|i| w[i] * x[i] * y[i]))
}

pub fn d_norm(x: &[f64], d: &DiagonalWeights) -> Result<f64> {
    Ok(d_inner(x, x, d)?.sqrt())
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// A linear map between real vector spaces, given by its action and the
/// action of its Euclidean transpose.
///
/// `apply_into` / `adjoint_into` may assume correctly sized buffers; the
/// allocating [`apply`](LinearMap::apply) and [`adjoint`](LinearMap::adjoint)
/// check dimensions first. Operators that embed an iterative solve report its
/// failure through the `Result`.
pub trait LinearMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("linear map input", self.dim_in(), x.len())?;
        let mut out = vec![0.0; self.dim_out()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("linear map adjoint input", self.dim_out(), y.len())?;
        let mut out = vec![0.0; self.dim_in()];
        self.adjoint_into(y, &mut out)?;
        Ok(out)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).adjoint_into(y, out)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Box<T> {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).adjoint_into(y, out)
    }
}

pub type BoxedMap<'a> = Box<dyn LinearMap + 'a>;

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn dim_in(&self) -> usize {
        self.0
    }
    fn dim_out(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(y);
        Ok(())
    }
}

/// Multiplication by a fixed diagonal (any real entries).
#[derive(Debug, Clone)]
pub struct Diagonal(pub Vec<f64>);

impl Diagonal {
    pub fn from_weights(d: &DiagonalWeights) -> Self {
        Self(d.as_slice().to_vec())
    }
}

impl LinearMap for Diagonal {
    fn dim_in(&self) -> usize {
        self.0.len()
    }
    fn dim_out(&self) -> usize {
        self.0.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for ((o, a), d) in out.iter_mut().zip(x).zip(&self.0) {
            *o = a * d;
        }
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.apply_into(y, out)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_len("dense matrix", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Materializes a map by probing every basis vector.
    pub fn from_map(map: &dyn LinearMap) -> Result<Self> {
        let (rows, cols) = (map.dim_out(), map.dim_in());
        let mut data = vec![0.0; rows * cols];
        let mut basis = vec![0.0; cols];
        let mut column = vec![0.0; rows];
        for j in 0..cols {
            basis[j] = 1.0;
            map.apply_into(&basis, &mut column)?;
            basis[j] = 0.0;
            for (i, v) in column.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

impl LinearMap for DenseMap {
    fn dim_in(&self) -> usize {
        self.cols
    }
    fn dim_out(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * self.cols..(i + 1) * self.cols], x);
        }
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, yi) in y.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, m) in out.iter_mut().zip(row) {
                *o += m * yi;
            }
        }
        Ok(())
    }
}

/// `outer ∘ inner`.
pub struct Compose<M, N> {
    outer: M,
    inner: N,
}

/// Composes `m ∘ n`; requires `n.dim_out() == m.dim_in()`.
pub fn compose<M: LinearMap, N: LinearMap>(m: M, n: N) -> Result<Compose<M, N>> {
    Error::check_len("compose", m.dim_in(), n.dim_out())?;
    Ok(Compose { outer: m, inner: n })
}

impl<M: LinearMap, N: LinearMap> LinearMap for Compose<M, N> {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.outer.dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut mid = vec![0.0; self.inner.dim_out()];
        self.inner.apply_into(x, &mut mid)?;
        self.outer.apply_into(&mid, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let mut mid = vec![0.0; self.outer.dim_in()];
        self.outer.adjoint_into(y, &mut mid)?;
        self.inner.adjoint_into(&mid, out)
    }
}

/// `alpha I + beta M` for a square map `M`.
pub struct ShiftScale<M> {
    alpha: f64,
    beta: f64,
    map: M,
}

impl<M: LinearMap> ShiftScale<M> {
    pub fn new(alpha: f64, beta: f64, map: M) -> Result<Self> {
        Error::check_len("shift-scale (square map)", map.dim_in(), map.dim_out())?;
        Ok(Self { alpha, beta, map })
    }
}

impl<M: LinearMap> LinearMap for ShiftScale<M> {
    fn dim_in(&self) -> usize {
        self.map.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.map.dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.map.apply_into(x, out)?;
        for (o, a) in out.iter_mut().zip(x) {
            *o = self.alpha * a + self.beta * *o;
        }
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.map.adjoint_into(y, out)?;
        for (o, a) in out.iter_mut().zip(y) {
            *o = self.alpha * a + self.beta * *o;
        }
        Ok(())
    }
}

/// `M^T M`, self-adjoint.
pub struct Gram<M>(pub M);

impl<M: LinearMap> LinearMap for Gram<M> {
    fn dim_in(&self) -> usize {
        self.0.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.0.dim_in()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut mid = vec![0.0; self.0.dim_out()];
        self.0.apply_into(x, &mut mid)?;
        self.0.adjoint_into(&mid, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.apply_into(y, out)
    }
}

/// `M - (1/n) e e^T`, the rank-one deflation that removes the eigenvalue
/// attached to the constant vector when `M e = e`.
pub struct Deflated<M>(pub M);

impl<M: LinearMap> LinearMap for Deflated<M> {
    fn dim_in(&self) -> usize {
        self.0.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.0.dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.apply_into(x, out)?;
        let mean = sum(x) / x.len() as f64;
        out.iter_mut().for_each(|o| *o -= mean);
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.adjoint_into(y, out)?;
        let mean = sum(y) / y.len() as f64;
        out.iter_mut().for_each(|o| *o -= mean);
        Ok(())
    }
}

/// `D^{1/2} M D^{-1/2}`: the Euclidean image of `M` acting on `(R^n, <.,.>_D)`.
/// Its spectral norm is the `D`-operator norm of `M`.
pub struct Similarity<M> {
    map: M,
    sqrt_d: Vec<f64>,
}

impl<M: LinearMap> Similarity<M> {
    pub fn new(map: M, d: &DiagonalWeights) -> Result<Self> {
        Error::check_len("similarity (square map)", map.dim_in(), map.dim_out())?;
        Error::check_len("similarity weights", map.dim_in(), d.len())?;
        let sqrt_d = d.as_slice().iter().map(|v| v.sqrt()).collect();
        Ok(Self { map, sqrt_d })
    }
}

impl<M: LinearMap> LinearMap for Similarity<M> {
    fn dim_in(&self) -> usize {
        self.map.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.map.dim_out()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let scaled: Vec<f64> = x.iter().zip(&self.sqrt_d).map(|(a, s)| a / s).collect();
        self.map.apply_into(&scaled, out)?;
        out.iter_mut().zip(&self.sqrt_d).for_each(|(o, s)| *o *= s);
        Ok(())
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let scaled: Vec<f64> = y.iter().zip(&self.sqrt_d).map(|(a, s)| a * s).collect();
        self.map.adjoint_into(&scaled, out)?;
        out.iter_mut().zip(&self.sqrt_d).for_each(|(o, s)| *o /= s);
        Ok(())
    }
}
