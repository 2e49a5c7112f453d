#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use pnp_kernel::denoiser::{KernelDenoiser, KernelParams};
use pnp_kernel::image::random_image;
use pnp_kernel::linop::{DenseMap, DiagonalWeights, LinearMap};

/// Dense matrix of a map, probed column by column.
pub fn dense(map: &dyn LinearMap) -> DMatrix<f64> {
    let m = DenseMap::from_map(map).unwrap();
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// `||M||_D` of a dense matrix.
pub fn sigma_max_d(m: &DMatrix<f64>, d: &DiagonalWeights) -> f64 {
    let s: Vec<f64> = d.as_slice().iter().map(|v| v.sqrt()).collect();
    let sim = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| s[i] * m[(i, j)] / s[j]);
    sigma_max(&sim)
}

/// Eigenvalues of `W`, decreasing, through its symmetric similarity.
pub fn w_eigenvalues(den: &KernelDenoiser) -> Vec<f64> {
    let w = dense(den);
    let s: Vec<f64> = den
        .inner_weights()
        .as_slice()
        .iter()
        .map(|v| v.sqrt())
        .collect();
    let n = w.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| s[i] * w[(i, j)] / s[j]);
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

pub fn oracle_lambda2(den: &KernelDenoiser) -> f64 {
    w_eigenvalues(den)[1]
}

pub fn oracle_zeta_star(den: &KernelDenoiser) -> f64 {
    w_eigenvalues(den)[1..]
        .iter()
        .map(|l| (2.0 * l - 1.0).abs())
        .fold(0.0, f64::max)
}

pub fn plain_denoiser(w: usize, h: usize, seed: u64, bandwidth: f64) -> KernelDenoiser {
    let guide = random_image(w, h, seed);
    KernelDenoiser::build(&guide, &KernelParams::new(1, 1, bandwidth).unwrap()).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
