//! Flat row-major helpers for the small dense matrices in the hot loops.

use nalgebra::DMatrix;

pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

pub(crate) fn matvec(a: &[f64], v: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        out[i] = (0..n).map(|k| a[i * n + k] * v[k]).sum();
    }
}

pub(crate) fn to_flat(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

pub(crate) fn from_flat(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Induced 2-norm (largest singular value).
pub(crate) fn spectral_norm(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0].abs(),
        2 => {
            let fro2 = a.iter().map(|x| x * x).sum::<f64>();
            let det = a[0] * a[3] - a[1] * a[2];
            let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
            (0.5 * (fro2 + disc)).sqrt()
        }
        _ => from_flat(a, n).singular_values().max(),
    }
}

/// `out = AᵀA`.
pub(crate) fn gram(a: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in i..n {
            let acc: f64 = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum();
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
}

pub(crate) fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
