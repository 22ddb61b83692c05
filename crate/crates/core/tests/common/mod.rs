//! Independent dense oracles. Nothing here calls into the matrix-free code
//! paths under test; matrices are assembled from their textbook definitions.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// `(n−1)×n` forward difference with rows `(…, 1, −1, …)`.
pub fn diff_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |r, c| {
        if c == r {
            1.0
        } else if c == r + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `n×n` periodic forward difference.
pub fn circulant_diff_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::identity(n, n);
    for r in 0..n {
        d[(r, (r + 1) % n)] -= 1.0;
    }
    d
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

/// `T = diag(I⊗D, D⊗I)` for column-major vectorization.
pub fn dense_t(n: usize, circulant: bool) -> DMatrix<f64> {
    let d = if circulant {
        circulant_diff_matrix(n)
    } else {
        diff_matrix(n)
    };
    let id = DMatrix::<f64>::identity(n, n);
    block_diag(&id.kronecker(&d), &d.kronecker(&id))
}

/// Spatial circular convolution matrix for a centered row-major kernel.
pub fn dense_blur(n: usize, kernel: &[f64], size: usize) -> DMatrix<f64> {
    let nn = n * n;
    let r = (size / 2) as isize;
    let mut m = DMatrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            for a in 0..size {
                for b in 0..size {
                    let si = (i as isize - (a as isize - r)).rem_euclid(n as isize) as usize;
                    let sj = (j as isize - (b as isize - r)).rem_euclid(n as isize) as usize;
                    m[(i + j * n, si + sj * n)] += kernel[a * size + b];
                }
            }
        }
    }
    m
}

/// Direct `O(n²·size²)` circular convolution of a column-major image.
pub fn spatial_convolve(n: usize, x: &[f64], kernel: &[f64], size: usize) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for a in 0..size {
                for b in 0..size {
                    let si = (i as isize - (a as isize - r)).rem_euclid(n as isize) as usize;
                    let sj = (j as isize - (b as isize - r)).rem_euclid(n as isize) as usize;
                    acc += kernel[a * size + b] * x[si + sj * n];
                }
            }
            out[i + j * n] = acc;
        }
    }
    out
}

/// Gaussian weights written out independently of the library builder.
pub fn gaussian(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut k = Vec::new();
    for a in 0..size {
        for b in 0..size {
            let (y, x) = (a as f64 - r, b as f64 - r);
            k.push((-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// `K = [[K̃, 0], [βI, −βI]]`.
pub fn dense_k(blur: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let nn = blur.nrows();
    let mut k = DMatrix::zeros(2 * nn, 2 * nn);
    k.view_mut((0, 0), (nn, nn)).copy_from(blur);
    for i in 0..nn {
        k[(nn + i, i)] = beta;
        k[(nn + i, nn + i)] = -beta;
    }
    k
}

pub fn dense_normal(k: &DMatrix<f64>, t: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    k.transpose() * k + t.transpose() * t * delta
}

pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

pub fn sigma_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let x = a.clone().lu().solve(&DVector::from_column_slice(b)).expect("nonsingular");
    x.as_slice().to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Brute-force minimum of `τ|y|^q + ½(y − x)²` over a uniform grid between
/// 0 and `x` (both ends included); the minimizer always lies there.
pub fn grid_prox_min(q: f64, tau: f64, x: f64, step: f64) -> (f64, f64) {
    let obj = |y: f64| tau * y.abs().powf(q) + 0.5 * (y - x) * (y - x);
    let steps = (x.abs() / step).ceil() as usize;
    let mut best = (0.0, obj(0.0));
    for s in 1..=steps {
        let y = (s as f64 * step).min(x.abs()).copysign(x);
        let v = obj(y);
        if v < best.1 {
            best = (y, v);
        }
    }
    best
}

/// Soft threshold from its textbook definition.
pub fn soft_threshold(tau: f64, x: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `½‖Ku − f‖² + σ Σ|v|^q − ⟨p, Tu − v⟩ + (δ/2)‖Tu − v‖²`, evaluated
/// densely with a reversed summation order.
#[allow(clippy::too_many_arguments)]
pub fn dense_lagrangian(
    k: &DMatrix<f64>,
    t: &DMatrix<f64>,
    f: &[f64],
    sigma: f64,
    q: f64,
    delta: f64,
    u: &[f64],
    v: &[f64],
    p: &[f64],
) -> f64 {
    let ku = mat_vec(k, u);
    let tu = mat_vec(t, u);
    let fit: f64 = ku.iter().zip(f).rev().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
    let pen: f64 = v.iter().rev().map(|x| x.abs().powf(q)).sum::<f64>() * sigma;
    let gap: Vec<f64> = tu.iter().zip(v).map(|(a, b)| a - b).collect();
    let inner: f64 = p.iter().zip(&gap).rev().map(|(a, b)| a * b).sum();
    let sq: f64 = gap.iter().rev().map(|g| g * g).sum();
    fit + pen - inner + 0.5 * delta * sq
}
