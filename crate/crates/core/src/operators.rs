//! Linear operators of the split model: finite differences `T`, the blur `K̃`
//! and the stacked operator `K = [[K̃, 0], [βI, −βI]]`.
//!
//! Stacked vectors `u = (u₁, u₂)` hold two column-major images back to back.
//! Edge vectors hold the vertical differences of `u₁` followed by the
//! horizontal differences of `u₂`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum DiffVariant {
    /// Non-periodic differences, `D` is `(N−1)×N` with rows `(…, 1, −1, …)`.
    #[default]
    Banded,
    /// Wrap-around differences, diagonalized by the 2-D DFT.
    Circulant,
}

impl fmt::Display for DiffVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffVariant::Banded => "banded",
            DiffVariant::Circulant => "circulant",
        })
    }
}

impl FromStr for DiffVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "banded" => Ok(DiffVariant::Banded),
            "circulant" => Ok(DiffVariant::Circulant),
            other => Err(Error::invalid(format!("unknown operator variant '{other}'"))),
        }
    }
}

/// `θ = 1 / (2 sin(π/2n))`, the reciprocal of the smallest singular value of
/// the banded `T*`.
pub fn theta_bound(n: usize) -> f64 {
    1.0 / (2.0 * (PI / (2.0 * n as f64)).sin())
}

/// The block-diagonal difference operator `T = diag(I⊗D, D⊗I)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffOperator {
    n: usize,
    variant: DiffVariant,
}

impl DiffOperator {
    pub fn new(n: usize, variant: DiffVariant) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize {
                n,
                reason: "difference operator needs n >= 2",
            });
        }
        Ok(Self { n, variant })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> DiffVariant {
        self.variant
    }

    pub fn stacked_len(&self) -> usize {
        2 * self.n * self.n
    }

    /// Length of one difference block.
    fn block_len(&self) -> usize {
        match self.variant {
            DiffVariant::Banded => self.n * (self.n - 1),
            DiffVariant::Circulant => self.n * self.n,
        }
    }

    pub fn edge_len(&self) -> usize {
        2 * self.block_len()
    }

    /// Analytic spectral norm `‖T‖₂`.
    pub fn norm(&self) -> f64 {
        let n = self.n as f64;
        match self.variant {
            DiffVariant::Circulant if self.n.is_multiple_of(2) => 2.0,
            _ => 2.0 * (PI / (2.0 * n)).cos(),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("T input", self.stacked_len(), u.len())?;
        let mut out = vec![0.0; self.edge_len()];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let nn = n * n;
        let (u1, u2) = u.split_at(nn);
        let (w1, w2) = out.split_at_mut(self.block_len());
        match self.variant {
            DiffVariant::Banded => {
                for j in 0..n {
                    let col = &u1[j * n..(j + 1) * n];
                    let dst = &mut w1[j * (n - 1)..(j + 1) * (n - 1)];
                    for r in 0..n - 1 {
                        dst[r] = col[r] - col[r + 1];
                    }
                }
                for c in 0..n - 1 {
                    for i in 0..n {
                        w2[i + c * n] = u2[i + c * n] - u2[i + (c + 1) * n];
                    }
                }
            }
            DiffVariant::Circulant => {
                for j in 0..n {
                    for r in 0..n {
                        w1[r + j * n] = u1[r + j * n] - u1[(r + 1) % n + j * n];
                    }
                }
                for c in 0..n {
                    let c1 = (c + 1) % n;
                    for i in 0..n {
                        w2[i + c * n] = u2[i + c * n] - u2[i + c1 * n];
                    }
                }
            }
        }
    }

    pub fn adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("T* input", self.edge_len(), w.len())?;
        let mut out = vec![0.0; self.stacked_len()];
        self.adjoint_into(w, &mut out);
        Ok(out)
    }

    pub(crate) fn adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n;
        let nn = n * n;
        out.fill(0.0);
        let (w1, w2) = w.split_at(self.block_len());
        let (x1, x2) = out.split_at_mut(nn);
        match self.variant {
            DiffVariant::Banded => {
                for j in 0..n {
                    let src = &w1[j * (n - 1)..(j + 1) * (n - 1)];
                    let col = &mut x1[j * n..(j + 1) * n];
                    for r in 0..n - 1 {
                        col[r] += src[r];
                        col[r + 1] -= src[r];
                    }
                }
                for c in 0..n - 1 {
                    for i in 0..n {
                        let b = w2[i + c * n];
                        x2[i + c * n] += b;
                        x2[i + (c + 1) * n] -= b;
                    }
                }
            }
            DiffVariant::Circulant => {
                for j in 0..n {
                    for r in 0..n {
                        let a = w1[r + j * n];
                        x1[r + j * n] += a;
                        x1[(r + 1) % n + j * n] -= a;
                    }
                }
                for c in 0..n {
                    let c1 = (c + 1) % n;
                    for i in 0..n {
                        let b = w2[i + c * n];
                        x2[i + c * n] += b;
                        x2[i + c1 * n] -= b;
                    }
                }
            }
        }
    }
}

/// Unnormalized 2-D DFT on column-major `n×n` complex buffers.
#[derive(Clone)]
pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let n = self.n;
        let mut tmp = vec![Complex64::default(); n * n];
        plan.process(buf);
        transpose(buf, &mut tmp, n);
        plan.process(&mut tmp);
        transpose(&tmp, buf, n);
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(&self.forward, buf);
    }

    /// Inverse transform including the `1/n²` normalization.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(&self.inverse, buf);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Real-to-real filtering `x ↦ Re F⁻¹(h · F x)`.
    pub(crate) fn filter(&self, x: &[f64], h: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        for (idx, z) in buf.iter_mut().enumerate() {
            *z *= h(idx);
        }
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for j in 0..n {
        for i in 0..n {
            dst[j + i * n] = src[i + j * n];
        }
    }
}

/// Normalized Gaussian kernel stored row-major over centered offsets.
pub fn build_gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel size must be odd and positive, got {size}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("kernel sigma must be positive and finite"));
    }
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size * size)
        .map(|idx| {
            let a = (idx / size) as f64 - r;
            let b = (idx % size) as f64 - r;
            (-(a * a + b * b) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= s);
    Ok(k)
}

/// Circular 2-D convolution `(K̃u)[i,j] = Σ k[a,b]·u[i−a, j−b]` over centered offsets.
#[derive(Clone)]
pub struct BlurOperator {
    n: usize,
    kernel_size: usize,
    kernel: Vec<f64>,
    kernel_hat: Vec<Complex64>,
    /// Unit impulse kernel: apply and adjoint copy their input exactly.
    identity: bool,
    fft: Fft2,
}

impl fmt::Debug for BlurOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlurOperator")
            .field("n", &self.n)
            .field("kernel_size", &self.kernel_size)
            .finish_non_exhaustive()
    }
}

impl BlurOperator {
    /// `kernel` is row-major `size×size`; `size` must be odd. Kernels wider
    /// than the image wrap around and accumulate.
    pub fn new(n: usize, kernel: Vec<f64>, size: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize {
                n,
                reason: "blur needs n >= 1",
            });
        }
        if size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size must be odd, got {size}")));
        }
        Error::check_len("kernel", size * size, kernel.len())?;
        let r = (size / 2) as isize;
        let ni = n as isize;
        let mut padded = vec![Complex64::default(); n * n];
        for a in 0..size {
            for b in 0..size {
                let i = (a as isize - r).rem_euclid(ni) as usize;
                let j = (b as isize - r).rem_euclid(ni) as usize;
                padded[i + j * n].re += kernel[a * size + b];
            }
        }
        let fft = Fft2::new(n);
        fft.forward(&mut padded);
        let identity = padded.iter().all(|z| *z == Complex64::new(1.0, 0.0));
        Ok(Self {
            n,
            kernel_size: size,
            kernel,
            kernel_hat: padded,
            identity,
            fft,
        })
    }

    pub fn gaussian(n: usize, size: usize, sigma: f64) -> Result<Self> {
        Self::new(n, build_gaussian_kernel(size, sigma)?, size)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, vec![1.0], 1).expect("1x1 kernel is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    /// Transfer coefficients `K̂` in column-major frequency order.
    pub fn transfer(&self) -> &[Complex64] {
        &self.kernel_hat
    }

    pub(crate) fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("blur input", self.n * self.n, x.len())?;
        if self.identity {
            return Ok(x.to_vec());
        }
        Ok(self.fft.filter(x, |i| self.kernel_hat[i]))
    }

    pub fn adjoint(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("blur adjoint input", self.n * self.n, x.len())?;
        if self.identity {
            return Ok(x.to_vec());
        }
        Ok(self.fft.filter(x, |i| self.kernel_hat[i].conj()))
    }

    /// `K̃*K̃x` with a single transform pair.
    pub fn gram(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("blur gram input", self.n * self.n, x.len())?;
        if self.identity {
            return Ok(x.to_vec());
        }
        Ok(self
            .fft
            .filter(x, |i| Complex64::new(self.kernel_hat[i].norm_sqr(), 0.0)))
    }
}

/// `K = [[K̃, 0], [βI, −βI]]` acting on stacked vectors.
#[derive(Debug, Clone)]
pub struct StackedOperator {
    blur: BlurOperator,
    beta: f64,
}

impl StackedOperator {
    pub fn new(blur: BlurOperator, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self { blur, beta })
    }

    pub fn blur(&self) -> &BlurOperator {
        &self.blur
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.blur.n
    }

    pub fn stacked_len(&self) -> usize {
        2 * self.blur.n * self.blur.n
    }

    /// Same blur with a different `β`.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.blur.clone(), beta)
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("K input", self.stacked_len(), u.len())?;
        let nn = self.blur.n * self.blur.n;
        let (u1, u2) = u.split_at(nn);
        let mut out = self.blur.apply(u1)?;
        out.extend(u1.iter().zip(u2).map(|(a, b)| self.beta * (a - b)));
        Ok(out)
    }

    pub fn adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("K* input", self.stacked_len(), w.len())?;
        let nn = self.blur.n * self.blur.n;
        let (a, b) = w.split_at(nn);
        let mut out = self.blur.adjoint(a)?;
        vecops::axpy(self.beta, b, &mut out);
        out.extend(b.iter().map(|x| -self.beta * x));
        Ok(out)
    }

    /// `K*K u = (K̃*K̃u₁ + β²(u₁−u₂), −β²(u₁−u₂))`.
    pub fn gram(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("K*K input", self.stacked_len(), u.len())?;
        let nn = self.blur.n * self.blur.n;
        let (u1, u2) = u.split_at(nn);
        let b2 = self.beta * self.beta;
        let mut out = self.blur.gram(u1)?;
        for (o, (a, b)) in out.iter_mut().zip(u1.iter().zip(u2)) {
            *o += b2 * (a - b);
        }
        out.extend(u1.iter().zip(u2).map(|(a, b)| -b2 * (a - b)));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖K‖₂` by power iteration on `K*K` from a seeded Gaussian start.
pub fn spectral_norm_k(op: &StackedOperator, iters: usize, tol: f64, seed: u64) -> Result<PowerEstimate> {
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..op.stacked_len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let nx = vecops::norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut lambda = 0.0_f64;
    for it in 1..=iters {
        let y = op.gram(&x)?;
        let next = vecops::dot(&x, &y);
        let ny = vecops::norm(&y);
        if ny == 0.0 {
            return Ok(PowerEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            });
        }
        let done = it > 1 && (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            return Ok(PowerEstimate {
                norm: lambda.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        x = vecops::scale(1.0 / ny, &y);
    }
    Ok(PowerEstimate {
        norm: lambda.max(0.0).sqrt(),
        iterations: iters,
        converged: false,
    })
}
