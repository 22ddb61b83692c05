//! The u-update system `(K*K + δT*T)u = rhs` and the randomized `ν` estimator.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{BlurOperator, DiffOperator, DiffVariant, StackedOperator};
use crate::vecops;

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// `A = K*K + δT*T`.
#[derive(Debug, Clone)]
pub struct NormalOperator {
    k: StackedOperator,
    t: DiffOperator,
    delta: f64,
}

impl NormalOperator {
    pub fn new(k: StackedOperator, t: DiffOperator, delta: f64) -> Result<Self> {
        Error::check_len("operator side", k.n(), t.n())?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { k, t, delta })
    }

    pub fn k(&self) -> &StackedOperator {
        &self.k
    }

    pub fn t(&self) -> &DiffOperator {
        &self.t
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.k.stacked_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Default CG iteration cap, `10·(2N²)`.
    pub fn default_max_iters(&self) -> usize {
        10 * self.len()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.k.gram(u)?;
        let mut tu = vec![0.0; self.t.edge_len()];
        let mut ttu = vec![0.0; self.len()];
        self.t.apply_into(u, &mut tu);
        self.t.adjoint_into(&tu, &mut ttu);
        vecops::axpy(self.delta, &ttu, &mut out);
        Ok(out)
    }

    /// Dense matrix assembled column by column. Only sensible for small `n`.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let m = self.len();
        let mut a = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            e[j] = 0.0;
            a.column_mut(j).copy_from_slice(&col);
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// Absolute target `tol·‖rhs‖`.
    pub tolerance: f64,
    pub converged: bool,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, residual {:.3e} vs target {:.3e}",
            self.iterations, self.final_residual_norm, self.tolerance
        )
    }
}

/// Conjugate gradients until `‖A x − rhs‖ ≤ tol·‖rhs‖` (recursive residual).
pub fn solve_normal(
    op: &NormalOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    Error::check_len("normal system rhs", op.len(), rhs.len())?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("CG tolerance must be positive, got {tol}")));
    }
    let target = tol * vecops::norm(rhs);
    if target == 0.0 {
        let report = SolveReport {
            iterations: 0,
            final_residual_norm: 0.0,
            tolerance: 0.0,
            converged: true,
        };
        return Ok((vec![0.0; op.len()], report));
    }

    let (mut x, mut r) = match x0 {
        Some(x0) => {
            Error::check_len("CG initial guess", op.len(), x0.len())?;
            let ax = op.apply(x0)?;
            (x0.to_vec(), vecops::sub(rhs, &ax))
        }
        None => (vec![0.0; op.len()], rhs.to_vec()),
    };
    let mut p = r.clone();
    let mut rr = vecops::norm_sq(&r);
    let mut iterations = 0;
    while rr.sqrt() > target && iterations < max_iters {
        let ap = op.apply(&p)?;
        let pap = vecops::dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let a = rr / pap;
        vecops::axpy(a, &p, &mut x);
        vecops::axpy(-a, &ap, &mut r);
        let rr_next = vecops::norm_sq(&r);
        let b = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + b * *pi;
        }
        rr = rr_next;
        iterations += 1;
    }
    let final_residual_norm = rr.sqrt();
    Ok((
        x,
        SolveReport {
            iterations,
            final_residual_norm,
            tolerance: target,
            converged: final_residual_norm <= target,
        },
    ))
}

/// Exact solve for the circulant variant: one 2×2 system per Fourier mode.
pub fn solve_circulant_fast(op: &NormalOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    if op.t.variant() != DiffVariant::Circulant {
        return Err(Error::UnsupportedVariant);
    }
    Error::check_len("normal system rhs", op.len(), rhs.len())?;
    let n = op.k.n();
    let nn = n * n;
    let blur = op.k.blur();
    let fft = blur.fft();
    let to_complex = |x: &[f64]| -> Vec<Complex64> { x.iter().map(|&v| Complex64::new(v, 0.0)).collect() };
    let mut r1 = to_complex(&rhs[..nn]);
    let mut r2 = to_complex(&rhs[nn..]);
    fft.forward(&mut r1);
    fft.forward(&mut r2);

    let b2 = op.k.beta() * op.k.beta();
    let delta = op.delta;
    let g: Vec<f64> = (0..n)
        .map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect();
    for k2 in 0..n {
        for k1 in 0..n {
            let idx = k1 + k2 * n;
            let a11 = blur.transfer()[idx].norm_sqr() + b2 + delta * g[k1];
            let a22 = b2 + delta * g[k2];
            let det = a11 * a22 - b2 * b2;
            let (x1, x2) = (r1[idx], r2[idx]);
            r1[idx] = (x1 * a22 + x2 * b2) / det;
            r2[idx] = (x2 * a11 + x1 * b2) / det;
        }
    }
    fft.inverse(&mut r1);
    fft.inverse(&mut r2);
    Ok(r1.into_iter().chain(r2).map(|z| z.re).collect())
}

/// `λ_min(K₀*K₀ + T*T)` by dense eigendecomposition, with `K₀` the `β = 1` operator.
pub fn nu_dense(blur: &BlurOperator, t: &DiffOperator) -> Result<f64> {
    let op = NormalOperator::new(StackedOperator::new(blur.clone(), 1.0)?, *t, 1.0)?;
    let eig = SymmetricEigen::new(op.to_dense()?);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSettings {
    /// Number of Gaussian probes `M`.
    pub probes: usize,
    /// Probe base `b > 1`.
    pub base: f64,
    pub seed: u64,
    pub cg_tol: f64,
    pub cg_max_iters: Option<usize>,
}

impl Default for NuSettings {
    fn default() -> Self {
        Self {
            probes: 20,
            base: 2.0,
            seed: 0,
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iters: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuEstimate {
    pub nu_lower_bound: f64,
    /// `1 − b^{−M}`.
    pub confidence: f64,
    /// `‖(K₀*K₀ + T*T)⁻¹ w_i‖` for each probe, in draw order.
    pub probe_norms: Vec<f64>,
}

pub fn confidence(base: f64, probes: usize) -> f64 {
    1.0 - base.powi(-(probes as i32))
}

/// Randomized lower bound `ν̂ = 1 / (b·√(2/π)·maxᵢ‖A⁻¹wᵢ‖)` on `λ_min(A)`,
/// `A = K₀*K₀ + T*T`, valid with probability at least `1 − b^{−M}`.
pub fn estimate_nu(blur: &BlurOperator, t: &DiffOperator, settings: &NuSettings) -> Result<NuEstimate> {
    if settings.probes == 0 {
        return Err(Error::invalid("nu estimation needs at least one probe"));
    }
    if !(settings.base > 1.0) {
        return Err(Error::invalid(format!(
            "probe base must exceed 1, got {}",
            settings.base
        )));
    }
    let op = NormalOperator::new(StackedOperator::new(blur.clone(), 1.0)?, *t, 1.0)?;
    let max_iters = settings.cg_max_iters.unwrap_or_else(|| op.default_max_iters());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut probe_norms = Vec::with_capacity(settings.probes);
    for i in 0..settings.probes {
        let w: Vec<f64> = (0..op.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = match t.variant() {
            DiffVariant::Circulant => solve_circulant_fast(&op, &w)?,
            DiffVariant::Banded => {
                let (x, report) = solve_normal(&op, &w, None, settings.cg_tol, max_iters)?;
                if !report.converged {
                    return Err(Error::Estimation(format!("probe {i} solve failed: {report}")));
                }
                x
            }
        };
        probe_norms.push(vecops::norm(&x));
    }
    let max = probe_norms.iter().copied().fold(0.0, f64::max);
    Ok(NuEstimate {
        nu_lower_bound: 1.0 / (settings.base * (2.0 / PI).sqrt() * max),
        confidence: confidence(settings.base, settings.probes),
        probe_norms,
    })
}
