//! Restoration quality and convergence metrics.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::Image;

/// `10·log₁₀(‖u − ū‖² / ‖u − u*‖²)` in dB with `ū` the mean of `original`.
///
/// Returns `+∞` when the images are identical.
pub fn snr(original: &Image, restored: &Image) -> Result<f64> {
    Error::check_len("restored image side", original.n(), restored.n())?;
    let mean = original.mean();
    let signal: f64 = original.pixels().iter().map(|x| (x - mean) * (x - mean)).sum();
    let noise = real_error(original, restored)?.powi(2);
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// `‖u − u*‖` over all pixels.
pub fn real_error(original: &Image, restored: &Image) -> Result<f64> {
    Error::check_len("restored image side", original.n(), restored.n())?;
    Ok(crate::vecops::dist(original.pixels(), restored.pixels()))
}

/// `‖(u, p) − (u_ref, p_ref)‖ / (1 + ‖(u_ref, p_ref)‖)`.
///
/// Pass the previous iterates for the standard residual or the extrapolated
/// points for the inertial one.
pub fn residual(u: &[f64], p: &[f64], u_ref: &[f64], p_ref: &[f64]) -> Result<f64> {
    Error::check_len("residual u", u_ref.len(), u.len())?;
    Error::check_len("residual p", p_ref.len(), p.len())?;
    let mut diff = 0.0;
    let mut base = 0.0;
    for (a, b) in u.iter().zip(u_ref).chain(p.iter().zip(p_ref)) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    Ok(diff.sqrt() / (1.0 + base.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    ToleranceMet,
    ResidualIncrease,
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ToleranceMet => "tolerance_met",
            StopReason::ResidualIncrease => "residual_increase",
            StopReason::MaxIters => "max_iters",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub stop: bool,
    /// `None` means continue.
    pub reason: Option<StopReason>,
}

impl StopDecision {
    const CONTINUE: StopDecision = StopDecision {
        stop: false,
        reason: None,
    };

    fn stop(reason: StopReason) -> Self {
        Self {
            stop: true,
            reason: Some(reason),
        }
    }
}

/// Stops when `res_curr < eps`, or when the residual grew after the first
/// `warmup` iterations. `res_prev` is `None` on the first iteration.
pub fn should_stop(res_prev: Option<f64>, res_curr: f64, eps: f64, k: usize, warmup: usize) -> StopDecision {
    if res_curr < eps {
        return StopDecision::stop(StopReason::ToleranceMet);
    }
    match res_prev {
        Some(prev) if prev < res_curr && k > warmup => StopDecision::stop(StopReason::ResidualIncrease),
        _ => StopDecision::CONTINUE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_examples() {
        let orig = Image::from_fn(4, |i, j| (i * 4 + j) as f64 / 15.0);
        let mean = Image::from_fn(4, |_, _| orig.mean());
        assert!(snr(&orig, &mean).unwrap().abs() < 1e-12);
        // Restored at a tenth of the mean-distance: 20 dB.
        let close = Image::from_fn(4, |i, j| {
            let u = orig.get(i, j);
            u + (orig.mean() - u) / 10.0
        });
        assert!((snr(&orig, &close).unwrap() - 20.0).abs() < 1e-10);
        assert_eq!(snr(&orig, &orig).unwrap(), f64::INFINITY);
    }

    #[test]
    fn residual_examples() {
        let u = [1.0, 2.0];
        let p = [2.0];
        assert_eq!(residual(&u, &p, &u, &p).unwrap(), 0.0);
        assert_eq!(residual(&u, &p, &[0.0; 2], &[0.0]).unwrap(), 3.0);
        assert!(residual(&u, &p, &[0.0; 3], &[0.0]).is_err());
    }

    #[test]
    fn stop_rules() {
        let d = should_stop(Some(1.0), 0.5e-4, 1e-4, 1, 3);
        assert_eq!(d.reason, Some(StopReason::ToleranceMet));
        let d = should_stop(Some(0.01), 0.02, 1e-4, 5, 3);
        assert_eq!(d.reason, Some(StopReason::ResidualIncrease));
        let d = should_stop(Some(0.01), 0.02, 1e-4, 3, 3);
        assert_eq!(d, StopDecision::CONTINUE);
        assert!(!should_stop(None, 0.5, 1e-4, 1, 0).stop);
        assert!(should_stop(Some(0.1), 0.5, 1e-4, 1, 0).stop);
    }
}
