//! Proximal maps of `τ|t|^q` for `q ∈ (0, 1]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Edge penalty `σ Σ |v_i|^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub q: f64,
    pub sigma: f64,
}

impl Penalty {
    pub fn new(q: f64, sigma: f64) -> Result<Self> {
        check_q(q)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { q, sigma })
    }

    /// `σ‖v‖_φ`.
    pub fn value(&self, v: &[f64]) -> f64 {
        self.sigma * phi_sum(self.q, v)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("q must lie in (0, 1], got {q}")))
    }
}

/// `Σ |v_i|^q`.
pub fn phi_sum(q: f64, v: &[f64]) -> f64 {
    if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum()
    }
}

/// The scalar objective `τ|y|^q + ½(y − x)²`.
pub fn prox_objective(q: f64, tau: f64, x: f64, y: f64) -> f64 {
    tau * y.abs().powf(q) + 0.5 * (y - x) * (y - x)
}

/// A global minimizer of `τ|y|^q + ½(y − x)²`. Ties between zero and a
/// nonzero minimizer resolve to zero.
pub fn prox_scalar(q: f64, tau: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(prox_unchecked(q, tau, x))
}

pub(crate) fn prox_unchecked(q: f64, tau: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let a = x.abs();
    let y = if q == 1.0 {
        soft(tau, a)
    } else if q == 0.5 {
        half_threshold(tau, a)
    } else {
        generic(q, tau, a)
    };
    y.copysign(x)
}

fn soft(tau: f64, a: f64) -> f64 {
    (a - tau).max(0.0)
}

/// Closed form for `q = 1/2` on `a > 0`, via the trigonometric root of the
/// depressed cubic in `√y`.
fn half_threshold(tau: f64, a: f64) -> f64 {
    let thr = 1.5 * tau.powf(2.0 / 3.0);
    if a <= thr {
        return 0.0;
    }
    let c = ((tau / 4.0) * (a / 3.0).powf(-1.5)).min(1.0);
    let phi = c.acos();
    let mut y = (2.0 / 3.0) * a * (1.0 + (2.0 * PI / 3.0 - (2.0 / 3.0) * phi).cos());
    // A couple of Newton steps on y − a + τ/(2√y) clean up cancellation near the threshold.
    for _ in 0..2 {
        let s = y.sqrt();
        let g = y - a + tau / (2.0 * s);
        let dg = 1.0 - tau / (4.0 * y * s);
        if dg <= 0.0 {
            break;
        }
        let next = y - g / dg;
        if !(next > 0.0) {
            break;
        }
        y = next;
    }
    keep_if_better(0.5, tau, a, y)
}

/// Larger root of `g(y) = y − a + τq·y^{q−1}` on `[y₀, a]`, compared against zero.
fn generic(q: f64, tau: f64, a: f64) -> f64 {
    let tq = tau * q;
    let g = |y: f64| y - a + tq * y.powf(q - 1.0);
    let y0 = (tq * (1.0 - q)).powf(1.0 / (2.0 - q));
    if y0 >= a || g(y0) > 0.0 {
        return 0.0;
    }
    // g is convex and increasing on [y₀, a] with g(y₀) ≤ 0 < g(a), so Newton
    // from the right is monotone; bisection guards against rounding.
    let (mut lo, mut hi) = (y0, a);
    let mut y = a;
    for _ in 0..200 {
        let gy = g(y);
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if gy == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let dg = 1.0 - tq * (1.0 - q) * y.powf(q - 2.0);
        let mut next = y - gy / dg;
        if !(dg > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == y {
            break;
        }
        y = next;
    }
    keep_if_better(q, tau, a, y)
}

fn keep_if_better(q: f64, tau: f64, a: f64, y: f64) -> f64 {
    if prox_objective(q, tau, a, y) < 0.5 * a * a {
        y
    } else {
        0.0
    }
}

/// Entrywise `S_{(σ/δ)φ}(z)`.
pub fn prox_edgewise(pen: &Penalty, delta: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    check_q(pen.q)?;
    let tau = pen.sigma / delta;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid("sigma/delta must be positive and finite"));
    }
    Ok(if pen.q == 1.0 {
        z.iter().map(|&x| soft(tau, x.abs()).copysign(x)).collect()
    } else {
        z.iter().map(|&x| prox_unchecked(pen.q, tau, x)).collect()
    })
}
