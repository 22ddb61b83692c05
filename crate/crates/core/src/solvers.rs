//! IADMM and ADMM iterations on the split model
//! `min ½‖Ku − f‖² + σ‖v‖_φ  s.t.  Tu = v`, with theory constants and
//! per-iteration diagnostics.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linsolve::{
    estimate_nu, nu_dense, solve_circulant_fast, solve_normal, NormalOperator, NuSettings, SolveReport,
    DEFAULT_CG_TOL,
};
use crate::metrics::{self, StopReason};
use crate::operators::{spectral_norm_k, theta_bound, BlurOperator, DiffOperator, DiffVariant, StackedOperator};
use crate::prox::{phi_sum, prox_edgewise, Penalty};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Iadmm,
    Admm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Iadmm => "iadmm",
            Method::Admm => "admm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iadmm" => Ok(Method::Iadmm),
            "admm" => Ok(Method::Admm),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Starting point `(u¹, v¹, p¹)`; the previous iterates are set equal to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// `v¹ = T(f̃, f̃)`, then `u¹` from the u-update with `p̂ = 0` and
    /// `p¹ = −δ(Tu¹ − v¹)`, so `u¹` already satisfies the u-optimality
    /// condition that the dual-increment bound relies on.
    #[default]
    Primed,
    /// `u¹ = (f̃, f̃)`, `v¹ = Tu¹`, `p¹ = 0`.
    Duplicated,
}

impl FromStr for Initialization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "primed" => Ok(Initialization::Primed),
            "duplicated" => Ok(Initialization::Duplicated),
            other => Err(Error::invalid(format!("unknown initialization '{other}'"))),
        }
    }
}

impl fmt::Display for Initialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Initialization::Primed => "primed",
            Initialization::Duplicated => "duplicated",
        })
    }
}

/// What to do when `δ ≤ δ_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Admissibility {
    Ignore,
    #[default]
    Warn,
    Enforce,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NuEstimator {
    /// Dense eigensolve for `n ≤ 8`, randomized estimate otherwise.
    #[default]
    Auto,
    Dense,
    Halko(NuSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub sigma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub variant: DiffVariant,
    /// Computes the Lagrangian-based diagnostics that need theory constants.
    pub diagnostics_on: bool,
    /// Iterations before the residual-increase rule may fire.
    pub warmup: usize,
    /// When false, run exactly `max_iters` iterations.
    pub stop_control: bool,
    pub cg_tol: f64,
    /// Defaults to `10·(2N²)`.
    pub cg_max_iters: Option<usize>,
    pub init: Initialization,
    pub admissibility: Admissibility,
    pub nu_estimator: NuEstimator,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Iadmm,
            sigma: 1e-3,
            delta: 1e-3,
            alpha: 0.5,
            beta: 1.0,
            q: 1.0,
            epsilon: 1e-3,
            max_iters: 500,
            variant: DiffVariant::Banded,
            diagnostics_on: true,
            warmup: 3,
            stop_control: true,
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iters: None,
            init: Initialization::Primed,
            admissibility: Admissibility::Warn,
            nu_estimator: NuEstimator::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {x}")))
            }
        };
        positive("sigma", self.sigma)?;
        positive("delta", self.delta)?;
        positive("epsilon", self.epsilon)?;
        positive("cg_tol", self.cg_tol)?;
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be at least 1, got {}", self.beta)));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::invalid(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }

    fn effective_alpha(&self) -> f64 {
        match self.method {
            Method::Iadmm => self.alpha,
            Method::Admm => 0.0,
        }
    }
}

/// Operators and data of one deblurring problem.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    k: StackedOperator,
    t: DiffOperator,
    normal: NormalOperator,
    penalty: Penalty,
    /// Blurred image `f̃`.
    observed: Vec<f64>,
    /// `f = (f̃, 0)`.
    f: Vec<f64>,
    /// `K*f`.
    kf: Vec<f64>,
    cg_max_iters: usize,
    cg_tol: f64,
}

impl Problem {
    pub fn new(cfg: &SolverConfig, blurred: &Image, blur: BlurOperator) -> Result<Self> {
        cfg.validate()?;
        let n = blurred.n();
        Error::check_len("blur operator side", n, blur.n())?;
        let k = StackedOperator::new(blur, cfg.beta)?;
        let t = DiffOperator::new(n, cfg.variant)?;
        let normal = NormalOperator::new(k.clone(), t, cfg.delta)?;
        let observed = blurred.vectorize();
        let mut f = observed.clone();
        f.resize(2 * n * n, 0.0);
        let kf = k.adjoint(&f)?;
        Ok(Self {
            n,
            cg_max_iters: cfg.cg_max_iters.unwrap_or_else(|| normal.default_max_iters()),
            cg_tol: cfg.cg_tol,
            k,
            t,
            normal,
            penalty: Penalty::new(cfg.q, cfg.sigma)?,
            observed,
            f,
            kf,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> &StackedOperator {
        &self.k
    }

    pub fn t(&self) -> &DiffOperator {
        &self.t
    }

    pub fn normal(&self) -> &NormalOperator {
        &self.normal
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn delta(&self) -> f64 {
        self.normal.delta()
    }

    /// Solves `(K*K + δT*T)u = rhs` near `guess`. CG works on the
    /// correction so its relative tolerance is measured against the
    /// warm-start residual rather than the (possibly huge) full right side.
    fn solve_u(&self, rhs: &[f64], guess: &[f64], iteration: usize) -> Result<(Vec<f64>, Option<SolveReport>)> {
        if self.t.variant() == DiffVariant::Circulant {
            return Ok((solve_circulant_fast(&self.normal, rhs)?, None));
        }
        let r0 = vecops::sub(rhs, &self.normal.apply(guess)?);
        let (d, report) = solve_normal(&self.normal, &r0, None, self.cg_tol, self.cg_max_iters)?;
        if !report.converged {
            return Err(Error::SolveFailed { iteration, report });
        }
        let mut u = guess.to_vec();
        vecops::axpy(1.0, &d, &mut u);
        Ok((u, Some(report)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u_prev: Vec<f64>,
    pub u: Vec<f64>,
    pub v_prev: Vec<f64>,
    pub v: Vec<f64>,
    pub p_prev: Vec<f64>,
    pub p: Vec<f64>,
    pub k: usize,
}

impl SolverState {
    pub fn initial(problem: &Problem, init: Initialization) -> Result<Self> {
        let f = &problem.observed;
        let mut u0 = f.clone();
        u0.extend_from_slice(f);
        let v = problem.t.apply(&u0)?;
        let (u, p) = match init {
            Initialization::Duplicated => (u0, vec![0.0; v.len()]),
            Initialization::Primed => {
                let mut rhs = problem.kf.clone();
                vecops::axpy(problem.delta(), &problem.t.adjoint(&v)?, &mut rhs);
                let (u, _) = problem.solve_u(&rhs, &u0, 0)?;
                let tu = problem.t.apply(&u)?;
                let p = tu.iter().zip(&v).map(|(a, b)| -problem.delta() * (a - b)).collect();
                (u, p)
            }
        };
        Ok(Self {
            u_prev: u.clone(),
            u,
            v_prev: v.clone(),
            v,
            p_prev: p.clone(),
            p,
            k: 1,
        })
    }

    fn advance(&self, u: Vec<f64>, v: Vec<f64>, p: Vec<f64>) -> Self {
        Self {
            u_prev: self.u.clone(),
            u,
            v_prev: self.v.clone(),
            v,
            p_prev: self.p.clone(),
            p,
            k: self.k + 1,
        }
    }

    fn is_finite(&self) -> bool {
        vecops::all_finite(&self.u) && vecops::all_finite(&self.v) && vecops::all_finite(&self.p)
    }
}

/// Result of one iteration: the new state and the reference points the
/// inertial residual and subgradient are measured against.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SolverState,
    pub u_hat: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub cg: Option<SolveReport>,
}

/// One inertial step. The v-update reads `u^k`, not `û^k`.
pub fn step_iadmm(state: &SolverState, cfg: &SolverConfig, problem: &Problem) -> Result<StepOutcome> {
    let alpha = cfg.alpha;
    let delta = problem.delta();
    let u_hat = vecops::extrapolate(&state.u, &state.u_prev, alpha);
    let p_hat = vecops::extrapolate(&state.p, &state.p_prev, alpha);

    let tu = problem.t.apply(&state.u)?;
    let z: Vec<f64> = tu.iter().zip(&p_hat).map(|(a, b)| a - b / delta).collect();
    let v = prox_edgewise(&problem.penalty, delta, &z)?;

    let mut rhs = problem.kf.clone();
    vecops::axpy(delta, &problem.t.adjoint(&v)?, &mut rhs);
    vecops::axpy(1.0, &problem.t.adjoint(&p_hat)?, &mut rhs);
    let (u, cg) = problem.solve_u(&rhs, &state.u, state.k)?;

    let tu_next = problem.t.apply(&u)?;
    let p: Vec<f64> = p_hat
        .iter()
        .zip(tu_next.iter().zip(&v))
        .map(|(ph, (a, b))| ph - delta * (a - b))
        .collect();
    Ok(StepOutcome {
        state: state.advance(u, v, p),
        u_hat,
        p_hat,
        cg,
    })
}

/// One plain ADMM step on the same split model.
pub fn step_admm(state: &SolverState, problem: &Problem) -> Result<StepOutcome> {
    let delta = problem.delta();
    let tu = problem.t.apply(&state.u)?;
    let z: Vec<f64> = tu.iter().zip(&state.p).map(|(a, b)| a - b / delta).collect();
    let v = prox_edgewise(&problem.penalty, delta, &z)?;

    let mut rhs = problem.kf.clone();
    vecops::axpy(delta, &problem.t.adjoint(&v)?, &mut rhs);
    vecops::axpy(1.0, &problem.t.adjoint(&state.p)?, &mut rhs);
    let (u, cg) = problem.solve_u(&rhs, &state.u, state.k)?;

    let tu_next = problem.t.apply(&u)?;
    let p: Vec<f64> = state
        .p
        .iter()
        .zip(tu_next.iter().zip(&v))
        .map(|(pk, (a, b))| pk - delta * (a - b))
        .collect();
    Ok(StepOutcome {
        u_hat: state.u.clone(),
        p_hat: state.p.clone(),
        state: state.advance(u, v, p),
        cg,
    })
}

/// `L(u, v, p) = ½‖Ku − f‖² + σ‖v‖_φ − ⟨p, Tu − v⟩ + (δ/2)‖Tu − v‖²`.
pub fn eval_lagrangian(u: &[f64], v: &[f64], p: &[f64], problem: &Problem) -> Result<f64> {
    Error::check_len("v", problem.t.edge_len(), v.len())?;
    Error::check_len("p", problem.t.edge_len(), p.len())?;
    let fit = data_fit(u, problem)?;
    let tu = problem.t.apply(u)?;
    Ok(lagrangian_from(fit, &tu, v, p, problem))
}

fn data_fit(u: &[f64], problem: &Problem) -> Result<f64> {
    let ku = problem.k.apply(u)?;
    Ok(0.5 * vecops::dist(&ku, &problem.f).powi(2))
}

fn lagrangian_from(fit: f64, tu: &[f64], v: &[f64], p: &[f64], problem: &Problem) -> f64 {
    let mut inner = 0.0;
    let mut gap = 0.0;
    for ((a, b), pi) in tu.iter().zip(v).zip(p) {
        let r = a - b;
        inner += pi * r;
        gap += r * r;
    }
    fit + problem.penalty.value(v) - inner + 0.5 * problem.delta() * gap
}

/// `F(u, v, p, x) = L(u, v, p) + c‖u − x‖²` with `c = 7α²θ²‖K‖⁴/(2δ)`.
pub fn eval_f(u: &[f64], v: &[f64], p: &[f64], x: &[f64], problem: &Problem, constants: &TheoryConstants) -> Result<f64> {
    Error::check_len("x", u.len(), x.len())?;
    Ok(eval_lagrangian(u, v, p, problem)? + constants.c * vecops::dist(u, x).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuSource {
    Dense,
    Halko { confidence: f64 },
}

impl fmt::Display for NuSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuSource::Dense => f.write_str("dense"),
            NuSource::Halko { confidence } => write!(f, "randomized (confidence {confidence})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub theta: f64,
    pub norm_t: f64,
    pub norm_k: f64,
    pub norm_k_converged: bool,
    /// `ν`: (an estimate of) `λ_min(K₀*K₀ + T*T)`.
    pub nu_hat: f64,
    pub nu_source: NuSource,
    pub alpha: f64,
    pub delta: f64,
    pub delta_min: f64,
    pub h_hat: f64,
    /// Weight of `‖u − x‖²` in `F`.
    pub c: f64,
    pub gamma_u: f64,
    pub gamma_v: f64,
    pub gamma_p: f64,
    pub gamma: f64,
}

impl TheoryConstants {
    /// `θ²‖K‖⁴`.
    fn tk4(&self) -> f64 {
        (self.theta * self.norm_k * self.norm_k).powi(2)
    }

    pub fn h_hat_at(&self, delta: f64) -> f64 {
        let a2 = self.alpha * self.alpha;
        self.nu_hat / 2.0 - (3.0 * self.tk4() / delta + 7.0 * a2 * self.tk4() / (2.0 * delta))
    }

    pub fn admissible(&self, delta: f64) -> bool {
        delta > self.delta_min
    }

    /// Same norms and `ν`, different `(α, δ)`.
    pub fn with_parameters(&self, alpha: f64, delta: f64) -> Self {
        assemble(self.theta, self.norm_t, self.norm_k, self.norm_k_converged, self.nu_hat, self.nu_source, alpha, delta)
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    theta: f64,
    norm_t: f64,
    norm_k: f64,
    norm_k_converged: bool,
    nu_hat: f64,
    nu_source: NuSource,
    alpha: f64,
    delta: f64,
) -> TheoryConstants {
    let k2 = norm_k * norm_k;
    let tk4 = (theta * k2).powi(2);
    let a2 = alpha * alpha;
    let c = 7.0 * a2 * tk4 / (2.0 * delta);
    let gamma_v = ((1.0 + delta) * theta * k2).max(alpha * (1.0 + delta) * theta * k2);
    let gamma_u = (theta * norm_t * k2 + c).max(alpha * theta * norm_t * k2);
    let gamma_p = (theta * k2 / delta).max(alpha * theta * k2 / delta);
    let mut out = TheoryConstants {
        theta,
        norm_t,
        norm_k,
        norm_k_converged,
        nu_hat,
        nu_source,
        alpha,
        delta,
        delta_min: 1f64.max((6.0 + 7.0 * a2) * tk4 / nu_hat).max(tk4),
        h_hat: 0.0,
        c,
        gamma_u,
        gamma_v,
        gamma_p,
        gamma: gamma_u + gamma_v + gamma_p + 2.0 * c,
    };
    out.h_hat = out.h_hat_at(delta);
    out
}

/// Power-iteration settings for `‖K‖₂`.
const POWER_ITERS: usize = 5000;
const POWER_TOL: f64 = 1e-12;
const POWER_SEED: u64 = 0x5eed;

pub fn compute_theory_constants(cfg: &SolverConfig, problem: &Problem) -> Result<TheoryConstants> {
    let n = problem.n;
    let power = spectral_norm_k(&problem.k, POWER_ITERS, POWER_TOL, POWER_SEED)?;
    let blur = problem.k.blur();
    let (nu_hat, nu_source) = match cfg.nu_estimator {
        NuEstimator::Dense => (nu_dense(blur, &problem.t)?, NuSource::Dense),
        NuEstimator::Auto if n <= 8 => (nu_dense(blur, &problem.t)?, NuSource::Dense),
        NuEstimator::Auto => halko(blur, &problem.t, &NuSettings::default())?,
        NuEstimator::Halko(settings) => halko(blur, &problem.t, &settings)?,
    };
    if !(nu_hat > 0.0) {
        return Err(Error::Estimation(format!("nu is not positive ({nu_hat})")));
    }
    Ok(assemble(
        theta_bound(n),
        problem.t.norm(),
        power.norm,
        power.converged,
        nu_hat,
        nu_source,
        cfg.effective_alpha(),
        problem.delta(),
    ))
}

fn halko(blur: &BlurOperator, t: &DiffOperator, settings: &NuSettings) -> Result<(f64, NuSource)> {
    let est = estimate_nu(blur, t, settings)?;
    Ok((
        est.nu_lower_bound,
        NuSource::Halko {
            confidence: est.confidence,
        },
    ))
}

/// Diagnostics recorded after each iteration, describing `w^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub k: usize,
    /// `½‖Ku − f‖² + σ‖Tu‖_φ`.
    pub objective: f64,
    pub lagrangian: f64,
    /// `F(u^{k+1}, v^{k+1}, p^{k+1}, u^k)`; needs theory constants.
    pub f_value: Option<f64>,
    pub residual: f64,
    pub residual_inertial: f64,
    pub real_error: Option<f64>,
    pub snr: Option<f64>,
    pub dual_ratio: Option<f64>,
    pub subgrad_ratio: Option<f64>,
    /// `‖Tu − v‖`.
    pub tu_minus_v: f64,
    pub du_norm: f64,
    pub dv_norm: f64,
    pub dp_norm: f64,
    pub cg_iterations: usize,
}

/// Column order of exported traces.
pub const TRACE_COLUMNS: [&str; 11] = [
    "k",
    "objective",
    "lagrangian",
    "F",
    "res",
    "res_i",
    "err",
    "snr",
    "dual_ratio",
    "subgrad_ratio",
    "tu_minus_v",
];

impl IterTrace {
    /// Fields in [`TRACE_COLUMNS`] order. Floats use the shortest
    /// round-tripping representation; missing values are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.k.to_string(),
            self.objective.to_string(),
            self.lagrangian.to_string(),
            opt(self.f_value),
            self.residual.to_string(),
            self.residual_inertial.to_string(),
            opt(self.real_error),
            opt(self.snr),
            opt(self.dual_ratio),
            opt(self.subgrad_ratio),
            self.tu_minus_v.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// Ratio or slack, depending on the check.
    pub value: f64,
}

/// `F(w^k) − F(w^{k+1}) ≥ ĥ‖u^{k+1} − u^k‖²` up to `1e−9·(1 + |F(w^k)|)`.
/// `value` is the slack (nonnegative when the inequality holds).
pub fn check_descent(prev: &IterTrace, next: &IterTrace, constants: &TheoryConstants) -> Option<BoundCheck> {
    let (f0, f1) = (prev.f_value?, next.f_value?);
    let slack = f0 - f1 - constants.h_hat * next.du_norm * next.du_norm + 1e-9 * (1.0 + f0.abs());
    Some(BoundCheck {
        holds: slack >= 0.0,
        value: slack,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `‖p^{k+1} − p^k‖ / (θ‖K‖²‖u^{k+1} − u^k‖) ≤ 1 + 1e−8`.
pub fn check_dual_bound(before: &SolverState, after: &SolverState, constants: &TheoryConstants) -> BoundCheck {
    let dp = vecops::dist(&after.p, &before.p);
    let du = vecops::dist(&after.u, &before.u);
    let value = ratio(dp, constants.theta * constants.norm_k * constants.norm_k * du);
    BoundCheck {
        holds: value <= 1.0 + 1e-8,
        value,
    }
}

/// `‖s^{k+1}‖ / (γ(‖u^{k+1} − u^k‖ + ‖u^k − u^{k−1}‖)) ≤ 1 + 1e−6` with the
/// explicit subgradient `s^{k+1} ∈ ∂F(w^{k+1})`.
pub fn check_subgradient_bound(
    before: &SolverState,
    step: &StepOutcome,
    problem: &Problem,
    constants: &TheoryConstants,
) -> Result<BoundCheck> {
    let after = &step.state;
    let delta = problem.delta();
    let c = constants.c;
    let mut s2 = 0.0;
    // s_v = (1 + δ)(p^{k+1} − p̂^k)
    for (a, b) in after.p.iter().zip(&step.p_hat) {
        s2 += ((1.0 + delta) * (a - b)).powi(2);
    }
    // s_u = T*p̂^k − T*p^{k+1} + c(u^{k+1} − u^k)
    let dp_hat = vecops::sub(&step.p_hat, &after.p);
    let t_dp = problem.t.adjoint(&dp_hat)?;
    for ((g, a), b) in t_dp.iter().zip(&after.u).zip(&before.u) {
        s2 += (g + c * (a - b)).powi(2);
    }
    // s_p = v^{k+1} − Tu^{k+1}
    let tu = problem.t.apply(&after.u)?;
    for (a, b) in after.v.iter().zip(&tu) {
        s2 += (a - b).powi(2);
    }
    // ∇ₓF = 2c(u^k − u^{k+1})
    let du = vecops::dist(&after.u, &before.u);
    s2 += (2.0 * c * du).powi(2);

    let du_prev = vecops::dist(&before.u, &before.u_prev);
    let value = ratio(s2.sqrt(), constants.gamma * (du + du_prev));
    Ok(BoundCheck {
        holds: value <= 1.0 + 1e-6,
        value,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub restored: Image,
    /// Snapshot of `w¹` (k = 0); residual fields are zero.
    pub initial: IterTrace,
    pub traces: Vec<IterTrace>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub constants: Option<TheoryConstants>,
    pub warnings: Vec<String>,
    pub final_state: SolverState,
}

/// Runs IADMM or ADMM from the configured initialization until the stop rule
/// fires or `max_iters` is reached. `observer` sees every trace as it is made.
pub fn run(
    cfg: &SolverConfig,
    blurred: &Image,
    blur: BlurOperator,
    truth: Option<&Image>,
    observer: &mut dyn FnMut(&IterTrace),
) -> Result<RunOutput> {
    let problem = Problem::new(cfg, blurred, blur)?;
    if let Some(t) = truth {
        Error::check_len("ground truth side", problem.n, t.n())?;
    }
    let mut warnings = Vec::new();
    let constants = if cfg.diagnostics_on || cfg.admissibility != Admissibility::Ignore {
        Some(compute_theory_constants(cfg, &problem)?)
    } else {
        None
    };
    if let Some(c) = &constants {
        if !c.admissible(cfg.delta) {
            let msg = format!(
                "delta = {} is not above delta_min = {:.6e}; descent guarantees do not apply",
                cfg.delta, c.delta_min
            );
            match cfg.admissibility {
                Admissibility::Enforce => return Err(Error::InvalidArgument(msg)),
                Admissibility::Warn => warnings.push(msg),
                Admissibility::Ignore => {}
            }
        }
    }
    let diag = if cfg.diagnostics_on { constants.as_ref() } else { None };

    let mut state = SolverState::initial(&problem, cfg.init)?;
    if !state.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let initial = snapshot(&problem, &state, truth, diag, 0)?;

    let mut traces = Vec::new();
    let mut res_prev = None;
    let mut stop_reason = StopReason::MaxIters;
    for iteration in 1..=cfg.max_iters {
        let step = match cfg.method {
            Method::Iadmm => step_iadmm(&state, cfg, &problem)?,
            Method::Admm => step_admm(&state, &problem)?,
        };
        if !step.state.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let mut trace = snapshot(&problem, &step.state, truth, diag, iteration)?;
        trace.residual = metrics::residual(&step.state.u, &step.state.p, &state.u, &state.p)?;
        trace.residual_inertial = metrics::residual(&step.state.u, &step.state.p, &step.u_hat, &step.p_hat)?;
        trace.du_norm = vecops::dist(&step.state.u, &state.u);
        trace.dv_norm = vecops::dist(&step.state.v, &state.v);
        trace.dp_norm = vecops::dist(&step.state.p, &state.p);
        trace.cg_iterations = step.cg.map_or(0, |r| r.iterations);
        if let Some(c) = diag {
            trace.dual_ratio = Some(check_dual_bound(&state, &step.state, c).value);
            trace.subgrad_ratio = Some(check_subgradient_bound(&state, &step, &problem, c)?.value);
        }
        if !(trace.objective.is_finite() && trace.residual.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
        observer(&trace);

        let res = match cfg.method {
            Method::Iadmm => trace.residual_inertial,
            Method::Admm => trace.residual,
        };
        traces.push(trace);
        state = step.state;
        if cfg.stop_control {
            let decision = metrics::should_stop(res_prev, res, cfg.epsilon, iteration, cfg.warmup);
            if let Some(reason) = decision.reason {
                stop_reason = reason;
                break;
            }
        }
        res_prev = Some(res);
    }

    let n = problem.n;
    let restored = Image::new(n, state.u[..n * n].to_vec())?;
    Ok(RunOutput {
        restored,
        initial,
        iterations: traces.len(),
        traces,
        stop_reason,
        constants,
        warnings,
        final_state: state,
    })
}

fn snapshot(
    problem: &Problem,
    state: &SolverState,
    truth: Option<&Image>,
    diag: Option<&TheoryConstants>,
    k: usize,
) -> Result<IterTrace> {
    let fit = data_fit(&state.u, problem)?;
    let tu = problem.t.apply(&state.u)?;
    let objective = fit + problem.penalty.sigma * phi_sum(problem.penalty.q, &tu);
    let lagrangian = lagrangian_from(fit, &tu, &state.v, &state.p, problem);
    let f_value = diag.map(|c| lagrangian + c.c * vecops::dist(&state.u, &state.u_prev).powi(2));
    let (real_error, snr) = match truth {
        Some(t) => {
            let n = problem.n;
            let restored = Image::new(n, state.u[..n * n].to_vec())?;
            (Some(metrics::real_error(t, &restored)?), Some(metrics::snr(t, &restored)?))
        }
        None => (None, None),
    };
    Ok(IterTrace {
        k,
        objective,
        lagrangian,
        f_value,
        residual: 0.0,
        residual_inertial: 0.0,
        real_error,
        snr,
        dual_ratio: None,
        subgrad_ratio: None,
        tu_minus_v: vecops::dist(&tu, &state.v),
        du_norm: 0.0,
        dv_norm: 0.0,
        dp_norm: 0.0,
        cg_iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{make_phantom, PhantomKind};

    fn small_problem(cfg: &SolverConfig) -> (Image, BlurOperator, Problem) {
        let truth = make_phantom(PhantomKind::Checkerboard, 8, 0).unwrap();
        let blur = BlurOperator::gaussian(8, 3, 1.0).unwrap();
        let blurred = Image::new(8, blur.apply(truth.pixels()).unwrap()).unwrap();
        let problem = Problem::new(cfg, &blurred, blur.clone()).unwrap();
        (blurred, blur, problem)
    }

    #[test]
    fn lagrangian_trivial_points() {
        let cfg = SolverConfig::default();
        let (_, _, problem) = small_problem(&cfg);
        let m = problem.t.edge_len();
        let zero_u = vec![0.0; 128];
        let l = eval_lagrangian(&zero_u, &vec![0.0; m], &vec![0.0; m], &problem).unwrap();
        assert!((l - 0.5 * vecops::norm_sq(problem.f())).abs() < 1e-12);

        let u: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin()).collect();
        let tu = problem.t.apply(&u).unwrap();
        let p: Vec<f64> = (0..m).map(|i| (i as f64).cos()).collect();
        let l = eval_lagrangian(&u, &tu, &p, &problem).unwrap();
        let expected = data_fit(&u, &problem).unwrap() + cfg.sigma * phi_sum(1.0, &tu);
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn f_reduces_to_lagrangian() {
        let cfg = SolverConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let (_, _, problem) = small_problem(&cfg);
        let consts = compute_theory_constants(&cfg, &problem).unwrap();
        assert_eq!(consts.c, 0.0);
        let m = problem.t.edge_len();
        let u: Vec<f64> = (0..128).map(|i| i as f64 / 100.0).collect();
        let x = vec![0.3; 128];
        let v = vec![0.1; m];
        let p = vec![-0.2; m];
        let l = eval_lagrangian(&u, &v, &p, &problem).unwrap();
        assert_eq!(eval_f(&u, &v, &p, &x, &problem, &consts).unwrap(), l);
        let consts = consts.with_parameters(0.5, 1.0);
        assert_eq!(eval_f(&u, &v, &p, &u, &problem, &consts).unwrap(), l);
    }

    #[test]
    fn alpha_zero_constants() {
        let cfg = SolverConfig {
            alpha: 0.0,
            delta: 2.0,
            ..Default::default()
        };
        let (_, _, problem) = small_problem(&cfg);
        let c = compute_theory_constants(&cfg, &problem).unwrap();
        let k2 = c.norm_k * c.norm_k;
        assert!((c.gamma_v - 3.0 * c.theta * k2).abs() < 1e-12);
        assert!((c.gamma_p - c.theta * k2 / 2.0).abs() < 1e-12);
        assert_eq!(c.nu_source, NuSource::Dense);
    }

    #[test]
    fn h_hat_positive_when_admissible() {
        let cfg = SolverConfig::default();
        let (_, _, problem) = small_problem(&cfg);
        let base = compute_theory_constants(&cfg, &problem).unwrap();
        for alpha in [0.0, 0.2, 0.5, 1.0] {
            let c = base.with_parameters(alpha, 1.0);
            for scale in [1.0001, 1.1, 2.0, 10.0, 1e3] {
                let d = c.delta_min * scale;
                assert!(c.h_hat_at(d) > 0.0, "alpha {alpha} scale {scale}");
            }
        }
    }

    #[test]
    fn alpha_zero_matches_admm_step() {
        let cfg = SolverConfig {
            alpha: 0.0,
            delta: 0.05,
            ..Default::default()
        };
        let (_, _, problem) = small_problem(&cfg);
        let mut s = SolverState::initial(&problem, Initialization::Duplicated).unwrap();
        for _ in 0..3 {
            let a = step_iadmm(&s, &cfg, &problem).unwrap();
            let b = step_admm(&s, &problem).unwrap();
            assert_eq!(a.state, b.state);
            s = a.state;
        }
    }

    #[test]
    fn admm_v_update_is_soft_threshold() {
        let cfg = SolverConfig {
            delta: 0.1,
            sigma: 0.02,
            ..Default::default()
        };
        let (_, _, problem) = small_problem(&cfg);
        let s0 = SolverState::initial(&problem, Initialization::Primed).unwrap();
        let s1 = step_admm(&s0, &problem).unwrap().state;
        let tu = problem.t.apply(&s1.u).unwrap();
        let tau = cfg.sigma / cfg.delta;
        let step = step_admm(&s1, &problem).unwrap().state;
        for ((v, a), p) in step.v.iter().zip(&tu).zip(&s1.p) {
            let z = a - p / cfg.delta;
            assert_eq!(*v, z.signum() * (z.abs() - tau).max(0.0));
        }
    }

    #[test]
    fn identity_blur_tiny_sigma_returns_input() {
        let cfg = SolverConfig {
            sigma: 1e-12,
            delta: 1.0,
            epsilon: 1e-10,
            max_iters: 200,
            diagnostics_on: false,
            admissibility: Admissibility::Ignore,
            ..Default::default()
        };
        let img = make_phantom(PhantomKind::Disks, 16, 2).unwrap();
        let out = run(&cfg, &img, BlurOperator::identity(16), None, &mut |_| {}).unwrap();
        assert!(vecops::dist(out.restored.pixels(), img.pixels()) < 1e-4);
    }

    #[test]
    fn run_is_deterministic_and_reports_truth_metrics() {
        let cfg = SolverConfig {
            max_iters: 10,
            ..Default::default()
        };
        let truth = make_phantom(PhantomKind::Ramp, 16, 0).unwrap();
        let blur = BlurOperator::gaussian(16, 5, 1.5).unwrap();
        let blurred = Image::new(16, blur.apply(truth.pixels()).unwrap()).unwrap();
        let a = run(&cfg, &blurred, blur.clone(), Some(&truth), &mut |_| {}).unwrap();
        let b = run(&cfg, &blurred, blur.clone(), Some(&truth), &mut |_| {}).unwrap();
        assert_eq!(a.traces, b.traces);
        assert!(a.traces.iter().all(|t| t.snr.is_some() && t.dual_ratio.is_some()));
        let c = run(&cfg, &blurred, blur, None, &mut |_| {}).unwrap();
        assert!(c.traces.iter().all(|t| t.snr.is_none() && t.real_error.is_none()));
        assert!(!a.warnings.is_empty());
    }

    #[test]
    fn enforce_rejects_inadmissible_delta() {
        let cfg = SolverConfig {
            admissibility: Admissibility::Enforce,
            ..Default::default()
        };
        let img = make_phantom(PhantomKind::Ramp, 8, 0).unwrap();
        let blur = BlurOperator::gaussian(8, 3, 1.0).unwrap();
        assert!(matches!(
            run(&cfg, &img, blur, None, &mut |_| {}),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let img = make_phantom(PhantomKind::Ramp, 8, 0).unwrap();
        for cfg in [
            SolverConfig { beta: 0.5, ..Default::default() },
            SolverConfig { q: 1.5, ..Default::default() },
            SolverConfig { delta: 0.0, ..Default::default() },
            SolverConfig { alpha: -0.1, ..Default::default() },
        ] {
            assert!(run(&cfg, &img, BlurOperator::identity(8), None, &mut |_| {}).is_err());
        }
    }
}
