//! Galerkin dynamics of the controlled type-III phase-field system.
//!
//! The second-order heat balance is reduced to first order through the
//! thermal displacement substitution `theta = w_t`, giving the coupled
//! system (per problem variant)
//!
//! ```text
//! A:  theta' = f - l phi' + kappa lap(theta) + tau lap(w)
//!              - rho Sign_eps(theta + alpha phi - eta*)
//!     phi'   = lap(phi) - beta_eps(phi) - pi(phi) + gamma theta
//!     w'     = theta
//!
//! B:  theta' = f - l phi' + kappa lap(theta) + tau lap(w)
//!     phi'   = lap(phi) - beta_eps(phi) - pi(phi) + gamma theta
//!              - rho Sign_eps(phi - phi*)
//!     w'     = theta
//! ```
//!
//! projected onto the cosine eigenbasis. `phi'` is assembled before `theta'`
//! so the `l phi'` coupling uses the actual phase velocity instead of an
//! extrapolation.
//!
//! The default stepper is IMEX Euler: diffusion is solved implicitly (the
//! basis diagonalizes the Laplacian, so each mode is a scalar solve, with the
//! `tau lap(w)` contribution closed through the trapezoidal `w` update),
//! while the Lipschitz nonlinearities, control and source stay explicit. A
//! fully explicit RK4 stepper is provided for cross-validation.

use thiserror::Error;

use crate::operators::{sign_eps, OperatorError, Potential, YosidaParams};
use crate::sliding::{self, StepDiagnostics};
use crate::spectral::{Field, SpectralBasis, SpectralError};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("state became non-finite at t = {t:.6} (dt = {dt:e}); reduce the step size or the control gain")]
    NonFinite { t: f64, dt: f64 },
    #[error("config invalid: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Manifold `theta + alpha phi = eta*`, control in the heat balance.
    A,
    /// Manifold `phi = phi*`, control in the phase equation.
    B,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::A => "A",
            ProblemKind::B => "B",
        }
    }
}

/// Time profile of one separable source term.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant { level: f64 },
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    Step { t_on: f64, t_off: f64, level: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { level } => level,
            TimeProfile::Sinusoid { amplitude, frequency, phase } => {
                amplitude * (frequency * t + phase).sin()
            }
            TimeProfile::Step { t_on, t_off, level } => {
                if t >= t_on && t < t_off {
                    level
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            TimeProfile::Constant { level } => level.abs(),
            TimeProfile::Sinusoid { amplitude, .. } => amplitude.abs(),
            TimeProfile::Step { level, .. } => level.abs(),
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            TimeProfile::Constant { level } => level.is_finite(),
            TimeProfile::Sinusoid { amplitude, frequency, phase } => {
                amplitude.is_finite() && frequency.is_finite() && phase.is_finite()
            }
            TimeProfile::Step { t_on, t_off, level } => {
                t_on.is_finite() && t_off.is_finite() && level.is_finite()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub profile: TimeProfile,
    pub shape: Field,
}

/// Separable source `f(t) = sum_i g_i(t) h_i`, already projected.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceSpec {
    pub terms: Vec<SourceTerm>,
}

impl SourceSpec {
    pub fn zero() -> Self {
        SourceSpec { terms: Vec::new() }
    }

    pub fn eval(&self, t: f64, n_modes: usize) -> Field {
        let mut f = Field::zeros(n_modes);
        for term in &self.terms {
            f.axpy(term.profile.eval(t), &term.shape);
        }
        f
    }

    /// `sup_t ||f(t)||_H` upper bound (triangle inequality over terms).
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.profile.sup() * t.shape.h_norm()).sum()
    }

    /// All profiles have finite parameters, hence `f` is in `L^inf(0,T;H)`.
    pub fn is_bounded(&self) -> bool {
        self.terms.iter().all(|t| t.profile.params_finite() && t.shape.is_finite())
    }

    pub fn resized(&self, n: usize) -> Self {
        SourceSpec {
            terms: self
                .terms
                .iter()
                .map(|t| SourceTerm { profile: t.profile.clone(), shape: t.shape.resized(n) })
                .collect(),
        }
    }
}

/// Physical constants, control law, discretization and data for one run.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub kappa: f64,
    pub tau: f64,
    pub gamma: f64,
    pub l: f64,
    pub alpha: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub problem: ProblemKind,
    pub potential: Potential,
    pub basis: SpectralBasis,
    pub t_final: f64,
    pub dt: f64,
    pub source: SourceSpec,
    /// `eta*` for problem A, `phi*` for problem B (already projected).
    pub target: Field,
    pub theta0: Field,
    pub w0: Field,
    pub phi0: Field,
    /// Reaching threshold used by detection and certification.
    pub delta: f64,
    /// Exploration escape hatch for `alpha <= 0`; no reaching claim is made.
    pub allow_nonpositive_alpha: bool,
}

impl SystemConfig {
    pub fn yosida(&self) -> YosidaParams {
        YosidaParams::new(self.epsilon)
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes
    }

    /// Explicit-term stability cap: `0.5 min(eps, 1/Lip(pi), eps/rho)`.
    /// The regularized sign has Lipschitz constant `1/eps`, so near the
    /// manifold the explicit control contributes a rate `rho/eps`.
    pub fn stability_cap(&self) -> f64 {
        dt_stability_cap(self.epsilon, self.potential.pi_lipschitz(), self.rho)
    }

    pub fn default_delta(epsilon: f64) -> f64 {
        epsilon.max(1e-8)
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        let mut c = self.clone();
        c.rho = rho;
        c
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        let mut c = self.clone();
        c.dt = dt;
        c
    }

    /// Same run at a different regularization; `dt` shrinks to the cap when
    /// needed and `delta` follows the new `eps`.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut c = self.clone();
        c.epsilon = epsilon;
        c.delta = Self::default_delta(epsilon);
        let cap = c.stability_cap();
        if c.dt > cap {
            c.dt = cap;
        }
        c
    }

    /// Same run resolved on `n` modes; data are padded or truncated.
    pub fn with_modes(&self, n: usize) -> Result<Self, SpectralError> {
        let basis = SpectralBasis::new(self.basis.domain.clone(), n)?;
        let mut c = self.clone();
        c.basis = basis;
        c.target = self.target.resized(n);
        c.theta0 = self.theta0.resized(n);
        c.w0 = self.w0.resized(n);
        c.phi0 = self.phi0.resized(n);
        c.source = self.source.resized(n);
        Ok(c)
    }
}

pub fn dt_stability_cap(epsilon: f64, pi_lipschitz: f64, rho: f64) -> f64 {
    let mut cap = 0.5 * epsilon.min(1.0 / pi_lipschitz);
    if rho > 0.0 {
        cap = cap.min(0.5 * epsilon / rho);
    }
    cap
}

/// Snapshot of the unknowns; `theta` is kept equal to the discrete time
/// derivative of `w` by the integrator contract.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub w: Field,
    pub theta: Field,
    pub phi: Field,
}

impl State {
    pub fn initial(c: &SystemConfig) -> Self {
        State { t: 0.0, w: c.w0.clone(), theta: c.theta0.clone(), phi: c.phi0.clone() }
    }

    fn is_finite(&self) -> bool {
        self.w.is_finite() && self.theta.is_finite() && self.phi.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct Derivatives {
    pub dw: Field,
    pub dtheta: Field,
    pub dphi: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    ImexEuler,
    Rk4,
}

/// Time-indexed states plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Step actually used (may be halved from the configured one).
    pub dt: f64,
    pub halvings: u32,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn t_final(&self) -> f64 {
        self.final_state().t
    }

    pub fn psi_series(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.psi).collect()
    }
}

/// Collocation lift of a scalar function: sample, apply, project back.
pub fn nonlinear_apply(
    f: impl Fn(f64) -> Result<f64, OperatorError>,
    v: &Field,
    basis: &SpectralBasis,
) -> Result<Field, DynamicsError> {
    let samples = basis.evaluate(v);
    let mapped = samples.into_iter().map(f).collect::<Result<Vec<f64>, _>>()?;
    Ok(basis.project(&mapped)?)
}

/// `beta_eps + pi` applied pointwise and projected in one pass.
fn phase_nonlinearity(c: &SystemConfig, phi: &Field) -> Result<Field, DynamicsError> {
    let y = c.yosida();
    nonlinear_apply(|r| Ok(c.potential.beta_eps(&y, r)? + c.potential.pi(r)), phi, &c.basis)
}

fn phase_rate(c: &SystemConfig, s: &State, controlled: bool) -> Result<Field, DynamicsError> {
    let mut dphi = c.basis.laplacian(&s.phi);
    dphi.axpy(-1.0, &phase_nonlinearity(c, &s.phi)?);
    dphi.axpy(c.gamma, &s.theta);
    if controlled && c.rho > 0.0 {
        let deviation = s.phi.sub(&c.target);
        dphi.axpy(-c.rho, &sign_eps(&deviation, c.epsilon));
    }
    Ok(dphi)
}

/// Right-hand side with the control in the heat balance.
pub fn rhs_a(s: &State, c: &SystemConfig) -> Result<Derivatives, DynamicsError> {
    let dphi = phase_rate(c, s, false)?;
    let mut dtheta = c.source.eval(s.t, c.n_modes());
    dtheta.axpy(-c.l, &dphi);
    dtheta.axpy(c.kappa, &c.basis.laplacian(&s.theta));
    dtheta.axpy(c.tau, &c.basis.laplacian(&s.w));
    if c.rho > 0.0 {
        let mut deviation = s.theta.clone();
        deviation.axpy(c.alpha, &s.phi);
        deviation.axpy(-1.0, &c.target);
        dtheta.axpy(-c.rho, &sign_eps(&deviation, c.epsilon));
    }
    Ok(Derivatives { dw: s.theta.clone(), dtheta, dphi })
}

/// Right-hand side with the control in the phase equation.
pub fn rhs_b(s: &State, c: &SystemConfig) -> Result<Derivatives, DynamicsError> {
    let dphi = phase_rate(c, s, true)?;
    let mut dtheta = c.source.eval(s.t, c.n_modes());
    dtheta.axpy(-c.l, &dphi);
    dtheta.axpy(c.kappa, &c.basis.laplacian(&s.theta));
    dtheta.axpy(c.tau, &c.basis.laplacian(&s.w));
    Ok(Derivatives { dw: s.theta.clone(), dtheta, dphi })
}

pub fn rhs(s: &State, c: &SystemConfig) -> Result<Derivatives, DynamicsError> {
    match c.problem {
        ProblemKind::A => rhs_a(s, c),
        ProblemKind::B => rhs_b(s, c),
    }
}

/// One IMEX Euler step. Diffusion is implicit per mode; the trapezoidal `w`
/// update is substituted into the `theta` solve so the `tau lap(w)` term is
/// implicit as well:
///
/// ```text
/// theta+ (1 + dt kappa lam + dt^2 tau lam / 2)
///     = theta - dt tau lam (w + dt theta / 2) + dt N_theta
/// w+ = w + dt (theta + theta+) / 2
/// ```
pub fn step_imex(s: &State, c: &SystemConfig, dt: f64) -> Result<State, DynamicsError> {
    let n = c.n_modes();

    // phase update: explicit nonlinearity, implicit diffusion
    let mut nphi = phase_nonlinearity(c, &s.phi)?.scale(-1.0);
    nphi.axpy(c.gamma, &s.theta);
    if c.problem == ProblemKind::B && c.rho > 0.0 {
        let deviation = s.phi.sub(&c.target);
        nphi.axpy(-c.rho, &sign_eps(&deviation, c.epsilon));
    }
    let mut phi_next = Field::zeros(n);
    let mut dphi = Field::zeros(n);
    for k in 0..n {
        let lam = c.basis.eigenvalues[k];
        let next = (s.phi.coeffs[k] + dt * nphi.coeffs[k]) / (1.0 + dt * lam);
        phi_next.coeffs[k] = next;
        dphi.coeffs[k] = (next - s.phi.coeffs[k]) / dt;
    }

    // heat update: source, phase coupling and control explicit
    let mut ntheta = c.source.eval(s.t, n);
    ntheta.axpy(-c.l, &dphi);
    if c.problem == ProblemKind::A && c.rho > 0.0 {
        let mut deviation = s.theta.clone();
        deviation.axpy(c.alpha, &s.phi);
        deviation.axpy(-1.0, &c.target);
        ntheta.axpy(-c.rho, &sign_eps(&deviation, c.epsilon));
    }
    let mut theta_next = Field::zeros(n);
    let mut w_next = Field::zeros(n);
    for k in 0..n {
        let lam = c.basis.eigenvalues[k];
        let denom = 1.0 + dt * c.kappa * lam + 0.5 * dt * dt * c.tau * lam;
        let th = (s.theta.coeffs[k]
            - dt * c.tau * lam * (s.w.coeffs[k] + 0.5 * dt * s.theta.coeffs[k])
            + dt * ntheta.coeffs[k])
            / denom;
        theta_next.coeffs[k] = th;
        w_next.coeffs[k] = s.w.coeffs[k] + 0.5 * dt * (s.theta.coeffs[k] + th);
    }

    let next = State { t: s.t + dt, w: w_next, theta: theta_next, phi: phi_next };
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite { t: next.t, dt });
    }
    Ok(next)
}

/// Classic fully explicit RK4 step (reference path; conditionally stable).
pub fn step_rk4(s: &State, c: &SystemConfig, dt: f64) -> Result<State, DynamicsError> {
    let advance = |base: &State, k: &Derivatives, h: f64| -> State {
        let mut w = base.w.clone();
        w.axpy(h, &k.dw);
        let mut theta = base.theta.clone();
        theta.axpy(h, &k.dtheta);
        let mut phi = base.phi.clone();
        phi.axpy(h, &k.dphi);
        State { t: base.t + h, w, theta, phi }
    };
    let k1 = rhs(s, c)?;
    let k2 = rhs(&advance(s, &k1, 0.5 * dt), c)?;
    let k3 = rhs(&advance(s, &k2, 0.5 * dt), c)?;
    let k4 = rhs(&advance(s, &k3, dt), c)?;

    let mut w = s.w.clone();
    let mut theta = s.theta.clone();
    let mut phi = s.phi.clone();
    let sixth = dt / 6.0;
    for (acc, parts) in [
        (&mut w, [&k1.dw, &k2.dw, &k3.dw, &k4.dw]),
        (&mut theta, [&k1.dtheta, &k2.dtheta, &k3.dtheta, &k4.dtheta]),
        (&mut phi, [&k1.dphi, &k2.dphi, &k3.dphi, &k4.dphi]),
    ] {
        acc.axpy(sixth, parts[0]);
        acc.axpy(2.0 * sixth, parts[1]);
        acc.axpy(2.0 * sixth, parts[2]);
        acc.axpy(sixth, parts[3]);
    }
    let next = State { t: s.t + dt, w, theta, phi };
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite { t: next.t, dt });
    }
    Ok(next)
}

const MAX_HALVINGS: u32 = 3;

pub fn simulate(c: &SystemConfig) -> Result<Trajectory, DynamicsError> {
    simulate_with(c, Stepper::ImexEuler)
}

/// Integrate from 0 to `t_final` on the uniform grid `t_k = k dt`.
/// Deterministic; on a non-finite state the run restarts with `dt` halved,
/// up to three times, before giving up.
pub fn simulate_with(c: &SystemConfig, stepper: Stepper) -> Result<Trajectory, DynamicsError> {
    if !c.dt.is_finite() || c.dt <= 0.0 {
        return Err(DynamicsError::InvalidConfig(format!("dt must be positive, got {}", c.dt)));
    }
    if c.t_final < 0.0 {
        return Err(DynamicsError::InvalidConfig(format!(
            "t_final must be nonnegative, got {}",
            c.t_final
        )));
    }
    let mut dt = c.dt;
    let mut halvings = 0u32;
    loop {
        let n_steps = if c.t_final == 0.0 { 0 } else { (c.t_final / dt).round().max(1.0) as usize };
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut state = State::initial(c);
        // grid times are k * dt; accumulate by index to avoid drift
        states.push(state.clone());
        let mut failed = false;
        for k in 0..n_steps {
            let stepped = match stepper {
                Stepper::ImexEuler => step_imex(&state, c, dt),
                Stepper::Rk4 => step_rk4(&state, c, dt),
            };
            match stepped {
                Ok(mut next) => {
                    next.t = (k + 1) as f64 * dt;
                    state = next;
                    states.push(state.clone());
                }
                Err(DynamicsError::NonFinite { .. }) if halvings < MAX_HALVINGS => {
                    halvings += 1;
                    dt *= 0.5;
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            continue;
        }
        let diagnostics = sliding::diagnose(&states, c, dt)?;
        return Ok(Trajectory { states, diagnostics, dt, halvings });
    }
}
