//! Sliding-manifold diagnostics and finite-time reaching certificates.
//!
//! The reaching analysis rests on a scalar differential inequality: with
//! `psi(t)` the `H` distance to the manifold and `g` the disturbance field
//! collecting every term of the deviation equation other than diffusion and
//! control, testing against the regularized sign yields
//!
//! ```text
//! d/dt psi + rho ||sigma||^2  <=  ||g||        (while psi >= eps)
//! ```
//!
//! so `psi` decreases at rate at least `rho - ||g||`. The analytical bounds
//! replace `||g||` by non-constructive constants; this harness measures
//! `G = max_t ||g(t)||` directly along the trajectory, which is the literally
//! checkable quantity in the inequality. A certificate checks, step by step,
//! that the slope inequality holds, that `psi` decreases while above `eps`,
//! that once below the threshold it stays there, and that the observed
//! reaching time respects `psi0 / (rho - G)`.

use thiserror::Error;

use crate::dynamics::{rhs, DynamicsError, ProblemKind, State, SystemConfig, Trajectory};
use crate::operators::{norm_eps, sign_eps};
use crate::spectral::Field;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("certification requires a bounded source (f in Linf(0,T;H))")]
    UnboundedSource,
    #[error("certification requires a positive time horizon")]
    ZeroHorizon,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Deviation from the sliding manifold: `theta + alpha phi - eta*` for
/// problem A, `phi - phi*` for problem B.
pub fn deviation(s: &State, c: &SystemConfig) -> Field {
    match c.problem {
        ProblemKind::A => {
            let mut d = s.theta.clone();
            d.axpy(c.alpha, &s.phi);
            d.axpy(-1.0, &c.target);
            d
        }
        ProblemKind::B => s.phi.sub(&c.target),
    }
}

/// `psi(t) = || deviation ||_H`.
pub fn psi(s: &State, c: &SystemConfig) -> f64 {
    deviation(s, c).h_norm()
}

/// Disturbance field driving the reaching inequality: everything in the
/// deviation equation `dev_t - kappa lap(dev) [+ monotone terms] + rho sigma = g`
/// other than diffusion, monotone parts, and control.
///
/// * A: `tau lap(w) - kappa alpha lap(phi) + (alpha - l) phi_t + kappa lap(eta*) + f`
/// * B: `gamma theta - beta_eps(phi*) - pi(phi) + lap(phi*)`
///
/// For problem A the phase velocity is taken from the right-hand side
/// evaluated at the given state.
pub fn g_field(s: &State, c: &SystemConfig) -> Result<Field, DynamicsError> {
    match c.problem {
        ProblemKind::A => {
            let derivs = rhs(s, c)?;
            let mut g = c.basis.laplacian(&s.w).scale(c.tau);
            g.axpy(-c.kappa * c.alpha, &c.basis.laplacian(&s.phi));
            g.axpy(c.alpha - c.l, &derivs.dphi);
            g.axpy(c.kappa, &c.basis.laplacian(&c.target));
            g.axpy(1.0, &c.source.eval(s.t, c.n_modes()));
            Ok(g)
        }
        ProblemKind::B => {
            let y = c.yosida();
            let beta_on_target =
                crate::dynamics::nonlinear_apply(|r| c.potential.beta_eps(&y, r), &c.target, &c.basis)?;
            let pi_on_phi =
                crate::dynamics::nonlinear_apply(|r| Ok(c.potential.pi(r)), &s.phi, &c.basis)?;
            let mut g = s.theta.scale(c.gamma);
            g.axpy(-1.0, &beta_on_target);
            g.axpy(-1.0, &pi_on_phi);
            g.axpy(1.0, &c.basis.laplacian(&c.target));
            Ok(g)
        }
    }
}

/// Per-step record: manifold distance, control saturation, disturbance
/// magnitude, energy quantities and running accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub psi: f64,
    pub sigma_norm: f64,
    pub g_norm: f64,
    /// Moreau-Yosida envelope of the deviation norm.
    pub my_eta: f64,
    pub h_theta: f64,
    pub grad_theta: f64,
    pub grad_w: f64,
    pub h_phi: f64,
    pub grad_phi: f64,
    /// Quadrature of `beta_hat_eps(phi)` over the domain.
    pub beta_hat_int: f64,
    /// Discrete `int_0^t ||phi_t||^2`.
    pub accum_dphi_sq: f64,
    /// Discrete `rho int_0^t || deviation ||_{H,eps}`.
    pub accum_rho_my_eta: f64,
}

impl StepDiagnostics {
    pub const CSV_COLUMNS: [&'static str; 13] = [
        "t",
        "psi",
        "sigma_norm",
        "g_norm",
        "my_eta",
        "h_theta",
        "grad_theta",
        "grad_w",
        "h_phi",
        "grad_phi",
        "beta_hat_int",
        "accum_dphi_sq",
        "accum_rho_my_eta",
    ];

    pub fn csv_values(&self) -> [f64; 13] {
        [
            self.t,
            self.psi,
            self.sigma_norm,
            self.g_norm,
            self.my_eta,
            self.h_theta,
            self.grad_theta,
            self.grad_w,
            self.h_phi,
            self.grad_phi,
            self.beta_hat_int,
            self.accum_dphi_sq,
            self.accum_rho_my_eta,
        ]
    }

    pub fn from_csv_values(v: &[f64]) -> Option<Self> {
        if v.len() < 13 {
            return None;
        }
        Some(StepDiagnostics {
            t: v[0],
            psi: v[1],
            sigma_norm: v[2],
            g_norm: v[3],
            my_eta: v[4],
            h_theta: v[5],
            grad_theta: v[6],
            grad_w: v[7],
            h_phi: v[8],
            grad_phi: v[9],
            beta_hat_int: v[10],
            accum_dphi_sq: v[11],
            accum_rho_my_eta: v[12],
        })
    }
}

/// Derive the per-step diagnostics for a sequence of states on a uniform
/// grid of spacing `dt`.
pub fn diagnose(
    states: &[State],
    c: &SystemConfig,
    dt: f64,
) -> Result<Vec<StepDiagnostics>, DynamicsError> {
    let y = c.yosida();
    let mut out = Vec::with_capacity(states.len());
    let mut accum_dphi_sq = 0.0;
    let mut accum_rho_my_eta = 0.0;
    for (k, s) in states.iter().enumerate() {
        let dev = deviation(s, c);
        let psi = dev.h_norm();
        let sigma_norm = sign_eps(&dev, c.epsilon).h_norm();
        let my_eta = norm_eps(&dev, c.epsilon);
        let g_norm = g_field(s, c)?.h_norm();
        let phi_samples = c.basis.evaluate(&s.phi);
        let beta_hat_samples = phi_samples
            .iter()
            .map(|&r| c.potential.beta_hat_eps(&y, r))
            .collect::<Result<Vec<f64>, _>>()?;
        let beta_hat_int = c.basis.quadrature_integral(&beta_hat_samples);
        out.push(StepDiagnostics {
            t: s.t,
            psi,
            sigma_norm,
            g_norm,
            my_eta,
            h_theta: s.theta.h_norm(),
            grad_theta: c.basis.grad_norm(&s.theta),
            grad_w: c.basis.grad_norm(&s.w),
            h_phi: s.phi.h_norm(),
            grad_phi: c.basis.grad_norm(&s.phi),
            beta_hat_int,
            accum_dphi_sq,
            accum_rho_my_eta,
        });
        // accumulate into the next record (left rectangles on [0, t_k])
        if k + 1 < states.len() {
            let dphi = states[k + 1].phi.sub(&s.phi).scale(1.0 / dt);
            accum_dphi_sq += dphi.inner(&dphi) * dt;
            accum_rho_my_eta += c.rho * my_eta * dt;
        }
    }
    Ok(out)
}

/// Smallest grid time after which `psi` stays at or below `delta`.
pub fn detect_reaching_series(psi: &[f64], dt: f64, delta: f64) -> Option<f64> {
    let last_above = psi.iter().rposition(|&p| p > delta);
    match last_above {
        None => Some(0.0),
        Some(j) if j + 1 < psi.len() => Some((j + 1) as f64 * dt),
        Some(_) => None,
    }
}

pub fn detect_reaching(traj: &Trajectory, delta: f64) -> Option<f64> {
    let psi: Vec<f64> = traj.diagnostics.iter().map(|d| d.psi).collect();
    detect_reaching_series(&psi, traj.dt, delta)
}

/// Empirical gain threshold `psi0 / T + G`.
pub fn rho_star_empirical(psi0: f64, t_final: f64, g_max: f64) -> f64 {
    assert!(t_final > 0.0, "reaching threshold needs a positive horizon");
    psi0 / t_final + g_max
}

/// Outcome of certifying one trajectory. `None` booleans are checks whose
/// hypothesis did not apply (e.g. monotonicity when the margin is not
/// positive).
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub problem: ProblemKind,
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub psi0: f64,
    /// `G`: largest disturbance norm along the run.
    pub g_max: f64,
    /// `M = rho - G`.
    pub margin: f64,
    pub rho_star_empirical: f64,
    pub t_star_observed: Option<f64>,
    /// `psi0 / M` when the margin is positive.
    pub t_star_bound: Option<f64>,
    pub monotone_ok: Option<bool>,
    pub slope_ok: Option<bool>,
    pub stay_ok: Option<bool>,
    pub bound_ok: Option<bool>,
    /// Whether the initial phase satisfies the extra regularity used by the
    /// reaching argument (`beta°(phi0)` finite at the nodes). Reported only.
    pub further_data_ok: bool,
    pub certified: bool,
    pub reason: String,
}

impl Certificate {
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        fn tri(v: Option<bool>) -> String {
            match v {
                Some(true) => "true".into(),
                Some(false) => "false".into(),
                None => "skipped".into(),
            }
        }
        fn opt(v: Option<f64>) -> String {
            match v {
                Some(x) => format!("{x}"),
                None => "none".into(),
            }
        }
        vec![
            ("problem".into(), self.problem.name().into()),
            ("rho".into(), format!("{}", self.rho)),
            ("epsilon".into(), format!("{}", self.epsilon)),
            ("delta".into(), format!("{}", self.delta)),
            ("psi0".into(), format!("{}", self.psi0)),
            ("g_max".into(), format!("{}", self.g_max)),
            ("margin".into(), format!("{}", self.margin)),
            ("rho_star_empirical".into(), format!("{}", self.rho_star_empirical)),
            ("t_star_observed".into(), opt(self.t_star_observed)),
            ("t_star_bound".into(), opt(self.t_star_bound)),
            ("monotone_ok".into(), tri(self.monotone_ok)),
            ("slope_ok".into(), tri(self.slope_ok)),
            ("stay_ok".into(), tri(self.stay_ok)),
            ("bound_ok".into(), tri(self.bound_ok)),
            ("further_data_ok".into(), format!("{}", self.further_data_ok)),
            ("certified".into(), format!("{}", self.certified)),
            ("reason".into(), self.reason.clone()),
        ]
    }
}

/// Check the reaching inequalities along a trajectory.
pub fn certify(traj: &Trajectory, c: &SystemConfig) -> Result<Certificate, CertifyError> {
    if !c.source.is_bounded() {
        return Err(CertifyError::UnboundedSource);
    }
    if traj.t_final() <= 0.0 {
        return Err(CertifyError::ZeroHorizon);
    }
    let diag = &traj.diagnostics;
    let psi: Vec<f64> = diag.iter().map(|d| d.psi).collect();
    let dt = traj.dt;
    let t_final = traj.t_final();
    let psi0 = psi[0];
    let g_max = diag.iter().map(|d| d.g_norm).fold(0.0, f64::max);
    let margin = c.rho - g_max;
    let rho_star = rho_star_empirical(psi0, t_final, g_max);
    let tol_slope = 5.0 * dt * (c.rho / c.epsilon);

    let t_star_observed = detect_reaching_series(&psi, dt, c.delta);
    let t_star_bound = (margin > 0.0).then(|| psi0 / margin);

    // forward slope against the measured disturbance, wherever psi > eps
    let mut slope_violation = None;
    for k in 0..psi.len().saturating_sub(1) {
        if psi[k] > c.epsilon {
            let fd = (psi[k + 1] - psi[k]) / dt;
            if fd > diag[k].g_norm - c.rho + tol_slope {
                slope_violation = Some(k);
                break;
            }
        }
    }
    let slope_ok = Some(slope_violation.is_none());

    // strict decrease while above eps is only implied when the margin
    // dominates the slope tolerance
    let monotone_ok = if margin > tol_slope {
        Some(
            psi.windows(2)
                .all(|p| p[0] <= c.epsilon || p[1] <= p[0] + tol_slope * dt),
        )
    } else {
        None
    };

    // no escape above delta after the first crossing
    let first_below = psi.iter().position(|&p| p <= c.delta);
    let stay_ok = match (first_below, t_star_observed) {
        (Some(i), Some(t)) => Some((i as f64 * dt - t).abs() < 0.5 * dt),
        (None, None) => None,
        _ => Some(false),
    };

    let bound_ok = if c.rho > rho_star {
        match (t_star_observed, t_star_bound) {
            (Some(obs), Some(bound)) => Some(obs <= bound + dt),
            _ => Some(false),
        }
    } else {
        None
    };

    let further_data_ok = c
        .basis
        .evaluate(&c.phi0)
        .iter()
        .all(|&r| c.potential.beta_minimal(r).is_some());

    let mut reason = String::from("ok");
    let mut certified = true;
    if margin <= 0.0 {
        certified = false;
        reason = format!("margin M = rho - G = {margin} <= 0");
    } else if c.rho <= rho_star {
        certified = false;
        reason = format!("rho = {} below empirical threshold {rho_star}", c.rho);
    } else if t_star_observed.is_none() {
        certified = false;
        reason = format!("psi never settled below delta = {}", c.delta);
    } else {
        for (name, flag) in [
            ("monotone_ok", monotone_ok),
            ("slope_ok", slope_ok),
            ("stay_ok", stay_ok),
            ("bound_ok", bound_ok),
        ] {
            if flag == Some(false) {
                certified = false;
                reason = format!("{name} failed");
                break;
            }
        }
    }

    Ok(Certificate {
        problem: c.problem,
        rho: c.rho,
        epsilon: c.epsilon,
        delta: c.delta,
        psi0,
        g_max,
        margin,
        rho_star_empirical: rho_star,
        t_star_observed,
        t_star_bound,
        monotone_ok,
        slope_ok,
        stay_ok,
        bound_ok,
        further_data_ok,
        certified,
        reason,
    })
}
