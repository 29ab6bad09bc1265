//! Double-well potentials, Yosida approximations, and the regularized sign.
//!
//! The potential `F = beta_hat + pi_hat` is split into a convex part
//! `beta_hat` (with maximal monotone subdifferential `beta`) and a smooth
//! perturbation with Lipschitz derivative `pi`. Three classical variants are
//! supported:
//!
//! * quartic:      `F(r) = (r^2 - 1)^2 / 4`, `beta(r) = r^3`, `pi(r) = -r`;
//! * logarithmic:  `beta_hat(r) = (1+r)log(1+r) + (1-r)log(1-r)` on `[-1, 1]`,
//!   `pi(r) = -2 (c0 + 1) r`;
//! * obstacle:     `beta = subdifferential of the indicator of [-1, 1]`,
//!   `pi(r) = -2 c0 r`.
//!
//! `beta_eps` is the Yosida approximation `(I - (I + eps beta)^{-1}) / eps`,
//! computed through the scalar resolvent; `beta_hat_eps` is the Moreau-Yosida
//! envelope evaluated at the resolvent point. Both are 1/eps-Lipschitz and
//! collapse to `beta`, `beta_hat` as `eps -> 0`.
//!
//! On the Hilbert side, `sign_eps` is the Yosida approximation of the
//! subdifferential of the `H` norm, `v / max(eps, ||v||)`, and `norm_eps` its
//! envelope: `||v|| - eps/2` above `||v|| = eps`, `||v||^2 / (2 eps)` below.

use thiserror::Error;

use crate::spectral::Field;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("resolvent iteration stalled for r = {r}, eps = {eps} (residual {residual:e} after {iters} iterations)")]
    ResolventNoConvergence { r: f64, eps: f64, residual: f64, iters: usize },
}

/// Keeps logarithmic resolvent iterates strictly inside (-1, 1).
const LOG_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Quartic,
    Logarithmic { c0: f64 },
    Obstacle { c0: f64 },
}

impl Potential {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Quartic => "quartic",
            Potential::Logarithmic { .. } => "logarithmic",
            Potential::Obstacle { .. } => "obstacle",
        }
    }

    /// Convex part of the potential; `+inf` outside its effective domain.
    pub fn beta_hat(&self, r: f64) -> f64 {
        match self {
            Potential::Quartic => 0.25 * r.powi(4),
            Potential::Logarithmic { .. } | Potential::Obstacle { .. } => {
                if r.abs() > 1.0 {
                    f64::INFINITY
                } else if matches!(self, Potential::Obstacle { .. }) {
                    0.0
                } else {
                    xlogx(1.0 + r) + xlogx(1.0 - r)
                }
            }
        }
    }

    /// Minimal section `beta°(r)`; `None` where `beta(r)` is empty.
    pub fn beta_minimal(&self, r: f64) -> Option<f64> {
        match self {
            Potential::Quartic => Some(r.powi(3)),
            Potential::Logarithmic { .. } => {
                if r.abs() < 1.0 {
                    Some(((1.0 + r) / (1.0 - r)).ln())
                } else {
                    None
                }
            }
            Potential::Obstacle { .. } => {
                // At the endpoints the graph is a half-line containing zero.
                if r.abs() <= 1.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// Smooth perturbation `pi = pi_hat'`.
    pub fn pi(&self, r: f64) -> f64 {
        match self {
            Potential::Quartic => -r,
            Potential::Logarithmic { c0 } => -2.0 * (c0 + 1.0) * r,
            Potential::Obstacle { c0 } => -2.0 * c0 * r,
        }
    }

    /// Lipschitz constant of `pi`, used for integrator step-size caps.
    pub fn pi_lipschitz(&self) -> f64 {
        match self {
            Potential::Quartic => 1.0,
            Potential::Logarithmic { c0 } => 2.0 * (c0 + 1.0),
            Potential::Obstacle { c0 } => 2.0 * c0,
        }
    }

    /// Unique `s` with `s + eps * beta(s) ∋ r`.
    pub fn beta_resolvent(&self, p: &YosidaParams, r: f64) -> Result<f64, OperatorError> {
        let eps = p.epsilon;
        debug_assert!(eps > 0.0);
        match self {
            Potential::Obstacle { .. } => Ok(r.clamp(-1.0, 1.0)),
            Potential::Quartic => {
                solve_monotone(p, r, r.min(0.0), r.max(0.0), |s| {
                    (s + eps * s * s * s - r, 1.0 + 3.0 * eps * s * s)
                })
            }
            Potential::Logarithmic { .. } => {
                let lo = (-1.0 + LOG_GUARD).max(r.min(0.0));
                let hi = (1.0 - LOG_GUARD).min(r.max(0.0));
                solve_monotone(p, r, lo, hi, |s| {
                    let g = s + eps * ((1.0 + s) / (1.0 - s)).ln() - r;
                    let dg = 1.0 + 2.0 * eps / (1.0 - s * s);
                    (g, dg)
                })
            }
        }
    }

    /// Yosida approximation `beta_eps(r) = (r - resolvent(r)) / eps`.
    pub fn beta_eps(&self, p: &YosidaParams, r: f64) -> Result<f64, OperatorError> {
        let s = self.beta_resolvent(p, r)?;
        Ok((r - s) / p.epsilon)
    }

    /// Moreau-Yosida envelope `beta_hat_eps(r) = beta_hat(s) + (r-s)^2 / (2 eps)`.
    pub fn beta_hat_eps(&self, p: &YosidaParams, r: f64) -> Result<f64, OperatorError> {
        let s = self.beta_resolvent(p, r)?;
        let d = r - s;
        Ok(self.beta_hat(s) + d * d / (2.0 * p.epsilon))
    }
}

/// Regularization strength plus resolvent iteration knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaParams {
    pub epsilon: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl YosidaParams {
    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "yosida parameter must be positive");
        YosidaParams { epsilon, newton_tol: 1e-14, newton_max_iter: 200 }
    }
}

/// Safeguarded Newton on a strictly increasing residual with root in
/// `[lo, hi]`: Newton steps are accepted inside the bracket, otherwise the
/// bracket is bisected, so the iteration cannot escape or cycle.
fn solve_monotone(
    p: &YosidaParams,
    r: f64,
    mut lo: f64,
    mut hi: f64,
    eval: impl Fn(f64) -> (f64, f64),
) -> Result<f64, OperatorError> {
    let scale = r.abs().max(1.0);
    let tol = p.newton_tol * scale;
    let (glo, _) = eval(lo);
    if glo >= 0.0 {
        return Ok(lo);
    }
    let (ghi, _) = eval(hi);
    if ghi <= 0.0 {
        return Ok(hi);
    }
    let mut s = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..p.newton_max_iter {
        let (g, dg) = eval(s);
        residual = g.abs();
        if residual <= tol {
            return Ok(s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        if hi - lo <= f64::EPSILON * scale {
            return Ok(0.5 * (lo + hi));
        }
        let newton = s - g / dg;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(OperatorError::ResolventNoConvergence {
        r,
        eps: p.epsilon,
        residual,
        iters: p.newton_max_iter,
    })
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `Sign_eps(v) = v / max(eps, ||v||_H)`; never exceeds unit norm.
pub fn sign_eps(v: &Field, eps: f64) -> Field {
    debug_assert!(eps > 0.0);
    v.scale(1.0 / eps.max(v.h_norm()))
}

/// Moreau-Yosida envelope of the `H` norm.
pub fn norm_eps(v: &Field, eps: f64) -> f64 {
    debug_assert!(eps > 0.0);
    let n = v.h_norm();
    if n >= eps {
        n - 0.5 * eps
    } else {
        n * n / (2.0 * eps)
    }
}
