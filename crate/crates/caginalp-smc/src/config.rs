//! Config file parsing and hypothesis validation.
//!
//! Runs are described by a TOML file with sections `domain`,
//! `discretization`, `params`, `potential`, `control`, `initial`, `target`
//! and `source`. Every omitted key falls back to the desk-scale defaults
//! (unit interval, 64 modes, dt = 1e-4, unit physical constants, quartic
//! well). Fields are given either as raw cosine-series coefficients
//! (`{ coeffs = [...] }`) or through the closed-form preset
//! (`{ cos = k, amplitude = a }` for `a cos(k pi x / L)`).
//!
//! Validation is aggregated: every violated hypothesis is reported, each
//! prefixed with the name of the assumption it violates (`datanum`, `dataf`,
//! `initial-data-hypothesis`, `target-functionB`, `stability`, ...).

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dynamics::{ProblemKind, SourceSpec, SourceTerm, SystemConfig, TimeProfile};
use crate::operators::Potential;
use crate::spectral::{Domain, Field, SpectralBasis};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config invalid:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    raw.build()
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    domain: RawDomain,
    #[serde(default)]
    discretization: RawDiscretization,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    potential: RawPotential,
    #[serde(default)]
    control: RawControl,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    target: RawTarget,
    #[serde(default)]
    source: RawSource,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(default = "default_one")]
    length: f64,
}

impl Default for RawDomain {
    fn default() -> Self {
        RawDomain { length: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscretization {
    n_modes: usize,
    quad_points: usize,
    dt: f64,
    t_final: f64,
}

impl Default for RawDiscretization {
    fn default() -> Self {
        RawDiscretization { n_modes: 64, quad_points: 256, dt: 1e-4, t_final: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawParams {
    kappa: f64,
    tau: f64,
    gamma: f64,
    l: f64,
    alpha: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams { kappa: 1.0, tau: 1.0, gamma: 1.0, l: 1.0, alpha: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPotential {
    kind: String,
    c0: f64,
}

impl Default for RawPotential {
    fn default() -> Self {
        RawPotential { kind: "quartic".into(), c0: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawControl {
    problem: String,
    rho: f64,
    epsilon: f64,
    delta: Option<f64>,
    allow_nonpositive_alpha: bool,
}

impl Default for RawControl {
    fn default() -> Self {
        RawControl {
            problem: "A".into(),
            rho: 0.0,
            epsilon: 1e-2,
            delta: None,
            allow_nonpositive_alpha: false,
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    theta0: Option<FieldSpec>,
    w0: Option<FieldSpec>,
    phi0: Option<FieldSpec>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    eta_star: Option<FieldSpec>,
    phi_star: Option<FieldSpec>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSource {
    #[serde(default)]
    terms: Vec<RawSourceTerm>,
}

#[derive(Debug, Deserialize)]
struct RawSourceTerm {
    #[serde(flatten)]
    profile: RawProfile,
    shape: Option<FieldSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
enum RawProfile {
    Constant { level: f64 },
    Sinusoid { amplitude: f64, frequency: f64, #[serde(default)] phase: f64 },
    Step { t_on: f64, t_off: f64, level: f64 },
}

/// A field is either a raw coefficient list or a single-cosine preset.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FieldSpec {
    Cosine {
        cos: usize,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
    Coeffs { coeffs: Vec<f64> },
}

impl FieldSpec {
    fn build(
        spec: &Option<FieldSpec>,
        what: &str,
        basis: &SpectralBasis,
        diags: &mut Vec<String>,
    ) -> Field {
        match spec {
            None => Field::zeros(basis.n_modes),
            Some(FieldSpec::Cosine { cos, amplitude }) => {
                if *cos >= basis.n_modes {
                    diags.push(format!(
                        "discretization: {what} preset cos({cos}) outside the {} resolved modes",
                        basis.n_modes
                    ));
                    return Field::zeros(basis.n_modes);
                }
                if !amplitude.is_finite() {
                    diags.push(format!("{what}: amplitude must be finite"));
                    return Field::zeros(basis.n_modes);
                }
                basis.cosine_field(*cos, *amplitude)
            }
            Some(FieldSpec::Coeffs { coeffs }) => {
                if coeffs.len() > basis.n_modes {
                    diags.push(format!(
                        "discretization: {what} has {} coefficients, basis resolves {}",
                        coeffs.len(),
                        basis.n_modes
                    ));
                    return Field::zeros(basis.n_modes);
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    diags.push(format!("{what}: coefficients must be finite"));
                    return Field::zeros(basis.n_modes);
                }
                Field::from_coeffs(coeffs.clone()).resized(basis.n_modes)
            }
        }
    }
}

impl RawConfig {
    fn build(self) -> Result<SystemConfig, ConfigError> {
        let mut diags = Vec::new();

        for (name, v) in [
            ("kappa", self.params.kappa),
            ("tau", self.params.tau),
            ("gamma", self.params.gamma),
            ("l", self.params.l),
        ] {
            if !v.is_finite() || v <= 0.0 {
                diags.push(format!("datanum: {name} must be in (0, +inf), got {v}"));
            }
        }
        if !self.params.alpha.is_finite() {
            diags.push(format!("sliding-manifold: alpha must be finite, got {}", self.params.alpha));
        } else if self.params.alpha <= 0.0 && !self.control.allow_nonpositive_alpha {
            diags.push(format!(
                "sliding-manifold: alpha must be > 0, got {} (set control.allow_nonpositive_alpha to explore)",
                self.params.alpha
            ));
        }

        let problem = match self.control.problem.as_str() {
            "A" | "a" => ProblemKind::A,
            "B" | "b" => ProblemKind::B,
            other => {
                diags.push(format!("control: problem must be \"A\" or \"B\", got {other:?}"));
                ProblemKind::A
            }
        };

        let potential = match self.potential.kind.as_str() {
            "quartic" => Potential::Quartic,
            "logarithmic" => Potential::Logarithmic { c0: self.potential.c0 },
            "obstacle" => Potential::Obstacle { c0: self.potential.c0 },
            other => {
                diags.push(format!(
                    "potential: kind must be quartic | logarithmic | obstacle, got {other:?}"
                ));
                Potential::Quartic
            }
        };
        let c0_ok = self.potential.c0.is_finite() && self.potential.c0 > 0.0;
        if !matches!(potential, Potential::Quartic) && !c0_ok {
            diags.push(format!("potential: c0 must be > 0, got {}", self.potential.c0));
        }

        if !self.control.rho.is_finite() || self.control.rho < 0.0 {
            diags.push(format!("control: rho must be finite and >= 0, got {}", self.control.rho));
        }
        if !self.control.epsilon.is_finite() || self.control.epsilon <= 0.0 {
            diags.push(format!("control: epsilon must be > 0, got {}", self.control.epsilon));
        }

        let domain = match Domain::new(self.domain.length, self.discretization.quad_points) {
            Ok(d) => Some(d),
            Err(e) => {
                diags.push(format!("domain: {e}"));
                None
            }
        };
        let basis = domain.and_then(|d| match SpectralBasis::new(d, self.discretization.n_modes) {
            Ok(b) => Some(b),
            Err(e) => {
                diags.push(format!("discretization: {e}"));
                None
            }
        });

        if !self.discretization.dt.is_finite() || self.discretization.dt <= 0.0 {
            diags.push(format!("discretization: dt must be > 0, got {}", self.discretization.dt));
        }
        if !self.discretization.t_final.is_finite() || self.discretization.t_final < 0.0 {
            diags.push(format!(
                "discretization: t_final must be >= 0, got {}",
                self.discretization.t_final
            ));
        }
        let cap = crate::dynamics::dt_stability_cap(
            self.control.epsilon,
            potential.pi_lipschitz(),
            self.control.rho,
        );
        if self.discretization.dt.is_finite() && self.discretization.dt > cap {
            diags.push(format!(
                "stability: dt = {} exceeds the explicit-term cap {cap:e} (eps = {}, Lip(pi) = {}, rho = {})",
                self.discretization.dt,
                self.control.epsilon,
                potential.pi_lipschitz(),
                self.control.rho
            ));
        }

        let delta = self.control.delta.unwrap_or(SystemConfig::default_delta(self.control.epsilon));
        let delta_floor = self.control.epsilon.max(1e-10);
        if delta < delta_floor {
            diags.push(format!(
                "control: delta = {delta} below the detection floor {delta_floor} (max(epsilon, 1e-10))"
            ));
        }

        let Some(basis) = basis else {
            return Err(ConfigError::Invalid(diags));
        };

        let theta0 = FieldSpec::build(&self.initial.theta0, "initial.theta0", &basis, &mut diags);
        let w0 = FieldSpec::build(&self.initial.w0, "initial.w0", &basis, &mut diags);
        let phi0 = FieldSpec::build(&self.initial.phi0, "initial.phi0", &basis, &mut diags);

        match problem {
            ProblemKind::A => {
                if self.target.phi_star.is_some() {
                    diags.push("target: phi_star is set but problem A uses eta_star".into());
                }
            }
            ProblemKind::B => {
                if self.target.eta_star.is_some() {
                    diags.push("target: eta_star is set but problem B uses phi_star".into());
                }
            }
        }
        let target_spec = match problem {
            ProblemKind::A => &self.target.eta_star,
            ProblemKind::B => &self.target.phi_star,
        };
        let target = FieldSpec::build(target_spec, "target", &basis, &mut diags);

        // beta_hat(phi0) must be integrable: finite at every node
        let phi0_nodes = basis.evaluate(&phi0);
        if let Some((j, v)) = phi0_nodes
            .iter()
            .enumerate()
            .find(|(_, &v)| !potential.beta_hat(v).is_finite())
        {
            diags.push(format!(
                "initial-data-hypothesis: beta_hat(phi0) not finite at node {j} (phi0 = {v})"
            ));
        }

        // problem B needs the minimal section of beta at the target
        if problem == ProblemKind::B {
            let target_nodes = basis.evaluate(&target);
            if let Some((j, v)) = target_nodes
                .iter()
                .enumerate()
                .find(|(_, &v)| potential.beta_minimal(v).is_none())
            {
                diags.push(format!(
                    "target-functionB: beta°(phi_star) not finite at node {j} (phi_star = {v})"
                ));
            }
        }

        let mut terms = Vec::new();
        for (i, raw) in self.source.terms.iter().enumerate() {
            let profile = match raw.profile {
                RawProfile::Constant { level } => TimeProfile::Constant { level },
                RawProfile::Sinusoid { amplitude, frequency, phase } => {
                    TimeProfile::Sinusoid { amplitude, frequency, phase }
                }
                RawProfile::Step { t_on, t_off, level } => {
                    if t_on > t_off {
                        diags.push(format!("dataf: source term {i} has t_on > t_off"));
                    }
                    TimeProfile::Step { t_on, t_off, level }
                }
            };
            let shape = FieldSpec::build(&raw.shape, &format!("source term {i} shape"), &basis, &mut diags);
            let term = SourceTerm { profile, shape };
            if !(SourceSpec { terms: vec![term.clone()] }).is_bounded() {
                diags.push(format!("dataf: source term {i} has non-finite parameters"));
            }
            terms.push(term);
        }

        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }

        Ok(SystemConfig {
            kappa: self.params.kappa,
            tau: self.params.tau,
            gamma: self.params.gamma,
            l: self.params.l,
            alpha: self.params.alpha,
            rho: self.control.rho,
            epsilon: self.control.epsilon,
            problem,
            potential,
            basis,
            t_final: self.discretization.t_final,
            dt: self.discretization.dt,
            source: SourceSpec { terms },
            target,
            theta0,
            w0,
            phi0,
            delta,
            allow_nonpositive_alpha: self.control.allow_nonpositive_alpha,
        })
    }
}

/// Set a numeric config key addressed by its file path (`control.rho`,
/// `params.tau`, `discretization.dt`, ...); used by parameter sweeps.
pub fn set_axis(c: &mut SystemConfig, axis: &str, value: f64) -> Result<(), String> {
    if !value.is_finite() {
        return Err(format!("axis {axis}: value must be finite, got {value}"));
    }
    match axis {
        "control.rho" => {
            if value < 0.0 {
                return Err(format!("control.rho must be >= 0, got {value}"));
            }
            c.rho = value;
        }
        "control.epsilon" => {
            if value <= 0.0 {
                return Err(format!("control.epsilon must be > 0, got {value}"));
            }
            c.epsilon = value;
            c.delta = SystemConfig::default_delta(value);
        }
        "params.kappa" => c.kappa = positive(axis, value)?,
        "params.tau" => c.tau = positive(axis, value)?,
        "params.gamma" => c.gamma = positive(axis, value)?,
        "params.l" => c.l = positive(axis, value)?,
        "params.alpha" => c.alpha = positive(axis, value)?,
        "discretization.dt" => c.dt = positive(axis, value)?,
        other => return Err(format!("unknown sweep axis {other:?}")),
    }
    let cap = c.stability_cap();
    if c.dt > cap {
        return Err(format!(
            "stability: dt = {} exceeds the cap {cap:e} after setting {axis} = {value}",
            c.dt
        ));
    }
    Ok(())
}

fn positive(axis: &str, value: f64) -> Result<f64, String> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(format!("{axis} must be > 0, got {value}"))
    }
}
