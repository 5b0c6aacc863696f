//! Run configuration documents (TOML).
//!
//! Equation, grid and initial-data keys live at the top level; step
//! controls, diagnostics, sweep axes and convergence settings live in the
//! `[controls]`, `[diagnostics]`, `[sweep]` and `[converge]` tables. Unknown
//! keys are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::DiagnosticsConfig;
use crate::experiments::InitialProfile;
use crate::models::{AnalyticForcing, EquationSpec, ExactSolution, FSpec, FluxForm, GSpec, Model};
use crate::stepper::StepControls;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Zero,
    SignedPower,
    AbsPower,
    QuadraticK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    Sine,
    Rough,
    /// Nodal values read from `initial_file`, one number per line.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { p_values: vec![1.0, 2.0], q_values: vec![1.0, 2.0], amplitudes: vec![20.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    pub resolutions: Vec<usize>,
    /// Manufactured solution `A e^{-rt} sin(m pi (x+1)/2)`, times `(1 - x)`
    /// for KdV.
    pub amplitude: f64,
    pub rate: f64,
    pub mode: u32,
    /// Fixed step sizes of the temporal study, decreasing; empty skips it.
    pub dts: Vec<f64>,
    pub dt_ref: f64,
    pub temporal_n_cells: usize,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self {
            resolutions: vec![64, 128, 256],
            amplitude: 1.0,
            rate: 1.0,
            mode: 1,
            dts: vec![0.02, 0.01, 0.005],
            dt_ref: 3.125e-4,
            temporal_n_cells: 64,
        }
    }
}

impl ConvergeSection {
    pub fn exact(&self, model: Model) -> ExactSolution {
        let (amplitude, rate, mode) = (self.amplitude, self.rate, self.mode);
        if model == Model::KdV {
            ExactSolution::DecayingSineRamp { amplitude, rate, mode }
        } else {
            ExactSolution::DecayingSine { amplitude, rate, mode }
        }
    }
}

/// Everything needed to reproduce a run, sweep or convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "signed")]
    pub flux: FluxForm,
    /// KS only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub f: SourceKind,
    /// Growth exponent of the power sources; a sweep takes it from its axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Coefficient `c` of the power sources, `k` of the quadratic one.
    #[serde(default = "one")]
    pub c: f64,
    /// Amplitude of a steady force `g = A sin(pi (x+1)/2)`.
    #[serde(default)]
    pub forcing_amplitude: f64,
    #[serde(default = "default_cells")]
    pub n_cells: usize,
    #[serde(default)]
    pub profile: ProfileKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub controls: StepControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
}

fn one() -> f64 {
    1.0
}

fn signed() -> FluxForm {
    FluxForm::Signed
}

fn default_cells() -> usize {
    256
}

impl RunConfig {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            p: 1.0,
            a: 1.0,
            flux: FluxForm::Signed,
            lambda: None,
            f: SourceKind::Zero,
            q: None,
            c: 1.0,
            forcing_amplitude: 0.0,
            n_cells: default_cells(),
            profile: ProfileKind::Sine,
            amplitude: 1.0,
            seed: 0,
            initial_file: None,
            out: None,
            controls: StepControls::default(),
            diagnostics: None,
            sweep: None,
            converge: None,
        }
    }

    pub fn source(&self) -> FSpec {
        let q = self.q.unwrap_or(1.0);
        match self.f {
            SourceKind::Zero => FSpec::Zero,
            SourceKind::SignedPower => FSpec::SignedPower { c: self.c, q },
            SourceKind::AbsPower => FSpec::AbsPower { c: self.c, q },
            SourceKind::QuadraticK => FSpec::QuadraticK { k: self.c },
        }
    }

    pub fn spec(&self) -> EquationSpec {
        EquationSpec {
            model: self.model,
            p: self.p,
            a: self.a,
            flux_form: self.flux,
            lambda: self.lambda.unwrap_or(0.0),
            f: self.source(),
            g: if self.forcing_amplitude == 0.0 {
                GSpec::Zero
            } else {
                GSpec::Analytic(AnalyticForcing::Sine { amplitude: self.forcing_amplitude })
            },
        }
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        self.diagnostics.clone().unwrap_or_else(|| DiagnosticsConfig::for_spec(&self.spec()))
    }

    /// Initial data; `File` profiles are read here.
    pub fn profile(&self) -> Result<InitialProfile, ConfigError> {
        match self.profile {
            ProfileKind::Sine => Ok(InitialProfile::Sine { amplitude: self.amplitude }),
            ProfileKind::Rough => Ok(InitialProfile::Rough { amplitude: self.amplitude, seed: self.seed }),
            ProfileKind::File => {
                let path = self
                    .initial_file
                    .as_deref()
                    .ok_or_else(|| invalid("initial_file", "required for profile = \"file\""))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Io { path: path.to_string(), message: e.to_string() })?;
                let values = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| invalid("initial_file", format!("{s:?}: {e}"))))
                    .collect::<Result<Vec<f64>, _>>()?;
                if values.len() != self.n_cells + 1 {
                    return Err(invalid(
                        "initial_file",
                        format!("expected {} nodal values, found {}", self.n_cells + 1, values.len()),
                    ));
                }
                Ok(InitialProfile::Nodal { values })
            }
        }
    }

    /// Advisory notes for parameters outside the regimes covered by the
    /// global existence results.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        match self.model {
            Model::KuramotoSivashinsky if self.p > 6.0 => w.push(format!(
                "p = {} lies outside the regime p <= 6 of the KS global well-posedness result; running as exploratory",
                self.p
            )),
            Model::KdV if self.p > 2.0 => w.push(format!(
                "p = {} lies outside the regime 0 < p <= 2 of the KdV smoothing result; running as exploratory",
                self.p
            )),
            _ => {}
        }
        w
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid("p", format!("must be positive, got {}", self.p)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(invalid("a", format!("must be >= 0, got {}", self.a)));
        }
        if self.lambda.is_some() && self.model != Model::KuramotoSivashinsky {
            return Err(invalid(
                "lambda",
                format!("only allowed for model = \"ks\", got model = \"{}\"", self.model.name()),
            ));
        }
        if self.lambda.is_some_and(|l| !l.is_finite()) {
            return Err(invalid("lambda", "must be finite"));
        }
        match (self.f, self.q) {
            (SourceKind::SignedPower | SourceKind::AbsPower, None) if self.sweep.is_none() => {
                return Err(invalid("q", "required for power sources outside a sweep"));
            }
            (SourceKind::SignedPower | SourceKind::AbsPower, Some(q)) if !(q > 0.0 && q.is_finite()) => {
                return Err(invalid("q", format!("must be positive, got {q}")));
            }
            _ => {}
        }
        if !self.c.is_finite() || !self.forcing_amplitude.is_finite() || !self.amplitude.is_finite() {
            return Err(invalid("c", "coefficients and amplitudes must be finite"));
        }
        if self.n_cells < crate::grid::MIN_CELLS {
            return Err(invalid("n_cells", format!("need at least {}, got {}", crate::grid::MIN_CELLS, self.n_cells)));
        }
        if self.profile == ProfileKind::File && self.initial_file.is_none() {
            return Err(invalid("initial_file", "required for profile = \"file\""));
        }
        self.controls.validate().map_err(|e| invalid("controls", e.to_string()))?;
        if let Some(d) = &self.diagnostics {
            d.validate().map_err(|e| invalid("diagnostics", e.to_string()))?;
        }
        if let Some(s) = &self.sweep {
            if s.p_values.is_empty() || s.q_values.is_empty() || s.amplitudes.is_empty() {
                return Err(invalid("sweep", "axes must be nonempty"));
            }
        }
        if let Some(c) = &self.converge {
            if c.resolutions.len() < 2 || c.resolutions.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("converge.resolutions", "need at least two strictly increasing values"));
            }
            if c.resolutions[0] < crate::grid::MIN_CELLS {
                return Err(invalid("converge.resolutions", "resolutions below 8 cells"));
            }
            if !c.dts.is_empty() && (c.dts.len() < 2 || c.dts.windows(2).any(|w| w[1] >= w[0]) || !(c.dt_ref > 0.0)) {
                return Err(invalid("converge.dts", "need at least two strictly decreasing steps and dt_ref > 0"));
            }
        }
        self.spec().validate().map_err(|e| invalid("model", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are representable in TOML")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let c = parse_config("model = \"burgers\"\np = 1\nq = 1\nf = \"signed_power\"\namplitude = 5\n").unwrap();
        assert_eq!(c.n_cells, 256);
        assert_eq!(c.controls.tol, 1e-6);
        assert_eq!(c.controls.dt_min, 1e-12);
        assert_eq!(c.controls.blowup_threshold, 1e8);
        assert_eq!(c.controls.t_max, 20.0);
        assert_eq!(c.controls.safety, 0.9);
        assert_eq!(c.spec().f, FSpec::SignedPower { c: 1.0, q: 1.0 });
        assert_eq!(c.profile().unwrap(), InitialProfile::Sine { amplitude: 5.0 });
        assert!(c.warnings().is_empty());
    }

    #[test]
    fn ks_beyond_p6_warns() {
        let c = parse_config("model = \"ks\"\np = 7\nq = 1\nf = \"signed_power\"\n").unwrap();
        assert_eq!(c.warnings().len(), 1);
        assert!(c.warnings()[0].contains("p <= 6"));
    }

    #[test]
    fn lambda_is_ks_only() {
        let e = parse_config("model = \"kdv\"\nlambda = 2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "lambda"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("model = \"burgers\"\nmystery = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("model = \"burgers\"\n[controls]\ntoll = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("model = \"heat\"\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_errors_name_the_key() {
        let e = parse_config("model = \"burgers\"\nf = \"abs_power\"\n").unwrap_err();
        assert!(e.to_string().contains("`q`"), "{e}");
        let e = parse_config("model = \"burgers\"\n[controls]\ndt_min = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("controls"), "{e}");
    }

    #[test]
    fn serialization_round_trips() {
        let mut c = RunConfig::new(Model::KuramotoSivashinsky);
        c.lambda = Some(4.0);
        c.f = SourceKind::AbsPower;
        c.q = Some(2.5);
        c.sweep = Some(SweepSection::default());
        c.converge = Some(ConvergeSection::default());
        c.diagnostics = Some(DiagnosticsConfig::default());
        c.controls.tol = 1.0 / 3.0 * 1e-6;
        let text = c.to_toml();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
