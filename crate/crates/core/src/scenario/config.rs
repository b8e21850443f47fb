//! Scenario documents: a JSON object naming an action, a parameter point in
//! ordinary units (Hz, K), optional series and sweep, and action options.
//!
//! A `"preset"` key pulls in one of the built-in documents first; every
//! other key in the file is merged over it (objects recursively, everything
//! else replaced).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{hz, spin_occupation_from_polarization, SystemParams};
use crate::power::ConversionUnits;
use crate::protocol::Target;
use crate::quadrature::Objective;

use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Trajectory,
    SteadyState,
    RateVsAmplitude,
    RateVsTemperature,
    Bandwidth,
    Optimize,
    NoiseReport,
    Protocol,
    Resonance,
    Power,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Trajectory => "trajectory",
            Action::SteadyState => "steady-state",
            Action::RateVsAmplitude => "rate-vs-amplitude",
            Action::RateVsTemperature => "rate-vs-temperature",
            Action::Bandwidth => "bandwidth",
            Action::Optimize => "optimize",
            Action::NoiseReport => "noise-report",
            Action::Protocol => "protocol",
            Action::Resonance => "resonance",
            Action::Power => "power",
        }
    }

    /// Sweep variable used when the document gives a range but no variable.
    pub fn default_sweep_variable(&self) -> Option<&'static str> {
        match self {
            Action::RateVsAmplitude | Action::SteadyState => Some("lambda_hz"),
            Action::RateVsTemperature => Some("temperature_k"),
            Action::Bandwidth => Some("omega_c_hz"),
            _ => None,
        }
    }
}

/// A parameter point as written in a document. Missing keys take the
/// reference working point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_s_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hz: Option<f64>,
    /// Defaults to the sum frequency ω_c + ω_s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_drive_hz: Option<f64>,
    /// Total cavity damping, split equally between γ_c and γ_l unless those
    /// are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_c_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_l_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_s: Option<f64>,
    /// Alternative to `n_s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization: Option<f64>,
}

pub const PARAM_KEYS: [&str; 12] = [
    "omega_c_hz",
    "omega_s_hz",
    "g_hz",
    "lambda_hz",
    "omega_drive_hz",
    "gamma_hz",
    "gamma_c_hz",
    "gamma_l_hz",
    "kappa_hz",
    "temperature_k",
    "n_s",
    "polarization",
];

impl ParamsConfig {
    /// `other`'s keys win.
    pub fn overlay(&self, other: &ParamsConfig) -> ParamsConfig {
        macro_rules! pick {
            ($($f:ident),*) => { ParamsConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            omega_c_hz,
            omega_s_hz,
            g_hz,
            lambda_hz,
            omega_drive_hz,
            gamma_hz,
            gamma_c_hz,
            gamma_l_hz,
            kappa_hz,
            temperature_k,
            n_s,
            polarization
        )
    }

    /// Builds the parameter point and lists the keys that fell back to
    /// defaults.
    pub fn resolve(&self) -> Result<(SystemParams, Vec<String>)> {
        let r = SystemParams::reference();
        let mut defaulted = Vec::new();
        let mut get = |key: &str, v: Option<f64>, default: f64, scale: f64| match v {
            Some(x) => x * scale,
            None => {
                defaulted.push(key.to_string());
                default
            }
        };
        let two_pi = hz(1.0);
        let omega_c = get("omega_c_hz", self.omega_c_hz, r.omega_c, two_pi);
        let omega_s = get("omega_s_hz", self.omega_s_hz, r.omega_s, two_pi);
        let g = get("g_hz", self.g_hz, r.g, two_pi);
        let lambda_drive = get("lambda_hz", self.lambda_hz, r.lambda_drive, two_pi);
        let omega_drive = get("omega_drive_hz", self.omega_drive_hz, omega_c + omega_s, two_pi);
        let half = self.gamma_hz.map(|g| g / 2.0);
        let gamma_c = get("gamma_c_hz", self.gamma_c_hz.or(half), r.gamma_c, two_pi);
        let gamma_l = get("gamma_l_hz", self.gamma_l_hz.or(half), r.gamma_l, two_pi);
        let kappa = get("kappa_hz", self.kappa_hz, r.kappa, two_pi);
        let temperature = get("temperature_k", self.temperature_k, r.temperature, 1.0);
        let n_s = match (self.n_s, self.polarization) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    path: "params".into(),
                    message: "give either n_s or polarization, not both".into(),
                })
            }
            (Some(n), None) => n,
            (None, Some(p)) => spin_occupation_from_polarization(p)?,
            (None, None) => {
                defaulted.push("n_s".into());
                r.n_s
            }
        };
        let p = SystemParams {
            omega_c,
            omega_s,
            g,
            lambda_drive,
            omega_drive,
            gamma_c,
            gamma_l,
            kappa,
            temperature,
            n_s,
        };
        p.validate()?;
        Ok((p, defaulted))
    }
}

/// Writes `value` (document units) into the resolved point.
pub fn set_param(p: &mut SystemParams, key: &str, value: f64) -> Result<()> {
    let w = hz(value);
    match key {
        "omega_c_hz" => p.omega_c = w,
        "omega_s_hz" => p.omega_s = w,
        "g_hz" => p.g = w,
        "lambda_hz" => p.lambda_drive = w,
        "omega_drive_hz" => p.omega_drive = w,
        "gamma_hz" => {
            p.gamma_c = w / 2.0;
            p.gamma_l = w / 2.0;
        }
        "gamma_c_hz" => p.gamma_c = w,
        "gamma_l_hz" => p.gamma_l = w,
        "kappa_hz" => p.kappa = w,
        "temperature_k" => p.temperature = value,
        "n_s" => p.n_s = value,
        "polarization" => p.n_s = spin_occupation_from_polarization(value)?,
        other => {
            return Err(Error::Config {
                path: "sweep.variable".into(),
                message: format!("unknown parameter `{other}`"),
            })
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub label: String,
    #[serde(default)]
    pub params: ParamsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    /// Explicit points; otherwise `start`, `stop`, `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Geometric instead of linear spacing.
    #[serde(default)]
    pub log: bool,
}

impl SweepConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        let err = |m: &str| Error::Config {
            path: "sweep".into(),
            message: m.into(),
        };
        let xs = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n < 2 {
                    return Err(err("a sweep needs at least 2 points"));
                }
                if self.log && !(a > 0.0 && b > 0.0) {
                    return Err(err("log spacing needs positive start and stop"));
                }
                (0..n)
                    .map(|i| {
                        let f = i as f64 / (n - 1) as f64;
                        if self.log {
                            (a.ln() + f * (b.ln() - a.ln())).exp()
                        } else {
                            a + f * (b - a)
                        }
                    })
                    .collect()
            }
            _ => return Err(err("give either `values` or all of `start`, `stop`, `points`")),
        };
        if xs.len() < 2 {
            return Err(err("a sweep needs at least 2 points"));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(err("sweep values must be finite"));
        }
        Ok(xs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub omega_drive_hz: (f64, f64),
    pub omega_s_hz: (f64, f64),
    pub lambda_hz: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub conversion_factor: f64,
    pub units: ConversionUnits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gyromagnetic_hz_per_mt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub stop_hz: f64,
    pub points: usize,
}

/// Action options. Each action reads the keys it needs; unset keys take the
/// defaults listed in [`Options::resolved`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Overrides `duration_s` with a whole number of drive periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_start: Option<bool>,
    /// Finite horizon standing in for the steady state when there is no
    /// damping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undamped_horizon_s: Option<f64>,
    /// Evolution time before the protocol when no steady state exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#box: Option<BoxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerConfig>,
}

pub const DEFAULT_DURATION_S: f64 = 1.7e-6;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_UNDAMPED_HORIZON_S: f64 = 3.0e-6;
pub const DEFAULT_PROTOCOL_START_S: f64 = 3.0e-6;
pub const DEFAULT_N_MAX: u32 = 6;
pub const DEFAULT_REFERENCE_TIME_S: f64 = 1.0e-7;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub action: Action,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Free-text assumptions copied into the run manifest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::Config {
        path: if path.is_empty() || path == "." { "<root>".into() } else { path },
        message: e.into_inner().to_string(),
    }
}

impl Scenario {
    /// Parses a document, expanding a `"preset"` key.
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: Value = serde_path_to_error::deserialize(&mut de).map_err(parse_error)?;
        Scenario::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Scenario> {
        let preset = match doc.get("preset") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(Error::Config {
                    path: "preset".into(),
                    message: "expected a preset name".into(),
                })
            }
        };
        let merged = match &preset {
            Some(name) => {
                let mut base = presets::preset_value(name)?;
                merge(&mut base, doc);
                base
            }
            None => doc,
        };
        let sc: Scenario = serde_path_to_error::deserialize(merged).map_err(parse_error)?;
        sc.check()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::from_json_str(&text)
    }

    pub fn name(&self) -> String {
        self.name
            .clone()
            .or_else(|| self.preset.clone())
            .unwrap_or_else(|| self.action.as_str().to_string())
    }

    pub fn sweep_variable(&self) -> Option<String> {
        let s = self.sweep.as_ref()?;
        s.variable
            .clone()
            .or_else(|| self.action.default_sweep_variable().map(String::from))
    }

    fn check(&self) -> Result<()> {
        let cfg = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if let Some(sweep) = &self.sweep {
            let var = self
                .sweep_variable()
                .ok_or_else(|| cfg("sweep.variable", format!("required for action `{}`", self.action.as_str())))?;
            if !PARAM_KEYS.contains(&var.as_str()) {
                return Err(cfg("sweep.variable", format!("`{var}` is not a parameter key")));
            }
            sweep.points()?;
        }
        if matches!(self.action, Action::Bandwidth) && self.sweep.is_none() {
            return Err(cfg("sweep", "bandwidth needs a cavity-frequency sweep".into()));
        }
        if matches!(self.action, Action::Optimize | Action::Power | Action::Protocol | Action::NoiseReport | Action::Resonance)
            && self.sweep.is_some()
        {
            return Err(cfg("sweep", format!("not supported for action `{}`", self.action.as_str())));
        }
        if matches!(self.action, Action::Power) && self.options.power.is_none() {
            return Err(cfg("options.power", "required for action `power`".into()));
        }
        if let Some(p) = &self.options.power {
            if p.watts.is_some() == p.lambda_hz.is_some() {
                return Err(cfg("options.power", "give exactly one of `watts` and `lambda_hz`".into()));
            }
        }
        if let Some(t) = self.rel_tol {
            if !(1e-14..=1e-3).contains(&t) {
                return Err(cfg("rel_tol", format!("{t} is outside [1e-14, 1e-3]")));
            }
        }
        if self.workers == Some(0) {
            return Err(cfg("workers", "must be at least 1".into()));
        }
        let mut labels: Vec<&str> = self.series.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(cfg("series", "labels must be unique".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::to_hz;

    #[test]
    fn every_preset_parses() {
        for name in presets::preset_names() {
            let sc = Scenario::from_json_str(&format!(r#"{{"preset": "{name}"}}"#))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.name(), name);
        }
    }

    #[test]
    fn document_keys_override_the_preset() {
        let sc = Scenario::from_json_str(
            r#"{"preset": "fig2", "params": {"lambda_hz": 5e8}, "options": {"periods": 10}}"#,
        )
        .unwrap();
        assert_eq!(sc.params.lambda_hz, Some(5e8));
        assert_eq!(sc.params.omega_c_hz, Some(2.5e9));
        assert_eq!(sc.options.periods, Some(10));
        assert_eq!(sc.options.samples, Some(200));
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let err = Scenario::from_json_str(r#"{"action": "trajectory", "params": {"omega_x_hz": 1}}"#)
            .unwrap_err();
        match err {
            Error::Config { path, .. } => assert!(path.starts_with("params"), "{path}"),
            e => panic!("unexpected {e}"),
        }
        let err = Scenario::from_json_str(r#"{"action": "fly"}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "action"), "{err}");
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        let err = Scenario::from_json_str(r#"{"preset": "fig9"}"#).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn sweep_needs_two_points() {
        let one = r#"{"action": "rate-vs-amplitude", "sweep": {"values": [1e9]}}"#;
        assert!(Scenario::from_json_str(one).is_err());
        let range = r#"{"action": "rate-vs-amplitude", "sweep": {"start": 0, "stop": 1, "points": 1}}"#;
        assert!(Scenario::from_json_str(range).is_err());
        let ok = r#"{"action": "rate-vs-amplitude", "sweep": {"values": [1e8, 1e9]}}"#;
        let sc = Scenario::from_json_str(ok).unwrap();
        assert_eq!(sc.sweep_variable().as_deref(), Some("lambda_hz"));
    }

    #[test]
    fn sweep_variable_must_be_a_parameter() {
        let bad = r#"{"action": "rate-vs-amplitude", "sweep": {"variable": "speed", "values": [1, 2]}}"#;
        assert!(Scenario::from_json_str(bad).is_err());
    }

    #[test]
    fn log_sweep_endpoints_are_exact() {
        let s = SweepConfig {
            variable: None,
            values: None,
            start: Some(1e-3),
            stop: Some(10.0),
            points: Some(5),
            log: true,
        };
        let xs = s.points().unwrap();
        assert!((xs[0] - 1e-3).abs() < 1e-18);
        assert!((xs[4] - 10.0).abs() < 1e-12);
        assert!((xs[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn resolve_fills_defaults_and_converts_units() {
        let cfg = ParamsConfig {
            omega_c_hz: Some(2.4e9),
            omega_s_hz: Some(3.6e9),
            gamma_hz: Some(3.2e7),
            polarization: Some(0.8),
            ..Default::default()
        };
        let (p, defaulted) = cfg.resolve().unwrap();
        assert!((to_hz(p.omega_drive) - 6.0e9).abs() < 1e-3);
        assert!((to_hz(p.gamma_c) - 1.6e7).abs() < 1e-6);
        assert!((p.n_s - 0.125).abs() < 1e-15);
        assert!(defaulted.contains(&"omega_drive_hz".to_string()));
        assert!(defaulted.contains(&"g_hz".to_string()));
        assert!(!defaulted.contains(&"n_s".to_string()));
    }

    #[test]
    fn n_s_and_polarization_conflict() {
        let cfg = ParamsConfig {
            n_s: Some(0.1),
            polarization: Some(0.8),
            ..Default::default()
        };
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn set_param_round_trips_through_document_units() {
        let mut p = SystemParams::reference();
        set_param(&mut p, "lambda_hz", 2.5e8).unwrap();
        assert!((to_hz(p.lambda_drive) - 2.5e8).abs() < 1e-6);
        set_param(&mut p, "temperature_k", 4.0).unwrap();
        assert_eq!(p.temperature, 4.0);
        assert!(set_param(&mut p, "nope", 1.0).is_err());
    }

    #[test]
    fn power_needs_exactly_one_target() {
        let both = r#"{"action": "power", "options": {"power": {"conversion_factor": 1, "units": "mt", "watts": 1, "lambda_hz": 1}}}"#;
        assert!(Scenario::from_json_str(both).is_err());
        let none = r#"{"action": "power"}"#;
        assert!(Scenario::from_json_str(none).is_err());
    }
}
