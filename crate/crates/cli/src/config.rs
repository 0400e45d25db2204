//! Run configuration: TOML ingestion, validation, and the resolved form that
//! run metadata echoes.
//!
//! Parsing happens in two stages. The document is first read into a raw
//! layer where every setting is optional and carries its source span. The
//! validator then walks the raw layer and collects every problem it finds, so
//! a bad file is reported in full rather than one error at a time.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nsf_core::dynamics::{Formulation, Variables};
use nsf_core::integrators::SchemeKind;
use nsf_core::noise::{NoiseFamilySpec, NoiseMode};
use nsf_core::spectral::Wavevector;
use nsf_core::NsfError;
use serde::de::IntoDeserializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

pub const DEFAULT_FINE_FACTOR: usize = 2;
pub const DEFAULT_SAVE_EVERY: usize = 10;
pub const DEFAULT_OUTPUT: &str = "nsf-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Spectral cutoff: modes with `|k_i| ≤ m`.
    pub m: usize,
    /// Collocation points per direction.
    pub n: usize,
    pub fine_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub delta: f64,
    pub epsilon: f64,
    /// Galerkin cutoff of the drifts; defaults to `m`.
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub f: NoiseFamilySpec,
    pub g: NoiseFamilySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub formulation: Formulation,
    pub dt: f64,
    pub t_final: f64,
    pub save_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    /// `u = A(sin x cos y cos z, −cos x sin y cos z, 0)` in units of 2π, and
    /// `ψ = c + a·sin(2πx₁)`.
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetInitial {
    pub preset: InitialPreset,
    pub velocity_amplitude: f64,
    pub psi_mean: f64,
    pub psi_amplitude: f64,
}

/// `cos·cos(2πk·x) + sin·sin(2πk·x)` added to velocity component `component`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityMode {
    pub component: usize,
    pub k: Wavevector,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMode {
    pub k: Wavevector,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeInitial {
    /// Whether `scalar` lists ψ or ϑ.
    pub variables: Variables,
    pub velocity: Vec<VelocityMode>,
    pub scalar: Vec<ScalarMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Preset(PresetInitial),
    Modes(ModeInitial),
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub n_paths: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub scheme: SchemeConfig,
    pub initial: InitialCondition,
}

impl RunConfig {
    /// Number of steps covering `t_final`.
    pub fn steps(&self) -> usize {
        (self.scheme.t_final / self.scheme.dt).round() as usize
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    /// Re-run the validator on a configuration built or edited in code.
    pub fn validated(self) -> Result<Self, ConfigError> {
        let text = toml::to_string(&self).map_err(|e| ConfigError::Syntax {
            origin: "<in-memory>".into(),
            message: e.to_string(),
        })?;
        parse_config_str(&text, "<in-memory>")
    }
}

/// One validation problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },

    #[error("{}", render_issues(.origin, .issues))]
    Invalid { origin: String, issues: Vec<ConfigIssue> },
}

impl ConfigError {
    /// All validation problems; empty for read and syntax errors.
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid { issues, .. } => issues,
            _ => &[],
        }
    }
}

fn render_issues(origin: &str, issues: &[ConfigIssue]) -> String {
    let mut s = format!("{origin}: {} invalid setting(s)", issues.len());
    for i in issues {
        s.push_str("\n  ");
        s.push_str(&i.to_string());
    }
    s
}

/// Read a TOML configuration, or the `config` entry of a run's metadata
/// document when the file ends in `.json`.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let origin = path.display().to_string();
    if path.extension().is_some_and(|e| e == "json") {
        return parse_metadata_str(&text, &origin);
    }
    parse_config_str(&text, &origin)
}

/// Recover the configuration echoed in a metadata document.
pub fn parse_metadata_str(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let syntax = |message: String| ConfigError::Syntax {
        origin: origin.to_string(),
        message,
    };
    let mut doc: serde_json::Value = serde_json::from_str(text).map_err(|e| syntax(e.to_string()))?;
    let value = match doc.get_mut("config") {
        Some(v) => v.take(),
        None => doc,
    };
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| syntax(e.to_string()))?;
    cfg.validated().map_err(|e| match e {
        ConfigError::Invalid { issues, .. } => ConfigError::Invalid {
            origin: origin.to_string(),
            issues,
        },
        other => other,
    })
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let mut v = Validator {
        text,
        issues: Vec::new(),
    };
    let cfg = v.resolve(raw);
    match cfg {
        Some(cfg) if v.issues.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid {
            origin: origin.to_string(),
            issues: v.issues,
        }),
    }
}

type S<T> = Option<Spanned<T>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: S<i64>,
    n_paths: S<i64>,
    output: S<String>,
    grid: S<RawGrid>,
    model: S<RawModel>,
    noise: S<RawNoise>,
    scheme: S<RawScheme>,
    initial: S<RawInitial>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    m: S<i64>,
    n: S<i64>,
    fine_factor: S<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    delta: S<f64>,
    epsilon: S<f64>,
    cutoff: S<i64>,
    truncation_radius: S<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    f: S<RawFamily>,
    g: S<RawFamily>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    modes: S<Vec<Spanned<RawMode>>>,
    constant: S<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    k: S<[i64; 3]>,
    amplitude: S<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: S<String>,
    formulation: S<String>,
    dt: S<f64>,
    t_final: S<f64>,
    save_every: S<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    preset: S<String>,
    velocity_amplitude: S<f64>,
    psi_mean: S<f64>,
    psi_amplitude: S<f64>,
    variables: S<String>,
    velocity: S<Vec<Spanned<RawVelocityMode>>>,
    scalar: S<Vec<Spanned<RawScalarMode>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVelocityMode {
    component: S<i64>,
    k: S<[i64; 3]>,
    cos: S<f64>,
    sin: S<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScalarMode {
    k: S<[i64; 3]>,
    cos: S<f64>,
    sin: S<f64>,
}

type Span = Option<Range<usize>>;

struct Validator<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

fn span_of<T>(s: &Spanned<T>) -> Span {
    Some(s.span())
}

impl Validator<'_> {
    fn line(&self, span: &Span) -> Option<usize> {
        span.as_ref().map(|r| {
            let end = r.start.min(self.text.len());
            self.text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
        })
    }

    fn issue(&mut self, span: &Span, field: &str, message: impl Into<String>) {
        let line = self.line(span);
        self.issues.push(ConfigIssue {
            line,
            field: field.to_string(),
            message: message.into(),
        });
    }

    /// Value of a setting, or an issue located at its enclosing table.
    fn required<T: Clone>(&mut self, v: &S<T>, parent: &Span, field: &str) -> Option<(T, Span)> {
        match v {
            Some(s) => Some((s.get_ref().clone(), span_of(s))),
            None => {
                self.issue(parent, field, "missing required setting");
                None
            }
        }
    }

    fn integer(&mut self, v: &S<i64>, parent: &Span, field: &str, min: i64, default: Option<i64>) -> Option<usize> {
        let (x, span) = match (v, default) {
            (None, Some(d)) => (d, None),
            _ => self.required(v, parent, field)?,
        };
        if x < min {
            self.issue(&span, field, format!("{x} must be at least {min}"));
            return None;
        }
        Some(x as usize)
    }

    fn real(&mut self, v: &S<f64>, parent: &Span, field: &str, check: impl Fn(f64) -> Option<&'static str>) -> Option<f64> {
        let (x, span) = self.required(v, parent, field)?;
        self.checked(x, &span, field, check)
    }

    fn checked(&mut self, x: f64, span: &Span, field: &str, check: impl Fn(f64) -> Option<&'static str>) -> Option<f64> {
        if !x.is_finite() {
            self.issue(span, field, format!("{x} is not finite"));
            return None;
        }
        if let Some(msg) = check(x) {
            self.issue(span, field, format!("{x} {msg}"));
            return None;
        }
        Some(x)
    }

    fn variant<T: for<'de> Deserialize<'de>>(&mut self, v: &S<String>, parent: &Span, field: &str) -> Option<T> {
        let (s, span) = self.required(v, parent, field)?;
        let r: Result<T, serde::de::value::Error> = T::deserialize(s.as_str().into_deserializer());
        match r {
            Ok(t) => Some(t),
            Err(e) => {
                self.issue(&span, field, e.to_string());
                None
            }
        }
    }

    /// Wavevector inside `cutoff`, reported as an invalid mode naming `field`.
    fn wavevector(&mut self, v: &S<[i64; 3]>, parent: &Span, field: &str, cutoff: Option<usize>) -> Option<Wavevector> {
        let (k, span) = self.required(v, parent, field)?;
        let cutoff = cutoff?;
        if k.iter().any(|c| c.unsigned_abs() as usize > cutoff) {
            let e = NsfError::InvalidMode {
                k,
                cutoff,
                context: Some(field.to_string()),
            };
            self.issue(&span, field, e.to_string());
            return None;
        }
        Some(k)
    }

    fn resolve(&mut self, raw: RawConfig) -> Option<RunConfig> {
        let root: Span = None;
        let seed = self.integer(&raw.seed, &root, "seed", 0, None);
        let n_paths = self.integer(&raw.n_paths, &root, "n_paths", 1, None).and_then(|n| {
            u32::try_from(n).ok().or_else(|| {
                self.issue(&raw.n_paths.as_ref().and_then(span_of), "n_paths", "too large");
                None
            })
        });
        let output = raw.output.map(|s| PathBuf::from(s.into_inner()));
        let grid = self.grid(&raw.grid);
        let m = grid.as_ref().map(|g| g.m);
        let model = self.model(&raw.model, m);
        let noise = self.noise(&raw.noise, m);
        let scheme = self.scheme(&raw.scheme);
        let cutoff = model.as_ref().map(|c| c.cutoff);
        let initial = self.initial(&raw.initial, cutoff);
        Some(RunConfig {
            seed: seed? as u64,
            n_paths: n_paths?,
            output,
            grid: grid?,
            model: model?,
            noise: noise?,
            scheme: scheme?,
            initial: initial?,
        })
    }

    fn table<'r, T>(&mut self, t: &'r S<T>, name: &str) -> Option<(&'r T, Span)> {
        match t {
            Some(s) => Some((s.get_ref(), span_of(s))),
            None => {
                self.issue(&None, name, "missing table");
                None
            }
        }
    }

    fn grid(&mut self, raw: &S<RawGrid>) -> Option<GridConfig> {
        let (g, at) = self.table(raw, "grid")?;
        let m = self.integer(&g.m, &at, "grid.m", 1, None);
        let n = self.integer(&g.n, &at, "grid.n", 1, None);
        let fine_factor = self.integer(&g.fine_factor, &at, "grid.fine_factor", 1, Some(DEFAULT_FINE_FACTOR as i64));
        let (m, n) = (m?, n?);
        if let Err(e) = nsf_core::spectral::TorusGrid::new(m, n) {
            self.issue(&g.n.as_ref().and_then(span_of), "grid.n", e.to_string());
            return None;
        }
        Some(GridConfig {
            m,
            n,
            fine_factor: fine_factor?,
        })
    }

    fn model(&mut self, raw: &S<RawModel>, m: Option<usize>) -> Option<ModelConfig> {
        let (c, at) = self.table(raw, "model")?;
        let delta = self.real(&c.delta, &at, "model.delta", |x| (!(x > 0.0 && x < 1.0)).then_some("must lie in (0, 1)"));
        let epsilon = self.real(&c.epsilon, &at, "model.epsilon", |x| {
            (!(0.0..1.0).contains(&x)).then_some("must lie in [0, 1)")
        });
        let cutoff = match (&c.cutoff, m) {
            (None, m) => m,
            (Some(s), m) => {
                let k = self.integer(&c.cutoff, &at, "model.cutoff", 1, None);
                match (k, m) {
                    (Some(k), Some(m)) if k > m => {
                        self.issue(&span_of(s), "model.cutoff", format!("{k} exceeds the grid cutoff {m}"));
                        None
                    }
                    (k, _) => k,
                }
            }
        };
        let truncation_radius = match &c.truncation_radius {
            None => Some(None),
            Some(s) => self
                .checked(*s.get_ref(), &span_of(s), "model.truncation_radius", |x| (x <= 0.0).then_some("must be positive"))
                .map(Some),
        };
        Some(ModelConfig {
            delta: delta?,
            epsilon: epsilon?,
            cutoff: cutoff?,
            truncation_radius: truncation_radius?,
        })
    }

    fn noise(&mut self, raw: &S<RawNoise>, m: Option<usize>) -> Option<NoiseConfig> {
        let (n, at) = self.table(raw, "noise")?;
        let f = self.family(&n.f, &at, "noise.f", m);
        let g = self.family(&n.g, &at, "noise.g", m);
        Some(NoiseConfig { f: f?, g: g? })
    }

    fn family(&mut self, raw: &S<RawFamily>, parent: &Span, name: &str, m: Option<usize>) -> Option<NoiseFamilySpec> {
        let Some(s) = raw else {
            self.issue(parent, name, "missing table (use `modes = []` for a silent family)");
            return None;
        };
        let fam = s.get_ref();
        let mut ok = true;
        let mut modes = Vec::new();
        for (i, entry) in fam.modes.iter().flat_map(|v| v.get_ref().iter()).enumerate() {
            let here = span_of(entry);
            let e = entry.get_ref();
            let k = self.wavevector(&e.k, &here, &format!("{name}.modes[{i}].k"), m);
            if k == Some([0, 0, 0]) {
                self.issue(
                    &e.k.as_ref().and_then(span_of),
                    &format!("{name}.modes[{i}].k"),
                    "zero wavevector; use `constant` instead",
                );
                ok = false;
            }
            let a = self.real(&e.amplitude, &here, &format!("{name}.modes[{i}].amplitude"), |x| {
                (x <= 0.0).then_some("must be positive")
            });
            match (k, a) {
                (Some(k), Some(amplitude)) => modes.push(NoiseMode { k, amplitude }),
                _ => ok = false,
            }
        }
        let constant = match &fam.constant {
            None => Some(None),
            Some(c) => self.checked(*c.get_ref(), &span_of(c), &format!("{name}.constant"), |_| None).map(Some),
        };
        (ok && constant.is_some()).then(|| NoiseFamilySpec {
            modes,
            constant: constant.flatten(),
        })
    }

    fn scheme(&mut self, raw: &S<RawScheme>) -> Option<SchemeConfig> {
        let (s, at) = self.table(raw, "scheme")?;
        let kind: Option<SchemeKind> = self.variant(&s.kind, &at, "scheme.kind");
        let formulation: Option<Formulation> = self.variant(&s.formulation, &at, "scheme.formulation");
        let dt = self.real(&s.dt, &at, "scheme.dt", |x| (x <= 0.0).then_some("must be positive"));
        let t_final = self.real(&s.t_final, &at, "scheme.t_final", |x| (x <= 0.0).then_some("must be positive"));
        let save_every = self.integer(&s.save_every, &at, "scheme.save_every", 1, Some(DEFAULT_SAVE_EVERY as i64));
        if let (Some(kind), Some(formulation)) = (kind, formulation) {
            let compatible = match kind {
                SchemeKind::HeunStratonovich => formulation == Formulation::Stratonovich,
                _ => formulation.is_ito(),
            };
            if !compatible {
                self.issue(
                    &s.formulation.as_ref().and_then(span_of),
                    "scheme.formulation",
                    format!("{formulation:?} cannot be advanced by {kind:?}"),
                );
                return None;
            }
        }
        if let (Some(dt), Some(t)) = (dt, t_final) {
            let steps = (t / dt).round();
            if steps < 1.0 || (steps * dt - t).abs() > 1e-9 * t {
                self.issue(
                    &s.t_final.as_ref().and_then(span_of),
                    "scheme.t_final",
                    format!("{t} is not a positive whole multiple of dt = {dt}"),
                );
                return None;
            }
        }
        Some(SchemeConfig {
            kind: kind?,
            formulation: formulation?,
            dt: dt?,
            t_final: t_final?,
            save_every: save_every?,
        })
    }

    fn initial(&mut self, raw: &S<RawInitial>, cutoff: Option<usize>) -> Option<InitialCondition> {
        let (i, at) = self.table(raw, "initial")?;
        if i.preset.is_some() {
            for (present, key) in [
                (i.variables.is_some(), "variables"),
                (i.velocity.is_some(), "velocity"),
                (i.scalar.is_some(), "scalar"),
            ] {
                if present {
                    self.issue(&at, &format!("initial.{key}"), "cannot be combined with a preset");
                }
            }
            let preset: Option<InitialPreset> = self.variant(&i.preset, &at, "initial.preset");
            let a = self.real(&i.velocity_amplitude, &at, "initial.velocity_amplitude", |_| None);
            let c = self.real(&i.psi_mean, &at, "initial.psi_mean", |_| None);
            let b = self.real(&i.psi_amplitude, &at, "initial.psi_amplitude", |_| None);
            if let (Some(c), Some(b)) = (c, b) {
                if c <= b.abs() {
                    self.issue(
                        &i.psi_mean.as_ref().and_then(span_of),
                        "initial.psi_mean",
                        format!("{c} must exceed |psi_amplitude| = {} so that psi stays positive", b.abs()),
                    );
                    return None;
                }
            }
            return Some(InitialCondition::Preset(PresetInitial {
                preset: preset?,
                velocity_amplitude: a?,
                psi_mean: c?,
                psi_amplitude: b?,
            }));
        }
        for (present, key) in [
            (i.velocity_amplitude.is_some(), "velocity_amplitude"),
            (i.psi_mean.is_some(), "psi_mean"),
            (i.psi_amplitude.is_some(), "psi_amplitude"),
        ] {
            if present {
                self.issue(&at, &format!("initial.{key}"), "only valid together with a preset");
            }
        }
        let variables: Option<Variables> = self.variant(&i.variables, &at, "initial.variables");
        let mut ok = true;
        let mut velocity = Vec::new();
        for (n, entry) in i.velocity.iter().flat_map(|v| v.get_ref().iter()).enumerate() {
            let here = span_of(entry);
            let e = entry.get_ref();
            let field = format!("initial.velocity[{n}]");
            let component = self.integer(&e.component, &here, &format!("{field}.component"), 0, None);
            if let Some(c) = component.filter(|&c| c > 2) {
                self.issue(&e.component.as_ref().and_then(span_of), &format!("{field}.component"), format!("{c} is not 0, 1 or 2"));
                ok = false;
            }
            let k = self.wavevector(&e.k, &here, &format!("{field}.k"), cutoff);
            let amps = self.amplitudes(&e.cos, &e.sin, &here, &field);
            match (component, k, amps) {
                (Some(component), Some(k), Some((cos, sin))) => velocity.push(VelocityMode { component, k, cos, sin }),
                _ => ok = false,
            }
        }
        let mut scalar = Vec::new();
        for (n, entry) in i.scalar.iter().flat_map(|v| v.get_ref().iter()).enumerate() {
            let here = span_of(entry);
            let e = entry.get_ref();
            let field = format!("initial.scalar[{n}]");
            let k = self.wavevector(&e.k, &here, &format!("{field}.k"), cutoff);
            let amps = self.amplitudes(&e.cos, &e.sin, &here, &field);
            match (k, amps) {
                (Some(k), Some((cos, sin))) => scalar.push(ScalarMode { k, cos, sin }),
                _ => ok = false,
            }
        }
        if !ok {
            return None;
        }
        Some(InitialCondition::Modes(ModeInitial {
            variables: variables?,
            velocity,
            scalar,
        }))
    }

    fn amplitudes(&mut self, cos: &S<f64>, sin: &S<f64>, here: &Span, field: &str) -> Option<(f64, f64)> {
        if cos.is_none() && sin.is_none() {
            self.issue(here, field, "needs `cos`, `sin` or both");
            return None;
        }
        let c = match cos {
            Some(s) => self.checked(*s.get_ref(), &span_of(s), &format!("{field}.cos"), |_| None),
            None => Some(0.0),
        };
        let s = match sin {
            Some(s) => self.checked(*s.get_ref(), &span_of(s), &format!("{field}.sin"), |_| None),
            None => Some(0.0),
        };
        Some((c?, s?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
n_paths = 2

[grid]
m = 4
n = 16

[model]
delta = 0.01
epsilon = 0.0

[noise.f]
modes = [{ k = [1, 0, 0], amplitude = 0.1 }]

[noise.g]
modes = []

[scheme]
kind = "euler_maruyama_ito"
formulation = "psi_system"
dt = 1e-4
t_final = 1e-3

[initial]
preset = "taylor-green"
velocity_amplitude = 1.0
psi_mean = 2.0
psi_amplitude = 0.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, "t").unwrap();
        assert_eq!(c.grid.fine_factor, 2);
        assert_eq!(c.scheme.save_every, 10);
        assert_eq!(c.model.cutoff, 4);
        assert_eq!(c.steps(), 10);
        assert_eq!(c.output_dir(), PathBuf::from(DEFAULT_OUTPUT));
    }

    #[test]
    fn mode_outside_cutoff_names_the_field() {
        let text = MINIMAL.replace("k = [1, 0, 0]", "k = [5, 0, 0]");
        let e = parse_config_str(&text, "t").unwrap_err();
        let issues = e.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "noise.f.modes[0].k");
        assert!(issues[0].message.contains("outside cutoff 4"), "{}", issues[0].message);
        assert_eq!(issues[0].line, Some(14));
    }

    #[test]
    fn all_problems_are_reported() {
        let text = MINIMAL
            .replace("n_paths = 2", "n_paths = 0")
            .replace("delta = 0.01", "delta = 2.0")
            .replace("t_final = 1e-3", "t_final = -1.0")
            .replace("psi_mean = 2.0", "psi_mean = 0.1");
        let e = parse_config_str(&text, "t").unwrap_err();
        let fields: Vec<&str> = e.issues().iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["n_paths", "model.delta", "scheme.t_final", "initial.psi_mean"]);
        assert!(e.issues().iter().all(|i| i.line.is_some()));
    }

    #[test]
    fn missing_physics_is_not_defaulted() {
        let text = MINIMAL.replace("epsilon = 0.0\n", "");
        let e = parse_config_str(&text, "t").unwrap_err();
        assert_eq!(e.issues()[0].field, "model.epsilon");
        assert_eq!(e.issues()[0].message, "missing required setting");
    }

    #[test]
    fn incompatible_scheme_is_rejected() {
        let text = MINIMAL.replace("\"euler_maruyama_ito\"", "\"heun_stratonovich\"");
        let e = parse_config_str(&text, "t").unwrap_err();
        assert_eq!(e.issues()[0].field, "scheme.formulation");
    }

    #[test]
    fn unknown_keys_are_syntax_errors() {
        let text = MINIMAL.replace("[grid]", "[grid]\nsize = 3");
        assert!(matches!(parse_config_str(&text, "t"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn explicit_modes_parse() {
        let text = MINIMAL.replace(
            "preset = \"taylor-green\"\nvelocity_amplitude = 1.0\npsi_mean = 2.0\npsi_amplitude = 0.5",
            "variables = \"theta\"\nvelocity = [{ component = 2, k = [1, 0, 0], cos = 0.3 }]\nscalar = [{ k = [0, 0, 0], cos = 1.0 }]",
        );
        let c = parse_config_str(&text, "t").unwrap();
        let InitialCondition::Modes(m) = c.initial else { panic!() };
        assert_eq!(m.variables, Variables::Theta);
        assert_eq!(m.velocity[0].sin, 0.0);
        assert_eq!(m.scalar.len(), 1);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse_config_str(MINIMAL, "t").unwrap();
        assert_eq!(c.clone().validated().unwrap(), c);
        let json = serde_json::to_string(&serde_json::json!({ "config": c })).unwrap();
        assert_eq!(parse_metadata_str(&json, "m").unwrap(), c);
    }
}
