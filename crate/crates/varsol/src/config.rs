//! INI-style run configuration: sections `[family]`, `[params]`, `[task]`,
//! `[output]`; `key = value` pairs; `#` comments; strings double-quoted.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("config field `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("unknown config key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("unknown config section `{0}`")]
    UnknownSection(String),
}

/// A raw parsed value with its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct RawValue {
    pub text: String,
    pub quoted: bool,
    pub line: usize,
}

/// Parsed but unvalidated config: section → key → value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, RawValue>>,
}

impl RawConfig {
    /// Canonical text used for hashing: sorted sections and keys.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.sections {
            out.push_str(&format!("[{section}]\n"));
            for (key, value) in keys {
                if value.quoted {
                    out.push_str(&format!("{key} = \"{}\"\n", value.text));
                } else {
                    out.push_str(&format!("{key} = {}\n", value.text));
                }
            }
        }
        out
    }

    /// Insert or replace a value (used by command-line overrides).
    pub fn set(&mut self, section: &str, key: &str, text: &str) {
        let (text, quoted) = if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
            (text[1..text.len() - 1].to_string(), true)
        } else {
            (text.to_string(), text.parse::<f64>().is_err() && text != "true" && text != "false")
        };
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), RawValue { text, quoted, line: 0 });
    }
}

/// Parse INI-style text into a raw config.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut out = RawConfig::default();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            // a # inside a quoted string is part of the value
            Some(pos) if !in_quotes(raw_line, pos) => &raw_line[..pos],
            _ => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    col: line.find('[').unwrap_or(0) + 1,
                    msg: "unterminated section header".to_string(),
                });
            };
            section = Some(name.trim().to_string());
            out.sections.entry(name.trim().to_string()).or_default();
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                col: 1,
                msg: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                col: 1,
                msg: "empty key".to_string(),
            });
        }
        let Some(section_name) = section.clone() else {
            return Err(ConfigError::Parse {
                line: line_no,
                col: 1,
                msg: format!("key `{key}` appears before any [section]"),
            });
        };
        let (text, quoted) = if value.starts_with('"') {
            let Some(inner) = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')) else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    col: eq + 2,
                    msg: "unterminated string".to_string(),
                });
            };
            (inner.to_string(), true)
        } else {
            (value.to_string(), false)
        };
        let keys = out.sections.entry(section_name).or_default();
        if keys
            .insert(key.to_string(), RawValue { text, quoted, line: line_no })
            .is_some()
        {
            return Err(ConfigError::Parse {
                line: line_no,
                col: 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

fn in_quotes(line: &str, pos: usize) -> bool {
    line[..pos].bytes().filter(|b| *b == b'"').count() % 2 == 1
}

/// How the family is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Preset(String),
    Exprs { c1: String, c2: String, c3: String, c5: String },
}

/// The task to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    DeriveOde,
    FelsCheck,
    SolveRegular,
    SolveEmbedded,
    ScanResidual,
    ActionEval,
}

impl Task {
    pub fn parse(name: &str) -> Option<Task> {
        Some(match name {
            "derive-ode" => Task::DeriveOde,
            "fels-check" => Task::FelsCheck,
            "solve-regular" => Task::SolveRegular,
            "solve-embedded" => Task::SolveEmbedded,
            "scan-residual" => Task::ScanResidual,
            "action-eval" => Task::ActionEval,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::DeriveOde => "derive-ode",
            Task::FelsCheck => "fels-check",
            Task::SolveRegular => "solve-regular",
            Task::SolveEmbedded => "solve-embedded",
            Task::ScanResidual => "scan-residual",
            Task::ActionEval => "action-eval",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Options consumed by the individual tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOptions {
    pub amplitude_starts: Option<Vec<f64>>,
    pub width_starts: Option<Vec<f64>>,
    pub least_squares: bool,
    pub n_samples: u32,
    pub scan_mode: SolveMode,
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    pub axis_param: Option<String>,
    pub axis_min: f64,
    pub axis_max: f64,
    pub axis_points: usize,
    pub amplitude: f64,
    pub width_sq: f64,
    pub tail_amplitude: f64,
    pub quad_tol: f64,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self {
            amplitude_starts: None,
            width_starts: None,
            least_squares: false,
            n_samples: 1000,
            scan_mode: SolveMode::Regular,
            z_min: -3.0,
            z_max: 3.0,
            z_points: 121,
            axis_param: None,
            axis_min: 0.5,
            axis_max: 10.0,
            axis_points: 101,
            amplitude: 1.0,
            width_sq: 1.0,
            tail_amplitude: 0.0,
            quad_tol: crate::tol::QUADRATURE_DEFAULT,
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: FamilySpec,
    pub params: Vec<(String, f64)>,
    pub task: Task,
    pub seed: u64,
    pub options: TaskOptions,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub csv_name: Option<String>,
}

fn field_err(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.to_string(), msg: msg.into() }
}

fn as_number(section: &str, key: &str, v: &RawValue) -> Result<f64, ConfigError> {
    if v.quoted {
        return Err(field_err(&format!("{section}.{key}"), "expected a number, got a string"));
    }
    v.text
        .parse::<f64>()
        .map_err(|_| field_err(&format!("{section}.{key}"), format!("`{}` is not a number", v.text)))
}

fn as_bool(section: &str, key: &str, v: &RawValue) -> Result<bool, ConfigError> {
    match v.text.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(field_err(
            &format!("{section}.{key}"),
            format!("`{other}` is not true/false"),
        )),
    }
}

fn as_string(section: &str, key: &str, v: &RawValue) -> Result<String, ConfigError> {
    if !v.quoted {
        return Err(field_err(
            &format!("{section}.{key}"),
            "expected a double-quoted string",
        ));
    }
    Ok(v.text.clone())
}

fn as_float_list(section: &str, key: &str, v: &RawValue) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for piece in v.text.split(',') {
        let t = piece.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|_| {
            field_err(&format!("{section}.{key}"), format!("`{t}` is not a number"))
        })?);
    }
    if out.is_empty() {
        return Err(field_err(&format!("{section}.{key}"), "empty list"));
    }
    Ok(out)
}

/// Validate a raw config into a run configuration.
pub fn validate(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
    for section in raw.sections.keys() {
        if !["family", "params", "task", "output"].contains(&section.as_str()) {
            return Err(ConfigError::UnknownSection(section.clone()));
        }
    }
    let empty = BTreeMap::new();

    // reject unknown keys everywhere before semantic validation
    let family_keys = raw.sections.get("family").unwrap_or(&empty);
    for key in family_keys.keys() {
        if !["preset", "c1", "c2", "c3", "c5"].contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { section: "family".into(), key: key.clone() });
        }
    }
    let known_task_keys = [
        "name",
        "seed",
        "a_starts",
        "s_starts",
        "least_squares",
        "n_samples",
        "scan_mode",
        "z_min",
        "z_max",
        "z_points",
        "axis_param",
        "axis_min",
        "axis_max",
        "axis_points",
        "a",
        "s",
        "alpha",
        "quad_tol",
    ];
    for key in raw.sections.get("task").unwrap_or(&empty).keys() {
        if !known_task_keys.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { section: "task".into(), key: key.clone() });
        }
    }
    for key in raw.sections.get("output").unwrap_or(&empty).keys() {
        if !["dir", "svg", "csv"].contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { section: "output".into(), key: key.clone() });
        }
    }
    let family = if let Some(preset) = family_keys.get("preset") {
        if family_keys.len() > 1 {
            return Err(field_err(
                "family.preset",
                "preset and coefficient expressions are mutually exclusive",
            ));
        }
        FamilySpec::Preset(as_string("family", "preset", preset)?)
    } else {
        let get = |key: &str| -> Result<String, ConfigError> {
            family_keys
                .get(key)
                .ok_or_else(|| {
                    field_err(&format!("family.{key}"), "missing coefficient expression")
                })
                .and_then(|v| as_string("family", key, v))
        };
        FamilySpec::Exprs { c1: get("c1")?, c2: get("c2")?, c3: get("c3")?, c5: get("c5")? }
    };

    // [params]
    let mut params = Vec::new();
    for (key, value) in raw.sections.get("params").unwrap_or(&empty) {
        params.push((key.clone(), as_number("params", key, value)?));
    }

    // [task]
    let task_keys = raw.sections.get("task").unwrap_or(&empty);
    let task_name = task_keys
        .get("name")
        .ok_or_else(|| field_err("task.name", "missing task name"))?;
    let task = Task::parse(&as_string("task", "name", task_name)?).ok_or_else(|| {
        field_err(
            "task.name",
            format!(
                "`{}` is not one of derive-ode, fels-check, solve-regular, solve-embedded, scan-residual, action-eval",
                task_name.text
            ),
        )
    })?;
    let seed = match task_keys.get("seed") {
        None => 0,
        Some(v) => {
            let x = as_number("task", "seed", v)?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(field_err("task.seed", "must be a non-negative integer"));
            }
            x as u64
        }
    };
    let mut options = TaskOptions::default();
    if let Some(v) = task_keys.get("a_starts") {
        options.amplitude_starts = Some(as_float_list("task", "a_starts", v)?);
    }
    if let Some(v) = task_keys.get("s_starts") {
        options.width_starts = Some(as_float_list("task", "s_starts", v)?);
    }
    if let Some(v) = task_keys.get("least_squares") {
        options.least_squares = as_bool("task", "least_squares", v)?;
    }
    if let Some(v) = task_keys.get("n_samples") {
        let x = as_number("task", "n_samples", v)?;
        if x < 1.0 || x.fract() != 0.0 {
            return Err(field_err("task.n_samples", "must be a positive integer"));
        }
        options.n_samples = x as u32;
    }
    if let Some(v) = task_keys.get("scan_mode") {
        options.scan_mode = match as_string("task", "scan_mode", v)?.as_str() {
            "regular" => SolveMode::Regular,
            "embedded" => SolveMode::Embedded,
            other => {
                return Err(field_err(
                    "task.scan_mode",
                    format!("`{other}` is not regular/embedded"),
                ))
            }
        };
    }
    for (key, slot) in [
        ("z_min", &mut options.z_min),
        ("z_max", &mut options.z_max),
        ("axis_min", &mut options.axis_min),
        ("axis_max", &mut options.axis_max),
        ("a", &mut options.amplitude),
        ("s", &mut options.width_sq),
        ("alpha", &mut options.tail_amplitude),
        ("quad_tol", &mut options.quad_tol),
    ] {
        if let Some(v) = task_keys.get(key) {
            *slot = as_number("task", key, v)?;
        }
    }
    for (key, slot) in [
        ("z_points", &mut options.z_points),
        ("axis_points", &mut options.axis_points),
    ] {
        if let Some(v) = task_keys.get(key) {
            let x = as_number("task", key, v)?;
            if x < 2.0 || x.fract() != 0.0 {
                return Err(field_err(&format!("task.{key}"), "must be an integer >= 2"));
            }
            *slot = x as usize;
        }
    }
    if let Some(v) = task_keys.get("axis_param") {
        options.axis_param = Some(as_string("task", "axis_param", v)?);
    }
    if task == Task::ScanResidual && options.axis_param.is_none() {
        return Err(field_err("task.axis_param", "scan-residual needs a parameter axis"));
    }

    // [output]
    let output_keys = raw.sections.get("output").unwrap_or(&empty);
    let out_dir = match output_keys.get("dir") {
        Some(v) => PathBuf::from(as_string("output", "dir", v)?),
        None => PathBuf::from("."),
    };
    let svg = match output_keys.get("svg") {
        Some(v) => as_bool("output", "svg", v)?,
        None => false,
    };
    let csv_name = match output_keys.get("csv") {
        Some(v) => Some(as_string("output", "csv", v)?),
        None => None,
    };

    Ok(RunConfig { family, params, task, seed, options, out_dir, svg, csv_name })
}

/// Read, parse and validate a config file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    validate(&parse_raw(&text)?)
}

/// Resolve a bare `--set` key to its section: family and output keys by
/// name, known task options to `task`, anything else to `params`.
pub fn resolve_override_key(key: &str) -> (String, String) {
    if let Some((section, rest)) = key.split_once('.') {
        return (section.to_string(), rest.to_string());
    }
    let family = ["preset", "c1", "c2", "c3", "c5"];
    let output = ["dir", "svg", "csv"];
    let task = [
        "name", "seed", "a_starts", "s_starts", "least_squares", "n_samples", "scan_mode",
        "z_min", "z_max", "z_points", "axis_param", "axis_min", "axis_max", "axis_points", "a",
        "s", "alpha", "quad_tol",
    ];
    if family.contains(&key) {
        ("family".to_string(), key.to_string())
    } else if output.contains(&key) {
        ("output".to_string(), key.to_string())
    } else if task.contains(&key) {
        ("task".to_string(), key.to_string())
    } else {
        ("params".to_string(), key.to_string())
    }
}
