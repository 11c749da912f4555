//! Experiment configuration: a flat `key = value` text format with `#`
//! comments.
//!
//! ```text
//! label = table1
//! k = 0
//! theta = 1
//! meshes = uniform 8, 16, 32
//! tau_rule = 1 * h^2
//! ```
//!
//! A study either refines the mesh with `τ = c·h^p` (`meshes` +
//! `tau_rule`) or refines the time step on one mesh (`mesh` + `tau_list`).

use std::fmt::Write as _;
use std::path::PathBuf;

use opwg_core::linsolve::{PreconditionerKind, SolverSettings};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

/// Where a mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// `generate_uniform(n)`, nominal size `h = 1/n`.
    Uniform(usize),
    /// A Gmsh 2.2 file, nominal size `h = h_max`.
    File(PathBuf),
}

/// `τ = coefficient · h^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRule {
    pub coefficient: f64,
    pub power: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Refine the mesh; each level uses `τ` from the rule.
    Space { meshes: Vec<MeshSpec>, tau: TauRule },
    /// Refine the time step on a fixed mesh.
    Time { mesh: MeshSpec, taus: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub k: usize,
    pub theta: f64,
    /// `None` selects `2k + 3`.
    pub beta0: Option<f64>,
    pub sweep: Sweep,
    pub final_time: f64,
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
    /// Output directory, relative to the output root.
    pub output: PathBuf,
    pub monitors: bool,
}

impl ExperimentConfig {
    pub fn beta0(&self) -> f64 {
        self.beta0.unwrap_or((2 * self.k + 3) as f64)
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            preconditioner: self.preconditioner,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.label.is_empty() || self.label.chars().any(|c| !(c.is_ascii_alphanumeric() || "_-.".contains(c))) {
            return Err(invalid("label", "use letters, digits, '_', '-' or '.'"));
        }
        if self.k > 3 {
            return Err(invalid("k", format!("degree {} is not supported (0..=3)", self.k)));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(invalid("theta", format!("{} is outside [0.5, 1]", self.theta)));
        }
        if let Some(b) = self.beta0 {
            if !(b >= 1.0 && b.is_finite()) {
                return Err(invalid("beta0", format!("{b} must be at least 1")));
            }
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(invalid("final_time", format!("{} must be positive", self.final_time)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(invalid("tolerance", format!("{} is outside (0, 1)", self.tolerance)));
        }
        if self.max_iterations == Some(0) {
            return Err(invalid("max_iterations", "must be positive"));
        }
        let output = self.output.to_string_lossy();
        if output.is_empty() || output.contains(['#', '\n']) || output.trim() != output {
            return Err(invalid("output", "must be a non-empty path without '#', newlines or surrounding spaces"));
        }
        let check_mesh = |field: &'static str, m: &MeshSpec| match m {
            MeshSpec::Uniform(0) => Err(invalid(field, "uniform mesh size must be positive")),
            MeshSpec::File(p) => {
                let text = p.to_string_lossy();
                if text.is_empty() || text.contains(['#', ',', '\n']) || text.trim() != text {
                    Err(invalid(field, "file paths must be non-empty and free of '#', ',' and surrounding spaces"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        };
        match &self.sweep {
            Sweep::Space { meshes, tau } => {
                if meshes.is_empty() {
                    return Err(invalid("meshes", "the mesh list is empty"));
                }
                for m in meshes {
                    check_mesh("meshes", m)?;
                }
                if !(tau.coefficient > 0.0 && tau.coefficient.is_finite()) || tau.power < 0 {
                    return Err(invalid("tau_rule", "need a positive coefficient and a non-negative power"));
                }
            }
            Sweep::Time { mesh, taus } => {
                check_mesh("mesh", mesh)?;
                if taus.is_empty() {
                    return Err(invalid("tau_list", "the time-step list is empty"));
                }
                for &t in taus {
                    if !(t > 0.0 && t.is_finite()) {
                        return Err(invalid("tau_list", format!("{t} is not a positive time step")));
                    }
                    steps_for(self.final_time, t).map_err(|m| invalid("tau_list", m))?;
                }
            }
        }
        Ok(())
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(&'static str, usize, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, text: content.to_string() })?;
            let key = key.trim();
            let known = KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
            if entries.iter().any(|(k, _, _)| k == known) {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
            entries.push((known, line, value.trim().to_string()));
        }
        let get = |key: &str| entries.iter().find(|(k, _, _)| *k == key).map(|(_, _, v)| v.as_str());
        let req = |key: &'static str| get(key).ok_or(ConfigError::Missing(key));

        let label = req("label")?.to_string();
        let k = parse_num::<usize>("k", req("k")?)?;
        let theta = parse_num::<f64>("theta", req("theta")?)?;
        let beta0 = get("beta0").map(|v| parse_num::<f64>("beta0", v)).transpose()?;
        let final_time = get("final_time").map(|v| parse_num::<f64>("final_time", v)).transpose()?.unwrap_or(1.0);
        let tolerance = get("tolerance").map(|v| parse_num::<f64>("tolerance", v)).transpose()?.unwrap_or(1e-10);
        let max_iterations = get("max_iterations").map(|v| parse_num::<usize>("max_iterations", v)).transpose()?;
        let preconditioner = get("preconditioner")
            .map(|v| v.parse::<PreconditionerKind>().map_err(|m| invalid("preconditioner", m)))
            .transpose()?
            .unwrap_or_default();
        let output = PathBuf::from(get("output").unwrap_or(&label));
        let monitors = get("monitors").map(|v| parse_bool("monitors", v)).transpose()?.unwrap_or(false);

        let sweep = match (get("meshes"), get("tau_rule"), get("mesh"), get("tau_list")) {
            (Some(meshes), Some(rule), None, None) => {
                Sweep::Space { meshes: parse_mesh_list("meshes", meshes)?, tau: parse_tau_rule(rule)? }
            }
            (None, None, Some(mesh), Some(list)) => {
                let mut meshes = parse_mesh_list("mesh", mesh)?;
                if meshes.len() != 1 {
                    return Err(invalid("mesh", "a time sweep uses exactly one mesh"));
                }
                let taus = list.split(',').map(|t| parse_time(t.trim())).collect::<Result<Vec<_>, _>>()?;
                Sweep::Time { mesh: meshes.remove(0), taus }
            }
            _ => {
                return Err(invalid(
                    "sweep",
                    "give either `meshes` with `tau_rule`, or `mesh` with `tau_list` (exactly one pair)",
                ))
            }
        };
        let config = ExperimentConfig {
            label,
            k,
            theta,
            beta0,
            sweep,
            final_time,
            tolerance,
            max_iterations,
            preconditioner,
            output,
            monitors,
        };
        config.validate()?;
        Ok(config)
    }

    /// Text form accepted by [`ExperimentConfig::parse`]; every field is
    /// written so that parsing returns an equal value.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "label = {}", self.label);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "theta = {:?}", self.theta);
        if let Some(b) = self.beta0 {
            let _ = writeln!(s, "beta0 = {b:?}");
        }
        match &self.sweep {
            Sweep::Space { meshes, tau } => {
                let _ = writeln!(s, "meshes = {}", render_mesh_list(meshes));
                let _ = writeln!(s, "tau_rule = {:?} * h^{}", tau.coefficient, tau.power);
            }
            Sweep::Time { mesh, taus } => {
                let _ = writeln!(s, "mesh = {}", render_mesh_list(std::slice::from_ref(mesh)));
                let list: Vec<String> = taus.iter().map(|t| format!("{t:?}")).collect();
                let _ = writeln!(s, "tau_list = {}", list.join(", "));
            }
        }
        let _ = writeln!(s, "final_time = {:?}", self.final_time);
        let _ = writeln!(s, "tolerance = {:e}", self.tolerance);
        if let Some(m) = self.max_iterations {
            let _ = writeln!(s, "max_iterations = {m}");
        }
        let _ = writeln!(s, "preconditioner = {}", self.preconditioner);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "monitors = {}", self.monitors);
        s
    }
}

const KEYS: [&str; 14] = [
    "label",
    "k",
    "theta",
    "beta0",
    "meshes",
    "tau_rule",
    "mesh",
    "tau_list",
    "final_time",
    "tolerance",
    "max_iterations",
    "preconditioner",
    "output",
    "monitors",
];

/// Number of uniform steps of size `tau` that reach `final_time`.
pub fn steps_for(final_time: f64, tau: f64) -> Result<usize, String> {
    let n = (final_time / tau).round();
    if n < 1.0 || ((n * tau - final_time).abs() > 1e-12 * final_time.max(1.0)) {
        return Err(format!("time step {tau} does not divide the final time {final_time}"));
    }
    Ok(n as usize)
}

fn parse_num<T: std::str::FromStr>(field: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| invalid(field, format!("`{v}`: {e}")))
}

fn parse_bool(field: &'static str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(invalid(field, format!("`{v}` is not a boolean"))),
    }
}

/// A decimal number or a fraction `a/b`.
fn parse_time(v: &str) -> Result<f64, ConfigError> {
    match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = parse_num("tau_list", a.trim())?;
            let b: f64 = parse_num("tau_list", b.trim())?;
            Ok(a / b)
        }
        None => parse_num("tau_list", v),
    }
}

const MESH_KEYWORDS: [&str; 3] = ["uniform", "files", "file"];

/// `uniform 8, 16` or `files a.msh, b.msh`; an item may switch the kind with
/// its own keyword (`uniform 8, files a.msh`), bare items inherit it.
fn parse_mesh_list(field: &'static str, v: &str) -> Result<Vec<MeshSpec>, ConfigError> {
    let mut uniform: Option<bool> = None;
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (head, rest) = item.split_once(char::is_whitespace).unwrap_or((item, ""));
        let value = if MESH_KEYWORDS.contains(&head) {
            uniform = Some(head == "uniform");
            rest.trim()
        } else {
            item
        };
        if value.is_empty() {
            continue;
        }
        match uniform {
            Some(true) => out.push(MeshSpec::Uniform(parse_num::<usize>(field, value)?)),
            Some(false) => out.push(MeshSpec::File(PathBuf::from(value))),
            None => return Err(invalid(field, format!("`{item}`: start the list with `uniform` or `files`"))),
        }
    }
    if uniform.is_none() && !v.trim().is_empty() {
        return Err(invalid(field, format!("unknown mesh source `{}` (uniform, files)", v.trim())));
    }
    Ok(out)
}

fn render_mesh_list(meshes: &[MeshSpec]) -> String {
    let mut previous: Option<bool> = None;
    let items: Vec<String> = meshes
        .iter()
        .map(|m| {
            let (uniform, text) = match m {
                MeshSpec::Uniform(n) => (true, n.to_string()),
                MeshSpec::File(p) => (false, p.display().to_string()),
            };
            let head = text.split_once(char::is_whitespace).map_or(text.as_str(), |(h, _)| h);
            let needs_keyword = previous != Some(uniform) || (!uniform && MESH_KEYWORDS.contains(&head));
            previous = Some(uniform);
            match (needs_keyword, uniform) {
                (false, _) => text,
                (true, true) => format!("uniform {text}"),
                (true, false) => format!("files {text}"),
            }
        })
        .collect();
    if items.is_empty() {
        "uniform".to_string()
    } else {
        items.join(", ")
    }
}

fn parse_tau_rule(v: &str) -> Result<TauRule, ConfigError> {
    let err = || invalid("tau_rule", format!("`{v}` is not of the form `c * h^p`"));
    let (c, p) = v.split_once('*').ok_or_else(err)?;
    let p = p.trim().strip_prefix("h^").ok_or_else(err)?;
    Ok(TauRule { coefficient: parse_num("tau_rule", c.trim())?, power: parse_num("tau_rule", p.trim())? })
}
