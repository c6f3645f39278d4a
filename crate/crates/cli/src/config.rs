//! INI-style configuration files.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Signals are `<number>`, `ramp(t0, v0, t1, v1)` or `table(t:v, t:v, ...)`;
//! profiles are `<number>`, `linear(x:v, x:v, ...)` or
//! `cosine(base, amplitude, mode)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cryoporo_core::geometry::{BoundarySignal, Profile};
use cryoporo_core::scenario::RunConfig;

use crate::error::CliError;

/// Keys accepted in each section, in print order.
pub const SECTIONS: &[(&str, &[&str])] = &[
    (
        "material",
        &[
            "rho_l",
            "rho_s",
            "c_s",
            "c0",
            "latent_heat",
            "theta_c",
            "beta",
            "nu",
            "lambda_m",
            "phi_flat",
            "delta",
            "delta_hat",
            "mu0",
            "kappa_c",
            "a_exp",
            "gamma_c",
        ],
    ),
    ("domain", &["length", "n_cells"]),
    (
        "boundary",
        &[
            "alpha_left",
            "alpha_right",
            "omega_left",
            "omega_right",
            "p_star_left",
            "p_star_right",
            "theta_star_left",
            "theta_star_right",
            "theta_bar",
            "g_profile",
            "g_signal",
        ],
    ),
    ("initial", &["p0", "w0", "chi0", "theta0"]),
    ("time", &["t_end", "dt", "dt_min", "dt_max"]),
    (
        "solver",
        &[
            "tol_p",
            "tol_theta",
            "max_newton",
            "cutoff_R",
            "gamma_pressure_factor",
        ],
    ),
    ("output", &["snapshot_interval", "out_dir"]),
    ("oracle", &["n_modes", "atol", "rtol"]),
];

const REQUIRED: &[(&str, &str)] = &[("time", "t_end")];

/// Parsed file: the run configuration plus oracle and sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FileConfig {
    pub run: RunConfig,
    pub oracle_atol: f64,
    pub oracle_rtol: f64,
    /// `(section.key, values)` of the `[sweep]` section.
    pub sweep: Vec<(String, Vec<String>)>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            run: RunConfig {
                n_modes: 8,
                ..RunConfig::default()
            },
            oracle_atol: 1e-9,
            oracle_rtol: 1e-9,
            sweep: Vec::new(),
        }
    }
}

fn num(v: &str) -> Result<f64, String> {
    let v = v.trim();
    match v {
        "inf" | "infinity" | "+inf" => return Ok(f64::INFINITY),
        _ => {}
    }
    v.parse::<f64>()
        .ok()
        .filter(|x| !x.is_nan())
        .ok_or_else(|| format!("expected a number, found '{v}'"))
}

fn uint(v: &str) -> Result<usize, String> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, found '{v}'"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, found '{other}'")),
    }
}

/// Splits `name(args)` into `(name, args)`.
fn call(v: &str) -> Option<(&str, &str)> {
    let v = v.trim();
    let open = v.find('(')?;
    let inner = v[open + 1..].strip_suffix(')')?;
    Some((v[..open].trim(), inner))
}

fn args(inner: &str) -> Result<Vec<f64>, String> {
    inner.split(',').map(num).collect()
}

fn knots(inner: &str) -> Result<Vec<(f64, f64)>, String> {
    inner
        .split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected 'position:value', found '{}'", pair.trim()))?;
            Ok((num(a)?, num(b)?))
        })
        .collect()
}

pub fn parse_signal(v: &str) -> Result<BoundarySignal, String> {
    match call(v) {
        None => Ok(BoundarySignal::Constant(num(v)?)),
        Some(("ramp", inner)) => {
            let a = args(inner)?;
            if a.len() != 4 {
                return Err("ramp takes (t0, v0, t1, v1)".into());
            }
            BoundarySignal::ramp(a[0], a[1], a[2], a[3]).map_err(|e| e.to_string())
        }
        Some(("table", inner)) => BoundarySignal::table(knots(inner)?).map_err(|e| e.to_string()),
        Some((name, _)) => Err(format!("unknown signal kind '{name}' (constant, ramp, table)")),
    }
}

pub fn parse_profile(v: &str) -> Result<Profile, String> {
    match call(v) {
        None => Ok(Profile::Constant(num(v)?)),
        Some(("linear", inner)) => {
            let k = knots(inner)?;
            if k.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err("profile positions must be strictly increasing".into());
            }
            Ok(Profile::Linear(k))
        }
        Some(("cosine", inner)) => {
            let a = args(inner)?;
            if a.len() != 3 || a[2] < 0.0 || a[2].fract() != 0.0 {
                return Err("cosine takes (base, amplitude, mode) with integer mode".into());
            }
            Ok(Profile::Cosine {
                base: a[0],
                amplitude: a[1],
                mode: a[2] as u32,
            })
        }
        Some((name, _)) => Err(format!(
            "unknown profile kind '{name}' (constant, linear, cosine)"
        )),
    }
}

pub fn format_signal(s: &BoundarySignal) -> String {
    match s {
        BoundarySignal::Constant(v) => format!("{v:?}"),
        BoundarySignal::Ramp { t0, v0, t1, v1 } => format!("ramp({t0:?}, {v0:?}, {t1:?}, {v1:?})"),
        BoundarySignal::Table(k) => format!("table({})", format_knots(k)),
    }
}

pub fn format_profile(p: &Profile) -> String {
    match p {
        Profile::Constant(v) => format!("{v:?}"),
        Profile::Linear(k) => format!("linear({})", format_knots(k)),
        Profile::Cosine {
            base,
            amplitude,
            mode,
        } => format!("cosine({base:?}, {amplitude:?}, {mode})"),
    }
}

fn format_knots(k: &[(f64, f64)]) -> String {
    k.iter()
        .map(|(a, b)| format!("{a:?}:{b:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Sets one key. `section` and `key` must be known.
pub fn apply(cfg: &mut FileConfig, section: &str, key: &str, v: &str) -> Result<(), String> {
    let run = &mut cfg.run;
    let m = &mut run.material;
    let d = &mut run.domain;
    match (section, key) {
        ("material", "rho_l") => m.rho_l = num(v)?,
        ("material", "rho_s") => m.rho_s = num(v)?,
        ("material", "c_s") => m.c_s = num(v)?,
        ("material", "c0") => m.c0 = num(v)?,
        ("material", "latent_heat") => m.latent_heat = num(v)?,
        ("material", "theta_c") => m.theta_c = num(v)?,
        ("material", "beta") => m.beta = num(v)?,
        ("material", "nu") => m.nu = num(v)?,
        ("material", "lambda_m") => m.lambda_m = num(v)?,
        ("material", "phi_flat") => m.phi_flat = num(v)?,
        ("material", "delta") => m.delta = num(v)?,
        ("material", "delta_hat") => m.delta_hat = num(v)?,
        ("material", "mu0") => m.mu0 = num(v)?,
        ("material", "kappa_c") => m.kappa_c = num(v)?,
        ("material", "a_exp") => m.a_exp = num(v)?,
        ("material", "gamma_c") => m.gamma_c = num(v)?,
        ("domain", "length") => d.length = num(v)?,
        ("domain", "n_cells") => d.n_cells = uint(v)?,
        ("boundary", "alpha_left") => d.alpha_left = num(v)?,
        ("boundary", "alpha_right") => d.alpha_right = num(v)?,
        ("boundary", "omega_left") => d.omega_left = num(v)?,
        ("boundary", "omega_right") => d.omega_right = num(v)?,
        ("boundary", "p_star_left") => d.p_star_left = parse_signal(v)?,
        ("boundary", "p_star_right") => d.p_star_right = parse_signal(v)?,
        ("boundary", "theta_star_left") => d.theta_star_left = parse_signal(v)?,
        ("boundary", "theta_star_right") => d.theta_star_right = parse_signal(v)?,
        ("boundary", "theta_bar") => d.theta_bar = num(v)?,
        ("boundary", "g_profile") => d.g_potential.profile = parse_profile(v)?,
        ("boundary", "g_signal") => d.g_potential.signal = parse_signal(v)?,
        ("initial", "p0") => run.initial.p0 = parse_profile(v)?,
        ("initial", "w0") => run.initial.w0 = parse_profile(v)?,
        ("initial", "chi0") => run.initial.chi0 = parse_profile(v)?,
        ("initial", "theta0") => run.initial.theta0 = parse_profile(v)?,
        ("time", "t_end") => run.time.t_end = num(v)?,
        ("time", "dt") => run.time.dt = num(v)?,
        ("time", "dt_min") => run.time.dt_min = num(v)?,
        ("time", "dt_max") => run.time.dt_max = num(v)?,
        ("solver", "tol_p") => run.solver.tol_p = num(v)?,
        ("solver", "tol_theta") => run.solver.tol_theta = num(v)?,
        ("solver", "max_newton") => run.solver.max_newton = uint(v)?,
        ("solver", "cutoff_R") => run.solver.cutoff_r = num(v)?,
        ("solver", "gamma_pressure_factor") => run.solver.gamma_pressure_factor = boolean(v)?,
        ("output", "snapshot_interval") => run.output.snapshot_interval = num(v)?,
        ("output", "out_dir") => run.output.out_dir = PathBuf::from(v.trim()),
        ("oracle", "n_modes") => run.n_modes = uint(v)?,
        ("oracle", "atol") => cfg.oracle_atol = num(v)?,
        ("oracle", "rtol") => cfg.oracle_rtol = num(v)?,
        _ => return Err(format!("unknown key '{key}' in [{section}]")),
    }
    Ok(())
}

/// Current value of a key, formatted so that it parses back identically.
pub fn value_of(cfg: &FileConfig, section: &str, key: &str) -> String {
    let run = &cfg.run;
    let m = &run.material;
    let d = &run.domain;
    match (section, key) {
        ("material", "rho_l") => format!("{:?}", m.rho_l),
        ("material", "rho_s") => format!("{:?}", m.rho_s),
        ("material", "c_s") => format!("{:?}", m.c_s),
        ("material", "c0") => format!("{:?}", m.c0),
        ("material", "latent_heat") => format!("{:?}", m.latent_heat),
        ("material", "theta_c") => format!("{:?}", m.theta_c),
        ("material", "beta") => format!("{:?}", m.beta),
        ("material", "nu") => format!("{:?}", m.nu),
        ("material", "lambda_m") => format!("{:?}", m.lambda_m),
        ("material", "phi_flat") => format!("{:?}", m.phi_flat),
        ("material", "delta") => format!("{:?}", m.delta),
        ("material", "delta_hat") => format!("{:?}", m.delta_hat),
        ("material", "mu0") => format!("{:?}", m.mu0),
        ("material", "kappa_c") => format!("{:?}", m.kappa_c),
        ("material", "a_exp") => format!("{:?}", m.a_exp),
        ("material", "gamma_c") => format!("{:?}", m.gamma_c),
        ("domain", "length") => format!("{:?}", d.length),
        ("domain", "n_cells") => d.n_cells.to_string(),
        ("boundary", "alpha_left") => format!("{:?}", d.alpha_left),
        ("boundary", "alpha_right") => format!("{:?}", d.alpha_right),
        ("boundary", "omega_left") => format!("{:?}", d.omega_left),
        ("boundary", "omega_right") => format!("{:?}", d.omega_right),
        ("boundary", "p_star_left") => format_signal(&d.p_star_left),
        ("boundary", "p_star_right") => format_signal(&d.p_star_right),
        ("boundary", "theta_star_left") => format_signal(&d.theta_star_left),
        ("boundary", "theta_star_right") => format_signal(&d.theta_star_right),
        ("boundary", "theta_bar") => format!("{:?}", d.theta_bar),
        ("boundary", "g_profile") => format_profile(&d.g_potential.profile),
        ("boundary", "g_signal") => format_signal(&d.g_potential.signal),
        ("initial", "p0") => format_profile(&run.initial.p0),
        ("initial", "w0") => format_profile(&run.initial.w0),
        ("initial", "chi0") => format_profile(&run.initial.chi0),
        ("initial", "theta0") => format_profile(&run.initial.theta0),
        ("time", "t_end") => format!("{:?}", run.time.t_end),
        ("time", "dt") => format!("{:?}", run.time.dt),
        ("time", "dt_min") => format!("{:?}", run.time.dt_min),
        ("time", "dt_max") => format!("{:?}", run.time.dt_max),
        ("solver", "tol_p") => format!("{:?}", run.solver.tol_p),
        ("solver", "tol_theta") => format!("{:?}", run.solver.tol_theta),
        ("solver", "max_newton") => run.solver.max_newton.to_string(),
        ("solver", "cutoff_R") => format!("{:?}", run.solver.cutoff_r),
        ("solver", "gamma_pressure_factor") => run.solver.gamma_pressure_factor.to_string(),
        ("output", "snapshot_interval") => format!("{:?}", run.output.snapshot_interval),
        ("output", "out_dir") => run.output.out_dir.display().to_string(),
        ("oracle", "n_modes") => run.n_modes.to_string(),
        ("oracle", "atol") => format!("{:?}", cfg.oracle_atol),
        ("oracle", "rtol") => format!("{:?}", cfg.oracle_rtol),
        _ => unreachable!("unknown key {section}.{key}"),
    }
}

fn key_doc(section: &str, key: &str) -> &'static str {
    match (section, key) {
        ("material", "rho_l") => "liquid density",
        ("material", "rho_s") => "ice density, 0 < rho_s < rho_l",
        ("material", "c_s") => "solid matrix volume fraction",
        ("material", "c0") => "volumetric heat capacity",
        ("material", "latent_heat") => "latent heat L",
        ("material", "theta_c") => "melting temperature",
        ("material", "beta") => "thermal expansion coefficient",
        ("material", "nu") => "bulk viscosity",
        ("material", "lambda_m") => "bulk elasticity modulus",
        ("material", "phi_flat") => "residual saturation",
        ("material", "delta") => "retention tail exponent, < 1/4",
        ("material", "delta_hat") => "upper tail exponent, <= delta",
        ("material", "mu0") => "constant mobility",
        ("material", "kappa_c") => "conductivity scale",
        ("material", "a_exp") => "conductivity exponent, in (0, 1)",
        ("material", "gamma_c") => "phase relaxation scale",
        ("domain", "n_cells") => "at least 4",
        ("boundary", "p_star_left") => "signal: number | ramp(t0, v0, t1, v1) | table(t:v, ...)",
        ("boundary", "theta_bar") => "lower bound for boundary and initial temperatures",
        ("boundary", "g_profile") => "body potential G(x, t) = g_profile(x) * g_signal(t)",
        ("initial", "p0") => "profile: number | linear(x:v, ...) | cosine(base, amplitude, mode)",
        ("initial", "w0") => "must integrate to zero",
        ("time", "t_end") => "required",
        ("solver", "cutoff_R") => "cut-off radius, inf disables",
        ("output", "snapshot_interval") => "0 writes only the initial and final state",
        ("oracle", "n_modes") => "spectral modes of the reference solver",
        _ => "",
    }
}

/// Complete configuration listing, parseable by [`parse_str`].
pub fn dump(cfg: &FileConfig, with_docs: bool) -> String {
    let mut out = String::new();
    for (i, (section, keys)) in SECTIONS.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "[{section}]");
        for key in *keys {
            let doc = key_doc(section, key);
            if with_docs && !doc.is_empty() {
                let _ = writeln!(out, "# {doc}");
            }
            let _ = writeln!(out, "{key} = {}", value_of(cfg, section, key));
        }
    }
    if !cfg.sweep.is_empty() {
        out.push_str("\n[sweep]\n");
        for (name, values) in &cfg.sweep {
            let _ = writeln!(out, "{name} = {}", values.join(", "));
        }
    }
    out
}

/// Text hashed into checkpoints: everything except the output location.
pub fn canonical(cfg: &FileConfig) -> String {
    let mut c = cfg.clone();
    c.run.output.out_dir = PathBuf::new();
    dump(&c, false)
}

fn suggestion(word: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, _)| *d <= 3)
        .min()
        .map(|(_, c)| c.to_string())
}

fn all_keys() -> impl Iterator<Item = (&'static str, &'static str)> {
    SECTIONS
        .iter()
        .flat_map(|(s, keys)| keys.iter().map(move |k| (*s, *k)))
}

pub fn parse_str(text: &str, origin: &str) -> Result<FileConfig, CliError> {
    let mut cfg = FileConfig::default();
    let mut section: Option<String> = None;
    let mut seen: Vec<(String, String)> = Vec::new();
    let at = |line: usize, msg: String| CliError::Config(format!("{origin}:{line}: {msg}"));
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| at(line_no, format!("malformed section header '{line}'")))?
                .trim();
            if name != "sweep" && !SECTIONS.iter().any(|(s, _)| *s == name) {
                let names: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).chain(["sweep"]).collect();
                let hint = suggestion(name, &names)
                    .map(|s| format!(" (did you mean '{s}'?)"))
                    .unwrap_or_default();
                return Err(at(line_no, format!("unknown section '{name}'{hint}")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(line_no, format!("expected 'key = value', found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| at(line_no, format!("key '{key}' appears before any [section]")))?;
        if sec == "sweep" {
            let (s, k) = key
                .split_once('.')
                .ok_or_else(|| at(line_no, format!("sweep key '{key}' must be 'section.key'")))?;
            if !all_keys().any(|(a, b)| a == s && b == k) {
                return Err(at(line_no, format!("unknown sweep key '{key}'")));
            }
            let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
            if values.iter().any(|v| v.is_empty()) || value.contains('(') {
                return Err(at(
                    line_no,
                    format!("sweep values for '{key}' must be a comma-separated list of numbers"),
                ));
            }
            cfg.sweep.push((key.to_string(), values));
            continue;
        }
        let keys = SECTIONS
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !keys.contains(&key) {
            let hint = suggestion(key, keys)
                .or_else(|| {
                    let every: Vec<&str> = all_keys().map(|(_, k)| k).collect();
                    suggestion(key, &every)
                })
                .map(|s| format!(" (did you mean '{s}'?)"))
                .unwrap_or_default();
            return Err(at(line_no, format!("unknown key '{key}'{hint}")));
        }
        if seen.iter().any(|(s, k)| s == sec && k == key) {
            return Err(at(line_no, format!("duplicate key '{key}' in [{sec}]")));
        }
        seen.push((sec.to_string(), key.to_string()));
        apply(&mut cfg, sec, key, value).map_err(|e| at(line_no, format!("{key}: {e}")))?;
    }
    for (s, k) in REQUIRED {
        if !seen.iter().any(|(a, b)| a == s && b == k) {
            return Err(CliError::Config(format!(
                "{origin}: missing required key '{k}' in [{s}]"
            )));
        }
    }
    Ok(cfg)
}

pub fn parse_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_str(&text, &path.display().to_string())
}

/// Default configuration with the required keys filled in.
pub fn defaults() -> FileConfig {
    FileConfig::default()
}
