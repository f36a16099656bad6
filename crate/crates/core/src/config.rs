//! Flat `key=value` run configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use crate::diagnostics::DiagnosticSettings;
use crate::error::{PensError, Result};
use crate::grid::Grid;
use crate::state::{SolverConfig, DEFAULT_CFL_SAFETY, DEFAULT_DT_MAX};

pub const DEFAULT_DIM: usize = 2;
pub const DEFAULT_N: usize = 64;
pub const DEFAULT_LENGTH: f64 = 32.0 * PI;
pub const DEFAULT_T_END: f64 = 1.0;
pub const DEFAULT_SAMPLE_EVERY: f64 = 0.1;
pub const DEFAULT_PRESET: &str = "coupled-small";
pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_OUT_DIR: &str = "out";

const KEYS: [&str; 14] = [
    "d", "N", "L", "dt_max", "cfl_safety", "t_end", "sample_every", "preset", "epsilon", "seed", "m",
    "s", "channels", "out_dir",
];

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticSettings,
    /// Channels written to CSV; `None` means all.
    pub channels: Option<Vec<String>>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

fn fmt_f64(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

impl RunConfig {
    /// Canonical text form; [`parse_config`] reads it back to an equal value.
    pub fn to_config_string(&self) -> String {
        let s = &self.solver;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("d", s.grid.dim().to_string());
        line("N", s.grid.n().to_string());
        line("L", fmt_f64(s.grid.length()));
        line("dt_max", fmt_f64(s.dt_max));
        line("cfl_safety", fmt_f64(s.cfl_safety));
        line("t_end", fmt_f64(s.t_end));
        line("sample_every", fmt_f64(s.sample_every));
        line("preset", s.preset.clone());
        line("epsilon", fmt_f64(s.epsilon));
        line("seed", s.seed.to_string());
        line("m", fmt_f64(self.diagnostics.m));
        line("s", fmt_f64(self.diagnostics.s));
        if let Some(ch) = &self.channels {
            line("channels", ch.join(","));
        }
        line("out_dir", self.out_dir.display().to_string());
        out
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn line_err(line: usize, message: impl Into<String>) -> PensError {
    PensError::ConfigLine { line, message: message.into() }
}

fn number<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| line_err(e.line, format!("{key}: cannot parse '{}'", e.value)))
}

fn positive(key: &str, e: &Entry) -> Result<f64> {
    let x: f64 = number(key, e)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(line_err(e.line, format!("{key} must be a finite number > 0, got {x}")));
    }
    Ok(x)
}

/// Parses and validates a configuration; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: std::collections::BTreeMap<&str, Entry> = Default::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| line_err(line, format!("expected key=value, found '{body}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| line_err(line, format!("unknown key '{key}'")))?;
        if let Some(prev) = entries.get(known) {
            return Err(line_err(line, format!("duplicate key '{key}' (first set on line {})", prev.line)));
        }
        entries.insert(known, Entry { line, value: value.to_string() });
    }
    let get = |k: &str| entries.get(k);

    let d = match get("d") {
        Some(e) => {
            let d: usize = number("d", e)?;
            if d != 2 && d != 3 {
                return Err(line_err(e.line, format!("d must be 2 or 3, got {d}")));
            }
            d
        }
        None => DEFAULT_DIM,
    };
    let n: usize = get("N").map(|e| number("N", e)).transpose()?.unwrap_or(DEFAULT_N);
    let length = get("L").map(|e| positive("L", e)).transpose()?.unwrap_or(DEFAULT_LENGTH);
    let grid = Grid::new(d, n, length).map_err(|err| {
        let line = get("N").or(get("L")).or(get("d")).map_or(0, |e| e.line);
        line_err(line, err.to_string())
    })?;

    let dt_max = get("dt_max").map(|e| positive("dt_max", e)).transpose()?.unwrap_or(DEFAULT_DT_MAX);
    let cfl_safety = match get("cfl_safety") {
        Some(e) => {
            let c = positive("cfl_safety", e)?;
            if c > 1.0 {
                return Err(line_err(e.line, format!("cfl_safety must lie in (0, 1], got {c}")));
            }
            c
        }
        None => DEFAULT_CFL_SAFETY,
    };
    let t_end = get("t_end").map(|e| positive("t_end", e)).transpose()?.unwrap_or(DEFAULT_T_END);
    let sample_every = get("sample_every")
        .map(|e| positive("sample_every", e))
        .transpose()?
        .unwrap_or(DEFAULT_SAMPLE_EVERY);
    let preset = match get("preset") {
        Some(e) => {
            crate::presets::builtin_presets()
                .get(&e.value)
                .map_err(|err| line_err(e.line, err.to_string()))?;
            e.value.clone()
        }
        None => DEFAULT_PRESET.to_string(),
    };
    let epsilon = get("epsilon").map(|e| positive("epsilon", e)).transpose()?.unwrap_or(DEFAULT_EPSILON);
    let seed: u64 = get("seed").map(|e| number("seed", e)).transpose()?.unwrap_or(0);

    let mut diagnostics = DiagnosticSettings::for_dim(d);
    if let Some(e) = get("m") {
        diagnostics.m = number("m", e)?;
        if !(diagnostics.m > d as f64 / 2.0 + 1.0) {
            return Err(line_err(e.line, format!("m must exceed d/2+1 = {}", d as f64 / 2.0 + 1.0)));
        }
        if get("s").is_none() {
            diagnostics.s = diagnostics.m - 1.25;
        }
    }
    if let Some(e) = get("s") {
        diagnostics.s = number("s", e)?;
    }
    if !(diagnostics.s > diagnostics.m - 2.0 && diagnostics.s <= diagnostics.m - 1.0) {
        let line = get("s").or(get("m")).map_or(0, |e| e.line);
        return Err(line_err(line, "s must lie in (m-2, m-1]"));
    }

    let channels = match get("channels") {
        Some(e) => {
            let list: Vec<String> = e.value.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
            if list.is_empty() {
                return Err(line_err(e.line, "channels list is empty"));
            }
            Some(list)
        }
        None => None,
    };
    let out_dir = PathBuf::from(get("out_dir").map_or(DEFAULT_OUT_DIR, |e| e.value.as_str()));

    let solver = SolverConfig { grid, dt_max, cfl_safety, t_end, sample_every, preset, epsilon, seed };
    solver.validate()?;
    Ok(RunConfig { solver, diagnostics, channels, out_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.solver.grid, Grid::new(2, 64, 32.0 * PI).unwrap());
        assert_eq!((c.solver.dt_max, c.solver.cfl_safety), (0.05, 0.4));
        assert_eq!((c.diagnostics.m, c.diagnostics.s), (2.5, 1.25));
        assert_eq!(c.solver.preset, "coupled-small");
        assert_eq!(c.channels, None);
    }

    #[test]
    fn round_trip() {
        let text = "d=2\nN=256\nL=402.1239\n# comment\nt_end=400 # trailing\nsample_every=2\nchannels=l2_v, E\nseed=7\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.solver.grid.length(), 402.1239);
        let again = c.to_config_string();
        assert!(again.contains("L=402.1239\n") && again.contains("N=256\n"));
        assert_eq!(parse_config(&again).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config("m=2.5\ns=2.6\n").unwrap_err();
        assert_eq!(err, PensError::ConfigLine { line: 2, message: "s must lie in (m-2, m-1]".into() });
        assert!(err.to_string().contains("s must lie in (m-2, m-1]"));
        assert!(matches!(parse_config("\n\nfoo=1").unwrap_err(), PensError::ConfigLine { line: 3, .. }));
        assert!(matches!(parse_config("N=100").unwrap_err(), PensError::ConfigLine { line: 1, .. }));
        assert!(matches!(parse_config("d=2\nd=3").unwrap_err(), PensError::ConfigLine { line: 2, .. }));
        assert!(matches!(parse_config("t_end").unwrap_err(), PensError::ConfigLine { line: 1, .. }));
        assert!(matches!(parse_config("preset=nope").unwrap_err(), PensError::ConfigLine { line: 1, .. }));
        assert!(matches!(parse_config("dt_max=-1").unwrap_err(), PensError::ConfigLine { line: 1, .. }));
    }

    #[test]
    fn m_default_follows_dimension() {
        let c = parse_config("d=3\nN=8").unwrap();
        assert_eq!((c.diagnostics.m, c.diagnostics.s), (3.0, 1.75));
        let c = parse_config("m=4").unwrap();
        assert_eq!(c.diagnostics.s, 2.75);
    }
}
