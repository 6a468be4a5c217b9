//! Configuration resolution: flat `key=value` files with command-line
//! overrides.  Every value is validated before dispatch; unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config values, bad parameter combinations (exit 1).
    Validation(String),
    /// Filesystem trouble (exit 3).
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<oat_echo::Error> for CliError {
    fn from(e: oat_echo::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "sigma",
    "Sigma",
    "mu-range",
    "nu-range",
    "grid",
    "out",
    "format",
    "threads",
    "quick",
    "mu-count",
    "nu-count",
    "n-list",
    "classes",
    "synthetic",
    "mu",
    "phi",
    "theta-count",
    "phi-count",
];

/// Parsed `key=value` file.  Lines starting with `#` and blank lines are
/// skipped.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "config line {} is not key=value: '{line}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Validation(format!(
                    "unknown config key '{key}' on line {}",
                    lineno + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    /// CLI value wins, then the file, then the default.
    pub fn resolve<T>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| {
                CliError::Validation(format!("config key '{key}': cannot parse '{raw}': {e}"))
            }),
            None => Ok(default),
        }
    }

    /// Like [`FileConfig::resolve`] but without a default.
    pub fn resolve_opt<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Validation(format!("config key '{key}': cannot parse '{raw}': {e}"))
            }),
            None => Ok(None),
        }
    }
}

/// `lo:hi` range argument.
#[derive(Debug, Clone, Copy)]
pub struct RangeArg {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
        let lo: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
        let hi: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(format!("range {lo}:{hi} is empty or non-finite"));
        }
        Ok(RangeArg { lo, hi })
    }
}

impl fmt::Display for RangeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// `MxK` grid-resolution argument.
#[derive(Debug, Clone, Copy)]
pub struct GridArg {
    pub mu_count: usize,
    pub nu_count: usize,
}

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('x')
            .ok_or_else(|| format!("expected MUxNU (e.g. 257x513), got '{s}'"))?;
        let mu_count: usize = a.trim().parse().map_err(|_| format!("bad count '{a}'"))?;
        let nu_count: usize = b.trim().parse().map_err(|_| format!("bad count '{b}'"))?;
        if mu_count < 2 || nu_count < 2 {
            return Err(format!("grid {mu_count}x{nu_count} too small"));
        }
        Ok(GridArg { mu_count, nu_count })
    }
}

impl fmt::Display for GridArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.mu_count, self.nu_count)
    }
}

/// Comma-separated list of floats.
#[derive(Debug, Clone)]
pub struct F64List(pub Vec<f64>);

impl FromStr for F64List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|_| format!("bad float list '{s}'"))?;
        if vals.is_empty() {
            return Err("empty list".to_string());
        }
        Ok(F64List(vals))
    }
}

/// Comma-separated list of particle numbers.
#[derive(Debug, Clone)]
pub struct U32List(pub Vec<u32>);

impl FromStr for U32List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Result<Vec<u32>, _> = s.split(',').map(|p| p.trim().parse::<u32>()).collect();
        let vals = vals.map_err(|_| format!("bad integer list '{s}'"))?;
        if vals.is_empty() {
            return Err("empty list".to_string());
        }
        Ok(U32List(vals))
    }
}

/// `c,alpha` pair for synthetic power-law injection.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawArg {
    pub c: f64,
    pub alpha: f64,
}

impl FromStr for PowerLawArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("expected c,alpha, got '{s}'"))?;
        let c: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
        let alpha: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
        if c <= 0.0 || c.is_nan() || !alpha.is_finite() {
            return Err(format!("need c > 0 and finite alpha, got {c}, {alpha}"));
        }
        Ok(PowerLawArg { c, alpha })
    }
}
