//! Run configuration: config-file reader, flag merging and the number
//! grammar shared by `--dt`, `--dt-list` and `--dt-ref`.
//!
//! A config file holds `key = value` lines. Keys are the long flag names
//! (`dt-list` and `dt_list` are the same key). A `[command]` section header
//! scopes the following keys to that command; keys before any header, or
//! under `[common]`, apply to every command. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

pub const KEYS: [&str; 14] = [
    "model", "scheme", "dt", "dt-list", "dt-ref", "T", "paths", "seed", "q", "rho", "x0", "threshold", "out",
    "workers",
];

pub const WORKERS_ENV: &str = "VTEM_WORKERS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    Converge,
    Stability,
    ListModels,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::Stability => "stability",
            Command::ListModels => "list-models",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Validate => &["model"],
            Command::Simulate => &["model", "dt", "T"],
            Command::Converge => &["model", "dt-list", "dt-ref", "paths"],
            Command::Stability => &["model", "dt", "T", "paths"],
            Command::ListModels => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Truncated,
    Classical,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: String,
    pub scheme: SchemeChoice,
    pub dt: Option<f64>,
    pub dt_list: Vec<f64>,
    pub dt_ref: Option<f64>,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub q: f64,
    pub rho: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Key-value entries from a config file, with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl FileValues {
    pub fn get(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.get(key)
    }
}

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('_', "-");
    let k = if k.eq_ignore_ascii_case("t") || k == "horizon" { "T".to_string() } else { k };
    KEYS.iter().copied().find(|&known| known == k)
}

/// Reads the entries relevant to `command` from config-file text.
pub fn parse_config(text: &str, command: Command) -> Result<FileValues, ConfigError> {
    // key -> (value, line) for the common scope and the command's own section
    let mut common: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut scoped: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut section: Option<String> = None;
    // duplicates are errors per section, including sections for other commands
    let mut seen: BTreeMap<(Option<String>, String), usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(format!("line {lineno}: unterminated section header"));
            };
            let name = name.trim();
            section = match name {
                "" => return err(format!("line {lineno}: empty section name")),
                "common" => None,
                n => Some(n.to_string()),
            };
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {lineno}: expected `key = value`, found `{line}`"));
        };
        let Some(key) = canonical_key(k) else {
            return err(format!("line {lineno}: unknown key `{}`", k.trim()));
        };
        let value = v.trim().trim_matches('"').to_string();
        if value.is_empty() {
            return err(format!("line {lineno}: empty value for `{key}`"));
        }
        if let Some(first) = seen.insert((section.clone(), key.to_string()), lineno) {
            return err(format!("duplicate key `{key}` on lines {first} and {lineno}"));
        }
        match &section {
            None => {
                common.insert(key.to_string(), (value, lineno));
            }
            Some(s) if s == command.name() => {
                scoped.insert(key.to_string(), (value, lineno));
            }
            Some(_) => {}
        }
    }
    common.extend(scoped);
    Ok(FileValues { entries: common })
}

/// Parses `2.5e-3`, `2^-6` or `b^e` with numeric base and exponent.
pub fn parse_number(text: &str) -> Result<f64, ConfigError> {
    let t = text.trim();
    let v = match t.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| ConfigError(format!("bad number `{t}`")))?;
            let e: f64 = e.trim().parse().map_err(|_| ConfigError(format!("bad number `{t}`")))?;
            // integer powers of two stay exact
            if e.fract() == 0.0 && e.abs() < 1000.0 {
                b.powi(e as i32)
            } else {
                b.powf(e)
            }
        }
        None => t.parse().map_err(|_| ConfigError(format!("bad number `{t}`")))?,
    };
    if !v.is_finite() {
        return err(format!("`{t}` is not finite"));
    }
    Ok(v)
}

/// `2^-6..2^-12` (every power of two in between, either order) or a comma list.
pub fn parse_dt_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once("..") {
        let exp = |s: &str| -> Result<i32, ConfigError> {
            let s = s.trim();
            let e = s
                .strip_prefix("2^")
                .and_then(|e| e.trim().parse::<i32>().ok())
                .ok_or_else(|| ConfigError(format!("range endpoints must look like 2^-k, found `{s}`")))?;
            Ok(e)
        };
        let (lo, hi) = (exp(a)?, exp(b)?);
        let list: Vec<f64> = if lo >= hi {
            (hi..=lo).rev().map(|k| 2f64.powi(k)).collect()
        } else {
            (lo..=hi).map(|k| 2f64.powi(k)).collect()
        };
        return Ok(list);
    }
    let list = t
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_number)
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return err("empty dt list");
    }
    Ok(list)
}

fn parse_vector(text: &str) -> Result<Vec<f64>, ConfigError> {
    let body = text.trim().trim_start_matches('(').trim_end_matches(')');
    let v = body
        .split(',')
        .map(parse_number)
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return err("empty initial state");
    }
    Ok(v)
}

/// Values given on the command line, as raw strings keyed like the file.
#[derive(Debug, Clone, Default)]
pub struct FlagValues(pub BTreeMap<&'static str, String>);

/// Merges flags over file values and checks what `command` needs.
/// `env_workers` is the worker count from the environment, used only when
/// neither source sets one.
pub fn resolve(
    command: Command,
    flags: &FlagValues,
    file: &FileValues,
    env_workers: Option<&str>,
) -> Result<RunConfig, ConfigError> {
    let lookup = |key: &str| -> Option<(String, String)> {
        if let Some(v) = flags.0.get(key) {
            return Some((v.clone(), format!("--{key}")));
        }
        file.get(key).map(|(v, line)| (v.clone(), format!("`{key}` on line {line}")))
    };
    for key in command.required() {
        if lookup(key).is_none() {
            return err(format!("`{}` needs `{key}` (flag --{key} or config key)", command.name()));
        }
    }
    let with_origin = |origin: String, e: ConfigError| ConfigError(format!("{origin}: {}", e.0));
    let number = |key: &str| -> Result<Option<f64>, ConfigError> {
        match lookup(key) {
            None => Ok(None),
            Some((v, origin)) => parse_number(&v).map(Some).map_err(|e| with_origin(origin, e)),
        }
    };
    let integer = |key: &str| -> Result<Option<u64>, ConfigError> {
        match lookup(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .trim()
                .parse::<u64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("{origin}: `{v}` is not a non-negative integer"))),
        }
    };
    let positive = |key: &str, v: Option<f64>| -> Result<Option<f64>, ConfigError> {
        match v {
            Some(x) if !(x > 0.0) => err(format!("`{key}` must be positive, got {x}")),
            other => Ok(other),
        }
    };

    let scheme = match lookup("scheme") {
        None => SchemeChoice::Truncated,
        Some((v, origin)) => match v.trim() {
            "truncated" | "vtem" => SchemeChoice::Truncated,
            "classical" | "em" => SchemeChoice::Classical,
            other => return err(format!("{origin}: unknown scheme `{other}` (truncated or classical)")),
        },
    };
    let dt_list = match lookup("dt-list") {
        None => Vec::new(),
        Some((v, origin)) => parse_dt_list(&v).map_err(|e| with_origin(origin, e))?,
    };
    if dt_list.iter().any(|&d| !(d > 0.0)) {
        return err("every step in `dt-list` must be positive");
    }
    let x0 = match lookup("x0") {
        None => None,
        Some((v, origin)) => Some(parse_vector(&v).map_err(|e| with_origin(origin, e))?),
    };
    let workers = match integer("workers")? {
        Some(w) => Some(w as usize),
        None => match env_workers {
            Some(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("{WORKERS_ENV}=`{v}` is not a non-negative integer")))?,
            ),
            _ => None,
        },
    };
    if workers == Some(0) {
        return err("`workers` must be at least 1");
    }
    let paths = integer("paths")?.unwrap_or(1) as usize;
    if paths == 0 {
        return err("`paths` must be at least 1");
    }

    Ok(RunConfig {
        command,
        model: lookup("model").map(|(v, _)| v).unwrap_or_default(),
        scheme,
        dt: positive("dt", number("dt")?)?,
        dt_list,
        dt_ref: positive("dt-ref", number("dt-ref")?)?,
        horizon: positive("T", number("T")?)?.unwrap_or(1.0),
        paths,
        seed: integer("seed")?.unwrap_or(0),
        q: positive("q", number("q")?)?.unwrap_or(1.0),
        rho: positive("rho", number("rho")?)?,
        x0,
        threshold: positive("threshold", number("threshold")?)?.unwrap_or(1.0),
        out: lookup("out").map(|(v, _)| PathBuf::from(v)),
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&'static str, &str)]) -> FlagValues {
        FlagValues(pairs.iter().map(|&(k, v)| (k, v.to_string())).collect())
    }

    #[test]
    fn power_range_expands_both_ways() {
        let down = parse_dt_list("2^-6..2^-12").unwrap();
        assert_eq!(down.len(), 7);
        assert_eq!(down[0], 1.0 / 64.0);
        assert_eq!(down[6], 1.0 / 4096.0);
        let up = parse_dt_list("2^-3..2^-1").unwrap();
        assert_eq!(up, vec![0.125, 0.25, 0.5]);
        assert_eq!(parse_dt_list("0.1, 2^-4").unwrap(), vec![0.1, 0.0625]);
        assert!(parse_dt_list("0.1..0.2").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("2^-16").unwrap(), 1.0 / 65536.0);
        assert_eq!(parse_number(" 5e-3 ").unwrap(), 0.005);
        assert!(parse_number("2^x").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn flag_beats_file() {
        let file = parse_config("model = scalar-cubic\ndt = 0.005\nT = 2\n", Command::Simulate).unwrap();
        let cfg = resolve(Command::Simulate, &flags(&[("dt", "0.001")]), &file, None).unwrap();
        assert_eq!(cfg.dt, Some(0.001));
        assert_eq!(cfg.horizon, 2.0);
    }

    #[test]
    fn sections_scope_keys() {
        let text = "model = scalar-cubic\n[stability]\ndt = 0.005\n[converge]\ndt = 0.01\n";
        let s = parse_config(text, Command::Stability).unwrap();
        assert_eq!(s.get("dt").unwrap().0, "0.005");
        let v = parse_config(text, Command::Validate).unwrap();
        assert!(v.get("dt").is_none());
        assert_eq!(v.get("model").unwrap().1, 1);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let e = parse_config("dt = 1\n# note\ndt_list = 2^-1..2^-2\ndt = 2\n", Command::Simulate).unwrap_err();
        assert!(e.0.contains("lines 1 and 4"), "{e}");
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        assert!(parse_config("model = a\nnonsense\n", Command::Validate).unwrap_err().0.contains("line 2"));
        assert!(parse_config("colour = red\n", Command::Validate).unwrap_err().0.contains("line 1"));
        assert!(parse_config("[oops\n", Command::Validate).unwrap_err().0.contains("line 1"));
    }

    #[test]
    fn missing_required_key() {
        let e = resolve(Command::Converge, &flags(&[("model", "scalar-cubic")]), &FileValues::default(), None)
            .unwrap_err();
        assert!(e.0.contains("dt-list"), "{e}");
    }

    #[test]
    fn workers_from_environment_is_the_fallback() {
        let file = parse_config("workers = 3", Command::ListModels).unwrap();
        let cfg = resolve(Command::ListModels, &FlagValues::default(), &file, Some("2")).unwrap();
        assert_eq!(cfg.workers, Some(3));
        let cfg = resolve(Command::ListModels, &FlagValues::default(), &FileValues::default(), Some("2")).unwrap();
        assert_eq!(cfg.workers, Some(2));
        assert!(resolve(Command::ListModels, &FlagValues::default(), &FileValues::default(), Some("x")).is_err());
    }

    #[test]
    fn bad_values_name_their_origin() {
        let file = parse_config("model = m\n\ndt = fast\nT = 1\n", Command::Simulate).unwrap();
        let e = resolve(Command::Simulate, &FlagValues::default(), &file, None).unwrap_err();
        assert!(e.0.contains("line 3"), "{e}");
    }
}
