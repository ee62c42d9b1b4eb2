//! Run configuration: INI-style `key = value` files with `[section]`
//! headers. Unknown sections or keys are rejected by name so typos fail
//! loudly instead of silently running defaults.

use crate::moebius::DEFAULT_WORD_CAP;
use crate::surface::{Polynomial, MAX_RESOLUTION, MIN_RESOLUTION};
use num_complex::Complex64;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `[section]` or `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("bad value for `{key}` in [{section}]: {message}")]
    BadValue {
        section: String,
        key: String,
        message: String,
    },
    #[error("`{key}` in [{section}] out of range: {message}")]
    Range {
        section: String,
        key: String,
        message: String,
    },
}

/// Where the surface group comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceSource {
    Bolza,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SurfaceSource,
    pub resolution: u32,
    pub word_length: u32,
    /// Polynomial specs for the quadratic-differential basis.
    pub basis: Vec<String>,
    pub t: Complex64,
    pub solver_tolerance: f64,
    pub max_newton: u32,
    pub t_max: f64,
    pub r_grid: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub wp_step: f64,
    pub wp_threshold: f64,
    pub rho: String,
    pub grid_extent: f64,
    pub grid_n: u32,
    pub flow_shifts: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: SurfaceSource::Bolza,
            resolution: 64,
            word_length: 6,
            basis: vec![
                "1".to_string(),
                "1+z^2".to_string(),
                "1+z^2+z^4".to_string(),
            ],
            t: Complex64::new(0.0, 0.0),
            solver_tolerance: 1e-10,
            max_newton: 50,
            t_max: 0.5,
            r_grid: vec![
                -8.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0,
            ],
            lambda0: vec![0.5],
            wp_step: 0.05,
            wp_threshold: 0.05,
            rho: "constant:0.25".to_string(),
            grid_extent: 1.2,
            grid_n: 9,
            flow_shifts: vec![0.1, 0.5, 1.0],
            out_dir: PathBuf::from("out"),
            seed: 42,
        }
    }
}

fn parse_number<T: std::str::FromStr>(
    section: &str,
    key: &str,
    raw: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e| ConfigError::BadValue {
        section: section.to_string(),
        key: key.to_string(),
        message: format!("{e}"),
    })
}

fn parse_list(section: &str, key: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',')
        .map(|piece| parse_number(section, key, piece))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = name.trim().to_string();
                match section.as_str() {
                    "surface" | "differentials" | "solver" | "foliate" | "bounds" | "wp"
                    | "epstein" | "output" => {}
                    _ => return Err(ConfigError::UnknownSection(section)),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let unknown = || {
            Err(ConfigError::UnknownKey {
                section: section.to_string(),
                key: key.to_string(),
            })
        };
        match section {
            "surface" => match key {
                "source" => match value {
                    "bolza" => self.source = SurfaceSource::Bolza,
                    "file" => {
                        if !matches!(self.source, SurfaceSource::File(_)) {
                            self.source = SurfaceSource::File(PathBuf::new());
                        }
                    }
                    other => {
                        return Err(ConfigError::BadValue {
                            section: section.to_string(),
                            key: key.to_string(),
                            message: format!("expected `bolza` or `file`, got {other:?}"),
                        })
                    }
                },
                "file" => self.source = SurfaceSource::File(PathBuf::from(value)),
                "resolution" => self.resolution = parse_number(section, key, value)?,
                "word_length" => self.word_length = parse_number(section, key, value)?,
                _ => return unknown(),
            },
            "differentials" => match key {
                "basis" => {
                    self.basis = value.split(',').map(|p| p.trim().to_string()).collect()
                }
                _ => return unknown(),
            },
            "solver" => match key {
                "t_re" => self.t.re = parse_number(section, key, value)?,
                "t_im" => self.t.im = parse_number(section, key, value)?,
                "tolerance" => self.solver_tolerance = parse_number(section, key, value)?,
                "max_newton" => self.max_newton = parse_number(section, key, value)?,
                "t_max" => self.t_max = parse_number(section, key, value)?,
                _ => return unknown(),
            },
            "foliate" => match key {
                "r_grid" => self.r_grid = parse_list(section, key, value)?,
                _ => return unknown(),
            },
            "bounds" => match key {
                "lambda0" => self.lambda0 = parse_list(section, key, value)?,
                _ => return unknown(),
            },
            "wp" => match key {
                "h" => self.wp_step = parse_number(section, key, value)?,
                "threshold" => self.wp_threshold = parse_number(section, key, value)?,
                _ => return unknown(),
            },
            "epstein" => match key {
                "rho" => self.rho = value.to_string(),
                "grid_extent" => self.grid_extent = parse_number(section, key, value)?,
                "grid_n" => self.grid_n = parse_number(section, key, value)?,
                "flow_shifts" => self.flow_shifts = parse_list(section, key, value)?,
                _ => return unknown(),
            },
            "output" => match key {
                "dir" => self.out_dir = PathBuf::from(value),
                "seed" => self.seed = parse_number(section, key, value)?,
                _ => return unknown(),
            },
            "" => {
                return Err(ConfigError::UnknownKey {
                    section: "(none)".to_string(),
                    key: key.to_string(),
                })
            }
            _ => return Err(ConfigError::UnknownSection(section.to_string())),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let range = |section: &str, key: &str, message: String| {
            Err(ConfigError::Range {
                section: section.to_string(),
                key: key.to_string(),
                message,
            })
        };
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&self.resolution) {
            return range(
                "surface",
                "resolution",
                format!(
                    "{} not in {MIN_RESOLUTION}..={MAX_RESOLUTION}",
                    self.resolution
                ),
            );
        }
        if self.word_length > DEFAULT_WORD_CAP {
            return range(
                "surface",
                "word_length",
                format!("{} exceeds the cap {DEFAULT_WORD_CAP}", self.word_length),
            );
        }
        if self.basis.is_empty() {
            return range("differentials", "basis", "empty basis".to_string());
        }
        for spec in &self.basis {
            if let Err(e) = Polynomial::parse(spec) {
                return Err(ConfigError::BadValue {
                    section: "differentials".to_string(),
                    key: "basis".to_string(),
                    message: format!("{e}"),
                });
            }
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance.is_finite()) {
            return range(
                "solver",
                "tolerance",
                format!("{} must be positive", self.solver_tolerance),
            );
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return range("solver", "t_max", format!("{} must be positive", self.t_max));
        }
        if self.max_newton == 0 {
            return range("solver", "max_newton", "must be at least 1".to_string());
        }
        if self.r_grid.is_empty() {
            return range("foliate", "r_grid", "empty grid".to_string());
        }
        if self.r_grid.iter().any(|r| !r.is_finite()) {
            return range("foliate", "r_grid", "entries must be finite".to_string());
        }
        for &l in &self.lambda0 {
            if !(0.0..1.0).contains(&l) {
                return range("bounds", "lambda0", format!("{l} not in [0, 1)"));
            }
        }
        if !(self.wp_step > 0.0 && self.wp_step.is_finite()) {
            return range("wp", "h", format!("{} must be positive", self.wp_step));
        }
        if !(self.wp_threshold > 0.0) {
            return range(
                "wp",
                "threshold",
                format!("{} must be positive", self.wp_threshold),
            );
        }
        if !(self.grid_extent > 0.0 && self.grid_extent.is_finite()) {
            return range(
                "epstein",
                "grid_extent",
                format!("{} must be positive", self.grid_extent),
            );
        }
        if self.grid_n == 0 || self.grid_n > 4096 {
            return range("epstein", "grid_n", format!("{} not in 1..=4096", self.grid_n));
        }
        if self
            .flow_shifts
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return range(
                "epstein",
                "flow_shifts",
                "shifts must be positive".to_string(),
            );
        }
        if let SurfaceSource::File(path) = &self.source {
            if path.as_os_str().is_empty() {
                return Err(ConfigError::BadValue {
                    section: "surface".to_string(),
                    key: "file".to_string(),
                    message: "source is `file` but no path was given".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Polynomial basis parsed from the stored specs.
    pub fn parsed_basis(&self) -> Vec<Polynomial> {
        self.basis
            .iter()
            .map(|s| Polynomial::parse(s).expect("validated at load"))
            .collect()
    }

    /// Command-line overrides applied after file parsing.
    pub fn with_overrides(mut self, out: Option<PathBuf>, seed: Option<u64>) -> Self {
        if let Some(dir) = out {
            self.out_dir = dir;
        }
        if let Some(seed) = seed {
            self.seed = seed;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_an_empty_config() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.resolution, 64);
        assert_eq!(cfg.word_length, 6);
        assert_eq!(cfg.basis.len(), 3);
        assert_eq!(cfg.t, Complex64::new(0.0, 0.0));
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.parsed_basis().len(), 3);
    }

    #[test]
    fn sections_and_values_are_read() {
        let text = "\
# comment
[surface]
source = bolza
resolution = 16
word_length = 4

[solver]
t_re = 0.3
t_im = -0.1

[foliate]
r_grid = -1, 0, 1

[output]
dir = results
seed = 7
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.resolution, 16);
        assert_eq!(cfg.t, Complex64::new(0.3, -0.1));
        assert_eq!(cfg.r_grid, vec![-1.0, 0.0, 1.0]);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let err = RunConfig::parse("[surface]\nresolutionn = 16\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("resolutionn"), "{msg}");
        assert!(msg.contains("surface"), "{msg}");
        let err = RunConfig::parse("[nope]\n").unwrap_err();
        assert!(format!("{err}").contains("nope"));
        let err = RunConfig::parse("stray = 1\n").unwrap_err();
        assert!(format!("{err}").contains("stray"));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(RunConfig::parse("[surface]\nresolution = 4\n").is_err());
        assert!(RunConfig::parse("[surface]\nword_length = 12\n").is_err());
        assert!(RunConfig::parse("[bounds]\nlambda0 = 1.5\n").is_err());
        assert!(RunConfig::parse("[wp]\nh = -0.1\n").is_err());
        assert!(RunConfig::parse("[differentials]\nbasis = 1+q\n").is_err());
        assert!(RunConfig::parse("[surface]\nsource = file\n").is_err());
    }

    #[test]
    fn file_sources_and_overrides() {
        let cfg = RunConfig::parse("[surface]\nsource = file\nfile = gens.txt\n").unwrap();
        assert_eq!(cfg.source, SurfaceSource::File(PathBuf::from("gens.txt")));
        let cfg = cfg.with_overrides(Some(PathBuf::from("elsewhere")), Some(9));
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let err = RunConfig::parse("[surface]\nwhat is this\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 2"), "{msg}");
    }
}
