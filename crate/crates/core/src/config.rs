//! `key = value` configuration for grid and benchmark defaults.
//!
//! Recognized keys: `x_min x_max y_min y_max cell channels state_size h w c
//! repeats warmup k_list threads seed memory_cap`. Blank lines and `#`
//! comments are ignored. `COMAMBA_THREADS` overrides `threads`.

use std::path::Path;
use std::str::FromStr;

use crate::attention::DEFAULT_MEMORY_CAP;
use crate::error::{Error, Result};
use crate::pipeline::GridConfig;

pub const THREADS_ENV: &str = "COMAMBA_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub state_size: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub k_list: Vec<usize>,
    pub threads: usize,
    pub seed: u64,
    pub memory_cap: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            state_size: 16,
            h: 32,
            w: 32,
            c: 64,
            repeats: 5,
            warmup: 1,
            k_list: vec![1, 2, 4, 6, 8, 12, 16],
            threads: 1,
            seed: 0,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, reason: format!("bad value {v:?} for {key}") })
}

pub fn parse_k_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad agent count {p:?}")))
        .collect::<std::result::Result<_, _>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err("agent counts must be >= 1".into());
    }
    Ok(ks)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Parse { line, reason: format!("expected key = value, got {content:?}") });
            };
            let (k, v) = (k.trim(), v.trim());
            match k {
                "x_min" => cfg.grid.x_range.0 = value(line, k, v)?,
                "x_max" => cfg.grid.x_range.1 = value(line, k, v)?,
                "y_min" => cfg.grid.y_range.0 = value(line, k, v)?,
                "y_max" => cfg.grid.y_range.1 = value(line, k, v)?,
                "cell" => cfg.grid.cell = value(line, k, v)?,
                "channels" => cfg.grid.channels = value(line, k, v)?,
                "state_size" => cfg.state_size = value(line, k, v)?,
                "h" => cfg.h = value(line, k, v)?,
                "w" => cfg.w = value(line, k, v)?,
                "c" => cfg.c = value(line, k, v)?,
                "repeats" => cfg.repeats = value(line, k, v)?,
                "warmup" => cfg.warmup = value(line, k, v)?,
                "k_list" => cfg.k_list = parse_k_list(v).map_err(|reason| Error::Parse { line, reason })?,
                "threads" => cfg.threads = value(line, k, v)?,
                "seed" => cfg.seed = value(line, k, v)?,
                "memory_cap" => cfg.memory_cap = value(line, k, v)?,
                _ => return Err(Error::Parse { line, reason: format!("unknown key {k:?}") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.state_size == 0 || self.h == 0 || self.w == 0 || self.c == 0 {
            return Err(Error::Validation("state_size, h, w and c must be >= 1".into()));
        }
        if self.repeats == 0 || self.threads == 0 {
            return Err(Error::Validation("repeats and threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Applies a thread-count override as read from [`THREADS_ENV`].
    pub fn apply_threads_override(&mut self, env_value: Option<&str>) -> Result<()> {
        if let Some(v) = env_value {
            self.threads = match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => return Err(Error::Validation(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            };
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_threads_override(std::env::var(THREADS_ENV).ok().as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!((c.h, c.w, c.c, c.state_size), (32, 32, 64, 16));
        assert_eq!((c.grid.height(), c.grid.width()), (100, 350));
        assert_eq!(c.threads, 1);
    }

    #[test]
    fn parses_keys() {
        let c = Config::parse("# shrunk grid\nx_min = -8\nx_max=8\ny_min=-4\ny_max = 4\ncell = 0.5 # m\nk_list = 1, 3,5\nrepeats=7\n").unwrap();
        assert_eq!((c.grid.width(), c.grid.height()), (32, 16));
        assert_eq!(c.k_list, vec![1, 3, 5]);
        assert_eq!(c.repeats, 7);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(Config::parse("\ncolour = red"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Config::parse("h = -1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Config::parse("k_list = 1,0"), Err(Error::Parse { .. })));
        assert!(matches!(Config::parse("just words"), Err(Error::Parse { .. })));
        assert!(Config::parse("x_min = 200").is_err());
    }

    #[test]
    fn threads_override() {
        let mut c = Config::default();
        c.apply_threads_override(Some("4")).unwrap();
        assert_eq!(c.threads, 4);
        c.apply_threads_override(None).unwrap();
        assert_eq!(c.threads, 4);
        assert!(c.apply_threads_override(Some("zero")).is_err());
        assert!(c.apply_threads_override(Some("0")).is_err());
    }
}
