//! Flat key-value problem configs with one nested list (`target`).
//!
//! ```text
//! modes = 6
//! photons = 4
//! input = 111100
//! pattern = 11
//! target = 0011: 0.70710678118654752,0
//! target = 1100: -0.70710678118654752,0
//! # optional solver overrides: eps_r, eps_t, max_iters, seed, runs, workers, p
//! ```

use anyhow::{anyhow, bail, Context, Result};
use herald_core::herald::HeraldingProblem;
use herald_core::solver::SolverConfig;
use herald_core::C64;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct ProblemConfig {
    pub modes: usize,
    pub photons: usize,
    pub input: Vec<u32>,
    pub pattern: Vec<u32>,
    pub target: Vec<(Vec<u32>, C64)>,
    pub eps_r: Option<f64>,
    pub eps_t: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub workers: Option<usize>,
    pub p_exponent: Option<f64>,
}

pub fn parse_occupation(text: &str, lineno: usize, field: &str) -> Result<Vec<u32>> {
    if text.is_empty() {
        bail!("line {lineno}: field `{field}` is empty");
    }
    text.chars()
        .map(|c| {
            c.to_digit(10)
                .ok_or_else(|| anyhow!("line {lineno}: field `{field}`: `{c}` is not a digit"))
        })
        .collect()
}

fn parse_amplitude(text: &str, lineno: usize) -> Result<C64> {
    let (re, im) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("line {lineno}: amplitude `{text}` is not `re,im`"))?;
    let re: f64 = re
        .trim()
        .parse()
        .map_err(|_| anyhow!("line {lineno}: bad real part `{re}`"))?;
    let im: f64 = im
        .trim()
        .parse()
        .map_err(|_| anyhow!("line {lineno}: bad imaginary part `{im}`"))?;
    Ok(C64::new(re, im))
}

pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig::default();
    let mut saw = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`, got `{line}`"))?;
        let key = key.trim();
        let value = value.trim();
        if key != "target" && !saw.insert(key.to_string()) {
            bail!("line {lineno}: duplicate field `{key}`");
        }
        match key {
            "modes" => cfg.modes = value.parse().context(format!("line {lineno}: modes"))?,
            "photons" => cfg.photons = value.parse().context(format!("line {lineno}: photons"))?,
            "input" => cfg.input = parse_occupation(value, lineno, "input")?,
            "pattern" => cfg.pattern = parse_occupation(value, lineno, "pattern")?,
            "target" => {
                let (occ, amp) = value
                    .split_once(':')
                    .ok_or_else(|| anyhow!("line {lineno}: target needs `occupation: re,im`"))?;
                let occ = parse_occupation(occ.trim(), lineno, "target occupation")?;
                let amp = parse_amplitude(amp.trim(), lineno)?;
                cfg.target.push((occ, amp));
            }
            "eps_r" => cfg.eps_r = Some(value.parse().context(format!("line {lineno}: eps_r"))?),
            "eps_t" => cfg.eps_t = Some(value.parse().context(format!("line {lineno}: eps_t"))?),
            "max_iters" => {
                cfg.max_iters = Some(value.parse().context(format!("line {lineno}: max_iters"))?)
            }
            "seed" => cfg.seed = Some(value.parse().context(format!("line {lineno}: seed"))?),
            "runs" => cfg.runs = Some(value.parse().context(format!("line {lineno}: runs"))?),
            "workers" => {
                cfg.workers = Some(value.parse().context(format!("line {lineno}: workers"))?)
            }
            "p" => cfg.p_exponent = Some(value.parse().context(format!("line {lineno}: p"))?),
            other => bail!("line {lineno}: unknown field `{other}`"),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ProblemConfig) -> Result<()> {
    if cfg.modes == 0 {
        bail!("field `modes` is required and must be positive");
    }
    if cfg.input.len() != cfg.modes {
        bail!(
            "input occupation `{}` has {} modes, expected {}",
            herald_core::fock::occupation_string(&cfg.input),
            cfg.input.len(),
            cfg.modes
        );
    }
    let in_photons: u32 = cfg.input.iter().sum();
    if in_photons as usize != cfg.photons {
        bail!(
            "input carries {in_photons} photons but `photons = {}`",
            cfg.photons
        );
    }
    if cfg.pattern.len() >= cfg.modes {
        bail!(
            "pattern measures {} modes; must leave at least one output mode of {}",
            cfg.pattern.len(),
            cfg.modes
        );
    }
    let m_photons: u32 = cfg.pattern.iter().sum();
    if m_photons as usize > cfg.photons {
        bail!("pattern detects {m_photons} photons, more than the {} available", cfg.photons);
    }
    if cfg.target.is_empty() {
        bail!("at least one `target` line is required");
    }
    let norm: f64 = cfg.target.iter().map(|(_, a)| a.norm_sqr()).sum();
    if (norm.sqrt() - 1.0).abs() > 1e-6 {
        eprintln!(
            "warning: target norm is {:.8}, renormalizing",
            norm.sqrt()
        );
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl ProblemConfig {
    pub fn problem(&self) -> Result<HeraldingProblem> {
        HeraldingProblem::new(
            self.modes,
            self.photons,
            &self.input,
            &self.pattern,
            &self.target,
        )
        .map_err(|e| anyhow!("building heralding problem: {e}"))
    }

    pub fn solver_config(&self, seed_override: Option<u64>) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.eps_r {
            cfg.eps_r = v;
        }
        if let Some(v) = self.eps_t {
            cfg.eps_t = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_outer_iters = v;
        }
        cfg.seed = seed_override.or(self.seed).unwrap_or(0);
        cfg
    }
}
