//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::PolarGridSpec;
use crate::losses::{LossSchedule, LossTerm};
use crate::pipeline::DecodeParams;
use crate::synth::SuiteConfig;
use crate::tta::TtaConfig;

/// Image size and corruption draws for generated suites.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub height: usize,
    pub width: usize,
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    pub noise: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self { height: 256, width: 256, offsets: vec![0.0], scales: vec![1.0], noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_rho: usize,
    pub n_theta: usize,
    pub mask_threshold: f64,
    pub decode: DecodeParams,
    pub tta: TtaConfig,
    pub schedule: LossSchedule,
    pub synth: SynthSettings,
    /// Std of the noise the oracle adds to its prior logits.
    pub oracle_field_noise: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_rho: 256,
            n_theta: 360,
            mask_threshold: 0.5,
            decode: DecodeParams::default(),
            tta: TtaConfig::default(),
            schedule: LossSchedule::default(),
            synth: SynthSettings::default(),
            oracle_field_noise: 0.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse '{v}'")))
}

fn positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{key} must be > 0, got {v}")));
    }
    Ok(x)
}

fn non_negative(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{key} must be >= 0, got {v}")));
    }
    Ok(x)
}

fn count(key: &str, v: &str, min: usize) -> Result<usize> {
    let x: usize = parse(key, v)?;
    if x < min {
        return Err(Error::InvalidParameter(format!("{key} must be >= {min}, got {x}")));
    }
    Ok(x)
}

fn list(key: &str, v: &str, check: fn(&str, &str) -> Result<f64>) -> Result<Vec<f64>> {
    let xs = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| check(key, s)).collect::<Result<Vec<_>>>()?;
    if xs.is_empty() {
        return Err(Error::InvalidParameter(format!("{key} needs at least one value")));
    }
    Ok(xs)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "n_rho" => self.n_rho = count(key, v, 2)?,
            "n_theta" => self.n_theta = count(key, v, 4)?,
            "mask_threshold" => {
                let t: f64 = parse(key, v)?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::InvalidParameter(format!("mask_threshold must lie in (0, 1), got {v}")));
                }
                self.mask_threshold = t;
            }
            "temperature" => self.decode.temperature = positive(key, v)?,
            "tau" => self.decode.tau = positive(key, v)?,
            "lambda_c" => self.decode.lambda_c = non_negative(key, v)?,
            "tta_offsets" => self.tta.offsets = list(key, v, non_negative)?,
            "tta_scales" => self.tta.scales = list(key, v, positive)?,
            "tta_full_grid" => self.tta.full_grid = parse(key, v)?,
            "tta_top_k" => self.tta.top_k = count(key, v, 1)?,
            "synth_height" => self.synth.height = count(key, v, 8)?,
            "synth_width" => self.synth.width = count(key, v, 8)?,
            "synth_offsets" => self.synth.offsets = list(key, v, non_negative)?,
            "synth_scales" => self.synth.scales = list(key, v, positive)?,
            "synth_noise" => self.synth.noise = non_negative(key, v)?,
            "oracle_field_noise" => self.oracle_field_noise = non_negative(key, v)?,
            _ => {
                let Some(rest) = key.strip_prefix("loss_") else {
                    return Err(Error::InvalidParameter(format!("unknown config key '{key}'")));
                };
                let unknown = || Error::InvalidParameter(format!("unknown config key '{key}'"));
                if let Some(term) = rest.strip_suffix("_weight") {
                    let term: LossTerm = term.parse().map_err(|_| unknown())?;
                    self.schedule.set_weight(term, non_negative(key, v)?)?;
                } else if let Some(term) = rest.strip_suffix("_epoch") {
                    let term: LossTerm = term.parse().map_err(|_| unknown())?;
                    self.schedule.set_epoch(term, parse(key, v)?);
                } else {
                    return Err(unknown());
                }
            }
        }
        Ok(())
    }

    /// Base polar frame for an image of the given size.
    pub fn frame(&self, height: usize, width: usize) -> Result<PolarGridSpec> {
        PolarGridSpec::for_crop(height, width, self.n_rho, self.n_theta)
    }

    pub fn suite(&self, count: usize, seed: u64) -> SuiteConfig {
        SuiteConfig {
            count,
            seed,
            height: self.synth.height,
            width: self.synth.width,
            offsets: self.synth.offsets.clone(),
            scales: self.synth.scales.clone(),
            noise_sigma: self.synth.noise,
        }
    }

    /// Every key with its current value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_rho = {}", self.n_rho);
        let _ = writeln!(s, "n_theta = {}", self.n_theta);
        let _ = writeln!(s, "mask_threshold = {}", self.mask_threshold);
        let _ = writeln!(s, "temperature = {}", self.decode.temperature);
        let _ = writeln!(s, "tau = {}", self.decode.tau);
        let _ = writeln!(s, "lambda_c = {}", self.decode.lambda_c);
        let _ = writeln!(s, "tta_offsets = {}", join(&self.tta.offsets));
        let _ = writeln!(s, "tta_scales = {}", join(&self.tta.scales));
        let _ = writeln!(s, "tta_full_grid = {}", self.tta.full_grid);
        let _ = writeln!(s, "tta_top_k = {}", self.tta.top_k);
        for t in self.schedule.terms() {
            let _ = writeln!(s, "loss_{}_weight = {}", t.term, t.weight);
            let _ = writeln!(s, "loss_{}_epoch = {}", t.term, t.activation_epoch);
        }
        let _ = writeln!(s, "synth_height = {}", self.synth.height);
        let _ = writeln!(s, "synth_width = {}", self.synth.width);
        let _ = writeln!(s, "synth_offsets = {}", join(&self.synth.offsets));
        let _ = writeln!(s, "synth_scales = {}", join(&self.synth.scales));
        let _ = writeln!(s, "synth_noise = {}", self.synth.noise);
        let _ = writeln!(s, "oracle_field_noise = {}", self.oracle_field_noise);
        s
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::InvalidParameter(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::InvalidParameter(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }
}
