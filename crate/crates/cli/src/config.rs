use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sine,
    Sheet,
    Rescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub profile: Option<ProfileSpec>,
    pub n: Option<usize>,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub eps_count: Option<usize>,
    pub eps_hat: Option<f64>,
    pub tau_decades: Option<u32>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub k: Option<f64>,
    pub k_list: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub parallel: Option<bool>,
    pub warm_start: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Profile family.
    #[arg(long, value_enum)]
    pub profile: Option<Family>,
    /// Sine profile parameter.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Rescaling factor (rescaled profile, glue).
    #[arg(long)]
    pub k: Option<f64>,
    /// Wavenumber scales for the sheet scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<f64>>,
    /// Interior grid points.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long)]
    pub eps_count: Option<usize>,
    /// Scaled perturbation, eps = eps_hat k^2.
    #[arg(long)]
    pub eps_hat: Option<f64>,
    /// Number of decades in the tau sequence 1e-1, ..., 1e-d (2 to 5).
    #[arg(long)]
    pub tau_decades: Option<u32>,
    /// Inner cutoff scale.
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub no_warm_start: bool,
    /// JSON configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run configuration, written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub profile: Option<ProfileSpec>,
    pub n: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_count: usize,
    pub eps_hat: f64,
    pub tau_decades: u32,
    #[serde(rename = "L")]
    pub l: f64,
    pub k: f64,
    pub k_list: Vec<f64>,
    pub tol: f64,
    pub out_dir: PathBuf,
    pub parallel: bool,
    pub warm_start: bool,
}

impl RunConfig {
    pub fn resolve(command: &str, args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut profile = file.profile.clone();
        if let Some(family) = args.profile {
            if profile.as_ref().map(|p| p.family) != Some(family) {
                profile = Some(ProfileSpec { family, beta: None, k: None });
            }
        }
        if let Some(p) = profile.as_mut() {
            p.beta = args.beta.or(p.beta);
            p.k = args.k.or(p.k).or(file.k);
            match p.family {
                Family::Sine => {
                    p.beta = Some(p.beta.unwrap_or(2.0));
                    p.k = None;
                }
                Family::Rescaled => {
                    if p.k.is_none() {
                        return Err(CliError::Usage("the rescaled profile needs --k".into()));
                    }
                    p.beta = None;
                }
                Family::Sheet => {
                    p.beta = None;
                    p.k = None;
                }
            }
        }
        let default_n = if command == "dispersion" { 16384 } else { 2000 };
        let cfg = RunConfig {
            command: command.into(),
            profile,
            n: args.n.or(file.n).unwrap_or(default_n),
            eps_min: args.eps_min.or(file.eps_min).unwrap_or(1e-3),
            eps_max: args.eps_max.or(file.eps_max).unwrap_or(5e-2),
            eps_count: args.eps_count.or(file.eps_count).unwrap_or(20),
            eps_hat: args.eps_hat.or(file.eps_hat).unwrap_or(0.02),
            tau_decades: args.tau_decades.or(file.tau_decades).unwrap_or(4),
            l: args.l.or(file.l).unwrap_or(32.0),
            k: args.k.or(file.k).unwrap_or(8.0),
            k_list: args.k_list.clone().or(file.k_list).unwrap_or_else(|| vec![8.0, 16.0, 32.0]),
            tol: args.tol.or(file.tol).unwrap_or(1e-10),
            out_dir: args.out_dir.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from(".")),
            parallel: args.parallel || file.parallel.unwrap_or(false),
            warm_start: !args.no_warm_start && file.warm_start.unwrap_or(true),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = [
            ("eps-min", self.eps_min),
            ("eps-max", self.eps_max),
            ("eps-hat", self.eps_hat),
            ("L", self.l),
            ("k", self.k),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(p) = &self.profile {
            for v in [p.beta, p.k].into_iter().flatten() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Usage(format!("profile parameters must be positive, got {v}")));
                }
            }
        }
        if self.n < 3 {
            return Err(CliError::Usage(format!("n must be at least 3, got {}", self.n)));
        }
        if self.eps_count == 0 || (self.eps_count > 1 && !(self.eps_max > self.eps_min)) {
            return Err(CliError::Usage("the eps grid must be increasing".into()));
        }
        if !(2..=5).contains(&self.tau_decades) {
            return Err(CliError::Usage(format!("tau-decades must lie in 2..=5, got {}", self.tau_decades)));
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|k| !(*k > 0.0)) || self.k_list.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Usage("k-list must be positive and increasing".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<&ProfileSpec, CliError> {
        self.profile.as_ref().ok_or_else(|| CliError::Usage(format!("{} needs --profile sine|sheet|rescaled", self.command)))
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        if self.eps_count == 1 {
            return vec![self.eps_min];
        }
        let (a, b) = (self.eps_min.ln(), self.eps_max.ln());
        let m = (self.eps_count - 1) as f64;
        (0..self.eps_count).map(|i| (a + (b - a) * i as f64 / m).exp()).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        (1..=self.tau_decades as i32).map(|d| 10f64.powi(-d)).collect()
    }
}
