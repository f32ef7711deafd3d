// SPDX-License-Identifier: Apache-2.0

//! Run parameters. Values come from, in increasing precedence: built-in
//! defaults, a `--figure` preset, the `--config` TOML file, command-line flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use lrchain::ensemble::Realizations;
use lrchain::model::{CavityParams, ChainSpec, ModelKind};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Energies in units of Ω, times in ħ/Ω.
    Omega,
    /// Energies in eV, times in ħ/eV.
    Ev,
}

impl Units {
    pub fn header(self) -> &'static str {
        match self {
            Units::Omega => {
                "# units: energy=Omega, time=hbar/Omega, current=Omega/hbar, length=sites"
            }
            Units::Ev => "# units: energy=eV, time=hbar/eV, current=eV/hbar, length=sites",
        }
    }

    pub fn energy(self) -> &'static str {
        match self {
            Units::Omega => "Omega",
            Units::Ev => "eV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    LongRange,
    Anderson,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "2a")]
    Fig2a,
    #[value(name = "3a")]
    Fig3a,
}

/// Every tunable value; `None` means "not set at this layer".
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Chain length; a comma-separated list runs each size.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Nearest-neighbour hopping Ω.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Long-range hopping γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Per-emitter cavity coupling g.
    #[arg(long)]
    pub g: Option<f64>,
    /// Collective cavity coupling g_c = √N g (alternative to --g).
    #[arg(long)]
    pub g_c: Option<f64>,
    /// Chain model.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Log-spaced disorder grid `start:stop:count`.
    #[arg(long)]
    pub w_grid: Option<String>,
    /// Explicit disorder values (comma-separated); overrides --w-grid.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    /// Disorder realizations per point.
    #[arg(long, conflicts_with = "budget")]
    pub realizations: Option<usize>,
    /// Realizations per point = budget / N.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Pump rate into the first site.
    #[arg(long)]
    pub gamma_p: Option<f64>,
    /// Drain rate out of the last site.
    #[arg(long)]
    pub gamma_d: Option<f64>,
    /// Lead coupling for the transmission.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Energy units of inputs and outputs.
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    /// Fraction of the chain around the centre whose states enter shape averages.
    #[arg(long)]
    pub window_fraction: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    /// Values of `top` win over `self`.
    pub fn overlay(mut self, top: &Settings) -> Settings {
        if top.realizations.is_some() {
            self.budget = None;
        }
        if top.budget.is_some() {
            self.realizations = None;
        }
        if top.w.is_some() {
            self.w_grid = None;
        }
        if top.w_grid.is_some() {
            self.w = None;
        }
        if top.g.is_some() {
            self.g_c = None;
        }
        if top.g_c.is_some() {
            self.g = None;
        }
        overlay!(
            self,
            top,
            n,
            omega,
            gamma,
            g,
            g_c,
            model,
            w_grid,
            w,
            realizations,
            budget,
            gamma_p,
            gamma_d,
            nu,
            seed,
            threads,
            out_dir,
            units,
            window_fraction
        );
        self
    }

    pub fn from_toml(text: &str) -> Result<Settings, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config file: {e}")))
    }

    pub fn preset(fig: Figure) -> Settings {
        match fig {
            Figure::Fig2a => Settings {
                n: Some(vec![10_000]),
                omega: Some(1.0),
                gamma: Some(1.0),
                gamma_p: Some(1.0),
                gamma_d: Some(1.0),
                model: Some(Model::LongRange),
                w_grid: Some("1e-2:1e6:40".into()),
                realizations: Some(100),
                units: Some(Units::Omega),
                ..Default::default()
            },
            Figure::Fig3a => Settings {
                n: Some(vec![10_000]),
                omega: Some(0.0124),
                g_c: Some(3.188),
                gamma_p: Some(0.0124),
                gamma_d: Some(0.0124),
                model: Some(Model::Cavity),
                w_grid: Some("1e-4:1e4:40".into()),
                budget: Some(1_000_000),
                units: Some(Units::Ev),
                ..Default::default()
            },
        }
    }
}

/// Fully resolved parameters.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub n: Vec<usize>,
    pub omega: f64,
    pub gamma: f64,
    pub model: Model,
    pub w: Vec<f64>,
    pub realizations: Realizations,
    pub gamma_p: f64,
    pub gamma_d: f64,
    pub nu: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub units: Units,
    pub window_fraction: f64,
    /// Per-emitter cavity coupling for each size, when a cavity is involved.
    pub g: Option<Vec<f64>>,
}

pub fn parse_w_grid(s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || ConfigError(format!("--w-grid expects start:stop:count, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let c: usize = parts[2].trim().parse().map_err(|_| bad())?;
    lrchain::ensemble::log_grid(a, b, c).map_err(|e| ConfigError(format!("--w-grid: {e}")))
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError(format!(
            "--{name} must be finite and >= 0, got {v}"
        )))
    }
}

impl Resolved {
    /// `default_w` is used when neither `w` nor `w_grid` is set.
    pub fn from_settings(
        s: &Settings,
        default_n: usize,
        default_w: &str,
        default_realizations: usize,
    ) -> Result<Self, ConfigError> {
        let omega = positive("omega", s.omega.unwrap_or(1.0))?;
        let gamma = non_negative("gamma", s.gamma.unwrap_or(omega))?;
        let n = s.n.clone().unwrap_or_else(|| vec![default_n]);
        if n.is_empty() || n.contains(&0) {
            return Err(ConfigError("--n values must be >= 1".into()));
        }
        let w = match (&s.w, &s.w_grid) {
            (Some(w), _) => w.clone(),
            (None, Some(g)) => parse_w_grid(g)?,
            (None, None) => parse_w_grid(default_w)?,
        };
        if w.is_empty() {
            return Err(ConfigError("no disorder values".into()));
        }
        for &x in &w {
            non_negative("w", x)?;
        }
        let realizations = match (s.realizations, s.budget) {
            (Some(r), _) => Realizations::Fixed(r),
            (None, Some(b)) => Realizations::Budget(b),
            (None, None) => Realizations::Fixed(default_realizations),
        };
        if realizations.count(1) == 0 {
            return Err(ConfigError("need at least one realization".into()));
        }
        let g = match (s.g, s.g_c) {
            (Some(g), _) => Some(n.iter().map(|_| g).collect::<Vec<_>>()),
            (None, Some(gc)) => Some(n.iter().map(|&k| gc / (k as f64).sqrt()).collect()),
            (None, None) => None,
        };
        if let Some(g) = &g {
            for &x in g {
                positive("g", x)?;
            }
        }
        let model = s.model.unwrap_or(Model::LongRange);
        if model == Model::Cavity && g.is_none() {
            return Err(ConfigError("the cavity model needs --g or --g-c".into()));
        }
        if s.threads == Some(0) {
            return Err(ConfigError("--threads must be >= 1".into()));
        }
        let window_fraction = s.window_fraction.unwrap_or(lrchain::analysis::SHAPE_WINDOW);
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(ConfigError("--window-fraction must lie in (0, 1]".into()));
        }
        Ok(Resolved {
            n,
            omega,
            gamma,
            model,
            w,
            realizations,
            gamma_p: non_negative("gamma-p", s.gamma_p.unwrap_or(omega))?,
            gamma_d: non_negative("gamma-d", s.gamma_d.unwrap_or(omega))?,
            nu: non_negative("nu", s.nu.unwrap_or(omega))?,
            seed: s.seed.unwrap_or(1),
            threads: s.threads,
            out_dir: s.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            units: s.units.unwrap_or(Units::Omega),
            window_fraction,
            g,
        })
    }

    pub fn spec(&self, model: Model, i: usize) -> ChainSpec<f64> {
        let n = self.n[i];
        match model {
            Model::LongRange => ChainSpec::long_range(n, self.omega, self.gamma),
            Model::Anderson => ChainSpec::anderson(n, self.omega),
            Model::Cavity => {
                let g = self.g.as_ref().expect("validated")[i];
                ChainSpec::cavity(n, self.omega, CavityParams::with_coupling(g))
            }
        }
    }

    pub fn specs(&self) -> Vec<ChainSpec<f64>> {
        (0..self.n.len())
            .map(|i| self.spec(self.model, i))
            .collect()
    }
}

pub fn model_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Anderson => "anderson",
        ModelKind::LongRange => "long-range",
        ModelKind::Cavity => "cavity",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_preset() {
        let preset = Settings::preset(Figure::Fig2a);
        let file = Settings::from_toml("gamma = 3.0\nrealizations = 5\n").unwrap();
        let flags = Settings {
            budget: Some(1000),
            ..Default::default()
        };
        let s = preset.overlay(&file).overlay(&flags);
        assert_eq!(s.gamma, Some(3.0));
        assert_eq!(s.realizations, None);
        assert_eq!(s.budget, Some(1000));
        assert_eq!(s.n, Some(vec![10_000]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_toml("gama = 1.0").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_w_grid("1e-2:1e6:40").unwrap().len(), 40);
        assert!(parse_w_grid("1:2").is_err());
        assert!(parse_w_grid("0:2:3").is_err());
    }

    #[test]
    fn presets_resolve() {
        let r = Resolved::from_settings(&Settings::preset(Figure::Fig2a), 100, "1:2:2", 1).unwrap();
        assert_eq!(
            (r.n[0], r.gamma, r.gamma_p, r.gamma_d),
            (10_000, 1.0, 1.0, 1.0)
        );
        assert_eq!(r.realizations, Realizations::Fixed(100));
        let r = Resolved::from_settings(&Settings::preset(Figure::Fig3a), 100, "1:2:2", 1).unwrap();
        assert!((r.g.unwrap()[0] - 0.03188).abs() < 1e-12);
        assert_eq!(r.realizations.count(10_000), 100);
    }
}
