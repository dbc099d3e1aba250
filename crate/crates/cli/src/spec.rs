//! Experiment description read from TOML.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use swipt_core::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Objective trace per outer iteration; sweep values are IRS sizes.
    Convergence,
    /// Sweep over the minimum secrecy rate.
    SweepSr,
    /// Sweep over the number of IRS elements.
    SweepN,
    /// One run per method and seed at the base scenario.
    Single,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Convergence => "convergence",
            Mode::SweepSr => "sweep_sr",
            Mode::SweepN => "sweep_n",
            Mode::Single => "single",
        }
    }

    /// Name written to the `variable` column.
    pub fn axis(self) -> &'static str {
        match self {
            Mode::SweepSr | Mode::Single => "r0",
            Mode::Convergence | Mode::SweepN => "n",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convergence" => Mode::Convergence,
            "sweep_sr" => Mode::SweepSr,
            "sweep_n" => Mode::SweepN,
            "single" => Mode::Single,
            _ => bail!("unknown mode {s:?} (expected convergence, sweep_sr, sweep_n or single)"),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sdr,
    Sca,
    /// Uniformly random phases, beamformer optimized.
    RandomPhase,
    /// Reflecting surface removed, beamformer optimized.
    NoIrs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sdr, Method::Sca, Method::RandomPhase, Method::NoIrs];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sdr => "sdr",
            Method::Sca => "sca",
            Method::RandomPhase => "random_phase",
            Method::NoIrs => "no_irs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .with_context(|| format!("unknown method {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub methods: Vec<Method>,
    /// Values of the swept variable; `r0` for `sweep_sr`, IRS sizes for
    /// `sweep_n` and `convergence`. Empty means the base scenario value.
    pub sweep: Vec<f64>,
    /// Instances per sweep point; instance `k` uses seed `scenario.seed + k`.
    pub seeds: usize,
    /// Antenna counts to repeat the experiment for. Empty means
    /// `scenario.antennas` only.
    pub antennas: Vec<usize>,
    pub scenario: ScenarioConfig,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            methods: Method::ALL.to_vec(),
            sweep: Vec::new(),
            seeds: 50,
            antennas: Vec::new(),
            scenario: ScenarioConfig::default(),
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s).context("parsing experiment config")?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("at least one method is required");
        }
        if self.seeds == 0 {
            bail!("at least one seed is required");
        }
        if self.sweep.windows(2).any(|p| !(p[1] > p[0])) {
            bail!("sweep values must be strictly increasing");
        }
        match self.mode {
            Mode::Single if !self.sweep.is_empty() => bail!("single mode takes no sweep values"),
            Mode::SweepSr if self.sweep.iter().any(|&r| !(r > 0.0) || !r.is_finite()) => {
                bail!("secrecy-rate sweep values must be positive")
            }
            Mode::SweepN | Mode::Convergence
                if self
                    .sweep
                    .iter()
                    .any(|&n| n < 0.0 || n.fract() != 0.0 || !n.is_finite()) =>
            {
                bail!("IRS sizes must be non-negative integers")
            }
            _ => {}
        }
        if self.antennas.contains(&0) {
            bail!("antenna counts must be positive");
        }
        self.scenario.validate()?;
        Ok(())
    }

    /// Sweep values with the base scenario filled in when none are given.
    pub fn sweep_values(&self) -> Vec<f64> {
        if !self.sweep.is_empty() {
            return self.sweep.clone();
        }
        match self.mode {
            Mode::SweepSr | Mode::Single => vec![self.scenario.min_secrecy_rate],
            Mode::SweepN | Mode::Convergence => vec![self.scenario.elements as f64],
        }
    }

    pub fn antenna_values(&self) -> Vec<usize> {
        if self.antennas.is_empty() {
            vec![self.scenario.antennas]
        } else {
            self.antennas.clone()
        }
    }

    /// Label for the `variable` column; carries the antenna count when the
    /// experiment repeats over several.
    pub fn variable(&self, antennas: usize) -> String {
        if self.antennas.is_empty() {
            self.mode.axis().to_string()
        } else {
            format!("{}@M{antennas}", self.mode.axis())
        }
    }

    /// Scenario for one run.
    pub fn instance(&self, antennas: usize, sweep: f64, seed: u64) -> ScenarioConfig {
        let mut cfg = self.scenario.clone();
        cfg.antennas = antennas;
        cfg.seed = seed;
        match self.mode {
            Mode::SweepSr | Mode::Single => cfg.min_secrecy_rate = sweep,
            Mode::SweepN | Mode::Convergence => cfg.elements = sweep as usize,
        }
        cfg
    }

    pub fn instance_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(|k| self.scenario.seed.wrapping_add(k))
    }
}
