//! Scenario and solver parameters.
//!
//! Powers are held in watts. The TOML representation writes the noise power in
//! dBm (`noise_dbm`) and converts at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Link distances in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Distances {
    pub ap_irs: f64,
    pub ap_bob: f64,
    pub ap_ehr: f64,
    pub ap_eve: f64,
    pub irs_bob: f64,
    pub irs_ehr: f64,
    pub irs_eve: f64,
}

impl Default for Distances {
    fn default() -> Self {
        Self {
            ap_irs: 8.0,
            ap_bob: 220.0,
            ap_ehr: 6.0,
            ap_eve: 85.0,
            irs_bob: 214.0,
            irs_ehr: 2.0,
            irs_eve: 80.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPhase {
    /// All phase shifts zero (`u = 1`).
    Zero,
    /// Uniform random phases drawn from the solver's generator.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Outer stopping rule: relative harvested-power change below this.
    pub epsilon: f64,
    pub max_outer: usize,
    /// Cap on SCA iterations for the beamformer per outer round.
    pub max_inner_w: usize,
    /// Cap on phase refinements per outer round.
    pub max_inner_u: usize,
    /// Relative improvement below which inner loops stop early.
    pub inner_tol: f64,
    pub bisect_eps: f64,
    /// Gaussian randomization candidates per variable.
    pub randomizations: usize,
    /// Relative duality gap for the SDR subproblems.
    pub sdp_tol: f64,
    pub init_phase: InitPhase,
    /// Independent AO runs; the first starts from `init_phase`, the others from
    /// random phases. The best run is returned.
    pub starts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_outer: 100,
            max_inner_w: 30,
            max_inner_u: 30,
            inner_tol: 1e-6,
            bisect_eps: 1e-8,
            randomizations: 1000,
            sdp_tol: 1e-8,
            init_phase: InitPhase::Zero,
            starts: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Transmit antennas at the access point.
    pub antennas: usize,
    /// Reflecting elements; zero means no IRS.
    pub elements: usize,
    /// Transmit power budget in watts.
    pub tx_power: f64,
    /// Receiver noise power in watts (common to all receivers).
    #[serde(rename = "noise_dbm", with = "dbm")]
    pub noise_power: f64,
    pub harvest_efficiency: f64,
    /// Minimum secrecy rate in bits/s/Hz.
    pub min_secrecy_rate: f64,
    pub distances: Distances,
    pub alpha_direct: f64,
    pub alpha_irs: f64,
    pub pl_ref_db: f64,
    /// Departure angle of the AP->IRS line-of-sight path at the AP array.
    pub aod_deg: f64,
    /// Arrival angle of the AP->IRS path at the IRS array.
    pub aoa_deg: f64,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 4,
            elements: 50,
            tx_power: 15.0,
            noise_power: dbm_to_watts(-70.0),
            harvest_efficiency: 0.5,
            min_secrecy_rate: 1.0,
            distances: Distances::default(),
            alpha_direct: 3.0,
            alpha_irs: 2.0,
            pl_ref_db: 30.0,
            aod_deg: 30.0,
            aoa_deg: 60.0,
            seed: 1,
            solver: SolverSettings::default(),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

mod dbm {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::watts_to_dbm(*w))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(super::dbm_to_watts)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if self.antennas == 0 {
            return bad("antennas must be at least 1");
        }
        if !(self.tx_power > 0.0) || !(self.noise_power > 0.0) {
            return bad("powers must be positive");
        }
        if !(self.harvest_efficiency > 0.0 && self.harvest_efficiency <= 1.0) {
            return bad("harvest efficiency must lie in (0, 1]");
        }
        if !(self.min_secrecy_rate > 0.0) || !self.min_secrecy_rate.is_finite() {
            return bad("minimum secrecy rate must be positive");
        }
        let d = &self.distances;
        if [d.ap_irs, d.ap_bob, d.ap_ehr, d.ap_eve, d.irs_bob, d.irs_ehr, d.irs_eve]
            .iter()
            .any(|&x| !(x > 0.0) || !x.is_finite())
        {
            return bad("distances must be positive");
        }
        if ![
            self.alpha_direct,
            self.alpha_irs,
            self.pl_ref_db,
            self.aod_deg,
            self.aoa_deg,
        ]
        .iter()
        .all(|x| x.is_finite())
        {
            return bad("non-finite propagation parameter");
        }
        let s = &self.solver;
        if !(s.epsilon > 0.0) || !(s.inner_tol > 0.0) || !(s.bisect_eps > 0.0) || !(s.sdp_tol > 0.0) {
            return bad("solver tolerances must be positive");
        }
        if s.max_outer == 0 || s.max_inner_w == 0 || s.max_inner_u == 0 || s.starts == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }

    /// Threshold `2^{r0}` on the SINR ratio implied by the secrecy constraint.
    pub fn rate_factor(&self) -> f64 {
        self.min_secrecy_rate.exp2()
    }
}
