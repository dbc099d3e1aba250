//! Fixed instances shared by the benchmarks.

use swipt_core::linalg::CVector;
use swipt_core::metrics::{max_sr_beamformer, whiten};
use swipt_core::{ChannelSet, ScenarioConfig};

/// Default scenario with `m` antennas and `n` elements.
pub fn instance(m: usize, n: usize, seed: u64) -> (ChannelSet, ScenarioConfig) {
    let cfg = ScenarioConfig {
        antennas: m,
        elements: n,
        seed,
        ..ScenarioConfig::default()
    };
    let ch = ChannelSet::generate(&cfg).expect("valid scenario");
    (ch, cfg)
}

/// Feasible starting beamformer at `u = 1`.
pub fn start_point(ch: &ChannelSet, cfg: &ScenarioConfig) -> (CVector, CVector) {
    let u = CVector::from_element(ch.elements(), swipt_core::C64::new(1.0, 0.0));
    let (wch, wcfg) = whiten(ch, cfg);
    let (w, _) = max_sr_beamformer(&u, &wch, &wcfg).expect("feasible");
    (w, u)
}
