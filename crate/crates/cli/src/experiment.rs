//! Batch runner: one job per (method, antenna count, sweep value, seed).

use std::time::Instant;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swipt_core::sca::random_phases;
use swipt_core::{fixed_phase_beamforming, sca_ao, sdr_ao, CVector, ChannelSet, ScenarioConfig, SolveResult};

use crate::spec::{ExperimentSpec, Method};

/// One CSV line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub sweep: f64,
    pub variable: String,
    pub harvested_w: f64,
    pub sr_bps_hz: f64,
    pub iters: usize,
    pub seconds: f64,
    pub status: String,
}

impl ResultRow {
    /// Statuses that count as a successful run.
    pub fn succeeded(&self) -> bool {
        matches!(self.status.as_str(), "converged" | "max_iters")
    }
}

/// A row plus what the row was computed from.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub antennas: usize,
    pub elements: usize,
    pub trace: Vec<f64>,
    pub inner_iters: (usize, usize),
    pub w: CVector,
    pub u: CVector,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Write zero in the `seconds` column so that repeated runs are
    /// byte-identical.
    pub no_timing: bool,
}

/// Runs `method` on the instance described by `cfg`.
pub fn run_method(method: Method, cfg: &ScenarioConfig) -> swipt_core::Result<(SolveResult, ChannelSet)> {
    let channels = ChannelSet::generate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let result = match method {
        Method::Sdr => sdr_ao(&channels, cfg, &mut rng)?,
        Method::Sca => sca_ao(&channels, cfg, &mut rng)?,
        Method::RandomPhase => {
            let u = random_phases(channels.elements(), &mut rng);
            fixed_phase_beamforming(&channels, cfg, &u)?
        }
        Method::NoIrs => {
            let bare = channels.without_irs();
            let r = fixed_phase_beamforming(&bare, cfg, &CVector::zeros(0))?;
            return Ok((r, bare));
        }
    };
    Ok((result, channels))
}

struct Job {
    method: usize,
    antennas: usize,
    sweep: usize,
    seed: u64,
}

/// Runs every job of `spec` on the rayon pool; outcomes come back sorted by
/// (method, antennas, sweep, seed) regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<RunOutcome>> {
    spec.validate()?;
    let sweep = spec.sweep_values();
    let antennas = spec.antenna_values();
    let mut jobs = Vec::new();
    for method in 0..spec.methods.len() {
        for (a, _) in antennas.iter().enumerate() {
            for s in 0..sweep.len() {
                for seed in spec.instance_seeds() {
                    jobs.push(Job {
                        method,
                        antennas: a,
                        sweep: s,
                        seed,
                    });
                }
            }
        }
    }
    log::info!("{} runs ({} mode)", jobs.len(), spec.mode);

    let mut done: Vec<((usize, usize, usize, u64), RunOutcome)> = jobs
        .par_iter()
        .map(|job| {
            let method = spec.methods[job.method];
            let m = antennas[job.antennas];
            let value = sweep[job.sweep];
            let cfg = spec.instance(m, value, job.seed);
            let start = Instant::now();
            let outcome = run_method(method, &cfg);
            let seconds = if opts.no_timing {
                0.0
            } else {
                start.elapsed().as_secs_f64()
            };
            let mut row = ResultRow {
                method,
                seed: job.seed,
                sweep: value,
                variable: spec.variable(m),
                harvested_w: 0.0,
                sr_bps_hz: 0.0,
                iters: 0,
                seconds,
                status: "error".into(),
            };
            let outcome = match outcome {
                Ok((r, ch)) => {
                    row.harvested_w = r.harvested;
                    row.sr_bps_hz = r.achieved_sr;
                    row.iters = r.iters_outer;
                    row.status = r.status.as_str().into();
                    RunOutcome {
                        row,
                        antennas: m,
                        elements: ch.elements(),
                        trace: r.harvested_trace,
                        inner_iters: (r.iters_inner_w, r.iters_inner_u),
                        w: r.w.w,
                        u: r.u.u().clone(),
                    }
                }
                Err(e) => {
                    log::warn!("{method} seed {} at {value}: {e}", job.seed);
                    RunOutcome {
                        row,
                        antennas: m,
                        elements: cfg.elements,
                        trace: Vec::new(),
                        inner_iters: (0, 0),
                        w: CVector::zeros(m),
                        u: CVector::zeros(0),
                    }
                }
            };
            log::debug!(
                "{} seed {} {}={}: {}",
                method,
                job.seed,
                outcome.row.variable,
                value,
                outcome.row.status
            );
            ((job.method, job.antennas, job.sweep, job.seed), outcome)
        })
        .collect();
    done.sort_by_key(|(k, _)| *k);
    Ok(done.into_iter().map(|(_, o)| o).collect())
}

/// True when every run ended converged or at the iteration cap.
pub fn all_succeeded(outcomes: &[RunOutcome]) -> bool {
    outcomes.iter().all(|o| o.row.succeeded())
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Mode;

    fn tiny(mode: Mode, sweep: Vec<f64>) -> ExperimentSpec {
        let mut spec = ExperimentSpec {
            mode,
            sweep,
            seeds: 2,
            ..Default::default()
        };
        spec.scenario.antennas = 2;
        spec.scenario.elements = 3;
        spec
    }

    #[test]
    fn rows_sorted_and_complete() {
        let spec = tiny(Mode::SweepSr, vec![0.5, 1.0]);
        let out = run_experiment(&spec, RunOptions { no_timing: true }).unwrap();
        assert_eq!(out.len(), 4 * 2 * 2);
        let keys: Vec<_> = out
            .iter()
            .map(|o| {
                (
                    Method::ALL.iter().position(|m| *m == o.row.method).unwrap(),
                    o.row.sweep.to_bits(),
                    o.row.seed,
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(out.iter().all(|o| o.row.seconds == 0.0));
    }

    #[test]
    fn no_irs_ignores_surface() {
        let spec = tiny(Mode::SweepN, vec![0.0, 4.0]);
        let spec = ExperimentSpec {
            methods: vec![Method::NoIrs],
            ..spec
        };
        let out = run_experiment(&spec, RunOptions::default()).unwrap();
        assert!(out.iter().all(|o| o.elements == 0));
        assert_eq!(out[0].row.harvested_w, out[2].row.harvested_w);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
