//! Exhaustive grid searches used as references at very small sizes.
//!
//! For a fixed `u`, objective and constraints depend on `w` only through
//! `H_r^H v`, `H_b^H v`, `H_e^H v` and `||w||`, so the beamformer is searched
//! over unit directions in the span of those three vectors and a set of
//! power levels.

use rayon::prelude::*;

use crate::channel::{ChannelSet, Link};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::metrics::{augment, harvested_power, PhaseProfile};

/// Largest number of candidate evaluations a single search may perform.
pub const GRID_CAP: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    /// Phase values per IRS element, `theta = 2 pi k / phase_levels`.
    pub phase_levels: usize,
    /// Target number of beamformer directions.
    pub subspace_points: usize,
    /// Transmit powers `Ps * l / power_levels`, `l = 1..=power_levels`.
    pub power_levels: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.phase_levels < 2 || self.subspace_points < 2 || self.power_levels < 2 {
            return Err(Error::InvalidInput("grid levels must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub w: CVector,
    pub u: PhaseProfile,
    /// Harvested power in watts.
    pub value: f64,
}

/// Unit directions in `C^k` up to a common phase (first coordinate real).
///
/// `k = 2` uses a polar/azimuth grid on the Bloch sphere; `k = 3` uses four
/// angles with `points^(1/4)` levels each.
pub fn direction_grid(k: usize, points: usize) -> Vec<CVector> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    match k {
        0 => Vec::new(),
        1 => vec![CVector::from_element(1, C64::new(1.0, 0.0))],
        2 => {
            let t = ((points as f64 / 2.0).sqrt().floor() as usize).max(2);
            let p = (points / t).max(1);
            let mut out = Vec::with_capacity(t * p);
            for i in 0..t {
                let th = PI * i as f64 / (t - 1) as f64;
                for j in 0..p {
                    let phi = TAU * j as f64 / p as f64;
                    out.push(CVector::from_vec(vec![
                        C64::new((th / 2.0).cos(), 0.0),
                        C64::from_polar((th / 2.0).sin(), phi),
                    ]));
                }
            }
            out
        }
        _ => {
            let q = ((points as f64).powf(0.25).floor() as usize).max(2);
            let mut out = Vec::with_capacity(q.pow(4));
            for i in 0..q {
                let a = FRAC_PI_2 * i as f64 / (q - 1) as f64;
                for j in 0..q {
                    let b = FRAC_PI_2 * j as f64 / (q - 1) as f64;
                    for k1 in 0..q {
                        let p1 = TAU * k1 as f64 / q as f64;
                        for k2 in 0..q {
                            let p2 = TAU * k2 as f64 / q as f64;
                            out.push(CVector::from_vec(vec![
                                C64::new(a.cos(), 0.0),
                                C64::from_polar(a.sin() * b.cos(), p1),
                                C64::from_polar(a.sin() * b.sin(), p2),
                            ]));
                        }
                    }
                }
            }
            out
        }
    }
}

/// Orthonormal basis of the span of `vs` (modified Gram-Schmidt).
fn span_basis(vs: &[&CVector]) -> Vec<CVector> {
    let scale = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CVector> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for v in vs {
        let mut x = (*v).clone();
        for q in &basis {
            let c = q.dotc(&x);
            x -= q * c;
        }
        let n = x.norm();
        if n > 1e-10 * scale {
            basis.push(x / C64::new(n, 0.0));
        }
    }
    basis
}

/// `theta_n = 2 pi digit_n / levels` with `idx` read in base `levels`.
fn phases_from_index(mut idx: usize, n: usize, levels: usize) -> CVector {
    CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let k = idx % levels;
            idx /= levels;
            C64::from_polar(1.0, -std::f64::consts::TAU * k as f64 / levels as f64)
        }),
    )
}

fn phase_combinations(n: usize, levels: usize) -> Result<usize> {
    let count = (levels as f64).powi(n as i32);
    if count > GRID_CAP {
        return Err(Error::GridTooLarge {
            size: count,
            cap: GRID_CAP,
        });
    }
    Ok(levels.pow(n as u32))
}

/// `(value, phase index, direction index, power index)`; larger value wins,
/// ties go to the lowest grid index.
type Cell = (f64, usize, usize, usize);

fn better(a: Option<Cell>, b: Option<Cell>) -> Option<Cell> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2, y.3) < (x.1, x.2, x.3)) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

/// Exhaustive joint search over phases, beamformer directions and powers.
pub fn grid_search_joint(channels: &ChannelSet, cfg: &ScenarioConfig, grid: GridSpec) -> Result<OracleSolution> {
    grid.validate()?;
    let n = channels.elements();
    let m = channels.antennas();
    if n > 3 || m > 3 {
        return Err(Error::InvalidInput(
            "joint grid search supports N <= 3 and M <= 3".into(),
        ));
    }
    let dirs: Vec<Vec<CVector>> = (0..=m.min(3))
        .map(|k| direction_grid(k, grid.subspace_points))
        .collect();
    let combos = phase_combinations(n, grid.phase_levels)?;
    let size = combos as f64 * dirs[m.min(3)].len() as f64 * grid.power_levels as f64;
    if size > GRID_CAP {
        return Err(Error::GridTooLarge { size, cap: GRID_CAP });
    }

    let ps = cfg.tx_power;
    let s2 = cfg.noise_power;
    let a = cfg.rate_factor();
    let levels = grid.power_levels;
    let eval = |idx: usize| -> Option<Cell> {
        let u = phases_from_index(idx, n, grid.phase_levels);
        let v = augment(&u);
        let r = channels.effective(Link::Ehr, &v);
        let b = channels.effective(Link::Bob, &v);
        let e = channels.effective(Link::Eve, &v);
        let q = span_basis(&[&r, &b, &e]);
        let proj = |x: &CVector| CVector::from_iterator(q.len(), q.iter().map(|qi| qi.dotc(x)));
        let (rq, bq, eq) = (proj(&r), proj(&b), proj(&e));
        let mut best: Option<Cell> = None;
        for (di, x) in dirs[q.len()].iter().enumerate() {
            let gr = rq.dotc(x).norm_sqr();
            let gb = bq.dotc(x).norm_sqr();
            let ge = eq.dotc(x).norm_sqr();
            for l in 0..levels {
                let p = ps * (l + 1) as f64 / levels as f64;
                if p * gb + s2 < a * (p * ge + s2) {
                    continue;
                }
                best = better(best, Some((p * gr, idx, di, l)));
            }
        }
        best
    };
    let best = (0..combos).into_par_iter().map(eval).reduce(|| None, better);
    let Some((_, idx, di, l)) = best else {
        return Err(Error::Infeasible("no grid point meets the secrecy target".into()));
    };

    let u = phases_from_index(idx, n, grid.phase_levels);
    let v = augment(&u);
    let r = channels.effective(Link::Ehr, &v);
    let b = channels.effective(Link::Bob, &v);
    let e = channels.effective(Link::Eve, &v);
    let q = span_basis(&[&r, &b, &e]);
    let x = &dirs[q.len()][di];
    let mut w = CVector::zeros(m);
    for (qi, xi) in q.iter().zip(x.iter()) {
        w += qi * *xi;
    }
    w *= C64::new((ps * (l + 1) as f64 / levels as f64).sqrt(), 0.0);
    let value = harvested_power(&w, &u, channels, cfg.harvest_efficiency);
    Ok(OracleSolution {
        w,
        u: PhaseProfile::project(&u),
        value,
    })
}

/// Exhaustive phase search for a fixed beamformer; returns the feasible
/// maximizer of `|u^H a + alpha|^2` and that value.
pub fn grid_search_phases(
    channels: &ChannelSet,
    w: &CVector,
    cfg: &ScenarioConfig,
    levels: usize,
) -> Result<(PhaseProfile, f64)> {
    let n = channels.elements();
    if n > 4 {
        return Err(Error::InvalidInput("phase grid search supports N <= 4".into()));
    }
    if levels < 2 {
        return Err(Error::InvalidInput("grid levels must be at least 2".into()));
    }
    let combos = phase_combinations(n, levels)?;
    let hr = &**channels.stacked(Link::Ehr) * w;
    let hb = &**channels.stacked(Link::Bob) * w;
    let he = &**channels.stacked(Link::Eve) * w;
    let s2 = cfg.noise_power;
    let a = cfg.rate_factor();
    let eval = |idx: usize| -> Option<Cell> {
        let v = augment(&phases_from_index(idx, n, levels));
        let gb = v.dotc(&hb).norm_sqr();
        let ge = v.dotc(&he).norm_sqr();
        if gb + s2 < a * (ge + s2) {
            return None;
        }
        Some((v.dotc(&hr).norm_sqr(), idx, 0, 0))
    };
    let best = (0..combos).into_par_iter().map(eval).reduce(|| None, better);
    let Some((value, idx, ..)) = best else {
        return Err(Error::Infeasible("no phase grid point meets the secrecy target".into()));
    };
    Ok((PhaseProfile::project(&phases_from_index(idx, n, levels)), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::check_feasible;

    fn small(m: usize, n: usize, seed: u64, r0: f64) -> (ChannelSet, ScenarioConfig) {
        let cfg = ScenarioConfig {
            antennas: m,
            elements: n,
            seed,
            min_secrecy_rate: r0,
            ..ScenarioConfig::default()
        };
        (ChannelSet::generate(&cfg).unwrap(), cfg)
    }

    fn without_eve(ch: &ChannelSet) -> ChannelSet {
        ChannelSet::from_links(
            ch.g.clone(),
            ch.h_ab.clone(),
            ch.h_ah.clone(),
            CVector::zeros(ch.antennas()),
            ch.h_ib.clone(),
            ch.h_ih.clone(),
            CVector::zeros(ch.elements()),
        )
        .unwrap()
    }

    const GRID: GridSpec = GridSpec {
        phase_levels: 64,
        subspace_points: 400,
        power_levels: 2,
    };

    #[test]
    fn direction_grids_are_unit() {
        for k in 1..=3 {
            let dirs = direction_grid(k, 300);
            assert!(!dirs.is_empty());
            for d in &dirs {
                assert!((d.norm() - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(direction_grid(2, 200).len(), 200);
    }

    #[test]
    fn single_reflector_mrt_value() {
        let (ch, cfg) = small(2, 1, 1, 0.01);
        let ch = without_eve(&ch);
        let got = grid_search_joint(&ch, &cfg, GRID).unwrap();
        let mut best = 0.0f64;
        for k in 0..4096 {
            let u = CVector::from_element(1, C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 4096.0));
            let heff = ch.effective(Link::Ehr, &augment(&u));
            best = best.max(cfg.harvest_efficiency * cfg.tx_power * heff.norm_squared());
        }
        assert!(got.value <= best * (1.0 + 1e-12));
        assert!(got.value >= 0.99 * best, "{} vs {best}", got.value);
    }

    #[test]
    fn refining_phase_grid_never_decreases() {
        let (ch, cfg) = small(2, 2, 2, 0.5);
        let coarse = grid_search_joint(
            &ch,
            &cfg,
            GridSpec {
                phase_levels: 8,
                ..GRID
            },
        )
        .unwrap();
        let fine = grid_search_joint(
            &ch,
            &cfg,
            GridSpec {
                phase_levels: 16,
                ..GRID
            },
        )
        .unwrap();
        assert!(fine.value >= coarse.value);
    }

    #[test]
    fn outputs_feasible_and_deterministic() {
        for seed in 0..4 {
            let (ch, cfg) = small(2, 2, seed, 1.0);
            let Ok(a) = grid_search_joint(&ch, &cfg, GRID) else {
                continue;
            };
            let b = grid_search_joint(&ch, &cfg, GRID).unwrap();
            assert_eq!(a.value, b.value);
            assert_eq!(a.w, b.w);
            assert!(check_feasible(&a.w, a.u.u(), &cfg, &ch).feasible());
        }
    }

    #[test]
    fn oversized_grid_rejected() {
        let (ch, cfg) = small(3, 3, 0, 1.0);
        let grid = GridSpec {
            phase_levels: 1024,
            subspace_points: 1000,
            power_levels: 2,
        };
        assert!(matches!(
            grid_search_joint(&ch, &cfg, grid),
            Err(Error::GridTooLarge { .. })
        ));
        let (ch, cfg) = small(2, 4, 0, 1.0);
        let w = CVector::from_element(2, C64::new(1.0, 0.0));
        assert!(matches!(
            grid_search_phases(&ch, &w, &cfg, 200),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn single_phase_aligns_reflection() {
        let (ch, cfg) = small(2, 1, 5, 0.01);
        let ch = without_eve(&ch);
        let w = CVector::from_vec(vec![C64::new(0.3, 1.0), C64::new(-1.2, 0.4)]);
        let levels = 256;
        let (u, _) = grid_search_phases(&ch, &w, &cfg, levels).unwrap();
        let hr = &*ch.h_r * &w;
        // |conj(u) a + alpha| is largest when arg(u) = arg(a conj(alpha)).
        let target = (hr[0] * hr[1].conj()).arg();
        let diff =
            (u.u()[0].arg() - target + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        assert!(diff.abs() <= std::f64::consts::PI / levels as f64 + 1e-12);
    }

    #[test]
    fn finer_phase_grid_is_better() {
        let (ch, cfg) = small(2, 1, 6, 0.01);
        let ch = without_eve(&ch);
        let w = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let (_, coarse) = grid_search_phases(&ch, &w, &cfg, 64).unwrap();
        let (_, fine) = grid_search_phases(&ch, &w, &cfg, 4096).unwrap();
        assert!(fine >= coarse);
    }
}
