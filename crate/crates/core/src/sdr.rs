//! Semidefinite-relaxation alternating optimization with Gaussian
//! randomization.
//!
//! Both subproblems are solved in noise-normalized units with the transmit
//! covariance scaled to unit trace budget, `W = Ps X`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelSet, Link};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{principal_eig, psd_sqrt, CVector, HermitianMatrix, C64};
use crate::metrics::{
    augment, harvested_power, max_sr_beamformer, secrecy_rate, whiten, Beamformer, PhaseProfile, SolveResult,
    SolveStatus,
};
use crate::sca::{best_run, infeasible_result, start_points};
use crate::sdp::{solve_sdp_with, BlockCoeff, Relation, SdpOptions, SdpProblem, SdpStatus};

/// Secrecy shortfall (bits) accepted for a randomization candidate.
const CANDIDATE_SR_TOL: f64 = 1e-8;
/// Restarts of the relaxation from a recovered rank-one point that beats it.
const MAX_RESTARTS: usize = 3;

/// A pair of relaxed covariances and the relaxed objective `tr(H_r^H V H_r W)`
/// (caller units, without the harvesting efficiency).
#[derive(Clone, Debug)]
pub struct SdrIterate {
    pub w: HermitianMatrix,
    pub v: HermitianMatrix,
    pub objective: f64,
}

/// Solution of one subproblem: the optimal matrix and `tr(H_r^H V H_r W)` at it.
#[derive(Clone, Debug)]
pub struct SdrStep {
    pub matrix: HermitianMatrix,
    pub value: f64,
}

/// `H^H V H`.
fn congruence(h: &DMatrix<C64>, v: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrized(h.adjoint() * &**v * h)
}

/// `H W H^H`.
fn lift(h: &DMatrix<C64>, w: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrized(h * &**w * h.adjoint())
}

fn difference(a: &HermitianMatrix, b: &HermitianMatrix, s: f64) -> HermitianMatrix {
    HermitianMatrix::symmetrized(a.clone().into_inner() - b.scale(s).into_inner())
}

fn sdp_options(cfg: &ScenarioConfig) -> SdpOptions {
    SdpOptions {
        tol: cfg.solver.sdp_tol,
        ..SdpOptions::default()
    }
}

fn check_status(status: SdpStatus) -> Result<()> {
    match status {
        SdpStatus::Optimal => Ok(()),
        SdpStatus::Infeasible => Err(Error::Infeasible(
            "secrecy target unattainable for the fixed variable".into(),
        )),
        SdpStatus::NumericalFailure => Err(Error::NumericalFailure("SDP did not reach the requested gap".into())),
    }
}

/// Subproblem output: optimal matrix, whitened objective at it and the dual
/// objective, which bounds the subproblem optimum from above.
type Solved = (HermitianMatrix, f64, f64);

/// W-subproblem on whitened channels; `W` carries the trace budget `Ps`.
fn w_sdp(ch: &ChannelSet, cfg: &ScenarioConfig, v: &HermitianMatrix) -> Result<Solved> {
    let ps = cfg.tx_power;
    let a = cfg.rate_factor();
    let m = ch.antennas();
    let qr = congruence(ch.stacked(Link::Ehr), v).scale(ps);
    let qb = congruence(ch.stacked(Link::Bob), v).scale(ps);
    let qe = congruence(ch.stacked(Link::Eve), v).scale(ps);

    let mut p = SdpProblem::new();
    let x = p.add_hermitian_block(m);
    p.set_objective(vec![(x, BlockCoeff::Dense(qr.clone()))]);
    p.add_constraint(
        vec![(x, BlockCoeff::Dense(difference(&qb, &qe, a)))],
        Relation::Ge,
        a - 1.0,
    );
    p.add_constraint(vec![(x, BlockCoeff::identity(m))], Relation::Le, 1.0);
    let sol = solve_sdp_with(&p, &sdp_options(cfg))?;
    check_status(sol.status)?;
    let x = &sol.blocks[0];
    let value = qr.inner(x);
    Ok((x.scale(ps), value, sol.dual_value.max(value)))
}

/// V-subproblem on whitened channels.
fn v_sdp(ch: &ChannelSet, cfg: &ScenarioConfig, w: &HermitianMatrix) -> Result<Solved> {
    let a = cfg.rate_factor();
    let dim = ch.elements() + 1;
    let rr = lift(ch.stacked(Link::Ehr), w);
    let rb = lift(ch.stacked(Link::Bob), w);
    let re = lift(ch.stacked(Link::Eve), w);

    let mut p = SdpProblem::new();
    let y = p.add_hermitian_block(dim);
    p.set_objective(vec![(y, BlockCoeff::Dense(rr.clone()))]);
    p.add_constraint(
        vec![(y, BlockCoeff::Dense(difference(&rb, &re, a)))],
        Relation::Ge,
        a - 1.0,
    );
    for n in 0..dim {
        p.add_constraint(vec![(y, BlockCoeff::diagonal_unit(n))], Relation::Eq, 1.0);
    }
    let sol = solve_sdp_with(&p, &sdp_options(cfg))?;
    check_status(sol.status)?;
    let v = sol.blocks[0].clone();
    let value = rr.inner(&v);
    Ok((v, value, sol.dual_value.max(value)))
}

/// Relaxed objective `tr(H_r^H V H_r W)` on whichever channels are passed.
fn relaxed_value(ch: &ChannelSet, w: &HermitianMatrix, v: &HermitianMatrix) -> f64 {
    congruence(ch.stacked(Link::Ehr), v).inner(w)
}

/// Maximizes `tr(H_r^H V H_r W)` over `W` for fixed `V` subject to the
/// relaxed secrecy constraint and `tr W <= Ps`.
pub fn solve_w_sdp(v: &HermitianMatrix, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<SdrStep> {
    if v.dim() != channels.elements() + 1 {
        return Err(Error::InvalidInput("V dimension must be N + 1".into()));
    }
    let (ch, wcfg) = whiten(channels, cfg);
    let (matrix, value, _) = w_sdp(&ch, &wcfg, v)?;
    Ok(SdrStep {
        matrix,
        value: value * cfg.noise_power,
    })
}

/// Maximizes `tr(H_r^H V H_r W)` over `V` for fixed `W` subject to the relaxed
/// secrecy constraint, unit diagonal and `V >= 0`.
pub fn solve_v_sdp(w: &HermitianMatrix, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<SdrStep> {
    if w.dim() != channels.antennas() {
        return Err(Error::InvalidInput("W dimension must be M".into()));
    }
    let (ch, wcfg) = whiten(channels, cfg);
    let (matrix, value, _) = v_sdp(&ch, &wcfg, w)?;
    Ok(SdrStep {
        matrix,
        value: value * cfg.noise_power,
    })
}

fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(s * re, s * im)
        }),
    )
}

/// Gaussian randomization for the beamformer at fixed `u`.
///
/// Candidates are the principal component of `W` followed by `count` draws
/// `psd_sqrt(W) r`; each is scaled to the full power budget. The candidate with
/// the largest harvested power among those meeting the secrecy target wins.
pub fn randomize_w<R: Rng + ?Sized>(
    w: &HermitianMatrix,
    u: &CVector,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    count: usize,
    rng: &mut R,
) -> Result<Beamformer> {
    let (ch, _) = whiten(channels, cfg);
    let v = augment(u);
    let r = ch.effective(Link::Ehr, &v);
    let b = ch.effective(Link::Bob, &v);
    let e = ch.effective(Link::Eve, &v);
    let ps = cfg.tx_power;
    let r0 = cfg.min_secrecy_rate;

    let mut best: Option<(f64, CVector)> = None;
    let mut consider = |x: CVector| {
        let norm = x.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return;
        }
        let x = x * C64::new(ps.sqrt() / norm, 0.0);
        let margin = ((b.dotc(&x).norm_sqr() + 1.0) / (e.dotc(&x).norm_sqr() + 1.0)).log2();
        if margin < r0 - CANDIDATE_SR_TOL {
            return;
        }
        let obj = r.dotc(&x).norm_sqr();
        if best.as_ref().is_none_or(|(o, _)| obj > *o) {
            best = Some((obj, x));
        }
    };

    let (_, principal) = principal_eig(w)?;
    consider(principal);
    if count > 0 {
        let s = psd_sqrt(w)?;
        for _ in 0..count {
            consider(&*s * gaussian_vector(w.dim(), rng));
        }
    }
    best.map(|(_, x)| Beamformer::new(x)).ok_or(Error::RecoveryFailed)
}

/// Gaussian randomization for the phases at fixed transmit covariance `W`
/// (pass `w w^H` for a fixed beamformer).
///
/// Candidates are normalized so the last entry is 1 and projected entrywise
/// onto the unit circle. The principal eigenvector of `V` is tried first.
pub fn randomize_v<R: Rng + ?Sized>(
    v: &HermitianMatrix,
    w: &HermitianMatrix,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    count: usize,
    rng: &mut R,
) -> Result<PhaseProfile> {
    let n = channels.elements();
    if v.dim() != n + 1 {
        return Err(Error::InvalidInput("V dimension must be N + 1".into()));
    }
    let (ch, _) = whiten(channels, cfg);
    let rr = lift(ch.stacked(Link::Ehr), w);
    let rb = lift(ch.stacked(Link::Bob), w);
    let re = lift(ch.stacked(Link::Eve), w);
    let r0 = cfg.min_secrecy_rate;

    let mut best: Option<(f64, CVector)> = None;
    let mut consider = |x: CVector| {
        let last = x[n];
        if !(last.norm() > 0.0) || !last.norm().is_finite() {
            return;
        }
        let u = PhaseProfile::project(&x.rows(0, n).map(|z| z / last)).u().clone();
        let full = augment(&u);
        let margin = ((rb.quad_form(&full) + 1.0) / (re.quad_form(&full) + 1.0)).log2();
        if margin < r0 - CANDIDATE_SR_TOL {
            return;
        }
        let obj = rr.quad_form(&full);
        if best.as_ref().is_none_or(|(o, _)| obj > *o) {
            best = Some((obj, u));
        }
    };

    let (_, principal) = principal_eig(v)?;
    consider(principal);
    if count > 0 {
        let s = psd_sqrt(v)?;
        for _ in 0..count {
            consider(&*s * gaussian_vector(n + 1, rng));
        }
    }
    best.map(|(_, u)| PhaseProfile::project(&u))
        .ok_or(Error::RecoveryFailed)
}

/// Rank-one recovery: phases first (against the relaxed `W`), then a fresh
/// W-subproblem at the recovered phases, then the beamformer.
fn recover<R: Rng + ?Sized>(
    it: &SdrIterate,
    channels: &ChannelSet,
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    wcfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(CVector, CVector)> {
    let count = cfg.solver.randomizations;
    let u = randomize_v(&it.v, &it.w, channels, cfg, count, rng)?.u().clone();
    let vv = HermitianMatrix::outer(&augment(&u));
    let w_mat = match w_sdp(ch, wcfg, &vv) {
        Ok((w, ..)) => w,
        Err(_) => it.w.clone(),
    };
    let w = match randomize_w(&w_mat, &u, channels, cfg, count, rng) {
        Ok(b) => b.w,
        Err(_) => {
            let (w, sr) = max_sr_beamformer(&u, ch, wcfg)?;
            if sr < cfg.min_secrecy_rate - CANDIDATE_SR_TOL {
                return Err(Error::RecoveryFailed);
            }
            w
        }
    };
    Ok((w, u))
}

/// Alternating W/V relaxation followed by Gaussian randomization.
///
/// The returned trace holds `zeta * tr(H_r^H V H_r W)` per outer iteration.
pub fn sdr_ao<R: Rng + ?Sized>(channels: &ChannelSet, cfg: &ScenarioConfig, rng: &mut R) -> Result<SolveResult> {
    let start = Instant::now();
    cfg.validate()?;
    let starts = start_points(channels.elements(), &cfg.solver, rng);
    let runs = starts
        .into_iter()
        .map(|u0| sdr_single(channels, cfg, u0, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_run(runs, start))
}

fn sdr_single<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    u0: CVector,
    rng: &mut R,
) -> Result<SolveResult> {
    let start = Instant::now();
    let (ch, wcfg) = whiten(channels, cfg);
    let n = channels.elements();
    let (w0, sr0) = max_sr_beamformer(&u0, &ch, &wcfg)?;
    if sr0 < cfg.min_secrecy_rate {
        return Ok(infeasible_result(w0, u0, channels, cfg, start));
    }

    let zeta = cfg.harvest_efficiency;
    let to_watts = zeta * cfg.noise_power;
    let mut w_mat = HermitianMatrix::outer(&w0);
    let mut v_mat = HermitianMatrix::outer(&augment(&u0));
    let mut value = relaxed_value(&ch, &w_mat, &v_mat);
    let mut trace = vec![to_watts * value];

    let mut best_pair = (w0.clone(), u0.clone());
    let mut best_power = harvested_power(&w0, &u0, channels, zeta);
    let (mut w_solves, mut v_solves) = (0, 0);
    let mut status;
    let mut restarts = 0;
    // Dual objective of the latest subproblem solve.
    let mut dual = value;

    loop {
        status = SolveStatus::MaxIters;
        for _ in 0..cfg.solver.max_outer {
            let prev = value;
            w_solves += 1;
            match w_sdp(&ch, &wcfg, &v_mat) {
                Ok((w_next, val, d)) => {
                    dual = d;
                    if val >= value {
                        w_mat = w_next;
                        value = val;
                    }
                }
                Err(e) => log::debug!("sdr W-step kept previous iterate: {e}"),
            }
            if n > 0 {
                v_solves += 1;
                match v_sdp(&ch, &wcfg, &w_mat) {
                    Ok((v_next, val, d)) => {
                        dual = d;
                        if val >= value {
                            v_mat = v_next;
                            value = val;
                        }
                    }
                    Err(e) => log::debug!("sdr V-step kept previous iterate: {e}"),
                }
            }
            trace.push(to_watts * value);
            log::debug!("sdr outer {}: relaxed {:e}", trace.len() - 1, to_watts * value);
            if value <= 0.0 || (value - prev) / value < cfg.solver.epsilon {
                status = SolveStatus::Converged;
                break;
            }
        }

        let it = SdrIterate {
            w: w_mat.clone(),
            v: v_mat.clone(),
            objective: value * cfg.noise_power,
        };
        let Ok((w, u)) = recover(&it, channels, &ch, cfg, &wcfg, rng) else {
            log::debug!("sdr randomization found no feasible candidate");
            break;
        };
        let power = harvested_power(&w, &u, channels, zeta);
        if power > best_power {
            best_power = power;
            best_pair = (w.clone(), u.clone());
        }
        let rank_one = relaxed_value(&ch, &HermitianMatrix::outer(&w), &HermitianMatrix::outer(&augment(&u)));
        if rank_one > value * (1.0 + 1e-9) {
            // The recovered pair is itself a relaxed point with a larger value.
            let gain = (rank_one - value) / rank_one;
            w_mat = HermitianMatrix::outer(&w);
            v_mat = HermitianMatrix::outer(&augment(&u));
            value = rank_one;
            trace.push(to_watts * value);
            if gain >= cfg.solver.epsilon && restarts < MAX_RESTARTS {
                restarts += 1;
                continue;
            }
        }
        break;
    }

    let (w, u) = best_pair;
    Ok(SolveResult {
        achieved_sr: secrecy_rate(&w, &u, channels, cfg.noise_power),
        harvested: best_power,
        // A feasible rank-one pair is itself a relaxed point.
        relaxation_bound: Some(trace.last().expect("non-empty").max(to_watts * dual).max(best_power)),
        w: Beamformer::new(w),
        u: PhaseProfile::project(&u),
        iters_outer: trace.len() - 1,
        harvested_trace: trace,
        status,
        iters_inner_w: w_solves,
        iters_inner_u: v_solves,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests;
