//! Low-complexity alternating optimization: a successive convex approximation
//! for the beamformer and a closed-form phase update with a bisection on the
//! multiplier `mu`.
//!
//! All internal arithmetic runs in noise-normalized units (see
//! [`crate::metrics::whiten`]); inputs and outputs use the caller's units.

use std::time::Instant;

use rand::Rng;

use crate::channel::{ChannelSet, Link};
use crate::config::{InitPhase, ScenarioConfig, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianMatrix, C64};
use crate::metrics::{
    augment, harvested_power, max_sr_beamformer, secrecy_rate, whiten, Beamformer, PhaseProfile, SolveResult,
    SolveStatus,
};

/// Secrecy shortfall (bits) tolerated when accepting an inner iterate.
const ACCEPT_SR_TOL: f64 = 1e-9;
const MAX_BISECT: usize = 200;
const MAX_DOUBLING: usize = 200;

/// Coefficients of the phase subproblem at expansion point `u_prev`.
#[derive(Clone, Debug)]
pub struct PhaseSubproblemData {
    pub a: CVector,
    pub alpha: C64,
    pub b: CVector,
    pub beta: C64,
    pub c: CVector,
    pub gamma: C64,
    pub rate_factor: f64,
    pub sigma2: f64,
    pub u_prev: CVector,
    pub lambda_max_a: f64,
    pub d: CVector,
    pub f: CVector,
    pub c1: f64,
    pub c2: f64,
}

impl PhaseSubproblemData {
    /// `A = 2^{r0} c c^H - b b^H` as an explicit matrix.
    pub fn a_matrix(&self) -> HermitianMatrix {
        let s = C64::new(self.rate_factor, 0.0);
        HermitianMatrix::symmetrized(&self.c * self.c.adjoint() * s - &self.b * self.b.adjoint())
    }

    /// `A x` without forming `A`.
    pub fn a_times(&self, x: &CVector) -> CVector {
        &self.c * (self.c.dotc(x) * self.rate_factor) - &self.b * self.b.dotc(x)
    }

    /// `|u^H a + alpha|^2`.
    pub fn objective(&self, u: &CVector) -> f64 {
        (u.dotc(&self.a) + self.alpha).norm_sqr()
    }

    /// Taylor minorant `2 Re{u^H d} + c1` of the objective.
    pub fn surrogate(&self, u: &CVector) -> f64 {
        2.0 * u.dotc(&self.d).re + self.c1
    }

    /// `g(u) = 2 Re{u^H f}`; the restricted secrecy constraint reads `g >= c2`.
    pub fn constraint_lhs(&self, u: &CVector) -> f64 {
        2.0 * u.dotc(&self.f).re
    }

    /// `|u^H b + beta|^2 + s2 - 2^{r0} (|u^H c + gamma|^2 + s2)`.
    pub fn secrecy_slack(&self, u: &CVector) -> f64 {
        let bob = (u.dotc(&self.b) + self.beta).norm_sqr();
        let eve = (u.dotc(&self.c) + self.gamma).norm_sqr();
        bob + self.sigma2 - self.rate_factor * (eve + self.sigma2)
    }

    /// `log2((|u^H b + beta|^2 + s2) / (|u^H c + gamma|^2 + s2))`.
    pub fn margin_bits(&self, u: &CVector) -> f64 {
        let bob = (u.dotc(&self.b) + self.beta).norm_sqr();
        let eve = (u.dotc(&self.c) + self.gamma).norm_sqr();
        ((bob + self.sigma2) / (eve + self.sigma2)).log2()
    }

    /// `g(mu) = 2 Re{u(mu)^H f}`.
    pub fn g(&self, mu: f64) -> f64 {
        self.constraint_lhs(&u_of_mu(&self.d, &self.f, mu))
    }

    /// `2 sum |f_n|`, the supremum of `g`.
    pub fn reachable(&self) -> f64 {
        2.0 * self.f.iter().map(|z| z.norm()).sum::<f64>()
    }
}

/// Largest eigenvalue of `s c c^H - b b^H` from the 2x2 Gram reduction.
pub fn rank2_lambda_max(s: f64, c: &CVector, b: &CVector) -> f64 {
    let cc = c.norm_squared();
    let bb = b.norm_squared();
    match c.len() {
        0 => 0.0,
        1 => s * cc - bb,
        _ => {
            let cross = c.dotc(b).norm_sqr();
            let t = s * cc - bb;
            let det = -s * (cc * bb - cross).max(0.0);
            0.5 * t + (0.25 * t * t - det).max(0.0).sqrt()
        }
    }
}

/// Splits `H_x w` into the reflected part (first N entries) and the direct scalar.
fn split_response(channels: &ChannelSet, link: Link, w: &CVector) -> (CVector, C64) {
    let hw = &**channels.stacked(link) * w;
    let n = hw.len() - 1;
    (hw.rows(0, n).into_owned(), hw[n])
}

pub fn build_phase_data(
    w: &CVector,
    u_prev: &CVector,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
) -> PhaseSubproblemData {
    let (a, alpha) = split_response(channels, Link::Ehr, w);
    let (b, beta) = split_response(channels, Link::Bob, w);
    let (c, gamma) = split_response(channels, Link::Eve, w);
    let s = cfg.rate_factor();
    let sigma2 = cfg.noise_power;
    let n = u_prev.len() as f64;

    let lambda = rank2_lambda_max(s, &c, &b);
    let au = u_prev.dotc(&a);
    let d = &a * au.conj() + &a * alpha.conj();
    let c1 = alpha.norm_sqr() - au.norm_sqr();

    let a_u = &c * (c.dotc(u_prev) * s) - &b * b.dotc(u_prev);
    let u_a_u = u_prev.dotc(&a_u).re;
    let m_minus_a_u = u_prev * C64::new(lambda, 0.0) - a_u;
    let f = m_minus_a_u + &b * beta.conj() - &c * (gamma.conj() * s);
    let quad = lambda * u_prev.norm_squared() - u_a_u;
    let c2 = n * lambda + quad + s * (gamma.norm_sqr() + sigma2) - beta.norm_sqr() - sigma2;

    PhaseSubproblemData {
        a,
        alpha,
        b,
        beta,
        c,
        gamma,
        rate_factor: s,
        sigma2,
        u_prev: u_prev.clone(),
        lambda_max_a: lambda,
        d,
        f,
        c1,
        c2,
    }
}

/// `u_n = exp(j arg(d_n + mu f_n))`, with phase 0 where the sum vanishes.
pub fn u_of_mu(d: &CVector, f: &CVector, mu: f64) -> CVector {
    d.zip_map(f, |dn, fn_| {
        let z = dn + fn_ * mu;
        if z.norm() > 0.0 {
            C64::from_polar(1.0, z.arg())
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// Finds the multiplier of the restricted phase subproblem.
///
/// Returns `mu = 0` when the unconstrained alignment already satisfies
/// `g >= c2`; otherwise the smallest bracketed `mu` with `g(mu) >= c2`, located
/// to `|g(mu) - c2| <= eps * (1 + |c2|)`.
pub fn bisect_mu(data: &PhaseSubproblemData, eps: f64) -> Result<(f64, PhaseProfile)> {
    let c2 = data.c2;
    let u0 = u_of_mu(&data.d, &data.f, 0.0);
    if data.constraint_lhs(&u0) >= c2 {
        return Ok((0.0, PhaseProfile::project(&u0)));
    }
    let reachable = data.reachable();
    if reachable < c2 {
        return Err(Error::PhaseStepInfeasible { reachable, c2 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while data.g(hi) < c2 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLING {
            return Err(Error::PhaseStepInfeasible { reachable, c2 });
        }
    }
    let target = eps * (1.0 + c2.abs());
    for _ in 0..MAX_BISECT {
        let g_hi = data.g(hi);
        if g_hi - c2 <= target || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if data.g(mid) >= c2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = u_of_mu(&data.d, &data.f, hi);
    Ok((hi, PhaseProfile::project(&u)))
}

/// Noise-normalized effective vectors `H_x^H v` for a fixed phase profile.
struct WProblem {
    r: CVector,
    b: CVector,
    e: CVector,
    rate_factor: f64,
    ps: f64,
}

impl WProblem {
    /// Channels must already be whitened.
    fn new(channels: &ChannelSet, u: &CVector, cfg: &ScenarioConfig) -> Self {
        let v = augment(u);
        Self {
            r: channels.effective(Link::Ehr, &v),
            b: channels.effective(Link::Bob, &v),
            e: channels.effective(Link::Eve, &v),
            rate_factor: cfg.rate_factor(),
            ps: cfg.tx_power,
        }
    }

    fn objective(&self, w: &CVector) -> f64 {
        self.r.dotc(w).norm_sqr()
    }

    fn margin_bits(&self, w: &CVector) -> f64 {
        ((self.b.dotc(w).norm_sqr() + 1.0) / (self.e.dotc(w).norm_sqr() + 1.0)).log2()
    }

    /// `(lambda I + beta e e^H)^{-1} x` by Sherman-Morrison.
    fn apply_inverse(&self, x: &CVector, lambda: f64, beta: f64) -> CVector {
        let ee = self.e.norm_squared();
        let ex = self.e.dotc(x);
        if lambda == 0.0 {
            return x * C64::new(1.0 / (beta * ee), 0.0);
        }
        let k = ex * (beta / (lambda + beta * ee));
        (x - &self.e * k) / C64::new(lambda, 0.0)
    }

    /// Maximizer of the Lagrangian for fixed `nu`, with `lambda` chosen so the
    /// power constraint holds with complementary slackness.
    fn power_limited(&self, x: &CVector, beta: f64) -> CVector {
        let xn = x.norm();
        if xn == 0.0 {
            return CVector::zeros(x.len());
        }
        if x.len() == 1 && beta * self.e.norm_squared() > 0.0 {
            let w0 = self.apply_inverse(x, 0.0, beta);
            if w0.norm_squared() <= self.ps {
                return w0;
            }
        }
        let mut lo = 0.0;
        let mut hi = xn / self.ps.sqrt();
        for _ in 0..MAX_BISECT {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.apply_inverse(x, mid, beta).norm_squared() > self.ps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.apply_inverse(x, hi, beta)
    }

    /// One surrogate solve around `wt`.
    fn surrogate_step(&self, wt: &CVector) -> Result<CVector> {
        let g = &self.r * self.r.dotc(wt);
        let kb = self.b.dotc(wt);
        let k = &self.b * kb;
        let t = kb.norm_sqr();
        let a = self.rate_factor;
        let slack = |w: &CVector| 2.0 * w.dotc(&k).re - t + 1.0 - a * (self.e.dotc(w).norm_sqr() + 1.0);
        let at_nu = |nu: f64| self.power_limited(&(&g + &k * C64::new(nu, 0.0)), nu * a);

        let w0 = at_nu(0.0);
        if slack(&w0) >= 0.0 {
            return Ok(w0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut w_hi = at_nu(hi);
        let mut doublings = 0;
        while slack(&w_hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            w_hi = at_nu(hi);
            doublings += 1;
            if doublings > MAX_DOUBLING {
                return Err(Error::NumericalFailure(
                    "beamformer surrogate has no feasible multiplier".into(),
                ));
            }
        }
        for _ in 0..MAX_BISECT {
            if hi - lo <= 1e-13 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let w_mid = at_nu(mid);
            if slack(&w_mid) >= 0.0 {
                hi = mid;
                w_hi = w_mid;
            } else {
                lo = mid;
            }
        }
        Ok(w_hi)
    }

    /// Repeated surrogate steps from `w0`; returns the final beamformer and the
    /// number of accepted steps.
    fn optimize(&self, w0: &CVector, r0: f64, max_iters: usize, tol: f64) -> (CVector, usize) {
        let mut w = w0.clone();
        let mut obj = self.objective(&w);
        let mut iters = 0;
        for _ in 0..max_iters {
            let Ok(next) = self.surrogate_step(&w) else { break };
            let next_obj = self.objective(&next);
            let ok = next_obj >= obj
                && next.norm_squared() <= self.ps * (1.0 + 1e-12)
                && self.margin_bits(&next) >= r0 - ACCEPT_SR_TOL;
            if !ok {
                break;
            }
            iters += 1;
            let gain = next_obj - obj;
            w = next;
            obj = next_obj;
            if gain <= tol * obj {
                break;
            }
        }
        (w, iters)
    }
}

/// One convex surrogate solve for the beamformer with `u` fixed.
///
/// `w_prev` must satisfy the secrecy and power constraints; the returned
/// beamformer does too and has harvested power at least that of `w_prev`.
pub fn sca_w_step(u: &CVector, w_prev: &CVector, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<Beamformer> {
    let (ch, wcfg) = whiten(channels, cfg);
    let problem = WProblem::new(&ch, u, &wcfg);
    problem.surrogate_step(w_prev).map(Beamformer::new)
}

/// Iterates [`sca_w_step`] until the relative gain drops below `inner_tol` or
/// `max_inner_w` steps; returns the beamformer and the step count.
pub fn optimize_beamformer(
    u: &CVector,
    w0: &CVector,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
) -> (Beamformer, usize) {
    let (ch, wcfg) = whiten(channels, cfg);
    let problem = WProblem::new(&ch, u, &wcfg);
    let (w, iters) = problem.optimize(w0, cfg.min_secrecy_rate, cfg.solver.max_inner_w, cfg.solver.inner_tol);
    (Beamformer::new(w), iters)
}

/// Repeated phase refinements at fixed `w` on whitened channels.
fn optimize_phases(w: &CVector, u0: &CVector, channels: &ChannelSet, cfg: &ScenarioConfig) -> (CVector, usize) {
    let mut u = u0.clone();
    let mut iters = 0;
    let mut data = build_phase_data(w, &u, channels, cfg);
    let mut obj = data.objective(&u);
    for _ in 0..cfg.solver.max_inner_u {
        let Ok((_, next)) = bisect_mu(&data, cfg.solver.bisect_eps) else {
            break;
        };
        let next = next.u().clone();
        let next_obj = data.objective(&next);
        if !(next_obj >= obj && data.margin_bits(&next) >= cfg.min_secrecy_rate - ACCEPT_SR_TOL) {
            break;
        }
        iters += 1;
        let gain = next_obj - obj;
        u = next;
        obj = next_obj;
        if gain <= cfg.solver.inner_tol * obj {
            break;
        }
        data = build_phase_data(w, &u, channels, cfg);
    }
    (u, iters)
}

/// Initial phase profiles, one per configured start. Drawn up front so that
/// both AO methods see the same starts for the same generator state.
pub(crate) fn start_points<R: Rng + ?Sized>(n: usize, settings: &SolverSettings, rng: &mut R) -> Vec<CVector> {
    let mut starts = vec![match settings.init_phase {
        InitPhase::Zero => PhaseProfile::ones(n).u().clone(),
        InitPhase::Random => random_phases(n, rng),
    }];
    starts.extend((1..settings.starts).map(|_| random_phases(n, rng)));
    starts
}

/// Keeps the best feasible run. Wall clock covers all runs and the relaxation
/// bound is the largest one seen.
pub(crate) fn best_run(runs: Vec<SolveResult>, start: Instant) -> SolveResult {
    let bound = runs
        .iter()
        .filter(|r| r.status != SolveStatus::Infeasible)
        .filter_map(|r| r.relaxation_bound)
        .reduce(f64::max);
    let mut best = runs
        .into_iter()
        .reduce(|a, b| {
            let ok = |r: &SolveResult| r.status != SolveStatus::Infeasible;
            let better = match (ok(&a), ok(&b)) {
                (false, true) => true,
                (true, false) => false,
                _ => b.harvested > a.harvested,
            };
            if better {
                b
            } else {
                a
            }
        })
        .expect("at least one start");
    if best.status != SolveStatus::Infeasible {
        best.relaxation_bound = bound;
    }
    best.wall_clock = start.elapsed().as_secs_f64();
    best
}

/// Independent uniform phases.
pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_iterator(
        n,
        (0..n).map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)),
    )
}

pub(crate) fn infeasible_result(
    w: CVector,
    u: CVector,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    start: Instant,
) -> SolveResult {
    let harvested = harvested_power(&w, &u, channels, cfg.harvest_efficiency);
    SolveResult {
        achieved_sr: secrecy_rate(&w, &u, channels, cfg.noise_power),
        w: Beamformer::new(w),
        u: PhaseProfile::project(&u),
        harvested_trace: vec![harvested],
        harvested,
        relaxation_bound: None,
        status: SolveStatus::Infeasible,
        iters_outer: 0,
        iters_inner_w: 0,
        iters_inner_u: 0,
        wall_clock: start.elapsed().as_secs_f64(),
    }
}

fn relative_gain(prev: f64, cur: f64) -> f64 {
    if cur > 0.0 {
        (cur - prev) / cur
    } else {
        0.0
    }
}

/// Alternating optimization with SCA beamformer updates and closed-form phase
/// updates.
pub fn sca_ao<R: Rng + ?Sized>(channels: &ChannelSet, cfg: &ScenarioConfig, rng: &mut R) -> Result<SolveResult> {
    let start = Instant::now();
    cfg.validate()?;
    let runs = start_points(channels.elements(), &cfg.solver, rng)
        .into_iter()
        .map(|u0| sca_single(channels, cfg, u0))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_run(runs, start))
}

fn sca_single(channels: &ChannelSet, cfg: &ScenarioConfig, mut u: CVector) -> Result<SolveResult> {
    let start = Instant::now();
    let (ch, wcfg) = whiten(channels, cfg);
    let n = channels.elements();
    let (mut w, sr0) = max_sr_beamformer(&u, &ch, &wcfg)?;
    if sr0 < cfg.min_secrecy_rate {
        return Ok(infeasible_result(w, u, channels, cfg, start));
    }

    let zeta = cfg.harvest_efficiency;
    let mut trace = vec![harvested_power(&w, &u, channels, zeta)];
    let mut status = SolveStatus::MaxIters;
    let (mut inner_w, mut inner_u) = (0, 0);
    for _ in 0..cfg.solver.max_outer {
        let problem = WProblem::new(&ch, &u, &wcfg);
        let (w_next, k) = problem.optimize(&w, cfg.min_secrecy_rate, cfg.solver.max_inner_w, cfg.solver.inner_tol);
        w = w_next;
        inner_w += k;
        if n > 0 {
            let (u_next, k) = optimize_phases(&w, &u, &ch, &wcfg);
            u = u_next;
            inner_u += k;
        }
        let prev = *trace.last().expect("trace starts non-empty");
        let cur = harvested_power(&w, &u, channels, zeta);
        trace.push(cur);
        log::debug!("sca outer {}: harvested {cur:e}", trace.len() - 1);
        if relative_gain(prev, cur) < cfg.solver.epsilon {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SolveResult {
        achieved_sr: secrecy_rate(&w, &u, channels, cfg.noise_power),
        harvested: *trace.last().expect("non-empty"),
        w: Beamformer::new(w),
        u: PhaseProfile::project(&u),
        iters_outer: trace.len() - 1,
        harvested_trace: trace,
        relaxation_bound: None,
        status,
        iters_inner_w: inner_w,
        iters_inner_u: inner_u,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

/// Beamformer-only optimization at a fixed phase profile `u`.
///
/// Used by the random-phase and no-IRS baselines.
pub fn fixed_phase_beamforming(channels: &ChannelSet, cfg: &ScenarioConfig, u: &CVector) -> Result<SolveResult> {
    let start = Instant::now();
    cfg.validate()?;
    let (ch, wcfg) = whiten(channels, cfg);
    let (w0, sr0) = max_sr_beamformer(u, &ch, &wcfg)?;
    if sr0 < cfg.min_secrecy_rate {
        return Ok(infeasible_result(w0, u.clone(), channels, cfg, start));
    }
    let zeta = cfg.harvest_efficiency;
    let problem = WProblem::new(&ch, u, &wcfg);
    let mut w = w0;
    let mut trace = vec![harvested_power(&w, u, channels, zeta)];
    let mut inner = 0;
    let mut status = SolveStatus::MaxIters;
    for _ in 0..cfg.solver.max_outer {
        let (next, k) = problem.optimize(&w, cfg.min_secrecy_rate, cfg.solver.max_inner_w, cfg.solver.inner_tol);
        inner += k;
        w = next;
        let prev = *trace.last().expect("non-empty");
        let cur = harvested_power(&w, u, channels, zeta);
        trace.push(cur);
        if k < cfg.solver.max_inner_w || relative_gain(prev, cur) < cfg.solver.epsilon {
            status = SolveStatus::Converged;
            break;
        }
    }
    Ok(SolveResult {
        achieved_sr: secrecy_rate(&w, u, channels, cfg.noise_power),
        harvested: *trace.last().expect("non-empty"),
        w: Beamformer::new(w),
        u: PhaseProfile::project(u),
        iters_outer: trace.len() - 1,
        harvested_trace: trace,
        relaxation_bound: None,
        status,
        iters_inner_w: inner,
        iters_inner_u: 0,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}
