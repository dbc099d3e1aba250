//! Rates, secrecy rate, harvested power and constraint checks for a candidate
//! `(w, u)`, plus the result types returned by the solvers.

use nalgebra::DMatrix;

use crate::channel::{ChannelSet, Link};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{principal_eig, CVector, HermitianMatrix, C64};

/// Allowed deviation of `|u_n|` from one.
pub const MODULUS_TOL: f64 = 1e-12;
/// Allowed secrecy-rate shortfall in bits/s/Hz.
pub const SR_TOL: f64 = 1e-6;
/// Allowed relative excess over the power budget.
pub const POWER_TOL: f64 = 1e-9;

/// Unit-modulus IRS reflection vector `u`; `v = [u; 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProfile {
    u: CVector,
}

impl PhaseProfile {
    pub fn new(u: CVector) -> Result<Self> {
        if let Some(bad) = u.iter().find(|z| (z.norm() - 1.0).abs() > MODULUS_TOL) {
            return Err(Error::InvalidInput(format!("phase entry {bad} is not unit modulus")));
        }
        Ok(Self { u })
    }

    /// All phase shifts zero.
    pub fn ones(n: usize) -> Self {
        Self {
            u: CVector::from_element(n, C64::new(1.0, 0.0)),
        }
    }

    /// `u_n = exp(-j * theta_n)`.
    pub fn from_angles(theta: &[f64]) -> Self {
        Self {
            u: CVector::from_iterator(theta.len(), theta.iter().map(|&t| C64::from_polar(1.0, -t))),
        }
    }

    /// Entrywise projection `x_n / |x_n|`; zero entries map to 1.
    pub fn project(x: &CVector) -> Self {
        Self {
            u: x.map(|z| {
                if z.norm() > 0.0 {
                    C64::from_polar(1.0, z.arg())
                } else {
                    C64::new(1.0, 0.0)
                }
            }),
        }
    }

    pub fn u(&self) -> &CVector {
        &self.u
    }

    pub fn v(&self) -> CVector {
        augment(&self.u)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Transmit beamformer.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    pub w: CVector,
}

impl Beamformer {
    pub fn new(w: CVector) -> Self {
        Self { w }
    }

    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub w: Beamformer,
    pub u: PhaseProfile,
    /// Objective per outer iteration in watts; entry 0 is the starting point.
    ///
    /// For the SDR method this is the relaxed objective `zeta * tr(H_r^H V H_r W)`.
    pub harvested_trace: Vec<f64>,
    /// Harvested power at the returned `(w, u)`.
    pub harvested: f64,
    /// Final relaxed objective, SDR only.
    pub relaxation_bound: Option<f64>,
    pub achieved_sr: f64,
    pub status: SolveStatus,
    pub iters_outer: usize,
    pub iters_inner_w: usize,
    pub iters_inner_u: usize,
    pub wall_clock: f64,
}

/// `v = [u; 1]`.
pub fn augment(u: &CVector) -> CVector {
    let n = u.len();
    let mut v = CVector::from_element(n + 1, C64::new(1.0, 0.0));
    v.rows_mut(0, n).copy_from(u);
    v
}

/// `v^H H_x w`.
pub fn response(channels: &ChannelSet, link: Link, w: &CVector, u: &CVector) -> C64 {
    let hw = &**channels.stacked(link) * w;
    augment(u).dotc(&hw)
}

pub fn rate_bob(w: &CVector, u: &CVector, channels: &ChannelSet, sigma2: f64) -> f64 {
    (response(channels, Link::Bob, w, u).norm_sqr() / sigma2).ln_1p() / std::f64::consts::LN_2
}

pub fn rate_eve(w: &CVector, u: &CVector, channels: &ChannelSet, sigma2: f64) -> f64 {
    (response(channels, Link::Eve, w, u).norm_sqr() / sigma2).ln_1p() / std::f64::consts::LN_2
}

pub fn secrecy_rate(w: &CVector, u: &CVector, channels: &ChannelSet, sigma2: f64) -> f64 {
    (rate_bob(w, u, channels, sigma2) - rate_eve(w, u, channels, sigma2)).max(0.0)
}

/// Rate difference without the clamp at zero: `log2((|b|^2 + s2) / (|e|^2 + s2))`.
pub fn secrecy_margin_bits(w: &CVector, u: &CVector, channels: &ChannelSet, sigma2: f64) -> f64 {
    let b = response(channels, Link::Bob, w, u).norm_sqr();
    let e = response(channels, Link::Eve, w, u).norm_sqr();
    ((b + sigma2) / (e + sigma2)).log2()
}

pub fn harvested_power(w: &CVector, u: &CVector, channels: &ChannelSet, zeta: f64) -> f64 {
    zeta * response(channels, Link::Ehr, w, u).norm_sqr()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    SecrecyRate { slack: f64 },
    Power { relative_slack: f64 },
    Modulus { max_deviation: f64 },
    Dimension,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    /// `log2((|b|^2 + s2)/(|e|^2 + s2)) - r0`.
    pub sr_slack: f64,
    /// `(Ps - ||w||^2) / Ps`.
    pub power_slack: f64,
    pub modulus_deviation: f64,
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_feasible(w: &CVector, u: &CVector, cfg: &ScenarioConfig, channels: &ChannelSet) -> Feasibility {
    if w.len() != channels.antennas() || u.len() != channels.elements() {
        return Feasibility {
            sr_slack: f64::NAN,
            power_slack: f64::NAN,
            modulus_deviation: f64::NAN,
            violations: vec![Violation::Dimension],
        };
    }
    let sr_slack = secrecy_margin_bits(w, u, channels, cfg.noise_power) - cfg.min_secrecy_rate;
    let power_slack = (cfg.tx_power - w.norm_squared()) / cfg.tx_power;
    let modulus_deviation = u.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    let mut violations = Vec::new();
    if !(sr_slack >= -SR_TOL) {
        violations.push(Violation::SecrecyRate { slack: sr_slack });
    }
    if !(power_slack >= -POWER_TOL) {
        violations.push(Violation::Power {
            relative_slack: power_slack,
        });
    }
    if !(modulus_deviation <= MODULUS_TOL) {
        violations.push(Violation::Modulus {
            max_deviation: modulus_deviation,
        });
    }
    Feasibility {
        sr_slack,
        power_slack,
        modulus_deviation,
        violations,
    }
}

/// The channels and config expressed in noise-normalized units (`sigma^2 = 1`).
///
/// Rates, secrecy rates and feasibility are unchanged; powers at the receivers
/// are divided by `sigma^2`.
pub fn whiten(channels: &ChannelSet, cfg: &ScenarioConfig) -> (ChannelSet, ScenarioConfig) {
    let mut out = cfg.clone();
    out.noise_power = 1.0;
    (channels.scaled(cfg.noise_power.sqrt().recip()), out)
}

/// Full-power beamformer maximizing the secrecy rate for a fixed `u`.
///
/// Maximizes `(s2 + Ps |b^H x|^2) / (s2 + Ps |e^H x|^2)` over unit `x` through
/// the principal generalized eigenvector, and returns `(sqrt(Ps) x, rate)` where
/// `rate` is the unclamped secrecy margin in bits.
pub fn max_sr_beamformer(u: &CVector, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<(CVector, f64)> {
    let m = channels.antennas();
    let v = augment(u);
    let scale = (cfg.tx_power / cfg.noise_power).sqrt();
    let hb = channels.effective(Link::Bob, &v) * C64::new(scale, 0.0);
    let he = channels.effective(Link::Eve, &v) * C64::new(scale, 0.0);
    let a = DMatrix::<C64>::identity(m, m) + &hb * hb.adjoint();
    let b = DMatrix::<C64>::identity(m, m) + &he * he.adjoint();
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("eavesdropper covariance not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    let reduced = HermitianMatrix::symmetrized(&l_inv * a * l_inv.adjoint());
    let (_, y) = principal_eig(&reduced)?;
    let x = l_inv.adjoint() * y;
    let x = &x / C64::new(x.norm(), 0.0);
    let w = x * C64::new(cfg.tx_power.sqrt(), 0.0);
    let rate = secrecy_margin_bits(&w, u, channels, cfg.noise_power);
    Ok((w, rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stack_effective;
    use crate::linalg::ComplexMatrix;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_channels(g: f64, hb: C64, he: C64, hr: C64) -> ChannelSet {
        let one = |z: C64| CVector::from_element(1, z);
        ChannelSet::from_links(
            ComplexMatrix::new(DMatrix::from_element(1, 1, C64::new(g, 0.0))).unwrap(),
            one(hb),
            one(hr),
            one(he),
            one(hb),
            one(hr),
            one(he),
        )
        .unwrap()
    }

    fn random_setup(seed: u64, m: usize, n: usize) -> (ChannelSet, CVector, CVector) {
        let cfg = ScenarioConfig {
            antennas: m,
            elements: n,
            seed,
            ..ScenarioConfig::default()
        };
        let ch = ChannelSet::generate(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let u = CVector::from_iterator(
            n,
            (0..n).map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)),
        );
        let w = CVector::from_iterator(
            m,
            (0..m).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        );
        (ch, w, u)
    }

    /// Sum `(h_i^H Theta G + h_a^H) w` term by term, splitting real and imaginary parts.
    fn reference_gain(g: &ComplexMatrix, h_a: &CVector, h_i: &CVector, u: &CVector, w: &CVector) -> f64 {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for n in 0..u.len() {
            let coeff = h_i[n].conj() * u[n].conj();
            for m in 0..w.len() {
                let t = coeff * g[(n, m)] * w[m];
                re += t.re;
                im += t.im;
            }
        }
        for m in 0..w.len() {
            let t = h_a[m].conj() * w[m];
            re += t.re;
            im += t.im;
        }
        re * re + im * im
    }

    #[test]
    fn zero_beamformer_gives_zero() {
        let (ch, w, u) = random_setup(1, 3, 4);
        let zero = CVector::zeros(w.len());
        assert_eq!(rate_bob(&zero, &u, &ch, 1e-10), 0.0);
        assert_eq!(rate_eve(&zero, &u, &ch, 1e-10), 0.0);
        assert_eq!(secrecy_rate(&zero, &u, &ch, 1e-10), 0.0);
        assert_eq!(harvested_power(&zero, &u, &ch, 0.5), 0.0);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let ch = scalar_channels(1.0, C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(1.0, 0.0));
        let w = CVector::from_element(1, C64::new(1.0, 0.0));
        let u = CVector::from_element(1, C64::new(1.0, 0.0));
        // |0.5 + 0.5|^2 = 1 = sigma^2
        assert!((rate_bob(&w, &u, &ch, 1.0) - 1.0).abs() < 1e-15);
        assert!((rate_eve(&w, &u, &ch, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aligned_scalar_harvest() {
        let ch = scalar_channels(1.0, C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let ps: f64 = 15.0;
        let w = CVector::from_element(1, C64::new(ps.sqrt(), 0.0));
        let u = CVector::from_element(1, C64::new(1.0, 0.0));
        assert!((harvested_power(&w, &u, &ch, 0.5) - 2.0 * ps).abs() < 1e-12);
    }

    #[test]
    fn identical_links_have_zero_secrecy() {
        let (ch, w, u) = random_setup(2, 3, 5);
        let twin = ChannelSet::from_links(
            ch.g.clone(),
            ch.h_ab.clone(),
            ch.h_ah.clone(),
            ch.h_ab.clone(),
            ch.h_ib.clone(),
            ch.h_ih.clone(),
            ch.h_ib.clone(),
        )
        .unwrap();
        assert_eq!(secrecy_rate(&w, &u, &twin, 1e-10), 0.0);
    }

    #[test]
    fn silent_eve_gives_bob_rate() {
        let (ch, w, u) = random_setup(3, 2, 3);
        let deaf = ChannelSet::from_links(
            ch.g.clone(),
            ch.h_ab.clone(),
            ch.h_ah.clone(),
            CVector::zeros(2),
            ch.h_ib.clone(),
            ch.h_ih.clone(),
            CVector::zeros(3),
        )
        .unwrap();
        let s = secrecy_rate(&w, &u, &deaf, 1e-10);
        assert_eq!(s, rate_bob(&w, &u, &deaf, 1e-10));
    }

    #[test]
    fn metrics_match_direct_formulas() {
        for seed in 0..50 {
            let (ch, w, u) = random_setup(seed, 1 + (seed as usize % 4), seed as usize % 6);
            let sigma2 = 1e-10;
            let gb = reference_gain(&ch.g, &ch.h_ab, &ch.h_ib, &u, &w);
            let ge = reference_gain(&ch.g, &ch.h_ae, &ch.h_ie, &u, &w);
            let gr = reference_gain(&ch.g, &ch.h_ah, &ch.h_ih, &u, &w);
            let rb = (1.0 + gb / sigma2).log2();
            let re = (1.0 + ge / sigma2).log2();
            assert!((rate_bob(&w, &u, &ch, sigma2) - rb).abs() <= 1e-12 * rb.max(1.0));
            assert!((rate_eve(&w, &u, &ch, sigma2) - re).abs() <= 1e-12 * re.max(1.0));
            let e = harvested_power(&w, &u, &ch, 0.5);
            assert!((e - 0.5 * gr).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn feasibility_reports_violations() {
        let (ch, _, u) = random_setup(4, 4, 6);
        let mut cfg = ScenarioConfig {
            antennas: 4,
            elements: 6,
            min_secrecy_rate: 0.5,
            ..ScenarioConfig::default()
        };
        let (w, sr) = max_sr_beamformer(&u, &ch, &cfg).unwrap();
        cfg.min_secrecy_rate = (sr - 0.1).max(0.01);
        let ok = check_feasible(&w, &u, &cfg, &ch);
        assert!(ok.feasible(), "{ok:?}");

        let big = &w * C64::new(2f64.sqrt(), 0.0);
        let report = check_feasible(&big, &u, &cfg, &ch);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Power { .. })));

        let mut half = u.clone();
        half[0] *= C64::new(0.5, 0.0);
        let report = check_feasible(&w, &half, &cfg, &ch);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Modulus { .. })));
    }

    #[test]
    fn max_sr_beamformer_beats_random_directions() {
        let (ch, _, u) = random_setup(8, 3, 4);
        let cfg = ScenarioConfig {
            antennas: 3,
            elements: 4,
            ..ScenarioConfig::default()
        };
        let (w, sr) = max_sr_beamformer(&u, &ch, &cfg).unwrap();
        assert!((w.norm_squared() - cfg.tx_power).abs() < 1e-9 * cfg.tx_power);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let x = CVector::from_iterator(
                3,
                (0..3).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
            );
            let x = &x * C64::new(cfg.tx_power.sqrt() / x.norm(), 0.0);
            assert!(secrecy_margin_bits(&x, &u, &ch, cfg.noise_power) <= sr + 1e-9);
        }
    }

    #[test]
    fn whitening_preserves_rates() {
        let (ch, w, u) = random_setup(6, 4, 5);
        let cfg = ScenarioConfig::default();
        let (wch, wcfg) = whiten(&ch, &cfg);
        let a = secrecy_margin_bits(&w, &u, &ch, cfg.noise_power);
        let b = secrecy_margin_bits(&w, &u, &wch, wcfg.noise_power);
        assert!((a - b).abs() < 1e-10);
        let ratio = harvested_power(&w, &u, &wch, 0.5) / harvested_power(&w, &u, &ch, 0.5);
        assert!((ratio * cfg.noise_power - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phase_profile_validation() {
        assert!(PhaseProfile::new(CVector::from_element(2, C64::new(0.5, 0.0))).is_err());
        let p = PhaseProfile::from_angles(&[0.0, std::f64::consts::FRAC_PI_2]);
        assert!((p.u()[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
        let v = p.v();
        assert_eq!(v.len(), 3);
        assert_eq!(v[2], C64::new(1.0, 0.0));
        let q = PhaseProfile::project(&CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(3.0, 4.0)]));
        assert_eq!(q.u()[0], C64::new(1.0, 0.0));
        assert!((q.u()[1] - C64::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn scalar_stack_helper_agrees() {
        let one = CVector::from_element(1, C64::new(1.0, 0.0));
        let g = ComplexMatrix::new(DMatrix::from_element(1, 1, C64::new(1.0, 0.0))).unwrap();
        let h = stack_effective(&g, &one, &one).unwrap();
        assert_eq!(h.shape(), (2, 1));
    }

    proptest! {
        #[test]
        fn secrecy_rate_nonnegative(seed in 0u64..500) {
            let (ch, w, u) = random_setup(seed, 3, 4);
            let s = secrecy_rate(&w, &u, &ch, 1e-10);
            prop_assert!(s >= 0.0);
            let b = response(&ch, Link::Bob, &w, &u).norm();
            let e = response(&ch, Link::Eve, &w, &u).norm();
            if b <= e {
                prop_assert_eq!(s, 0.0);
            }
        }

        #[test]
        fn harvest_scales_quadratically(seed in 0u64..500, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let (ch, w, u) = random_setup(seed, 2, 3);
            let c = C64::new(re, im);
            let base = harvested_power(&w, &u, &ch, 0.5);
            let scaled = harvested_power(&(&w * c), &u, &ch, 0.5);
            prop_assert!((scaled - c.norm_sqr() * base).abs() <= 1e-12 * (scaled.abs() + 1e-300));
        }

        #[test]
        fn bob_rate_phase_invariant(seed in 0u64..500, phi in 0.0f64..6.3) {
            let (ch, w, u) = random_setup(seed, 3, 2);
            let rotated = &w * C64::from_polar(1.0, phi);
            let a = rate_bob(&w, &u, &ch, 1e-10);
            let b = rate_bob(&rotated, &u, &ch, 1e-10);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
