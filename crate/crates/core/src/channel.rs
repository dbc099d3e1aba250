//! Scenario generation: path loss, Rayleigh fading draws, the line-of-sight
//! AP->IRS link, and the stacked effective channels `H_x = [diag(h_ix^H) G; h_ax^H]`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{CVector, ComplexMatrix, C64};

/// The three receivers of the downlink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Link {
    /// Energy harvesting receiver.
    Ehr,
    /// Legitimate information receiver.
    Bob,
    /// Eavesdropper.
    Eve,
}

/// Linear power gain `10^(-PL0/10) * d^(-alpha)`.
pub fn path_loss_gain(distance: f64, exponent: f64, pl_ref_db: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidInput(format!(
            "distance must be positive, got {distance}"
        )));
    }
    Ok(10f64.powf(-pl_ref_db / 10.0) * distance.powf(-exponent))
}

/// Half-wavelength uniform linear array response `exp(j*pi*k*sin(angle))`.
pub fn ula_steering(len: usize, angle_rad: f64) -> CVector {
    let phase = std::f64::consts::PI * angle_rad.sin();
    CVector::from_iterator(len, (0..len).map(|k| C64::from_polar(1.0, phase * k as f64)))
}

fn draw_cn<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> CVector {
    let s = (variance / 2.0).sqrt();
    CVector::from_iterator(
        len,
        (0..len).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(s * re, s * im)
        }),
    )
}

/// Builds `[diag(h_i^H) G; h_a^H]`, an `(N+1) x M` matrix.
pub fn stack_effective(g: &ComplexMatrix, h_a: &CVector, h_i: &CVector) -> Result<ComplexMatrix> {
    let (n, m) = g.shape();
    if h_a.len() != m || h_i.len() != n {
        return Err(Error::InvalidInput(format!(
            "stack dimensions: G is {n}x{m}, h_a has {}, h_i has {}",
            h_a.len(),
            h_i.len()
        )));
    }
    let mut out = DMatrix::zeros(n + 1, m);
    for row in 0..n {
        let s = h_i[row].conj();
        for col in 0..m {
            out[(row, col)] = s * g[(row, col)];
        }
    }
    for col in 0..m {
        out[(n, col)] = h_a[col].conj();
    }
    ComplexMatrix::new(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// AP -> IRS, `N x M`.
    pub g: ComplexMatrix,
    pub h_ab: CVector,
    pub h_ah: CVector,
    pub h_ae: CVector,
    pub h_ib: CVector,
    pub h_ih: CVector,
    pub h_ie: CVector,
    pub h_r: ComplexMatrix,
    pub h_b: ComplexMatrix,
    pub h_e: ComplexMatrix,
}

impl ChannelSet {
    pub fn from_links(
        g: ComplexMatrix,
        h_ab: CVector,
        h_ah: CVector,
        h_ae: CVector,
        h_ib: CVector,
        h_ih: CVector,
        h_ie: CVector,
    ) -> Result<Self> {
        let h_r = stack_effective(&g, &h_ah, &h_ih)?;
        let h_b = stack_effective(&g, &h_ab, &h_ib)?;
        let h_e = stack_effective(&g, &h_ae, &h_ie)?;
        Ok(Self {
            g,
            h_ab,
            h_ah,
            h_ae,
            h_ib,
            h_ih,
            h_ie,
            h_r,
            h_b,
            h_e,
        })
    }

    /// Draws a scenario from a generator seeded with `cfg.seed`.
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        generate_scenario(cfg, &mut rng)
    }

    pub fn antennas(&self) -> usize {
        self.g.ncols()
    }

    pub fn elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn stacked(&self, link: Link) -> &ComplexMatrix {
        match link {
            Link::Ehr => &self.h_r,
            Link::Bob => &self.h_b,
            Link::Eve => &self.h_e,
        }
    }

    /// `H_x^H v`: the effective M-dimensional channel for phase vector `v = [u; 1]`,
    /// so that `v^H H_x w = effective(x, v)^H w`.
    pub fn effective(&self, link: Link, v: &CVector) -> CVector {
        self.stacked(link).adjoint() * v
    }

    /// The same realization with the IRS removed (`N = 0`).
    pub fn without_irs(&self) -> Self {
        let m = self.antennas();
        let empty = CVector::zeros(0);
        Self::from_links(
            ComplexMatrix::zeros(0, m),
            self.h_ab.clone(),
            self.h_ah.clone(),
            self.h_ae.clone(),
            empty.clone(),
            empty.clone(),
            empty,
        )
        .expect("dimensions are consistent")
    }

    /// Every user-side link scaled by `s`, which scales each `H_x` by `s`.
    ///
    /// With `s = 1/sigma` the channels are expressed in noise-normalized units.
    pub fn scaled(&self, s: f64) -> Self {
        let k = C64::new(s, 0.0);
        Self::from_links(
            self.g.clone(),
            &self.h_ab * k,
            &self.h_ah * k,
            &self.h_ae * k,
            &self.h_ib * k,
            &self.h_ih * k,
            &self.h_ie * k,
        )
        .expect("dimensions are consistent")
    }
}

/// Draws a channel realization.
///
/// Direct links are drawn before the IRS links so that a given seed yields the
/// same AP->user channels for every IRS size.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let m = cfg.antennas;
    let n = cfg.elements;
    let d = &cfg.distances;
    let pl = |dist: f64, alpha: f64| path_loss_gain(dist, alpha, cfg.pl_ref_db);

    let h_ab = draw_cn(m, pl(d.ap_bob, cfg.alpha_direct)?, rng);
    let h_ah = draw_cn(m, pl(d.ap_ehr, cfg.alpha_direct)?, rng);
    let h_ae = draw_cn(m, pl(d.ap_eve, cfg.alpha_direct)?, rng);
    let h_ib = draw_cn(n, pl(d.irs_bob, cfg.alpha_irs)?, rng);
    let h_ih = draw_cn(n, pl(d.irs_ehr, cfg.alpha_irs)?, rng);
    let h_ie = draw_cn(n, pl(d.irs_eve, cfg.alpha_irs)?, rng);

    let amp = pl(d.ap_irs, cfg.alpha_irs)?.sqrt();
    let arrival = ula_steering(n, cfg.aoa_deg.to_radians());
    let departure = ula_steering(m, cfg.aod_deg.to_radians());
    let g = ComplexMatrix::new(&arrival * departure.adjoint() * C64::new(amp, 0.0))?;

    ChannelSet::from_links(g, h_ab, h_ah, h_ae, h_ib, h_ih, h_ie)
}
