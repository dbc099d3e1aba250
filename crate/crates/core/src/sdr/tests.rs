use super::*;
use crate::metrics::{check_feasible, secrecy_margin_bits};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(m: usize, n: usize, seed: u64, r0: f64) -> (ChannelSet, ScenarioConfig) {
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

fn rand_phases(n: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    crate::sca::random_phases(n, &mut rng)
}

#[test]
fn w_sdp_without_eavesdropper_is_mrt() {
    let (ch, cfg) = scenario(4, 5, 1, 1e-3);
    let ch = without_eve(&ch);
    let v = augment(&rand_phases(5, 1));
    let step = solve_w_sdp(&HermitianMatrix::outer(&v), &ch, &cfg).unwrap();
    let expected = cfg.tx_power * ch.effective(Link::Ehr, &v).norm_squared();
    assert!(
        (step.value - expected).abs() <= 1e-6 * expected,
        "{} vs {expected}",
        step.value
    );
    assert!(step.matrix.trace() <= cfg.tx_power * (1.0 + 1e-6));
}

#[test]
fn w_sdp_without_irs() {
    let (ch, cfg) = scenario(3, 0, 2, 1e-3);
    let ch = without_eve(&ch);
    let step = solve_w_sdp(&HermitianMatrix::identity(1), &ch, &cfg).unwrap();
    let expected = cfg.tx_power * ch.h_ah.norm_squared();
    assert!((step.value - expected).abs() <= 1e-6 * expected);
}

#[test]
fn v_sdp_single_reflector_matches_phase_grid() {
    let (ch, mut cfg) = scenario(2, 1, 3, 1e-3);
    cfg.min_secrecy_rate = 1e-3;
    let zero_direct = ChannelSet::from_links(
        ch.g.clone(),
        CVector::zeros(2),
        CVector::zeros(2),
        CVector::zeros(2),
        ch.h_ib.clone(),
        ch.h_ih.clone(),
        CVector::zeros(1),
    )
    .unwrap();
    let w = CVector::from_vec(vec![C64::new(2.0, 1.0), C64::new(-1.0, 0.5)]);
    let step = solve_v_sdp(&HermitianMatrix::outer(&w), &zero_direct, &cfg).unwrap();
    let mut best = 0.0f64;
    for k in 0..4096 {
        let th = std::f64::consts::TAU * k as f64 / 4096.0;
        let u = CVector::from_element(1, C64::from_polar(1.0, th));
        best = best.max(harvested_power(&w, &u, &zero_direct, 1.0));
    }
    assert!((step.value - best).abs() <= 1e-6 * best, "{} vs {best}", step.value);
}

#[test]
fn v_sdp_value_invariant_under_element_rotation() {
    let (ch, cfg) = scenario(3, 4, 4, 0.5);
    let (w, _) = max_sr_beamformer(&rand_phases(4, 2), &ch, &cfg).unwrap();
    let wm = HermitianMatrix::outer(&w);
    let base = solve_v_sdp(&wm, &ch, &cfg).unwrap().value;
    let d = rand_phases(4, 9);
    let rot = |h: &CVector| h.component_mul(&d);
    let rotated = ChannelSet::from_links(
        ch.g.clone(),
        ch.h_ab.clone(),
        ch.h_ah.clone(),
        ch.h_ae.clone(),
        rot(&ch.h_ib),
        rot(&ch.h_ih),
        rot(&ch.h_ie),
    )
    .unwrap();
    let other = solve_v_sdp(&wm, &rotated, &cfg).unwrap().value;
    assert!((base - other).abs() <= 1e-6 * base);
}

#[test]
fn rank_one_v_is_feasible_point() {
    let v = augment(&rand_phases(6, 5));
    let vv = HermitianMatrix::outer(&v);
    for i in 0..7 {
        assert!((vv[(i, i)].re - 1.0).abs() < 1e-15);
    }
}

#[test]
fn randomize_w_rank_one_recovers_direction() {
    let (ch, cfg) = scenario(4, 3, 6, 0.5);
    let u = rand_phases(3, 6);
    let (w, sr) = max_sr_beamformer(&u, &ch, &cfg).unwrap();
    assert!(sr >= cfg.min_secrecy_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let got = randomize_w(&HermitianMatrix::outer(&w), &u, &ch, &cfg, 10, &mut rng).unwrap();
    let a = harvested_power(&w, &u, &ch, 1.0);
    let b = harvested_power(&got.w, &u, &ch, 1.0);
    assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
}

#[test]
fn randomized_w_below_relaxation_and_feasible() {
    for seed in 0..5 {
        let (ch, cfg) = scenario(4, 4, seed, 1.0);
        let u = rand_phases(4, seed);
        let (_, sr) = max_sr_beamformer(&u, &ch, &cfg).unwrap();
        if sr < cfg.min_secrecy_rate {
            continue;
        }
        let vv = HermitianMatrix::outer(&augment(&u));
        let step = solve_w_sdp(&vv, &ch, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = randomize_w(&step.matrix, &u, &ch, &cfg, 1000, &mut rng).unwrap();
        let got = harvested_power(&w.w, &u, &ch, 1.0);
        assert!(got <= step.value * (1.0 + 1e-8));
        assert!(check_feasible(&w.w, &u, &cfg, &ch).feasible());
    }
}

#[test]
fn randomize_v_rank_one_recovers_phases() {
    let (ch, cfg) = scenario(3, 5, 7, 0.01);
    let ch = without_eve(&ch);
    let u = rand_phases(5, 7);
    let v = augment(&u) * C64::from_polar(1.0, 0.8);
    let w = CVector::from_element(3, C64::new(1.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let got = randomize_v(
        &HermitianMatrix::outer(&v),
        &HermitianMatrix::outer(&w),
        &ch,
        &cfg,
        0,
        &mut rng,
    )
    .unwrap();
    assert!((got.u() - &u).norm() < 1e-9);
    for z in got.u().iter() {
        assert!((z.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn sdr_without_irs_or_eavesdropper_is_mrt() {
    let (ch, cfg) = scenario(4, 0, 8, 0.01);
    let ch = without_eve(&ch);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let res = sdr_ao(&ch, &cfg, &mut rng).unwrap();
    let closed = cfg.harvest_efficiency * cfg.tx_power * ch.h_ah.norm_squared();
    assert!((res.harvested - closed).abs() <= 0.01 * closed);
}

#[test]
fn sdr_trace_monotone_and_bounded() {
    for seed in 0..5 {
        let (ch, mut cfg) = scenario(3, 6, seed, 1.0);
        cfg.solver.randomizations = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = sdr_ao(&ch, &cfg, &mut rng).unwrap();
        if res.status == SolveStatus::Infeasible {
            continue;
        }
        for pair in res.harvested_trace.windows(2) {
            assert!(pair[1] >= pair[0] * (1.0 - 1e-8));
        }
        let bound = res.relaxation_bound.unwrap();
        assert!(
            res.harvested <= bound * (1.0 + 1e-8) + 1e-8,
            "{} > {bound}",
            res.harvested
        );
        assert!(check_feasible(&res.w.w, res.u.u(), &cfg, &ch).feasible());
        assert!(secrecy_margin_bits(&res.w.w, res.u.u(), &ch, cfg.noise_power) >= cfg.min_secrecy_rate - 1e-6);
    }
}

#[test]
fn dimension_checks() {
    let (ch, cfg) = scenario(2, 3, 1, 1.0);
    assert!(solve_w_sdp(&HermitianMatrix::identity(3), &ch, &cfg).is_err());
    assert!(solve_v_sdp(&HermitianMatrix::identity(3), &ch, &cfg).is_err());
}
