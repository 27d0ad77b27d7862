use approx::assert_relative_eq;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use relayfair::channel;
use relayfair::model::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cvec(v: &[(f64, f64)]) -> CVec {
    DVector::from_iterator(v.len(), v.iter().map(|&(a, b)| c(a, b)))
}

fn single_pair(h_gain: f64, n: usize) -> ChannelSet {
    let mut h = vec![c(0.0, 0.0); n];
    h[0] = c(h_gain.sqrt(), 0.0);
    let mut g = vec![c(0.0, 0.0); n];
    g[0] = c(1.0, 0.0);
    ChannelSet::new(vec![DVector::from_vec(h)], vec![DVector::from_vec(g)]).unwrap()
}

fn params(k: usize, n: usize) -> SystemParams {
    SystemParams::reference(k, n, 0.063)
}

#[test]
fn gamma1_single_pair_closed_form() {
    // p²‖h‖² = 1e-7 with the noise floor σ_ant² + σ_R²/α = 1e-10 + 2e-8.
    let chan = single_pair(1e-7, 3);
    let g = gamma1(&chan, &params(1, 3), &[1.0], 0.5, 0, true).unwrap();
    assert_relative_eq!(g, 1e-7 / (1e-10 + 2e-8), max_relative = 1e-12);
    assert_relative_eq!(g, 4.975, max_relative = 1e-3);
}

#[test]
fn gamma1_zero_power_is_zero() {
    let chan = single_pair(1e-7, 2);
    assert_eq!(gamma1(&chan, &params(1, 2), &[0.0], 0.5, 0, true).unwrap(), 0.0);
}

/// Explicit 2×2 Hermitian inverse, independent of the library's factorization.
fn inv2(m: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn dense_gamma1(h: &[[Complex64; 2]], p: &[f64], noise: f64, k: usize, interferers: &[usize]) -> f64 {
    let mut phi = [[c(0.0, 0.0); 2]; 2];
    for &l in interferers {
        for i in 0..2 {
            for j in 0..2 {
                phi[i][j] += h[l][i] * h[l][j].conj() * (p[l] * p[l]);
            }
        }
    }
    phi[0][0] += noise;
    phi[1][1] += noise;
    let inv = inv2(phi);
    let mut q = c(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            q += h[k][i].conj() * inv[i][j] * h[k][j];
        }
    }
    p[k] * p[k] * q.re
}

#[test]
fn gamma1_matches_dense_inverse_k2_n2() {
    let geo = channel::Geometry::uniform(2, 10.0, 15.0, 3.5, 30.0);
    let prm = params(2, 2);
    for trial in 0..20 {
        let chan = channel::generate(11, trial, &geo, 2).unwrap();
        let h: Vec<[Complex64; 2]> = chan.h.iter().map(|v| [v[0], v[1]]).collect();
        let p = [0.21, 0.17];
        let alpha = 0.3;
        let noise = prm.sigma_ant2 + prm.sigma_r2 / alpha;
        for k in 0..2 {
            let sic_set: Vec<usize> = (0..k).collect();
            let all: Vec<usize> = (0..2).filter(|&l| l != k).collect();
            let lib_sic = gamma1(&chan, &prm, &p, alpha, k, true).unwrap();
            let lib_all = gamma1(&chan, &prm, &p, alpha, k, false).unwrap();
            assert_relative_eq!(lib_sic, dense_gamma1(&h, &p, noise, k, &sic_set), max_relative = 1e-9);
            assert_relative_eq!(lib_all, dense_gamma1(&h, &p, noise, k, &all), max_relative = 1e-9);
        }
    }
}

#[test]
fn rate1_examples() {
    let chan = single_pair(1e-7, 1);
    let prm = params(1, 1);
    let gamma: f64 = 1e-7 / (1e-10 + 2e-8);
    let r = rate1(&chan, &prm, &[1.0], 0.5, 0.5, 0, true).unwrap();
    assert_relative_eq!(r, 0.5 * (1.0 + gamma).ln(), max_relative = 1e-12);
    assert_relative_eq!(r, 0.8938, epsilon = 1e-3);
    assert_eq!(rate1(&chan, &prm, &[0.0], 0.5, 0.5, 0, true).unwrap(), 0.0);
    let r2 = rate1(&chan, &prm, &[1.0], 0.4, 0.5, 0, true).unwrap();
    let r1 = rate1(&chan, &prm, &[1.0], 0.2, 0.5, 0, true).unwrap();
    assert_relative_eq!(r2, 2.0 * r1, max_relative = 1e-12);
}

#[test]
fn gamma2_examples() {
    let g0 = cvec(&[(1e-4, 0.0), (0.0, 0.0)]);
    let g1 = cvec(&[(0.0, 0.0), (1.0, 0.0)]);
    let chan = ChannelSet::new(vec![cvec(&[(1.0, 0.0), (0.0, 0.0)]), cvec(&[(2.0, 0.0), (0.0, 0.0)])], vec![g0, g1]).unwrap();
    let prm = params(2, 2);
    // |g w|² = 1e-8·0.1 = 1e-9 with σ² = 1e-10 and no leakage into pair 0.
    let w = vec![cvec(&[(0.1f64.sqrt(), 0.0), (0.0, 0.0)]), cvec(&[(0.0, 0.0), (0.0, 0.0)])];
    assert_relative_eq!(gamma2(&chan, &prm, &w, 0).unwrap(), 10.0, max_relative = 1e-12);
    assert_eq!(gamma2(&chan, &prm, &w, 1).unwrap(), 0.0);
    let r = rate2(&chan, &prm, &w, 0.25, 0).unwrap();
    assert_relative_eq!(r, 0.75 * 11f64.ln(), max_relative = 1e-12);
}

#[test]
fn gamma2_matches_direct_ratio() {
    let geo = channel::Geometry::uniform(2, 10.0, 15.0, 3.5, 30.0);
    let prm = params(2, 2);
    let chan = channel::generate(5, 0, &geo, 2).unwrap();
    let w = vec![cvec(&[(1e-3, 2e-3), (-1e-3, 5e-4)]), cvec(&[(3e-4, -1e-3), (2e-3, 1e-3)])];
    for k in 0..2 {
        let dot = |l: usize| -> Complex64 { (0..2).map(|j| chan.g[k][j] * w[l][j]).sum() };
        let signal = dot(k).norm_sqr();
        let interference = dot(1 - k).norm_sqr();
        let expected = signal / (interference + prm.sigma_k2[k]);
        assert_relative_eq!(gamma2(&chan, &prm, &w, k).unwrap(), expected, max_relative = 1e-12);
    }
}

#[test]
fn gamma2_rejects_wrong_dimensions() {
    let chan = single_pair(1e-7, 2);
    let w = vec![cvec(&[(1.0, 0.0)])];
    assert!(gamma2(&chan, &params(1, 2), &w, 0).is_err());
}

#[test]
fn power_examples() {
    // Σ p²‖h‖² = 1e-3 W
    let chan = single_pair(1e-3, 1);
    let prm = params(1, 1);
    let p = [1.0];
    assert_relative_eq!(p_acc(&chan, &p, 0.5, 0.5, 0.5), 1.25e-4, max_relative = 1e-12);
    assert_eq!(p_acc(&chan, &p, 0.5, 0.5, 0.0), 0.0);
    assert_relative_eq!(p_acc(&chan, &[2.0], 0.5, 0.5, 0.5), 4.0 * 1.25e-4, max_relative = 1e-12);

    let eh = NonlinearEhParams::reference();
    assert_relative_eq!(eh.omega, 1.0 / (1.0 + 19.2f64.exp()), max_relative = 1e-12);
    assert_relative_eq!(eh.omega, 4.59e-9, max_relative = 1e-2);
    assert!(eh.xi > eh.p_eh_max);
    assert_eq!(p_dc(&chan, &eh, &[0.0], 0.5, 0.5, 0.5), 0.0);
    // (1-α)(1-β)X = 0.25 · 0.012 W puts the harvester input exactly at b.
    let chan_b = single_pair(0.012, 1);
    let at_b = p_dc(&chan_b, &eh, &[1.0], 0.5, 0.5, 0.5);
    assert_relative_eq!(at_b, 0.5 * eh.xi * (0.5 - eh.omega), max_relative = 1e-9);
    assert_relative_eq!(at_b, 5.0e-5, max_relative = 1e-3);
    let saturated = p_dc(&single_pair(10.0, 1), &eh, &[1.0], 0.5, 0.5, 0.5);
    assert_relative_eq!(saturated, 0.5 * eh.p_eh_max, max_relative = 1e-9);

    let w0 = vec![cvec(&[(0.0, 0.0)])];
    assert_eq!(p_tot(&prm, &w0, 0.5), prm.p_sta);
    let w = vec![cvec(&[(1e-2, 0.0)])];
    assert_relative_eq!(p_tot(&prm, &w, 0.5), 5.1e-5, max_relative = 1e-12);
    assert_relative_eq!(p_tot(&prm, &w, 1.0 - 1e-12), prm.p_sta, max_relative = 1e-9);
}

#[test]
fn sigmoid_is_safe_far_from_origin() {
    assert_eq!(sigmoid(-800.0), 0.0);
    assert_eq!(sigmoid(800.0), 1.0);
    assert_relative_eq!(sigmoid(0.0), 0.5);
    assert!(sigmoid(-745.0).is_finite());
}

#[test]
fn eh_params_reject_nonpositive() {
    assert!(NonlinearEhParams::new(0.0, 0.003, 2e-4).is_err());
    assert!(NonlinearEhParams::new(6400.0, -1.0, 2e-4).is_err());
    assert!(NonlinearEhParams::new(6400.0, 0.003, 0.0).is_err());
}

#[test]
fn system_params_validation() {
    assert!(params(4, 4).validate().is_ok());
    let mut p = params(2, 2);
    p.p_dcc_min = p.p_acc_min / 2.0;
    assert!(p.validate().is_err());
    let mut p = params(2, 2);
    p.k = 0;
    assert!(p.validate().is_err());
    let mut p = params(2, 2);
    p.sigma_r2 = 0.0;
    assert!(p.validate().is_err());
}

#[test]
fn evaluate_zero_power_corner() {
    let chan = single_pair(1e-3, 2);
    let prm = params(1, 2);
    let eh = NonlinearEhParams::reference();
    let alloc = Allocation { p: vec![0.0], w: vec![cvec(&[(0.0, 0.0), (0.0, 0.0)])], tau: 0.5, alpha: 0.5, beta: 0.5 };
    let (rates, power) = evaluate(&chan, &prm, &eh, &alloc, Mode::Acc, true).unwrap();
    assert_eq!(rates.min_rate, 0.0);
    assert_relative_eq!(power.residuals.budget, -prm.p_sta, max_relative = 1e-12);
    assert!(!power.residuals.is_feasible());
}

#[test]
fn evaluate_acc_with_zero_beta_flags_computing() {
    let chan = single_pair(1e-2, 1);
    let prm = params(1, 1);
    let eh = NonlinearEhParams::reference();
    let alloc = Allocation { p: vec![0.2], w: vec![cvec(&[(1e-3, 0.0)])], tau: 0.5, alpha: 0.5, beta: 0.0 };
    let (_, acc) = evaluate(&chan, &prm, &eh, &alloc, Mode::Acc, true).unwrap();
    assert!(acc.clamped);
    assert!(acc.residuals.computing < 0.0);
    assert_relative_eq!(acc.residuals.computing, acc.p_acc - prm.p_acc_min);
    let (_, dcc) = evaluate(&chan, &prm, &eh, &alloc, Mode::Dcc, true).unwrap();
    assert!(!dcc.clamped);
    assert_relative_eq!(dcc.residuals.computing, dcc.p_dc - dcc.p_tot - prm.p_dcc_min);
}

#[test]
fn evaluate_flags_clamped_fractions() {
    let chan = single_pair(1e-2, 1);
    let prm = params(1, 1);
    let eh = NonlinearEhParams::reference();
    let alloc = Allocation { p: vec![0.2], w: vec![cvec(&[(1e-3, 0.0)])], tau: 1.0, alpha: 0.5, beta: 0.5 };
    let (rates, power) = evaluate(&chan, &prm, &eh, &alloc, Mode::Acc, true).unwrap();
    assert!(power.clamped);
    assert!(rates.min_rate.is_finite());
}

#[test]
fn channel_set_sorts_pairs_jointly() {
    let mk = |gain: f64, tag: f64| (cvec(&[(gain.sqrt(), 0.0)]), cvec(&[(tag, 0.0)]));
    let (ha, ga) = mk(2e-7, 1.0);
    let (hb, gb) = mk(5e-8, 2.0);
    let (hc, gc) = mk(1e-7, 3.0);
    let chan = ChannelSet::new(vec![ha, hb, hc], vec![ga, gb, gc]).unwrap();
    assert_eq!(chan.order, vec![1, 2, 0]);
    let tags: Vec<f64> = chan.g.iter().map(|g| g[0].re).collect();
    assert_eq!(tags, vec![2.0, 3.0, 1.0]);
    assert!(chan.gain.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn channel_set_rejects_non_finite() {
    let h = vec![cvec(&[(f64::NAN, 0.0)])];
    let g = vec![cvec(&[(1.0, 0.0)])];
    assert!(ChannelSet::new(h, g).is_err());
}

fn random_instance(seed: u64, k: usize, n: usize) -> (ChannelSet, SystemParams) {
    let geo = channel::Geometry::uniform(k, 10.0, 15.0, 3.5, 30.0);
    (channel::generate(seed, 0, &geo, n).unwrap(), params(k, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sic_never_loses_to_full_interference(seed in 0u64..1000, p in prop::collection::vec(0.0f64..0.25, 3), alpha in 0.05f64..0.95) {
        let (chan, prm) = random_instance(seed, 3, 2);
        for k in 0..3 {
            let sic = gamma1(&chan, &prm, &p, alpha, k, true).unwrap();
            let all = gamma1(&chan, &prm, &p, alpha, k, false).unwrap();
            prop_assert!(sic >= all * (1.0 - 1e-12));
        }
    }

    #[test]
    fn sic_is_exact_when_alone(seed in 0u64..1000, pk in 0.0f64..0.25, alpha in 0.05f64..0.95) {
        let (chan, prm) = random_instance(seed, 3, 2);
        let mut p = vec![0.0; 3];
        p[1] = pk;
        let sic = gamma1(&chan, &prm, &p, alpha, 1, true).unwrap();
        let all = gamma1(&chan, &prm, &p, alpha, 1, false).unwrap();
        prop_assert!((sic - all).abs() <= 1e-12 * sic.max(1e-300));
    }

    #[test]
    fn sic_gamma_depends_only_on_earlier_interferers(seed in 0u64..1000, base in prop::collection::vec(0.01f64..0.25, 3), bump in 0.0f64..0.2) {
        let (chan, prm) = random_instance(seed, 3, 2);
        let g1 = gamma1(&chan, &prm, &base, 0.5, 1, true).unwrap();
        let mut later = base.clone();
        later[2] += bump;
        prop_assert_eq!(gamma1(&chan, &prm, &later, 0.5, 1, true).unwrap(), g1);
        let mut earlier = base.clone();
        earlier[0] += bump;
        prop_assert!(gamma1(&chan, &prm, &earlier, 0.5, 1, true).unwrap() <= g1 * (1.0 + 1e-12));
    }

    #[test]
    fn harvest_monotonicity(seed in 0u64..1000, p in prop::collection::vec(0.01f64..0.25, 2), tau in 0.05f64..0.95, alpha in 0.05f64..0.9, beta in 0.05f64..0.9, d in 0.001f64..0.05) {
        let (chan, _) = random_instance(seed, 2, 2);
        let eh = NonlinearEhParams::reference();
        let base = p_dc(&chan, &eh, &p, tau, alpha, beta);
        prop_assert!(base >= 0.0);
        prop_assert!(base <= tau * eh.p_eh_max * (1.0 + 1e-12));
        let mut more = p.clone();
        more[0] += d;
        prop_assert!(p_dc(&chan, &eh, &more, tau, alpha, beta) >= base);
        prop_assert!(p_dc(&chan, &eh, &p, tau, alpha + d, beta) <= base);
        prop_assert!(p_dc(&chan, &eh, &p, tau, alpha, beta + d) <= base);
        prop_assert!(p_acc(&chan, &p, tau, alpha, beta + d) >= p_acc(&chan, &p, tau, alpha, beta));
    }

    #[test]
    fn downlink_scaling_and_phase(seed in 0u64..1000, scale in 0.1f64..10.0, phase in 0.0f64..6.28) {
        let (chan, prm) = random_instance(seed, 2, 3);
        let w: Vec<CVec> = (0..2).map(|k| chan.g[k].map(|z| z.conj() * 1e-3)).collect();
        let scaled: Vec<CVec> = w.iter().map(|v| v * Complex64::new(scale, 0.0)).collect();
        let leak = |w: &[CVec]| chan.gw(0, &w[1]).norm_sqr();
        prop_assert!((leak(&scaled) - scale * scale * leak(&w)).abs() <= 1e-9 * leak(&scaled).max(1e-300));
        let mut rotated = w.clone();
        rotated[0] = &w[0] * Complex64::from_polar(1.0, phase);
        let a = gamma2(&chan, &prm, &w, 0).unwrap();
        let b = gamma2(&chan, &prm, &rotated, 0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn e2e_is_hop_minimum(seed in 0u64..1000, tau in 0.05f64..0.95, alpha in 0.05f64..0.95, beta in 0.05f64..0.95) {
        let (chan, prm) = random_instance(seed, 2, 2);
        let eh = NonlinearEhParams::reference();
        let w: Vec<CVec> = (0..2).map(|k| chan.g[k].map(|z| z.conj() * 1e-2)).collect();
        let alloc = Allocation { p: vec![0.2, 0.1], w, tau, alpha, beta };
        let (rates, power) = evaluate(&chan, &prm, &eh, &alloc, Mode::Acc, true).unwrap();
        for k in 0..2 {
            prop_assert_eq!(rates.e2e[k], rates.r1[k].min(rates.r2[k]));
        }
        prop_assert_eq!(rates.min_rate, rates.e2e[0].min(rates.e2e[1]));
        prop_assert!(power.p_dc >= 0.0 && power.p_acc >= 0.0);
    }
}
