use approx::{assert_abs_diff_eq, assert_relative_eq};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relayfair::ia::surrogate::*;
use relayfair::model::{ChannelSet, SystemParams};

#[test]
fn rate_surrogate_example() {
    let s = RateSurrogate::at(1.0, 2.0).unwrap();
    assert_relative_eq!(s.a, 0.9431, max_relative = 1e-4);
    assert_eq!(s.b, -0.25);
    assert_relative_eq!(s.c, -0.1733, max_relative = 1e-3);
    assert_relative_eq!(s.eval(1.0, 2.0), 0.5 * 2f64.ln(), max_relative = 1e-12);
}

#[test]
fn rate_surrogate_rejects_bad_domain() {
    assert!(RateSurrogate::at(0.0, 2.0).is_err());
    assert!(RateSurrogate::at(1.0, 0.5).is_err());
    assert!(RateSurrogate::at(f64::INFINITY, 2.0).is_err());
}

#[test]
fn rate_surrogate_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let psi0 = 10f64.powf(rng.gen_range(-3.0..2.0));
        let tau0 = rng.gen_range(1.0001..20.0);
        let s = RateSurrogate::at(psi0, tau0).unwrap();
        let f0 = rate_fn(psi0, tau0);
        assert!((s.eval(psi0, tau0) - f0).abs() <= 1e-12 * f0.max(1.0));
    }
    let s = RateSurrogate::at(0.3, 1.7).unwrap();
    for _ in 0..10_000 {
        let psi = 10f64.powf(rng.gen_range(-4.0..3.0));
        let tau = rng.gen_range(1.0..50.0);
        assert!(s.eval(psi, tau) <= rate_fn(psi, tau) + 1e-12, "ψ={psi} τ={tau}");
    }
}

#[test]
fn downlink_examples() {
    let s = DownlinkSurrogate { re0: 2.0 };
    assert_eq!(s.eval(2.0), 4.0);
    assert_eq!(s.eval(3.0), 8.0);
    assert_eq!(s.eval(0.0), -4.0);
}

#[test]
fn bilinear_example() {
    // ϑ₀ = 1, θ₀ = 1 → B(1+ϑ₀, θ₀) = B(2, 1)
    let b = BilinearBound { x0: 2.0, y0: 1.0 };
    assert_abs_diff_eq!(b.eval(2.0, 1.0), 2.0, epsilon = 1e-15);
    let (wy, wx) = b.weights();
    let x: f64 = 3.0;
    let y: f64 = 0.7;
    assert_relative_eq!((wy * y).powi(2) + (wx * x).powi(2), b.eval(x, y), max_relative = 1e-12);
}

#[test]
fn bilinear_upper_bound_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let b = BilinearBound { x0: rng.gen_range(0.01..10.0), y0: rng.gen_range(0.01..10.0) };
        let x = rng.gen_range(0.0..20.0);
        let y = rng.gen_range(0.0..20.0);
        assert!(b.eval(x, y) >= x * y - 1e-12 * (x * y).max(1.0));
    }
}

#[test]
fn harvest_example_and_sweep() {
    let gain = [2e-4, 5e-4, 1e-3];
    let p0 = [0.2, 0.1, 0.25];
    let a0 = 1.6;
    let s = HarvestSurrogate::at(&gain, &p0, a0);
    assert_relative_eq!(s.eval(&p0)(a0), harvest_exact(&gain, &p0, a0), max_relative = 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let p: Vec<f64> = p0.iter().map(|v| v * rng.gen_range(0.0..3.0)).collect();
        let a2 = rng.gen_range(1.0..20.0);
        assert!(s.eval(&p)(a2) <= harvest_exact(&gain, &p, a2) * (1.0 + 1e-12) + 1e-18);
    }
}

#[test]
fn log_ratio_tangent_inside_convex_region() {
    let limit = log_ratio_convex_limit();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let t = LogRatioTangent { vartheta0: rng.gen_range(1e-6..limit), beta0: rng.gen_range(0.0..0.95) };
        let v0 = log_ratio(t.vartheta0, t.beta0);
        assert!((t.eval(t.vartheta0, t.beta0) - v0).abs() <= 1e-10 * v0.abs().max(1.0));
        for _ in 0..100 {
            let v = rng.gen_range(1e-8..limit);
            let b = rng.gen_range(0.0..0.99);
            let f = log_ratio(v, b);
            assert!(t.eval(v, b) <= f + 1e-9 * f.abs().max(1.0), "ϑ={v} β={b}");
        }
    }
}

#[test]
fn log_product_majorant_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let ab = rng.gen_range(0.0..10.0);
        let s = LogProductBound { vartheta0: 10f64.powf(rng.gen_range(-4.0..8.0)), ytilde0: rng.gen_range(1.0..20.0), ab };
        let f0 = log_product(s.vartheta0, s.ytilde0, ab);
        assert!((s.eval(s.vartheta0, s.ytilde0) - f0).abs() <= 1e-9 * f0.abs().max(1.0));
        for _ in 0..100 {
            let v = 10f64.powf(rng.gen_range(-6.0..10.0));
            let y = rng.gen_range(0.0..40.0);
            let f = log_product(v, y, ab);
            assert!(s.eval(v, y) >= f - 1e-9 * f.abs().max(1.0), "ϑ={v} ỹ={y}");
        }
    }
}

fn random_channels(rng: &mut ChaCha8Rng, k: usize, n: usize, scale: f64) -> ChannelSet {
    let mut draw = || DVector::from_iterator(n, (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale));
    let h = (0..k).map(|_| draw()).collect();
    let g = (0..k).map(|_| draw()).collect();
    ChannelSet::new(h, g).unwrap()
}

#[test]
fn uplink_single_pair_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let chan = random_channels(&mut rng, 1, 3, 1e-2);
    let params = SystemParams::reference(1, 3, 0.063);
    let (p0, a1) = (0.2, 2.0);
    let s = UplinkSurrogate::at(&chan, &params, &[p0], a1, 0, true).unwrap();
    let floor = params.sigma_ant2 + a1 * params.sigma_r2;
    let c = chan.h[0].norm_squared() / floor;
    assert!(s.quad.is_empty());
    assert_relative_eq!(s.lin, 2.0 * p0 * c, max_relative = 1e-10);
    assert_relative_eq!(s.noise, p0 * p0 * c / floor, max_relative = 1e-10);
}

#[test]
fn uplink_tangent_and_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (k, n) = (3, 4);
    let params = SystemParams::reference(k, n, 0.063);
    for sic in [true, false] {
        let chan = random_channels(&mut rng, k, n, 3e-3);
        let p0: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..0.25)).collect();
        let a0 = rng.gen_range(1.2..4.0);
        for user in 0..k {
            let s = UplinkSurrogate::at(&chan, &params, &p0, a0, user, sic).unwrap();
            let exact0 = uplink_exact(&chan, &params, &p0, a0, user, sic).unwrap();
            assert!((s.eval(&params, &p0, a0) - exact0).abs() <= 1e-10 * exact0.max(1.0));
            for _ in 0..1000 {
                let p: Vec<f64> = p0.iter().map(|v| v * rng.gen_range(0.0..3.0)).collect();
                let a1 = a0 * rng.gen_range(0.5..3.0);
                let exact = uplink_exact(&chan, &params, &p, a1, user, sic).unwrap();
                assert!(s.eval(&params, &p, a1) <= exact * (1.0 + 1e-10) + 1e-12, "sic={sic} k={user}");
            }
        }
    }
}

proptest! {
    #[test]
    fn rate_surrogate_coefficients_signed(psi in 1e-4f64..1e3, tau in 1.0f64..100.0) {
        let s = RateSurrogate::at(psi, tau).unwrap();
        prop_assert!(s.a.is_finite() && s.b <= 0.0 && s.c <= 0.0);
    }

    #[test]
    fn rate_surrogate_is_minorant(psi0 in 1e-3f64..1e2, tau0 in 1.0f64..20.0, psi in 1e-4f64..1e3, tau in 1.0f64..50.0) {
        let s = RateSurrogate::at(psi0, tau0).unwrap();
        prop_assert!(s.eval(psi, tau) <= rate_fn(psi, tau) + 1e-12);
    }

    #[test]
    fn downlink_is_minorant(re0 in 0.0f64..10.0, re in -10.0f64..10.0) {
        let s = DownlinkSurrogate { re0 };
        prop_assert!(s.eval(re) <= re * re + 1e-12);
    }
}
