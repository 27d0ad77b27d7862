use approx::assert_relative_eq;
use relayfair::channel::*;

#[test]
fn pathloss_examples() {
    assert_eq!(pathloss(1.0, 3.5).unwrap(), 1.0);
    assert_eq!(pathloss(1.0, 2.7).unwrap(), 1.0);
    assert_relative_eq!(pathloss(10.0, 3.5).unwrap(), 3.162e-4, max_relative = 1e-3);
    let ratio = pathloss(15.0, 3.5).unwrap() / pathloss(10.0, 3.5).unwrap();
    assert_relative_eq!(ratio, (2.0f64 / 3.0).powf(3.5), max_relative = 1e-12);
    assert_relative_eq!(ratio, 0.24192, max_relative = 1e-4);
}

#[test]
fn pathloss_rejects_nonpositive_distance() {
    assert!(pathloss(0.0, 3.5).is_err());
    assert!(pathloss(-1.0, 3.5).is_err());
}

#[test]
fn reference_gain_scales_link_gain() {
    let geo = Geometry::uniform(1, 10.0, 15.0, 3.5, 30.0);
    assert_relative_eq!(geo.link_gain(10.0).unwrap(), 1e3 * pathloss(10.0, 3.5).unwrap(), max_relative = 1e-12);
}

#[test]
fn geometry_validation() {
    assert!(Geometry::uniform(2, 10.0, 15.0, 3.5, 0.0).validate().is_ok());
    assert!(Geometry::uniform(2, 10.0, 15.0, 2.0, 0.0).validate().is_err());
    assert!(Geometry::uniform(2, 0.0, 15.0, 3.5, 0.0).validate().is_err());
    let mut g = Geometry::uniform(2, 10.0, 15.0, 3.5, 0.0);
    g.d_rd.pop();
    assert!(g.validate().is_err());
}

#[test]
fn zero_variance_gives_zero_vector() {
    let v = sample_channel(&mut link_rng(1, 0, 0), 4, 0.0);
    assert!(v.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn sample_second_moment() {
    let variance = 3.0e-4;
    let samples = 10_000;
    let mut rng = link_rng(42, 0, 0);
    let mean: f64 = (0..samples).map(|_| sample_channel(&mut rng, 4, variance).norm_squared()).sum::<f64>() / samples as f64;
    assert!((mean / (4.0 * variance) - 1.0).abs() < 0.05, "mean ‖h‖² = {mean}");
}

#[test]
fn same_seed_same_vector() {
    let a = sample_channel(&mut link_rng(9, 3, 1), 4, 1.0);
    let b = sample_channel(&mut link_rng(9, 3, 1), 4, 1.0);
    assert_eq!(a, b);
    let c = sample_channel(&mut link_rng(9, 3, 2), 4, 1.0);
    assert_ne!(a, c);
}

#[test]
fn generate_is_deterministic() {
    let geo = Geometry::uniform(4, 10.0, 15.0, 3.5, 30.0);
    let a = generate(5, 17, &geo, 4).unwrap();
    let b = generate(5, 17, &geo, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate(5, 18, &geo, 4).unwrap());
}

#[test]
fn single_pair_keeps_identity_order() {
    let geo = Geometry::uniform(1, 10.0, 15.0, 3.5, 0.0);
    for t in 0..10 {
        assert_eq!(generate(1, t, &geo, 3).unwrap().order, vec![0]);
    }
}

#[test]
fn generated_gains_ascend() {
    let geo = Geometry::uniform(4, 10.0, 15.0, 3.5, 0.0);
    for t in 0..100 {
        let chan = generate(77, t, &geo, 4).unwrap();
        assert!(chan.gain.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..4 {
            assert_relative_eq!(chan.gain[k], chan.h[k].norm_squared(), max_relative = 1e-12);
        }
    }
}

#[test]
fn pairs_move_together_when_sorted() {
    // Each pair's downlink is redrawn from its original link stream, so the
    // permutation recorded in `order` must map it back to the right stream.
    let geo = Geometry::uniform(3, 10.0, 15.0, 3.5, 0.0);
    let chan = generate(3, 4, &geo, 2).unwrap();
    for (k, &orig) in chan.order.iter().enumerate() {
        let g = sample_channel(&mut link_rng(3, 4, 2 * orig as u64 + 1), 2, geo.link_gain(15.0).unwrap());
        assert_eq!(chan.g[k], g);
    }
}

#[test]
fn empirical_gain_matches_pathloss() {
    let geo = Geometry::uniform(1, 10.0, 15.0, 3.5, 0.0);
    let trials = 4000;
    let mean: f64 = (0..trials).map(|t| generate(8, t, &geo, 4).unwrap().gain[0]).sum::<f64>() / trials as f64;
    let expected = 4.0 * pathloss(10.0, 3.5).unwrap();
    assert!((mean / expected - 1.0).abs() < 0.05, "mean gain {mean} vs {expected}");
}
