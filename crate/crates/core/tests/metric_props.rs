use fracshape::curve::{circle, random_curve, random_diffeo, compose, CurveSpec, DiffeoSpec, DiscreteCurve, TangentField};
use fracshape::metric::{self, MetricParams};
use fracshape::spectral::{self, SampledFunction, SobolevOrder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve(seed: u64, n: usize) -> DiscreteCurve {
    random_curve(seed, &CurveSpec { max_mode: 4, ..CurveSpec::new(n, 2) }).unwrap()
}

fn field(seed: u64, c: &DiscreteCurve, modes: usize) -> TangentField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..4 * modes + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = SampledFunction::from_fn(c.len(), 2, |t, o| {
        for (k, x) in o.iter_mut().enumerate() {
            *x = coeffs[k];
            for m in 1..=modes {
                let (s, cs) = (2.0 * std::f64::consts::PI * m as f64 * t).sin_cos();
                let base = 2 + 4 * (m - 1) + 2 * k;
                *x += (coeffs[base] * cs + coeffs[base + 1] * s) / (m * m) as f64;
            }
        }
    })
    .unwrap();
    TangentField::new(c, f).unwrap()
}

fn order(q: f64) -> SobolevOrder {
    SobolevOrder::new(q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bilinear_symmetric_and_nonnegative(seed in 0u64..10_000, q in 0.0..2.5f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let c = curve(seed, 32);
        let (h, k, l) = (field(seed + 1, &c, 4), field(seed + 2, &c, 4), field(seed + 3, &c, 4));
        let g = |x: &TangentField, y: &TangentField| metric::gq(&c, x, y, order(q)).unwrap();
        let combo = TangentField::new(&c, h.as_function().lin_comb(a, k.as_function(), b).unwrap()).unwrap();
        let lhs = g(&combo, &l);
        let rhs = a * g(&h, &l) + b * g(&k, &l);
        let scale = g(&h, &h).sqrt().max(g(&k, &k).sqrt()) * g(&l, &l).sqrt() * (a.abs() + b.abs() + 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        prop_assert!((g(&h, &k) - g(&k, &h)).abs() <= 1e-12 * scale);
        prop_assert!(g(&h, &h) >= 0.0);
    }

    #[test]
    fn homogeneous_part_scales(seed in 0u64..10_000, q in 0.0..2.5f64, lambda in 0.1..10.0f64) {
        let c = curve(seed, 32);
        let h = field(seed + 7, &c, 4);
        let big = c.scaled(lambda).unwrap();
        let base = metric::gq_dot(&c, &h, &h, order(q)).unwrap();
        let scaled = metric::gq_dot(&big, &h, &h, order(q)).unwrap();
        let expected = lambda.powf(1.0 - 2.0 * q) * base;
        prop_assert!((scaled - expected).abs() <= 1e-10 * expected.abs());
    }

    #[test]
    fn invariant_nesting(seed in 0u64..10_000, q1 in 0.0..2.0f64, gap in 0.0..1.5f64) {
        let c = curve(seed, 32);
        let h = field(seed + 11, &c, 4);
        let q2 = q1 + gap;
        let lo = metric::gq_dot(&c, &h, &h, order(q1)).unwrap().sqrt();
        let hi = metric::gq_dot(&c, &h, &h, order(q2)).unwrap().sqrt();
        prop_assert!(lo <= c.length().powf(q2 - q1) * hi + 1e-9);
    }

    #[test]
    fn homogeneous_bounded_by_full(seed in 0u64..10_000, q in 0.0..2.5f64) {
        let c = curve(seed, 32);
        let h = field(seed + 13, &c, 4);
        let hom = metric::norm(&c, &h, MetricParams::homogeneous(q).unwrap()).unwrap();
        let full = metric::norm(&c, &h, MetricParams::full(q).unwrap()).unwrap();
        prop_assert!(hom <= full * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn full_metric_is_definite() {
    for seed in 0..20 {
        let c = curve(seed, 32);
        let zero = TangentField::new(&c, SampledFunction::zeros(32, 2).unwrap()).unwrap();
        assert_eq!(metric::gq(&c, &zero, &zero, order(1.3)).unwrap(), 0.0);
        let constant = TangentField::new(&c, SampledFunction::constant(32, &[0.3, -0.2]).unwrap()).unwrap();
        assert!(metric::gq(&c, &constant, &constant, order(1.3)).unwrap() > 1e-10);
    }
}

#[test]
fn ds_shift_on_constant_speed_curves() {
    for seed in 0..20 {
        let c = if seed % 2 == 0 { curve(seed, 256).to_constant_speed().unwrap() } else { circle(256, 2, 0.5 + seed as f64 * 0.1).unwrap() };
        let h = field(seed + 17, &c, 6);
        let q = 0.25 + 0.1 * seed as f64;
        let d = c.ds_derivative(&h).unwrap();
        let lhs = metric::gq_dot(&c, &d, &d, order(q)).unwrap().sqrt();
        let rhs = metric::gq_dot(&c, &h, &h, order(q + 1.0)).unwrap().sqrt();
        assert!((lhs - rhs).abs() <= 1e-8 * rhs, "seed {seed}: {lhs} vs {rhs}");
    }
}

#[test]
fn ds_shift_on_general_curves() {
    for seed in 0..10 {
        let c = curve(seed, 512);
        let h = field(seed + 19, &c, 6);
        let q = 0.3 + 0.2 * seed as f64;
        let d = c.ds_derivative(&h).unwrap();
        let lhs = metric::gq_dot(&c, &d, &d, order(q)).unwrap().sqrt();
        let rhs = metric::gq_dot(&c, &h, &h, order(q + 1.0)).unwrap().sqrt();
        assert!((lhs - rhs).abs() <= 1e-6 * rhs, "seed {seed}: {lhs} vs {rhs}");
    }
}

#[test]
fn reparametrization_invariance_at_matched_resolution() {
    for seed in 0..20 {
        let c = curve(seed, 64);
        let h = field(seed + 23, &c, 4);
        let q = 0.1 * seed as f64;
        let (cu, hu) = (spectral::upsample(c.position(), 4).unwrap(), spectral::upsample(h.as_function(), 4).unwrap());
        let phi = random_diffeo(seed + 29, &DiffeoSpec::new(256, 0.5)).unwrap();
        let cp = DiscreteCurve::new(compose(&cu, &phi).unwrap()).unwrap();
        let hp = TangentField::new(&cp, compose(&hu, &phi).unwrap()).unwrap();
        let cu = DiscreteCurve::new(cu).unwrap();
        let hu = TangentField::new(&cu, hu).unwrap();
        let a = metric::gq(&cu, &hu, &hu, order(q)).unwrap();
        let b = metric::gq(&cp, &hp, &hp, order(q)).unwrap();
        assert!((a - b).abs() <= 1e-6 * a, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn homogeneous_norm_of_radial_field_on_unit_circle() {
    // h = c on the unit circle: one Fourier mode of amplitude 1, l = 2π.
    let c = circle(64, 2, 1.0).unwrap();
    let h = TangentField::new(&c, c.position().clone()).unwrap();
    let q = 1.0;
    let l = 2.0 * std::f64::consts::PI;
    let expected = l.powf(1.0 - 2.0 * q) * l.powf(2.0 * q);
    let got = metric::gq_dot(&c, &h, &h, order(q)).unwrap();
    assert!((got - expected).abs() < 1e-12 * expected);
}

#[test]
fn grid_mismatch_is_an_error() {
    let c = curve(1, 32);
    let other = SampledFunction::zeros(16, 2).unwrap();
    assert!(TangentField::new(&c, other).is_err());
}
