//! Energies checked against values computed independently of the evaluator.

use approx::assert_relative_eq;
use gamma_lab::evaluator::{lambda_affine_1d, lambda_delta, QuadConfig};
use gamma_lab::gamma::identity_staircase;
use gamma_lab::gridfn::{make_affine, Interval, PiecewiseLinearFn};
use gamma_lab::profile::PhiProfile;

fn cfg() -> QuadConfig<f64> {
    QuadConfig::default()
}

fn energy(u: &PiecewiseLinearFn<f64>, delta: f64, phi: &PhiProfile<f64>) -> f64 {
    lambda_delta(u, u.domain(), delta, phi, &cfg()).unwrap().value
}

fn identity() -> PiecewiseLinearFn<f64> {
    make_affine(Interval::unit(), 1.0, 0.0)
}

#[test]
fn identity_under_indicator_any_p() {
    // (p/2)·δ^p·2∫_δ^1 (1 - r) r^{-(p+1)} dr
    let exact = |p: f64, d: f64| {
        if p == 1.0 {
            1.0 - d + d * d.ln()
        } else {
            1.0 - d.powf(p) - p * (d - d.powf(p)) / (p - 1.0)
        }
    };
    for p in [1.0, 1.5, 2.0, 3.0] {
        let phi = PhiProfile::indicator_step(p).unwrap();
        for d in [0.3, 0.1, 0.01] {
            assert_relative_eq!(energy(&identity(), d, &phi), exact(p, d), max_relative = 1e-8);
        }
    }
}

#[test]
fn identity_under_saturating_profile() {
    let phi = PhiProfile::saturating_power(1.0).unwrap();
    for d in [0.5f64, 0.1, 0.01, 0.001] {
        let exact = 1.0 - 0.75 * d + 0.5 * d * d.ln();
        assert_relative_eq!(energy(&identity(), d, &phi), exact, max_relative = 1e-8);
    }
    assert_relative_eq!(energy(&identity(), 0.01, &phi), 0.969474, epsilon = 1e-6);
}

#[test]
fn staircase_sum() {
    let phi = PhiProfile::indicator_step(1.0).unwrap();
    for (d, pinned) in [(0.05f64, 0.5087032), (0.01, 0.640164)] {
        let n = (1.0 / d + 1e-9).floor() as usize;
        let oracle: f64 = (2..=n).map(|k| (1.0 - k as f64 * d) * ((k * k) as f64 / (k * k - 1) as f64).ln()).sum();
        let s = identity_staircase(d * (1.0 - 1e-6)).unwrap();
        assert_relative_eq!(energy(&s, d, &phi), oracle, max_relative = 1e-8);
        assert!((oracle - pinned).abs() < 1e-6);
    }
}

#[test]
fn normalization_by_trapezoid() {
    // ∫ φ(t) t^{-(p+1)} dt on a fine grid up to 50, plus the exact tail of the constant part
    for p in [1.0, 2.0] {
        for phi in [PhiProfile::saturating_power(p).unwrap(), PhiProfile::compact_bump(p).unwrap()] {
            let n = 200_000;
            let top = 50.0;
            let h = top / n as f64;
            let f = |t: f64| if t == 0.0 { 0.0 } else { phi.eval(t) * t.powf(-(p + 1.0)) };
            let body: f64 = (1..n).map(|k| f(k as f64 * h)).sum::<f64>() * h + 0.5 * h * f(top);
            let tail = phi.eval(top) * top.powf(-p) / p;
            assert!((body + tail - 0.5).abs() < 1e-3, "{:?} p={p}: {}", phi.kind(), body + tail);
        }
    }
}

#[test]
fn refinement_does_not_change_energy() {
    let u = PiecewiseLinearFn::continuous(vec![0.0, 0.3, 0.7, 1.0], vec![0.0, 0.8, 0.1, 0.5]).unwrap();
    let v = u.refined(&[0.1, 0.45, 0.5, 0.9]);
    assert_eq!(v.num_segments(), 7);
    for phi in [PhiProfile::indicator_step(1.0).unwrap(), PhiProfile::saturating_power(1.5).unwrap()] {
        for d in [0.2, 0.05] {
            assert_relative_eq!(energy(&u, d, &phi), energy(&v, d, &phi), max_relative = 1e-8);
        }
    }
}

#[test]
fn affine_reduction_agrees_with_the_double_integral() {
    for phi in [PhiProfile::indicator_step(1.0).unwrap(), PhiProfile::saturating_power(2.0).unwrap()] {
        for (slope, len, d) in [(1.0, 1.0, 0.1), (-2.5, 0.4, 0.05), (0.3, 3.0, 0.2)] {
            let u = make_affine(Interval::new(1.0, 1.0 + len).unwrap(), slope, 0.7);
            let one = lambda_affine_1d(slope, len, d, &phi).unwrap();
            assert_relative_eq!(one, energy(&u, d, &phi), max_relative = 1e-8);
        }
    }
}
