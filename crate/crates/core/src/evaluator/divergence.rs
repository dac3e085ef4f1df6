//! Certified divergence at jumps.
//!
//! Near a jump of size `J` at `x0`, with `x = x0 - s`, `y = x0 + t`,
//! `|u(y) - u(x)| = |J| + sgn(J)(L_r t + L_l s)` for small `s, t > 0`. Which side of
//! `|J|/δ` the argument of `φ` approaches is fixed by the signs of the slopes; if `φ`
//! is bounded below on a one-sided band on a relevant side, the integrand is
//! bounded below on a cone with vertex at the corner, and `∫∫ (s+t)^{-(p+1)}` over
//! a cone diverges for every `p ≥ 1`.

use serde::Serialize;

use crate::gridfn::PiecewiseLinearFn;
use crate::profile::PhiProfile;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeSide {
    /// Values of `|Δu|/δ` approach `|J|/δ` from above.
    Above,
    Below,
    /// Both adjacent segments are flat: `|Δu| = |J|` on the whole corner.
    Point,
    /// Distinct constants at `-∞` and `+∞` with `p = 1`.
    FarField,
}

/// Witness that `Λ_δ = +∞`: on the band of half-width `eta` (in units of `t = |Δu|/δ`)
/// next to `|J|/δ`, `φ_δ ≥ phi_delta_lower_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceCertificate<T> {
    pub location: T,
    pub jump: T,
    pub side: ProbeSide,
    pub eta: T,
    pub probe_level: u32,
    pub phi_delta_lower_bound: T,
}

/// Infimum of `φ` on the band next to `t0` on `side`, shrinking the band
/// geometrically; returns the first level with a positive bound.
fn probe<T: Real>(phi: &PhiProfile<T>, t0: T, side: ProbeSide, levels: u32) -> Option<(T, u32, T)> {
    if side == ProbeSide::Point {
        let v = phi.eval(t0);
        return (v > T::zero()).then_some((T::zero(), 0, v));
    }
    let mut eta = T::one().max(t0) * T::lit(0.5);
    for k in 0..=levels {
        let m = match side {
            ProbeSide::Above => phi.inf_open(t0, t0 + eta),
            _ => phi.inf_open((t0 - eta).max(T::zero()), t0),
        };
        if m > T::zero() {
            return Some((eta, k, m));
        }
        eta = eta * T::lit(0.5);
    }
    None
}

/// First divergent jump of `u` in the open interior of its domain.
pub fn certify<T: Real>(
    u: &PiecewiseLinearFn<T>,
    phi: &PhiProfile<T>,
    delta: T,
    levels: u32,
) -> Option<DivergenceCertificate<T>> {
    let n = u.breakpoints().len();
    for i in 1..n - 1 {
        if let Some(c) = certify_jump(u, i, phi, delta, levels) {
            return Some(c);
        }
    }
    None
}

pub(crate) fn certify_jump<T: Real>(
    u: &PiecewiseLinearFn<T>,
    i: usize,
    phi: &PhiProfile<T>,
    delta: T,
    levels: u32,
) -> Option<DivergenceCertificate<T>> {
    let j = u.jump(i);
    if j == T::zero() {
        return None;
    }
    let sg = j.signum();
    let a = sg * u.segment(i - 1).slope();
    let b = sg * u.segment(i).slope();
    let t0 = j.abs() / delta;
    let mut sides = Vec::with_capacity(2);
    if a > T::zero() || b > T::zero() {
        sides.push(ProbeSide::Above);
    }
    if a < T::zero() || b < T::zero() {
        sides.push(ProbeSide::Below);
    }
    if sides.is_empty() {
        sides.push(ProbeSide::Point);
    }
    let dp = delta.powf(phi.p());
    sides.into_iter().find_map(|side| {
        probe(phi, t0, side, levels).map(|(eta, k, m)| DivergenceCertificate {
            location: u.breakpoints()[i],
            jump: j,
            side,
            eta,
            probe_level: k,
            phi_delta_lower_bound: m * dp,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{make_heaviside, Interval};

    #[test]
    fn heaviside_classification() {
        let h = make_heaviside(Interval::<f64>::unit(), 0.5).unwrap();
        let ind = PhiProfile::indicator_step(1.0).unwrap();
        let c = certify(&h, &ind, 0.5, 20).unwrap();
        assert_eq!(c.location, 0.5);
        assert_eq!(c.jump, 1.0);
        assert_eq!(c.side, ProbeSide::Point);
        assert!((c.phi_delta_lower_bound - 0.25).abs() < 1e-15);
        let bump = PhiProfile::compact_bump(1.0).unwrap();
        assert!(certify(&h, &bump, 0.5, 20).is_none());
        // jump exactly δ: right limit of the indicator is positive
        assert!(certify(&h, &ind, 1.0, 20).is_some());
        // below the threshold the indicator vanishes
        assert!(certify(&h, &ind, 1.5, 20).is_none());
    }

    #[test]
    fn sloped_sides_probe_one_sided_bands() {
        // jump of exactly δ = 1 with increasing slopes: values above 1 are reached
        let u = PiecewiseLinearFn::from_segments(vec![0.0, 1.0, 2.0], &[(0.0, 0.1), (1.1, 1.2)]).unwrap();
        let bump = PhiProfile::compact_bump(1.0).unwrap();
        assert!(certify(&u, &bump, 1.0, 20).is_none());
        // decreasing slopes: values below 1 are reached, where the bump is positive
        let v = PiecewiseLinearFn::from_segments(vec![0.0, 1.0, 2.0], &[(0.1, 0.0), (1.0, 0.9)]).unwrap();
        let c = certify(&v, &bump, 1.0, 20).unwrap();
        assert_eq!(c.side, ProbeSide::Below);
    }
}
