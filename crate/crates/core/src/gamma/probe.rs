//! Empirical lower-bound and compactness probes.

use serde::Serialize;

use super::sobolev_energy;
use crate::error::{LabError, Result};
use crate::evaluator::{lambda_delta, QuadConfig};
use crate::gridfn::{difference_quotient_norm, lp_distance, Interval, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEntry<T> {
    pub label: String,
    pub value: T,
    pub bound: Option<T>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport<T> {
    pub probe: &'static str,
    pub entries: Vec<ProbeEntry<T>>,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Settings of [`g1_lower_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerProbe<T> {
    pub kappa: T,
    /// Step constant for the jump form; only used with `p = 1`.
    pub gamma: Option<T>,
    /// Points `t₁ < t₂` for the jump form.
    pub jump_points: Option<(T, T)>,
    pub slack: T,
    /// Largest accepted `‖g_δ - g‖_p` at the last ladder entry.
    pub lp_tol: T,
}

/// Checks `min_tail Λ_δ(g_δ, I) ≥ κ ∫_I |g'|^p - slack` for every family of
/// `(δ, g_δ)` pairs, and the jump form on `(t₁, t₂)` when requested. Families whose
/// last member is farther than `lp_tol` from `g` are rejected.
pub fn g1_lower_probe<T: Real>(
    g: &PiecewiseLinearFn<T>,
    families: &[Vec<(T, PiecewiseLinearFn<T>)>],
    profile: &PhiProfile<T>,
    settings: &LowerProbe<T>,
    config: &QuadConfig<T>,
) -> Result<ProbeReport<T>> {
    let p = profile.p();
    let dom = g.domain();
    let lower = settings.kappa * sobolev_energy(g, dom, p)?;
    let mut entries = Vec::new();
    let mut notes = Vec::new();
    for (k, fam) in families.iter().enumerate() {
        let Some((_, last)) = fam.last() else {
            return Err(LabError::InvalidParameter(format!("family {k} is empty")));
        };
        let dist = lp_distance(last, g, p, dom);
        if !(dist <= settings.lp_tol) {
            return Err(LabError::InvalidParameter(format!(
                "family {k} does not approach g: final L^p distance {dist} > {}",
                settings.lp_tol
            )));
        }
        let tail = &fam[fam.len().saturating_sub(3)..];
        let mut whole = T::infinity();
        let mut part = T::infinity();
        for (d, gd) in tail {
            whole = whole.min(lambda_delta(gd, dom, *d, profile, config)?.value);
            if let Some((t1, t2)) = settings.jump_points {
                part = part.min(lambda_delta(gd, Interval::new(t1, t2)?, *d, profile, config)?.value);
            }
        }
        let bound = lower - settings.slack;
        entries.push(ProbeEntry { label: format!("family {k}: tail energy"), value: whole, bound: Some(bound), pass: whole >= bound });
        if let Some((t1, t2)) = settings.jump_points {
            let rise = (g.eval(t2) - g.eval(t1)).abs();
            if p == T::one() {
                if let Some(gm) = settings.gamma {
                    let b = gm * rise - settings.slack;
                    entries.push(ProbeEntry { label: format!("family {k}: jump form"), value: part, bound: Some(b), pass: part >= b });
                }
            } else {
                // σ is not known: record the ratio only
                let scale = (t2 - t1).powf(T::one() - p) * rise.powf(p);
                let ratio = part / scale;
                notes.push(format!("family {k}: energy on ({t1}, {t2}) over (t2-t1)^(1-p)|Δg|^p = {ratio}"));
                entries.push(ProbeEntry { label: format!("family {k}: jump ratio"), value: ratio, bound: None, pass: true });
            }
        }
    }
    let passed = entries.iter().all(|e| e.pass);
    Ok(ProbeReport { probe: "g1_lower", entries, passed, notes })
}

/// `∫ |(u(x+h) - u(x))/h|^p` along the `h` ladder. Growth at least like
/// `(h₀/h)^{(p-1)/2}` from the first to the last entry is flagged as unbounded,
/// which is what a jump produces (`h^{1-p}`); bounded values are consistent with
/// `u ∈ W^{1,p}`.
pub fn sobolev_membership_probe<T: Real>(u: &PiecewiseLinearFn<T>, p: T, h_ladder: &[T]) -> Result<ProbeReport<T>> {
    if !(p > T::one()) {
        return Err(LabError::InvalidParameter(format!("the Sobolev probe needs p > 1, got {p}")));
    }
    super::validate_ladder(h_ladder)?;
    let dom = u.domain();
    let mut entries = Vec::with_capacity(h_ladder.len());
    for &h in h_ladder {
        let v = difference_quotient_norm(u, h, p, dom)?;
        entries.push(ProbeEntry { label: format!("h={h}"), value: v, bound: None, pass: true });
    }
    let (first, last) = (entries[0].value, entries[entries.len() - 1].value);
    let (h0, h1) = (h_ladder[0], h_ladder[h_ladder.len() - 1]);
    let threshold = (h0 / h1).powf((p - T::one()) * T::lit(0.5));
    let unbounded = entries.len() > 1 && last > first * threshold;
    let sup = entries.iter().map(|e| e.value).fold(T::zero(), T::max);
    let notes = vec![
        format!("sup over ladder {sup}"),
        if unbounded { "unbounded growth: jump present".into() } else { "bounded: consistent with W^{1,p}".into() },
    ];
    Ok(ProbeReport { probe: "sobolev_membership", entries, passed: !unbounded, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{make_affine, make_heaviside};
    use approx::assert_relative_eq;

    #[test]
    fn sobolev_probe_examples() {
        let h = make_heaviside(Interval::<f64>::unit(), 0.5).unwrap();
        let r = sobolev_membership_probe(&h, 2.0, &[0.1, 0.01]).unwrap();
        assert_relative_eq!(r.entries[0].value, 10.0, max_relative = 1e-12);
        assert_relative_eq!(r.entries[1].value, 100.0, max_relative = 1e-12);
        assert!(!r.passed);
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        let r = sobolev_membership_probe(&u, 2.0, &[0.1, 0.01]).unwrap();
        assert_relative_eq!(r.entries[1].value, 0.99, max_relative = 1e-12);
        assert!(r.passed);
        let tent = PiecewiseLinearFn::continuous(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        let r = sobolev_membership_probe(&tent, 3.0, &[0.5, 0.1, 0.01]).unwrap();
        assert!(r.passed && r.entries.iter().all(|e| e.value <= 2.0));
        assert!(sobolev_membership_probe(&tent, 1.0, &[0.1]).is_err());
    }

    #[test]
    fn lower_probe_on_constant_family() {
        let phi = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let tent = PiecewiseLinearFn::continuous(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        let fam: Vec<(f64, PiecewiseLinearFn<f64>)> = [0.01, 0.005, 0.002].iter().map(|d| (*d, tent.clone())).collect();
        let s = LowerProbe { kappa: 0.69, gamma: Some(0.69), jump_points: Some((0.5, 1.0)), slack: 1e-2, lp_tol: 1e-9 };
        let r = g1_lower_probe(&tent, &[fam], &phi, &s, &QuadConfig::default()).unwrap();
        assert!(r.passed, "{r:?}");
        let c = make_affine(Interval::unit(), 0.0, 1.0);
        let fam = vec![(0.1, c.clone())];
        let s = LowerProbe { kappa: 0.69, gamma: None, jump_points: None, slack: 0.0, lp_tol: 1e-9 };
        let r = g1_lower_probe(&c, &[fam], &phi, &s, &QuadConfig::default()).unwrap();
        assert!(r.passed && r.entries[0].bound == Some(0.0));
        let far = vec![(0.1, make_affine(Interval::unit(), 0.0, 2.0))];
        assert!(g1_lower_probe(&c, &[far], &phi, &s, &QuadConfig::default()).is_err());
    }
}
