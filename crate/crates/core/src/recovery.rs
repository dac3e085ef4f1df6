//! Recovery sequences: low-energy functions at small `δ` built from a good
//! candidate at a coarser `δ_k`.
//!
//! The unit problem is `U(x) = x` on `(0, 1)`. A candidate `û` for `U` at `δ_k` is
//! flattened near two anchors so that it agrees with `U` near the ends, then tiled
//! `m` times: `v̂(x) = [x] + û(x - [x])` on `(0, m)` and `v_δ(x) = v̂(m x)/m̂` with
//! `m̂ = δ_k/δ`, `m = ⌊m̂⌋`. The change of variables gives
//! `Λ_δ(v_δ) = m^{p-1} m̂^{-p} Λ_{δ_k}(v̂, (0, m))`.
//!
//! Affine targets reduce to the unit problem; piecewise-linear targets are done
//! segment by segment and glued, with collars of width `√δ/6` where the output
//! equals the target exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evaluator::{local_energy, QuadConfig};
use crate::gridfn::{glue, make_affine, tile_rescale, FlattenSpec, Interval, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::real::Real;

/// Anchor candidates scanned inside `(c/2, c)` and `(1 - c, 1 - c/2)`.
const ANCHOR_GRID: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TilingPlan<T> {
    pub base_delta: T,
    pub target_delta: T,
    /// `δ_k/δ`.
    pub m_hat: T,
    pub m: usize,
    /// Anchor tolerance `c_k`: anchors are taken inside `(c_k/2, c_k)` from each end.
    pub c_k: T,
}

impl<T: Real> TilingPlan<T> {
    pub fn new(base_delta: T, target_delta: T, c_k: T) -> Result<Self> {
        if !(base_delta > T::zero() && target_delta > T::zero()) {
            return Err(LabError::InvalidLadder(format!(
                "deltas must be positive, got {base_delta} and {target_delta}"
            )));
        }
        if target_delta > base_delta {
            return Err(LabError::InvalidLadder(format!(
                "target delta {target_delta} exceeds base delta {base_delta}"
            )));
        }
        if !(c_k > T::zero() && c_k < T::lit(0.5)) {
            return Err(LabError::InvalidLadder(format!("anchor tolerance {c_k} outside (0, 1/2)")));
        }
        let m_hat = base_delta / target_delta;
        let m = m_hat.floor().to_usize().ok_or_else(|| LabError::InvalidLadder(format!("ratio {m_hat} too large")))?;
        Ok(Self { base_delta, target_delta, m_hat, m: m.max(1), c_k })
    }

    /// Plan with the default anchor tolerance `c_k = √δ_k`, capped below `1/2`.
    pub fn with_default_anchor(base_delta: T, target_delta: T) -> Result<Self> {
        Self::new(base_delta, target_delta, base_delta.sqrt().min(T::lit(0.49)))
    }

    /// `m^{p-1}/m̂^p`, the factor relating `Λ_δ(v_δ)` to `Λ_{δ_k}(v̂, (0, m))`.
    pub fn energy_factor(&self, p: T) -> T {
        T::of_usize(self.m).powf(p - T::one()) / self.m_hat.powf(p)
    }
}

/// What a recovery construction did, for the provenance log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub construction: &'static str,
    pub delta: f64,
    pub base_delta: Option<f64>,
    pub m: Option<usize>,
    pub m_hat: Option<f64>,
    pub anchors: Option<(f64, f64)>,
    pub lp_distance: Option<f64>,
    pub energy: Option<f64>,
}

impl Provenance {
    fn new(construction: &'static str, delta: f64) -> Self {
        Self { construction, delta, base_delta: None, m: None, m_hat: None, anchors: None, lp_distance: None, energy: None }
    }

    pub fn emit(&self) {
        log::info!(target: "provenance", "{}", serde_json::to_string(self).unwrap_or_default());
    }
}

fn unit_identity<T: Real>() -> PiecewiseLinearFn<T> {
    make_affine(Interval::unit(), T::one(), T::zero())
}

/// `v_δ(x) = v̂(m x)/m̂` with `v̂(x) = [x] + base(x - [x])`. `base` lives on `(0, 1)`.
pub fn tile_recovery<T: Real>(base: &PiecewiseLinearFn<T>, plan: &TilingPlan<T>) -> Result<PiecewiseLinearFn<T>> {
    let g = tile_rescale(base, plan.m)?;
    let k = T::of_usize(plan.m) / plan.m_hat;
    Ok(if k == T::one() { g } else { g.scaled(k) })
}

/// Anchor in `(lo, hi)` on a uniform interior grid with the least local energy.
fn best_anchor<T: Real>(
    u: &PiecewiseLinearFn<T>,
    lo: T,
    hi: T,
    delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<T> {
    let step = (hi - lo) / T::of_usize(ANCHOR_GRID + 1);
    let mut best: Option<(T, T)> = None;
    for k in 1..=ANCHOR_GRID {
        let x = lo + step * T::of_usize(k);
        let e = match local_energy(u, x, delta, profile, config) {
            Ok(e) => e,
            Err(LabError::InconclusiveQuadrature { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.map_or(true, |(_, b)| e < b) {
            best = Some((x, e));
        }
    }
    best.map(|(x, _)| x)
        .ok_or_else(|| LabError::EstimationFailure("no anchor with a conclusive local energy".into()))
}

/// Flattens a unit candidate near scanned anchors so that it equals `U` near both ends.
pub fn flatten_unit_candidate<T: Real>(
    base: &PiecewiseLinearFn<T>,
    base_delta: T,
    c_k: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<(PiecewiseLinearFn<T>, (T, T))> {
    let d = base.domain();
    if d.a != T::zero() || d.b != T::one() {
        return Err(LabError::InvalidParameter("base candidate must live on (0, 1)".into()));
    }
    let half = c_k * T::lit(0.5);
    let x1 = best_anchor(base, half, c_k, base_delta, profile, config)?;
    let x2 = best_anchor(base, T::one() - c_k, T::one() - half, base_delta, profile, config)?;
    let spec = FlattenSpec::thirds(Interval::unit(), x1, x2, unit_identity());
    Ok((spec.apply(base)?, (x1, x2)))
}

/// Recovery function for an affine target on `(a, b)` at scale `δ`.
///
/// With slope `L` the target reduces to `U` at `δ_u = δ/(|L|(b - a))`, which must
/// not exceed `base_delta`. The result equals the target exactly on
/// `(a, a + √δ/6)` and `(b - √δ/6, b)`.
pub fn recover_affine<T: Real>(
    target: &PiecewiseLinearFn<T>,
    delta: T,
    base_candidate: &PiecewiseLinearFn<T>,
    base_delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<PiecewiseLinearFn<T>> {
    let (u, prov) = recover_affine_inner(target, delta, base_candidate, base_delta, profile, config)?;
    prov.emit();
    Ok(u)
}

fn recover_affine_inner<T: Real>(
    target: &PiecewiseLinearFn<T>,
    delta: T,
    base_candidate: &PiecewiseLinearFn<T>,
    base_delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<(PiecewiseLinearFn<T>, Provenance)> {
    if !(delta > T::zero()) {
        return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let t = target.simplified();
    if t.num_segments() != 1 || !t.is_continuous() {
        return Err(LabError::InvalidParameter("affine target must be a single segment".into()));
    }
    let Interval { a, b, .. } = t.domain();
    let len = b - a;
    let collar = delta.sqrt() / T::lit(6.0);
    let mut prov = Provenance::new("recover_affine", delta.f64());
    prov.base_delta = Some(base_delta.f64());
    let seg = t.segment(0);
    let slope = seg.slope();
    if slope == T::zero() {
        return Ok((t, prov));
    }
    // c = √δ in the unit variable; anchors at c/2 give collars of exactly √δ/6
    let c = delta.sqrt() / len;
    if !(c < T::lit(0.5)) {
        return Err(LabError::InvalidParameter(format!(
            "interval ({a}, {b}) too short for collars at delta {delta}"
        )));
    }
    let rise = slope * len;
    let delta_u = delta / rise.abs();
    let plan = TilingPlan::with_default_anchor(base_delta, delta_u)?;
    let (flat, anchors) = flatten_unit_candidate(base_candidate, base_delta, plan.c_k, profile, config)?;
    let tiled = tile_recovery(&flat, &plan)?;
    let half = c * T::lit(0.5);
    let w = FlattenSpec::thirds(Interval::unit(), half, T::one() - half, unit_identity()).apply(&tiled)?;

    // back to (a, b): x = a + len·X, u = u_a + rise·W
    let xs: Vec<T> = w.breakpoints().iter().map(|x| a + len * *x).collect();
    let l: Vec<T> = w.left_values().iter().map(|v| seg.u0 + rise * *v).collect();
    let r: Vec<T> = w.right_values().iter().map(|v| seg.u0 + rise * *v).collect();
    let middle = PiecewiseLinearFn::new(xs, l, r)?;
    let (ca, cb) = (a + collar, b - collar);
    let u = glue(&[
        (Interval::new(a, ca)?, t.clone()),
        (Interval::new(ca, cb)?, middle),
        (Interval::new(cb, b)?, t.clone()),
    ])?;
    prov.m = Some(plan.m);
    prov.m_hat = Some(plan.m_hat.f64());
    prov.anchors = Some((anchors.0.f64(), anchors.1.f64()));
    prov.lp_distance = Some(crate::gridfn::lp_distance(&u, &t, profile.p(), t.domain()).f64());
    Ok((u, prov))
}

/// Recovery function for a continuous piecewise-linear target: every segment is
/// recovered on its own and the pieces are glued. Collars make the result continuous.
pub fn recover_piecewise_linear<T: Real>(
    target: &PiecewiseLinearFn<T>,
    delta: T,
    base_candidate: &PiecewiseLinearFn<T>,
    base_delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<PiecewiseLinearFn<T>> {
    if !target.is_continuous() {
        return Err(LabError::InvalidParameter("piecewise-linear target must be continuous".into()));
    }
    let t = target.simplified();
    let pieces: Vec<Result<(Interval<T>, PiecewiseLinearFn<T>, Provenance)>> = t
        .segments()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| {
            let f = PiecewiseLinearFn::continuous(vec![s.x0, s.x1], vec![s.u0, s.u1])?;
            let (u, prov) = recover_affine_inner(&f, delta, base_candidate, base_delta, profile, config)?;
            Ok((Interval::new(s.x0, s.x1)?, u, prov))
        })
        .collect();
    let mut parts = Vec::with_capacity(pieces.len());
    for pc in pieces {
        let (iv, u, prov) = pc?;
        prov.emit();
        parts.push((iv, u));
    }
    let u = glue(&parts)?;
    let mut prov = Provenance::new("recover_piecewise_linear", delta.f64());
    prov.base_delta = Some(base_delta.f64());
    prov.lp_distance = Some(crate::gridfn::lp_distance(&u, &t, profile.p(), t.domain()).f64());
    prov.emit();
    Ok(u)
}

/// Jump size and count of a monotone staircase from 0 to 1 that `φ_δ` charges as
/// little as possible: steps just below the first zero-free threshold when `φ`
/// vanishes near 0, steps of `2δ t_a` when `φ` vanishes on `[t_a, ∞)`.
pub(crate) fn ramp_steps<T: Real>(delta: T, profile: &PhiProfile<T>) -> usize {
    let zeros = profile.zero_intervals();
    if let Some(&(t_a, _)) = zeros.iter().find(|z| z.1.is_infinite() && z.0 > T::zero()) {
        let n = (T::one() / (T::lit(2.0) * delta * t_a)).floor();
        return n.to_usize().unwrap_or(0);
    }
    if let Some(&(_, t_b)) = zeros.iter().find(|z| z.0 == T::zero() && z.1.is_finite()) {
        let n = (T::one() / (delta * t_b)).floor() + T::one();
        return n.to_usize().unwrap_or(0);
    }
    0
}

/// Monotone ramp approximating the step `1_{(c, 1)}` on `(0, 1)`, meant for `p = 1`.
///
/// The ramp occupies `(c - w, c + w)` with `w = max(16δ, δ·⌈1/δ⌉·δ)` clipped to the
/// domain. When `φ` has a suitable zero set the ramp is a staircase of `N` equal
/// jumps the kernel does not see between neighbours; otherwise, or when `N ≤ 1`,
/// it is a single affine ramp.
pub fn recover_step_p1<T: Real>(c: T, delta: T, profile: &PhiProfile<T>) -> Result<PiecewiseLinearFn<T>> {
    if !(c > T::zero() && c < T::one()) {
        return Err(LabError::InvalidParameter(format!("step location {c} outside (0, 1)")));
    }
    if !(delta > T::zero()) {
        return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let w = (T::lit(16.0) * delta).max(delta * (T::one() / delta).ceil() * delta);
    let w = w.min(c).min(T::one() - c) * T::lit(0.999);
    let u = ramp(c - w, c + w, ramp_steps(delta, profile))?;
    let mut prov = Provenance::new("recover_step_p1", delta.f64());
    prov.m = Some(ramp_steps(delta, profile));
    prov.lp_distance = Some(
        crate::gridfn::lp_distance(&u, &crate::gridfn::make_heaviside(Interval::unit(), c)?, profile.p(), Interval::unit())
            .f64(),
    );
    prov.emit();
    Ok(u)
}

/// Ramp from 0 at `lo` to 1 at `hi` on `(0, 1)`: affine for `n ≤ 1`, otherwise
/// `n` equal jumps with flat cells of width `(hi - lo)/(n - 1)` in between.
pub fn ramp<T: Real>(lo: T, hi: T, n: usize) -> Result<PiecewiseLinearFn<T>> {
    if !(T::zero() < lo && lo < hi && hi < T::one()) {
        return Err(LabError::InvalidParameter(format!("ramp ({lo}, {hi}) not inside (0, 1)")));
    }
    if n <= 1 {
        return PiecewiseLinearFn::continuous(vec![T::zero(), lo, hi, T::one()], vec![T::zero(), T::zero(), T::one(), T::one()]);
    }
    let nf = T::of_usize(n);
    let cell = (hi - lo) / T::of_usize(n - 1);
    let mut xs = vec![T::zero()];
    xs.extend((0..n).map(|k| if k + 1 == n { hi } else { lo + cell * T::of_usize(k) }));
    xs.push(T::one());
    let levels: Vec<T> = (0..=n).map(|k| T::of_usize(k) / nf).collect();
    PiecewiseLinearFn::step(xs, &levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::lambda_delta;
    use crate::gridfn::lp_distance;
    use approx::assert_relative_eq;

    fn staircase(n: usize) -> PiecewiseLinearFn<f64> {
        // n cells on (0, 1), levels centred on U
        let xs: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let levels: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        PiecewiseLinearFn::step(xs, &levels).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(TilingPlan::new(0.01, 0.02, 0.1).is_err());
        assert!(TilingPlan::new(0.0, 0.0, 0.1).is_err());
        let p = TilingPlan::new(0.01, 0.004, 0.1).unwrap();
        assert_eq!(p.m, 2);
        assert_relative_eq!(p.m_hat, 2.5);
    }

    #[test]
    fn tiling_identity_on_u_and_scaling_for_fractional_ratio() {
        let u = unit_identity::<f64>();
        let plan = TilingPlan::new(0.02, 0.005, 0.1).unwrap();
        let v = tile_recovery(&u, &plan).unwrap();
        assert!(lp_distance(&v, &u, 1.0, Interval::unit()) < 1e-14);

        let plan = TilingPlan::new(0.025, 0.01, 0.1).unwrap();
        let v = tile_recovery(&u, &plan).unwrap();
        assert_eq!(plan.m, 2);
        assert_relative_eq!(v.eval(0.5), 0.5 / 1.25, epsilon = 1e-15);
        assert_relative_eq!(v.end_value(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn tiled_energy_obeys_scaling_identity() {
        let phi = PhiProfile::<f64>::saturating_power(1.5).unwrap();
        let cfg = QuadConfig::default();
        let base = PiecewiseLinearFn::continuous(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 0.5, 0.55, 1.0]).unwrap();
        let plan = TilingPlan::new(0.05, 0.02, 0.2).unwrap();
        let v = tile_recovery(&base, &plan).unwrap();
        let lhs = lambda_delta(&v, Interval::unit(), 0.02, &phi, &cfg).unwrap().value;
        // v̂ on (0, m), evaluated directly
        let m = plan.m;
        let g = tile_rescale(&base, m).unwrap();
        let vhat = g.remap_domain(m as f64, 0.0).unwrap().scaled(m as f64);
        let rhs = lambda_delta(&vhat, Interval::new(0.0, m as f64).unwrap(), 0.05, &phi, &cfg).unwrap().value;
        assert_relative_eq!(lhs, plan.energy_factor(1.5) * rhs, max_relative = 1e-7);
    }

    #[test]
    fn affine_recovery_keeps_exact_collars() {
        let phi = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let cfg = QuadConfig::default();
        let base = staircase(20);
        let target = make_affine(Interval::new(1.0, 3.0).unwrap(), -0.5, 2.0);
        let delta = 0.01;
        let u = recover_affine(&target, delta, &base, 0.05, &phi, &cfg).unwrap();
        let collar = delta.sqrt() / 6.0;
        assert!(u.breakpoints().contains(&(1.0 + collar)));
        for x in [1.0, 1.0 + 0.5 * collar, 3.0 - 0.5 * collar] {
            assert_eq!(u.eval(x).to_bits(), target.eval(x).to_bits());
        }
        assert_eq!(u.eval_left(3.0).to_bits(), target.eval_left(3.0).to_bits());
        // base distance to U, scaled by |L| (b - a)^2
        let bound = lp_distance(&base, &unit_identity(), 1.0, Interval::unit()) * 0.5 * 4.0;
        let d = lp_distance(&u, &target, 1.0, target.domain());
        assert!(d <= bound * 1.5, "{d} vs {bound}");
        assert!(recover_affine(&target, 0.5, &base, 0.05, &phi, &cfg).is_err());
    }

    #[test]
    fn step_recovery_compact_bump_has_zero_energy() {
        let phi = PhiProfile::<f64>::compact_bump(1.0).unwrap();
        let cfg = QuadConfig::default();
        let u = recover_step_p1(0.5, 0.05, &phi).unwrap();
        let e = lambda_delta(&u, Interval::unit(), 0.05, &phi, &cfg).unwrap();
        assert_eq!(e.value, 0.0);
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let u = recover_step_p1(0.5, 0.05, &ind).unwrap();
        assert_eq!(u.num_segments(), 22);
        assert!(u.max_abs_jump() < 0.05);
        let e = lambda_delta(&u, Interval::unit(), 0.05, &ind, &cfg).unwrap();
        assert!(e.value.is_finite() && e.value > 0.0 && e.value < 1.0);
        // large delta: one affine ramp
        assert!(recover_step_p1(0.5, 2.0, &ind).unwrap().is_continuous());
    }
}
