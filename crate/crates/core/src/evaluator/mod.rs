//! Evaluation of `Λ_δ(u, I)` for piecewise-linear `u` by segment-pair quadrature.
//!
//! The double integral is split over pairs of segments of the merged grid. Every
//! pair is integrated as an outer adaptive Gauss–Legendre integral in `x` of an
//! inner one in `y`, with both split exactly where `|u(y) - u(x)|/δ` crosses a
//! breakpoint of `φ`, so each sub-integral sees a single smooth piece of `φ`.
//! Flat pieces of `φ` and flat segment pairs use closed forms. Jumps are checked
//! for divergence before anything is integrated.

mod affine;
mod divergence;
mod pair;
mod table;

pub use affine::lambda_affine_1d;
pub use divergence::{certify, DivergenceCertificate, ProbeSide};
pub use table::{PairTable, Proposal};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gridfn::{Interval, PiecewiseLinearFn};
use crate::profile::{PhiProfile, Shape};
use crate::quad::{pairwise_sum, Adaptive, GaussLegendre, QuadResult};
use crate::real::Real;
use pair::PairCtx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FarFieldPolicy {
    /// Far-field contributions computed from the constant end values.
    AnalyticTail,
    /// Only the window itself is integrated.
    HardCutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadConfig<T> {
    pub gauss_order: usize,
    pub max_subdivision_depth: u32,
    /// Cell budget of every one-dimensional adaptive integral.
    pub max_cells: usize,
    pub rel_tol: T,
    /// Absolute floor on the total error, in energy units.
    pub abs_tol: T,
    /// Geometric pre-splits toward the corner of adjacent segment pairs.
    pub diagonal_band_refinement: u32,
    pub divergence_probe_levels: u32,
    pub far_field_cutoff_policy: FarFieldPolicy,
    /// Evaluate with a profile that is not normalized.
    pub allow_unnormalized: bool,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self {
            gauss_order: 10,
            max_subdivision_depth: 50,
            max_cells: 2048,
            rel_tol: T::lit(1e-9),
            abs_tol: T::lit(1e-14),
            diagonal_band_refinement: 4,
            divergence_probe_levels: 30,
            far_field_cutoff_policy: FarFieldPolicy::AnalyticTail,
            allow_unnormalized: false,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.gauss_order < 2 {
            return Err(LabError::InvalidParameter("gauss_order must be at least 2".into()));
        }
        if !(self.rel_tol > T::zero()) || !(self.abs_tol >= T::zero()) {
            return Err(LabError::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_cells < 2 {
            return Err(LabError::InvalidParameter("max_cells must be at least 2".into()));
        }
        Ok(())
    }

    /// Same configuration with twice the subdivision budget.
    pub fn doubled_depth(&self) -> Self {
        Self { max_subdivision_depth: self.max_subdivision_depth * 2, max_cells: self.max_cells * 2, ..*self }
    }
}

/// Finite energy with an error estimate, or `+∞` with a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue<T> {
    pub value: T,
    pub error_estimate: T,
    pub divergence_certificate: Option<DivergenceCertificate<T>>,
}

impl<T: Real> EnergyValue<T> {
    pub fn finite(value: T, error_estimate: T) -> Self {
        Self { value, error_estimate, divergence_certificate: None }
    }

    pub fn divergent(cert: DivergenceCertificate<T>) -> Self {
        Self { value: T::infinity(), error_estimate: T::zero(), divergence_certificate: Some(cert) }
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence_certificate.is_some()
    }

    pub fn is_finite(&self) -> bool {
        !self.is_divergent()
    }
}

/// Quadrature state shared by all pairs of one evaluation.
pub(crate) struct Engine<'a, T> {
    phi: &'a PhiProfile<T>,
    delta: T,
    config: QuadConfig<T>,
    rule: GaussLegendre<T>,
    far_rule: GaussLegendre<T>,
    tks: Vec<T>,
    abs_scaled: T,
}

impl<'a, T: Real> Engine<'a, T> {
    pub fn new(phi: &'a PhiProfile<T>, delta: T, config: &QuadConfig<T>, segments: usize) -> Self {
        let npairs = T::of_usize(segments * (segments + 1) / 2).max(T::one());
        Self {
            phi,
            delta,
            config: *config,
            rule: GaussLegendre::new(config.gauss_order),
            far_rule: GaussLegendre::new(6),
            tks: phi.breakpoints().collect(),
            abs_scaled: config.abs_tol / delta.powf(phi.p()) / npairs,
        }
    }

    fn ctx(&self) -> PairCtx<'_, T> {
        self.ctx_with(1)
    }

    fn ctx_with(&self, budget: u32) -> PairCtx<'_, T> {
        PairCtx {
            phi: self.phi,
            delta: self.delta,
            rule: &self.rule,
            far_rule: &self.far_rule,
            rel_tol: self.config.rel_tol * T::lit(0.25),
            abs_tol: self.abs_scaled,
            max_depth: self.config.max_subdivision_depth * budget,
            max_cells: self.config.max_cells * budget as usize,
            band_levels: self.config.diagonal_band_refinement,
            tks: &self.tks,
        }
    }

    /// Scaled contribution of segments `i ≤ j`.
    ///
    /// A pair that exhausts its budget is redone with twice the budget. It counts
    /// as converged when the two results agree within their error estimates; the
    /// disagreement is added to the error.
    pub fn pair(&self, u: &PiecewiseLinearFn<T>, i: usize, j: usize) -> QuadResult<T> {
        let run = |ctx: PairCtx<'_, T>| if i == j { ctx.same(u.segment(i)) } else { ctx.cross(u.segment(i), u.segment(j)) };
        let r = run(self.ctx());
        if r.converged || !r.value.is_finite() {
            return r;
        }
        let r2 = run(self.ctx_with(2));
        let diff = (r2.value - r.value).abs();
        let error = r.error.max(r2.error) + diff;
        QuadResult { value: r2.value, error, converged: r2.value.is_finite() && (r2.converged || diff <= r.error + r2.error) }
    }

    /// Sums scaled pair results in slice order and applies `δ^p`.
    pub fn finish(&self, results: &[QuadResult<T>]) -> Result<EnergyValue<T>> {
        let vals: Vec<T> = results.iter().map(|r| r.value).collect();
        let errs: Vec<T> = results.iter().map(|r| r.error).collect();
        let scale = self.delta.powf(self.phi.p());
        let value = pairwise_sum(&vals) * scale;
        let error = pairwise_sum(&errs) * scale;
        let converged = results.iter().all(|r| r.converged);
        self.accept(value, error, converged)
    }

    fn accept(&self, value: T, error: T, converged: bool) -> Result<EnergyValue<T>> {
        let tol = self.config.rel_tol * value.abs() + self.config.abs_tol;
        if !value.is_finite() || !converged || error > tol {
            return Err(LabError::InconclusiveQuadrature { value: value.f64(), error: error.f64() });
        }
        Ok(EnergyValue::finite(value, error))
    }
}

pub(crate) fn check_inputs<T: Real>(delta: T, profile: &PhiProfile<T>, config: &QuadConfig<T>) -> Result<()> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    config.validate()?;
    if !profile.is_normalized() && !config.allow_unnormalized {
        return Err(LabError::NotNormalized {
            integral: profile.normalization_integral().map(|v| v.f64()).unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// All index pairs `i ≤ j < n` in row-major order.
pub(crate) fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// `Λ_δ(u, I)`; `p` is the exponent carried by the profile.
pub fn lambda_delta<T: Real>(
    u: &PiecewiseLinearFn<T>,
    interval: Interval<T>,
    delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<EnergyValue<T>> {
    check_inputs(delta, profile, config)?;
    let v = u.restrict(interval.a, interval.b)?;
    if let Some(c) = certify(&v, profile, delta, config.divergence_probe_levels) {
        return Ok(EnergyValue::divergent(c));
    }
    let engine = Engine::new(profile, delta, config, v.num_segments());
    let results: Vec<QuadResult<T>> =
        pair_list(v.num_segments()).par_iter().map(|&(i, j)| engine.pair(&v, i, j)).collect();
    engine.finish(&results)
}

/// `∫ φ_δ(|u(x) - u(y)|) |x - y|^{-(p+1)} dy` over the domain of `u`; `+∞` when
/// `x` sits on a jump that `φ_δ` sees.
pub fn local_energy<T: Real>(
    u: &PiecewiseLinearFn<T>,
    x: T,
    delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<T> {
    check_inputs(delta, profile, config)?;
    let engine = Engine::new(profile, delta, config, u.num_segments());
    let ctx = engine.ctx();
    let failed = std::cell::Cell::new(false);
    let err = std::cell::Cell::new(T::zero());
    let ux = u.eval(x);
    let two = T::lit(2.0);
    let mut parts = Vec::with_capacity(2 * u.num_segments());
    for s in u.segments() {
        let l = s.slope();
        if s.x0 <= x && x < s.x1 {
            parts.push(ctx.inner(x, T::zero(), l, x, x, s.x1, &failed, &err));
            if s.x0 < x {
                // mirrored: y -> 2x - y keeps the inner integral to the right of x
                parts.push(ctx.inner(x, T::zero(), -l, x, x, two * x - s.x0, &failed, &err));
            }
        } else if s.x0 >= x {
            parts.push(ctx.inner(x, s.u0 - ux, l, s.x0, s.x0, s.x1, &failed, &err));
        } else {
            let r = two * x - s.x1;
            parts.push(ctx.inner(x, s.u1 - ux, -l, r, r, two * x - s.x0, &failed, &err));
        }
    }
    if failed.get() {
        let v = pairwise_sum(&parts);
        return Err(LabError::InconclusiveQuadrature { value: v.f64(), error: err.get().f64() });
    }
    Ok(pairwise_sum(&parts) * delta.powf(profile.p()))
}

/// `Λ_δ(u, ℝ)` for `u` constant outside its domain: the window integral plus the
/// window–far-field and far-field–far-field terms.
pub fn lambda_delta_on_line<T: Real>(
    u: &PiecewiseLinearFn<T>,
    delta: T,
    profile: &PhiProfile<T>,
    config: &QuadConfig<T>,
) -> Result<EnergyValue<T>> {
    check_inputs(delta, profile, config)?;
    let window = u.domain();
    let inner = lambda_delta(u, window, delta, profile, config)?;
    if inner.is_divergent() || config.far_field_cutoff_policy == FarFieldPolicy::HardCutoff {
        return Ok(inner);
    }
    let p = profile.p();
    let (ca, cb) = (u.start_value(), u.end_value());
    let dp = delta.powf(p);
    let gap = (cb - ca).abs();
    let far_far = if gap == T::zero() {
        T::zero()
    } else {
        let v = profile.eval(gap / delta);
        if v == T::zero() {
            T::zero()
        } else if p == T::one() {
            return Ok(EnergyValue::divergent(DivergenceCertificate {
                location: window.b,
                jump: cb - ca,
                side: ProbeSide::FarField,
                eta: T::zero(),
                probe_level: 0,
                phi_delta_lower_bound: v * dp,
            }));
        } else {
            T::lit(2.0) * v * dp * window.len().powf(T::one() - p) / (p * (p - T::one()))
        }
    };
    let engine = Engine::new(profile, delta, config, u.num_segments());
    let left = tail_term(&engine, u, ca, window.a, false);
    let right = tail_term(&engine, u, cb, window.b, true);
    let tails = (left + right) * (T::lit(2.0) * dp);
    let value = inner.value + tails.value + far_far;
    let error = inner.error_estimate + tails.error;
    engine.accept(value, error, tails.converged)
}

/// `∫_window φ(|u(x) - c|/δ) |x - x_end|^{-p} / p dx` (scaled units).
fn tail_term<T: Real>(engine: &Engine<'_, T>, u: &PiecewiseLinearFn<T>, c: T, x_end: T, right: bool) -> QuadResult<T> {
    let phi = engine.phi;
    let p = phi.p();
    let dist = |x: T| if right { x_end - x } else { x - x_end };
    let mut q = Adaptive::new(&engine.rule, engine.config.rel_tol * T::lit(0.25), engine.abs_scaled, engine.config.max_subdivision_depth);
    q.max_cells = engine.config.max_cells;
    let mut parts = Vec::with_capacity(u.num_segments());
    for s in u.segments() {
        let slope = s.slope();
        if slope == T::zero() {
            let v = phi.eval((s.u0 - c).abs() / engine.delta);
            if v == T::zero() {
                parts.push(QuadResult::zero());
                continue;
            }
            let (r0, r1) = {
                let (d0, d1) = (dist(s.x0), dist(s.x1));
                (d0.min(d1), d0.max(d1))
            };
            let w = if p == T::one() {
                (r1 / r0).ln()
            } else {
                (r0.powf(T::one() - p) - r1.powf(T::one() - p)) / (p * (p - T::one()))
            };
            parts.push(QuadResult::exact(v * w));
            continue;
        }
        let mut pts = vec![s.x0 + (c - s.u0) / slope];
        for t in &engine.tks {
            let e = engine.delta * *t;
            pts.push(s.x0 + (c + e - s.u0) / slope);
            pts.push(s.x0 + (c - e - s.u0) / slope);
        }
        let grid = crate::quad::breakpoints(s.x0, s.x1, &mut pts);
        for w in grid.windows(2) {
            let mid = (w[0] + w[1]) * T::lit(0.5);
            let shape = phi.pieces()[phi.piece_index((s.at(mid) - c).abs() / engine.delta)].shape;
            if shape == Shape::Zero {
                parts.push(QuadResult::zero());
                continue;
            }
            parts.push(q.integrate(
                |x| shape.eval((s.at(x) - c).abs() / engine.delta) * dist(x).powf(-p) / p,
                w[0],
                w[1],
            ));
        }
    }
    let vals: Vec<T> = parts.iter().map(|r| r.value).collect();
    let errs: Vec<T> = parts.iter().map(|r| r.error).collect();
    QuadResult {
        value: pairwise_sum(&vals),
        error: pairwise_sum(&errs),
        converged: parts.iter().all(|r| r.converged),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{make_affine, make_heaviside};
    use crate::profile::ProfileKind;
    use approx::assert_relative_eq;

    fn cfg() -> QuadConfig<f64> {
        QuadConfig::default()
    }

    #[test]
    fn affine_matches_closed_form() {
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        for d in [0.5, 0.1, 0.01] {
            let e = lambda_delta(&u, Interval::unit(), d, &ind, &cfg()).unwrap();
            assert_relative_eq!(e.value, 1.0 - d + d * d.ln(), max_relative = 1e-8);
            assert!(e.error_estimate <= 1e-9 * e.value);
        }
    }

    #[test]
    fn saturating_closed_form() {
        let sat = PhiProfile::builtin(ProfileKind::SaturatingPower, 1.0, 0.25).unwrap();
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        let d = 0.01;
        let e = lambda_delta(&u, Interval::unit(), d, &sat, &cfg()).unwrap();
        assert_relative_eq!(e.value, 1.0 - 0.75 * d + 0.5 * d * d.ln(), max_relative = 1e-8);
    }

    #[test]
    fn constants_have_zero_energy() {
        let sat = PhiProfile::<f64>::saturating_power(2.0).unwrap();
        let u = make_affine(Interval::unit(), 0.0, 3.0);
        assert_eq!(lambda_delta(&u, Interval::unit(), 0.1, &sat, &cfg()).unwrap().value, 0.0);
        assert_eq!(lambda_delta_on_line(&u, 0.1, &sat, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn heaviside_divergence_and_finiteness() {
        let h = make_heaviside(Interval::unit(), 0.5).unwrap();
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let e = lambda_delta(&h, Interval::unit(), 0.5, &ind, &cfg()).unwrap();
        assert!(e.is_divergent() && e.value.is_infinite());
        let bump = PhiProfile::<f64>::compact_bump(1.0).unwrap();
        let e = lambda_delta(&h, Interval::unit(), 0.5, &bump, &cfg()).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.is_finite());
    }

    #[test]
    fn rejects_unnormalized_unless_waived() {
        let raw = PhiProfile::builtin(ProfileKind::IndicatorStep, 1.0, 1.0).unwrap();
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        assert!(matches!(
            lambda_delta(&u, Interval::unit(), 0.1, &raw, &cfg()),
            Err(LabError::NotNormalized { .. })
        ));
        let waived = QuadConfig { allow_unnormalized: true, ..cfg() };
        let e = lambda_delta(&u, Interval::unit(), 0.1, &raw, &waived).unwrap();
        assert_relative_eq!(e.value, 2.0 * (0.9 + 0.1 * 0.1f64.ln()), max_relative = 1e-8);
    }

    #[test]
    fn line_energy_of_tent_below_threshold_is_zero() {
        let tent = PiecewiseLinearFn::continuous(vec![0.0, 1.0, 2.0], vec![0.0, 0.3, 0.0]).unwrap();
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        assert_eq!(lambda_delta_on_line(&tent, 0.5, &ind, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn local_energy_of_identity() {
        let ind = PhiProfile::indicator_step(1.0).unwrap();
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        for (x, d) in [(0.5, 0.1), (0.3, 0.05), (0.05, 0.01)] {
            let want = 0.5 * d * (2.0 / d - 1.0 / x - 1.0 / (1.0 - x));
            assert_relative_eq!(local_energy(&u, x, d, &ind, &cfg()).unwrap(), want, max_relative = 1e-9);
        }
        let h = make_heaviside(Interval::unit(), 0.5).unwrap();
        assert!(local_energy(&h, 0.5, 0.1, &ind, &cfg()).unwrap().is_infinite());
        assert!(local_energy(&h, 0.25, 0.1, &ind, &cfg()).unwrap().is_finite());
    }
}
