//! Limit constants and convergence experiments.
//!
//! `κ` is estimated by minimizing `Λ_δ(v, (0, 1))` over `‖v - U‖_p ≤ ε(δ)` along
//! a δ ladder, `γ` the same way around the unit step `H_{1/2}` with `p = 1`. The
//! liminf is proxied by the minimum over the ladder tail together with an
//! extrapolation in `δ|ln δ|`; the two bracket the limit and neither is claimed
//! to be it.

mod fit;
mod optimize;
mod probe;

pub use fit::{fit_delta_model, DeltaFit};
pub use optimize::OptimizerConfig;
pub use probe::{g1_lower_probe, sobolev_membership_probe, LowerProbe, ProbeEntry, ProbeReport};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evaluator::{check_inputs, lambda_delta, QuadConfig};
use crate::gridfn::{make_affine, make_heaviside, Interval, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::real::Real;
use crate::recovery::{ramp, ramp_steps, recover_step_p1};
use optimize::{run_start, stream, Outcome, Problem};

/// Ladders must be non-empty, positive and strictly decreasing.
pub fn validate_ladder<T: Real>(ladder: &[T]) -> Result<()> {
    if ladder.is_empty() {
        return Err(LabError::InvalidLadder("empty ladder".into()));
    }
    if ladder.iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
        return Err(LabError::InvalidLadder("ladder entries must be positive and finite".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::InvalidLadder("ladder must be strictly decreasing".into()));
    }
    Ok(())
}

/// `start, start·factor, …` with `count` entries; `factor` in `(0, 1)`.
pub fn geometric_ladder<T: Real>(start: T, factor: T, count: usize) -> Result<Vec<T>> {
    if !(factor > T::zero() && factor < T::one()) {
        return Err(LabError::InvalidLadder(format!("factor {factor} outside (0, 1)")));
    }
    let v: Vec<T> = (0..count).map(|k| start * factor.powi(k as i32)).collect();
    validate_ladder(&v)?;
    Ok(v)
}

/// `δ_{j+1} = δ_j/⌈ln(1/δ_j)⌉`, so successive ratios grow like `ln(1/δ)`.
pub fn log_ladder<T: Real>(start: T, count: usize) -> Result<Vec<T>> {
    if !(start > T::zero() && start < T::one()) {
        return Err(LabError::InvalidLadder(format!("log ladder start {start} outside (0, 1)")));
    }
    let mut v = Vec::with_capacity(count);
    let mut d = start;
    for _ in 0..count {
        v.push(d);
        d = d / (T::one() / d).ln().ceil().max(T::lit(2.0));
    }
    validate_ladder(&v)?;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceScan<T> {
    pub ladder: Vec<T>,
    pub values: Vec<T>,
    pub error_estimates: Vec<T>,
    /// `∫_I |u'|^p`, the pointwise limit.
    pub target: T,
    /// `Λ_δ ≈ limit + a·δ|ln δ| + b·δ`.
    pub fit: Option<DeltaFit<T>>,
}

impl<T: Real> ConvergenceScan<T> {
    pub fn extrapolated_limit(&self) -> Option<T> {
        self.fit.map(|f| f.limit)
    }

    pub fn is_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }
}

/// `∫_I |u'|^p dx`, exact on each segment.
pub fn sobolev_energy<T: Real>(u: &PiecewiseLinearFn<T>, interval: Interval<T>, p: T) -> Result<T> {
    let r = u.restrict(interval.a, interval.b)?;
    Ok(r.segments().map(|s| s.slope().abs().powf(p) * s.len()).sum())
}

/// `Λ_δ(u, I)` along the ladder, compared with `∫_I |u'|^p`.
pub fn pointwise_scan<T: Real>(
    u: &PiecewiseLinearFn<T>,
    interval: Interval<T>,
    profile: &PhiProfile<T>,
    ladder: &[T],
    config: &QuadConfig<T>,
) -> Result<ConvergenceScan<T>> {
    validate_ladder(ladder)?;
    if !u.is_continuous() {
        return Err(LabError::InvalidParameter("pointwise scans need a continuous function".into()));
    }
    let mut values = Vec::with_capacity(ladder.len());
    let mut errors = Vec::with_capacity(ladder.len());
    for &d in ladder {
        let e = lambda_delta(u, interval, d, profile, config)?;
        if let Some(c) = e.divergence_certificate {
            return Err(LabError::Divergent { location: c.location.f64(), jump: c.jump.f64() });
        }
        values.push(e.value);
        errors.push(e.error_estimate);
    }
    Ok(ConvergenceScan {
        ladder: ladder.to_vec(),
        fit: fit_delta_model(ladder, &values),
        values,
        error_estimates: errors,
        target: sobolev_energy(u, interval, profile.p())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateTarget {
    /// `U(x) = x` on `(0, 1)`, constraint in `L^p`.
    Identity,
    /// `H_{1/2}` on `(0, 1)`, constraint in `L^1`.
    UnitStep,
}

impl EstimateTarget {
    pub fn name(self) -> &'static str {
        match self {
            EstimateTarget::Identity => "kappa",
            EstimateTarget::UnitStep => "gamma",
        }
    }
}

/// Best constrained energy found at one ladder entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaMinimum<T> {
    pub delta: T,
    pub energy: T,
    pub error_estimate: T,
    pub function_id: String,
    /// Distance of the minimizer to the target, re-measured after the search.
    pub constraint: T,
    pub epsilon: T,
    pub starts: usize,
    pub feasible_starts: usize,
    pub best_start: String,
    /// Energy of the winning start before the search.
    pub start_energy: T,
    pub accepted_moves: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate<T> {
    pub target: EstimateTarget,
    pub profile: String,
    pub p: T,
    /// Minimum over the whole ladder.
    pub value: T,
    pub per_delta: Vec<DeltaMinimum<T>>,
    #[serde(skip)]
    pub minimizers: Vec<PiecewiseLinearFn<T>>,
    /// Minimum over the last three ladder entries.
    pub tail_minimum: T,
    pub extrapolated_limit: T,
    pub fit: Option<DeltaFit<T>>,
    /// `[min, max]` of the tail minimum and the extrapolation.
    pub bracket: (T, T),
    pub restarts: usize,
    pub seed: u64,
}

/// Jump ratios (in units of `δ`) tried for staircase seeds: just below, at and just
/// above `δ`, `2δ`, and one ratio per zero interval of `φ` for which the
/// staircase's neighbour differences fall inside it.
fn jump_ratios<T: Real>(profile: &PhiProfile<T>) -> Vec<T> {
    let mut r = vec![T::one() - T::lit(1e-6), T::one(), T::one() + T::lit(1e-6), T::lit(2.0)];
    for (a, b) in profile.zero_intervals() {
        let x = if b.is_infinite() {
            T::lit(2.0) * a
        } else if a == T::zero() {
            b * (T::one() - T::lit(1e-6))
        } else {
            (a + b) * T::lit(0.5)
        };
        if x > T::zero() && !r.contains(&x) {
            r.push(x);
        }
    }
    r
}

/// Piecewise-constant approximation of `U` with `round(1/J)` cells of width
/// `1/N` and jumps `J`, centred on `1/2`.
pub fn identity_staircase<T: Real>(jump: T) -> Result<PiecewiseLinearFn<T>> {
    if !(jump > T::zero()) {
        return Err(LabError::InvalidParameter(format!("staircase jump must be positive, got {jump}")));
    }
    let n = (T::one() / jump).round().max(T::one()).to_usize().unwrap_or(1);
    let nf = T::of_usize(n);
    let xs: Vec<T> = (0..=n).map(|k| T::of_usize(k) / nf).collect();
    let mid = (nf - T::one()) * T::lit(0.5);
    let levels: Vec<T> = (0..n).map(|k| T::lit(0.5) + (T::of_usize(k) - mid) * jump).collect();
    PiecewiseLinearFn::step(xs, &levels)
}

/// Seeds never have more segments than this.
const MAX_SEED_SEGMENTS: usize = 4096;

fn uniform_nodes<T: Real>(lo: T, hi: T, nodes: usize) -> Vec<T> {
    let m = nodes.max(2) - 1;
    (1..m).map(|k| lo + (hi - lo) * T::of_usize(k) / T::of_usize(m)).collect()
}

fn seeds<T: Real>(
    target: EstimateTarget,
    profile: &PhiProfile<T>,
    delta: T,
    epsilon: T,
    nodes: usize,
) -> Vec<(String, PiecewiseLinearFn<T>)> {
    let mut out = Vec::new();
    match target {
        EstimateTarget::Identity => {
            let u = make_affine(Interval::unit(), T::one(), T::zero());
            out.push(("identity".to_string(), u.refined(&uniform_nodes(T::zero(), T::one(), nodes))));
            for r in jump_ratios(profile) {
                if T::one() / (r * delta) > T::of_usize(MAX_SEED_SEGMENTS) {
                    continue;
                }
                if let Ok(s) = identity_staircase(r * delta) {
                    out.push((format!("staircase:{r}"), s));
                }
            }
        }
        EstimateTarget::UnitStep => {
            let half = T::lit(0.5);
            if let Ok(h) = make_heaviside(Interval::unit(), half) {
                out.push(("step".to_string(), h));
            }
            if let Ok(u) = recover_step_p1(half, delta, profile) {
                out.push(("recover_step".to_string(), u));
            }
            let mut counts = vec![1, ramp_steps(delta, profile)];
            for r in jump_ratios(profile) {
                let x = T::one() / (r * delta);
                let n = if r <= T::one() { x.floor() + T::one() } else { x.floor() };
                if let Some(n) = n.to_usize() {
                    if n <= MAX_SEED_SEGMENTS && !counts.contains(&n) {
                        counts.push(n);
                    }
                }
            }
            // the L¹ distance of a ramp of half-width w to the step is about w/2
            let wmax = (T::lit(2.0) * epsilon).min(T::lit(0.499));
            for f in [T::lit(0.25), T::lit(0.5), T::lit(0.95)] {
                let w = f * wmax;
                for &n in &counts {
                    if let Ok(u) = ramp(half - w, half + w, n) {
                        let u = if n <= 1 { u.refined(&uniform_nodes(half - w, half + w, nodes)) } else { u };
                        out.push((format!("ramp:{n}:{f}"), u));
                    }
                }
            }
        }
    }
    out
}

fn target_function<T: Real>(target: EstimateTarget) -> Result<(PiecewiseLinearFn<T>, bool)> {
    Ok(match target {
        EstimateTarget::Identity => (make_affine(Interval::unit(), T::one(), T::zero()), false),
        EstimateTarget::UnitStep => (make_heaviside(Interval::unit(), T::lit(0.5))?, true),
    })
}

fn estimate<T: Real>(
    target: EstimateTarget,
    profile: &PhiProfile<T>,
    ladder: &[T],
    nodes: usize,
    opt: &OptimizerConfig<T>,
) -> Result<ConstantEstimate<T>> {
    validate_ladder(ladder)?;
    opt.validate()?;
    check_inputs(ladder[0], profile, &opt.quad)?;
    if nodes < 2 {
        return Err(LabError::InvalidParameter("at least two nodes are needed".into()));
    }
    let (tf, l1) = target_function::<T>(target)?;
    let q = if l1 { T::one() } else { profile.p() };
    let mut per_delta = Vec::with_capacity(ladder.len());
    let mut minimizers = Vec::with_capacity(ladder.len());
    for (level, &delta) in ladder.iter().enumerate() {
        let problem =
            Problem { target: &tf, norm_exponent: q, epsilon: opt.epsilon(delta), delta, profile, quad: opt.quad };
        let seeds = seeds(target, profile, delta, problem.epsilon, nodes);
        let first: Vec<(String, Option<Outcome<T>>)> = seeds
            .into_par_iter()
            .enumerate()
            .map(|(k, (name, f))| {
                let mut rng = stream(opt.seed, level, k);
                run_start(&problem, f, opt, false, &mut rng).map(|o| (name, o))
            })
            .collect::<Result<_>>()?;
        let n_seeds = first.len();
        let best_seed = first
            .iter()
            .filter_map(|(n, o)| o.as_ref().map(|o| (n, o)))
            .min_by(|a, b| a.1.energy.partial_cmp(&b.1.energy).unwrap());
        let Some((seed_name, seed_out)) = best_seed else {
            return Err(LabError::EstimationFailure(format!(
                "all {n_seeds} starts infeasible or divergent at delta {delta}"
            )));
        };
        let restart_from = seed_out.best.clone();
        let seed_name = seed_name.clone();
        let again: Vec<(String, Option<Outcome<T>>)> = (0..opt.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(opt.seed, level, n_seeds + r);
                run_start(&problem, restart_from.clone(), opt, true, &mut rng).map(|o| (format!("restart:{r}:{seed_name}"), o))
            })
            .collect::<Result<_>>()?;
        let all: Vec<(String, Outcome<T>)> =
            first.into_iter().chain(again).filter_map(|(n, o)| o.map(|o| (n, o))).collect();
        let feasible = all.len();
        let accepted = all.iter().map(|(_, o)| o.accepted).sum();
        let evaluations = all.iter().map(|(_, o)| o.evaluations).sum();
        // earliest start wins ties, which keeps the choice independent of `restarts`
        let (name, best) = all
            .into_iter()
            .reduce(|a, b| if b.1.energy < a.1.energy { b } else { a })
            .expect("at least one feasible start");
        let constraint = problem.distance(&best.best);
        if !(constraint <= problem.epsilon) {
            return Err(LabError::EstimationFailure(format!(
                "minimizer at delta {delta} violates the constraint: {constraint} > {}",
                problem.epsilon
            )));
        }
        log::debug!("{} delta={} best={} from {}", target.name(), delta, best.energy, name);
        per_delta.push(DeltaMinimum {
            delta,
            energy: best.energy,
            error_estimate: best.error,
            function_id: format!("{}_{:02}", target.name(), level),
            constraint,
            epsilon: problem.epsilon,
            starts: n_seeds + opt.restarts,
            feasible_starts: feasible,
            best_start: name,
            start_energy: best.start_energy,
            accepted_moves: accepted,
            evaluations,
        });
        minimizers.push(best.best);
    }
    let energies: Vec<T> = per_delta.iter().map(|m| m.energy).collect();
    let value = energies.iter().copied().fold(T::infinity(), T::min);
    let tail = &energies[energies.len().saturating_sub(3)..];
    let tail_minimum = tail.iter().copied().fold(T::infinity(), T::min);
    let fit = fit_delta_model(ladder, &energies);
    let extrapolated_limit = fit.map_or(tail_minimum, |f| f.limit);
    Ok(ConstantEstimate {
        target,
        profile: profile.kind().name().to_string(),
        p: profile.p(),
        value,
        per_delta,
        minimizers,
        tail_minimum,
        extrapolated_limit,
        fit,
        bracket: (tail_minimum.min(extrapolated_limit), tail_minimum.max(extrapolated_limit)),
        restarts: opt.restarts,
        seed: opt.seed,
    })
}

/// Estimate of `κ`: constrained minima of `Λ_δ(v, (0, 1))` near `U` along the ladder.
pub fn estimate_kappa<T: Real>(
    profile: &PhiProfile<T>,
    ladder: &[T],
    nodes: usize,
    opt: &OptimizerConfig<T>,
) -> Result<ConstantEstimate<T>> {
    estimate(EstimateTarget::Identity, profile, ladder, nodes, opt)
}

/// Estimate of `γ`: constrained minima near the unit step `H_{1/2}`; needs `p = 1`.
pub fn estimate_gamma_step<T: Real>(
    profile: &PhiProfile<T>,
    ladder: &[T],
    nodes: usize,
    opt: &OptimizerConfig<T>,
) -> Result<ConstantEstimate<T>> {
    if profile.p() != T::one() {
        return Err(LabError::InvalidParameter(format!("the step constant needs p = 1, got {}", profile.p())));
    }
    estimate(EstimateTarget::UnitStep, profile, ladder, nodes, opt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ladders() {
        assert!(validate_ladder::<f64>(&[]).is_err());
        assert!(validate_ladder(&[0.1, 0.1]).is_err());
        assert!(validate_ladder(&[0.1, -0.1]).is_err());
        let g = geometric_ladder(0.1, 0.5, 3).unwrap();
        assert_eq!(g, vec![0.1, 0.05, 0.025]);
        let l = log_ladder(0.05, 3).unwrap();
        assert_relative_eq!(l[1], 0.05 / 3.0);
        assert_relative_eq!(l[2], l[1] / 5.0);
    }

    #[test]
    fn scan_of_identity_matches_closed_form() {
        let phi = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        let u = make_affine(Interval::unit(), 1.0, 0.0);
        let s = pointwise_scan(&u, Interval::unit(), &phi, &[0.1, 0.01, 0.001], &QuadConfig::default()).unwrap();
        for (d, v) in s.ladder.iter().zip(&s.values) {
            assert_relative_eq!(*v, 1.0 - d + d * d.ln(), max_relative = 1e-8);
        }
        assert_relative_eq!(s.values[1], 0.943948, epsilon = 5e-7);
        assert!(s.is_increasing());
        assert_relative_eq!(s.extrapolated_limit().unwrap(), 1.0, epsilon = 1e-6);
        assert_eq!(s.target, 1.0);
        let c = make_affine(Interval::unit(), 0.0, 3.0);
        let s = pointwise_scan(&c, Interval::unit(), &phi, &[0.1, 0.01], &QuadConfig::default()).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0) && s.target == 0.0);
    }

    #[test]
    fn staircase_shape() {
        let s = identity_staircase(0.05 * (1.0 - 1e-6)).unwrap();
        assert_eq!(s.num_segments(), 20);
        assert!(s.max_abs_jump() < 0.05);
    }

    #[test]
    fn compact_support_gives_zero() {
        let phi = PhiProfile::<f64>::compact_bump(1.0).unwrap();
        let opt = OptimizerConfig { anneal_moves: 50, restarts: 1, polish_budget: 20, ..Default::default() };
        let k = estimate_kappa(&phi, &[0.1, 0.05], 8, &opt).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(k.per_delta.iter().all(|m| m.energy == 0.0));
        let g = estimate_gamma_step(&phi, &[0.1, 0.05], 8, &opt).unwrap();
        assert_eq!(g.value, 0.0);
    }
}
