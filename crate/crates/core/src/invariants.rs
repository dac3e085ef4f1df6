//! Randomized invariant checks of the evaluator: symmetries, domain monotonicity
//! and bit-for-bit determinism across thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evaluator::{lambda_delta, EnergyValue, QuadConfig};
use crate::gridfn::{Interval, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::real::Real;

/// Continuous piecewise-linear functions on `(0, 1)` with 2 to 12 segments and
/// values in `[-1, 1]`, drawn from a fixed-seed stream.
pub fn random_corpus<T: Real>(seed: u64, count: usize) -> Vec<PiecewiseLinearFn<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=12usize);
            let mut inner: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.02..0.98)).collect();
            inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
            inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let mut xs = vec![T::zero()];
            xs.extend(inner.into_iter().map(T::lit));
            xs.push(T::one());
            let vals = xs.iter().map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
            PiecewiseLinearFn::continuous(xs, vals).expect("sorted nodes")
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub cases: usize,
    pub symmetry_checks: usize,
    pub monotonicity_checks: usize,
    pub determinism_checks: usize,
    /// Largest relative deviation seen between symmetric evaluations.
    pub max_symmetry_deviation: f64,
    pub failures: Vec<String>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Relative deviation allowed between two evaluations of the same energy.
const SYMMETRY_TOL: f64 = 1e-7;

fn same_energy<T: Real>(a: &EnergyValue<T>, b: &EnergyValue<T>) -> Option<f64> {
    if a.is_divergent() || b.is_divergent() {
        return (a.is_divergent() == b.is_divergent()).then_some(0.0);
    }
    let scale = a.value.abs().max(b.value.abs()).max(T::lit(1e-12));
    Some(((a.value - b.value).abs() / scale).f64())
}

fn on_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every check on every function of `corpus`. Case `k` uses
/// `profiles[k % len]` and `deltas[k % len]`.
pub fn run_invariants<T: Real>(
    corpus: &[PiecewiseLinearFn<T>],
    profiles: &[PhiProfile<T>],
    deltas: &[T],
    config: &QuadConfig<T>,
    threads: &[usize],
    seed: u64,
) -> Result<InvariantReport> {
    if profiles.is_empty() || deltas.is_empty() {
        return Err(LabError::InvalidParameter("need at least one profile and one delta".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut rep = InvariantReport { cases: corpus.len(), ..Default::default() };
    let unit = Interval::unit();
    for (k, u) in corpus.iter().enumerate() {
        let phi = &profiles[k % profiles.len()];
        let d = deltas[k % deltas.len()];
        let base = lambda_delta(u, unit, d, phi, config)?;
        let c = T::lit(rng.random_range(-2.0..2.0));
        let variants = [("negation", u.scaled(-T::one())), ("shift", u.shifted(c)), ("reflection", u.reflected())];
        for (name, v) in variants {
            let e = lambda_delta(&v, v.domain(), d, phi, config)?;
            rep.symmetry_checks += 1;
            match same_energy(&base, &e) {
                Some(dev) if dev <= SYMMETRY_TOL => rep.max_symmetry_deviation = rep.max_symmetry_deviation.max(dev),
                dev => rep.failures.push(format!("case {k}: {name} changed the energy ({dev:?})")),
            }
        }

        let a: f64 = rng.random_range(0.0..0.5);
        let b: f64 = rng.random_range(0.5..1.0);
        let sub = lambda_delta(u, Interval::new(T::lit(a), T::lit(b))?, d, phi, config)?;
        rep.monotonicity_checks += 1;
        let slack = config.rel_tol * T::lit(4.0) * base.value.abs() + config.abs_tol * T::lit(4.0);
        if base.is_finite() && !(sub.value <= base.value + slack) {
            rep.failures.push(format!("case {k}: energy on ({a}, {b}) exceeds the energy on (0, 1)"));
        }

        let mut bits = Vec::with_capacity(threads.len());
        for &t in threads {
            let e = on_threads(t, || lambda_delta(u, unit, d, phi, config))??;
            bits.push((e.value.f64().to_bits(), e.error_estimate.f64().to_bits()));
        }
        rep.determinism_checks += 1;
        if bits.windows(2).any(|w| w[0] != w[1]) {
            rep.failures.push(format!("case {k}: result depends on the thread count"));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus_passes() {
        let corpus = random_corpus::<f64>(3, 6);
        assert_eq!(corpus, random_corpus(3, 6));
        let profiles = vec![PhiProfile::saturating_power(1.0).unwrap(), PhiProfile::indicator_step(1.0).unwrap()];
        let rep = run_invariants(&corpus, &profiles, &[0.1, 0.3], &QuadConfig::default(), &[1, 3], 0).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        assert_eq!(rep.symmetry_checks, 18);
    }
}
