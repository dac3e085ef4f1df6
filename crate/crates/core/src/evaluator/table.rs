//! Cached pair contributions for repeated evaluation of small edits of one function.
//!
//! The total is always re-summed over all pairs in the same order as
//! [`lambda_delta`](super::lambda_delta), so an incrementally updated energy is
//! bit-identical to a fresh evaluation of the same function.

use rayon::prelude::*;

use super::{certify, check_inputs, pair_list, EnergyValue, Engine, QuadConfig};
use crate::error::{LabError, Result};
use crate::gridfn::{Interval, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::quad::{QuadResult, SumTree};
use crate::real::Real;

pub struct PairTable<T> {
    u: PiecewiseLinearFn<T>,
    profile: PhiProfile<T>,
    delta: T,
    config: QuadConfig<T>,
    values: SumTree<T>,
    errors: SumTree<T>,
    unconverged: Vec<bool>,
    n_unconverged: usize,
    energy: EnergyValue<T>,
}

/// Candidate replacement entries and the energy they would give.
pub struct Proposal<T> {
    pub energy: EnergyValue<T>,
    updates: Vec<(usize, QuadResult<T>)>,
}

impl<T: Real> PairTable<T> {
    /// Full evaluation of `u` on its own domain. Fails when the energy diverges.
    pub fn new(u: PiecewiseLinearFn<T>, delta: T, profile: &PhiProfile<T>, config: &QuadConfig<T>) -> Result<Self> {
        check_inputs(delta, profile, config)?;
        if let Some(c) = certify(&u, profile, delta, config.divergence_probe_levels) {
            return Err(LabError::Divergent { location: c.location.f64(), jump: c.jump.f64() });
        }
        let n = u.num_segments();
        let engine = Engine::new(profile, delta, config, n);
        let results: Vec<QuadResult<T>> = pair_list(n).par_iter().map(|&(i, j)| engine.pair(&u, i, j)).collect();
        let energy = engine.finish(&results)?;
        let unconverged: Vec<bool> = results.iter().map(|r| !r.converged).collect();
        Ok(Self {
            u,
            profile: profile.clone(),
            delta,
            config: *config,
            values: SumTree::new(results.iter().map(|r| r.value).collect()),
            errors: SumTree::new(results.iter().map(|r| r.error).collect()),
            n_unconverged: unconverged.iter().filter(|b| **b).count(),
            unconverged,
            energy,
        })
    }

    pub fn function(&self) -> &PiecewiseLinearFn<T> {
        &self.u
    }

    pub fn energy(&self) -> EnergyValue<T> {
        self.energy
    }

    pub fn domain(&self) -> Interval<T> {
        self.u.domain()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let n = self.u.num_segments();
        // rows before `i` hold n, n-1, ..., n-i+1 entries
        i * n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Energy of `cand`, which must differ from the current function only on the
    /// segments listed in `changed`. Divergent candidates yield a divergent energy.
    pub fn propose(&self, cand: &PiecewiseLinearFn<T>, changed: &[usize]) -> Result<Proposal<T>> {
        let n = self.u.num_segments();
        if cand.num_segments() != n {
            return Err(LabError::InvalidParameter("candidate changes the segment count".into()));
        }
        if let Some(c) = certify(cand, &self.profile, self.delta, self.config.divergence_probe_levels) {
            return Ok(Proposal { energy: EnergyValue::divergent(c), updates: Vec::new() });
        }
        let mut mark = vec![false; n];
        for &k in changed {
            mark[k] = true;
        }
        let mut todo = Vec::new();
        for i in 0..n {
            for j in i..n {
                if mark[i] || mark[j] {
                    todo.push((i, j));
                }
            }
        }
        let engine = Engine::new(&self.profile, self.delta, &self.config, n);
        let updates: Vec<(usize, QuadResult<T>)> =
            todo.par_iter().map(|&(i, j)| (self.index(i, j), engine.pair(cand, i, j))).collect();
        let vals: Vec<(usize, T)> = updates.iter().map(|(k, r)| (*k, r.value)).collect();
        let errs: Vec<(usize, T)> = updates.iter().map(|(k, r)| (*k, r.error)).collect();
        let mut bad = self.n_unconverged;
        for (k, r) in &updates {
            bad = bad + usize::from(!r.converged) - usize::from(self.unconverged[*k]);
        }
        let scale = self.delta.powf(self.profile.p());
        let value = self.values.total_with(&vals) * scale;
        let error = self.errors.total_with(&errs) * scale;
        let energy = engine.accept(value, error, bad == 0)?;
        Ok(Proposal { energy, updates })
    }

    pub fn commit(&mut self, cand: PiecewiseLinearFn<T>, proposal: Proposal<T>) {
        debug_assert!(proposal.energy.is_finite());
        let vals: Vec<(usize, T)> = proposal.updates.iter().map(|(k, r)| (*k, r.value)).collect();
        let errs: Vec<(usize, T)> = proposal.updates.iter().map(|(k, r)| (*k, r.error)).collect();
        for (k, r) in &proposal.updates {
            self.n_unconverged = self.n_unconverged + usize::from(!r.converged) - usize::from(self.unconverged[*k]);
            self.unconverged[*k] = !r.converged;
        }
        self.values.update(&vals);
        self.errors.update(&errs);
        self.u = cand;
        self.energy = proposal.energy;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::lambda_delta;

    #[test]
    fn incremental_matches_fresh_evaluation_bitwise() {
        let phi = PhiProfile::<f64>::saturating_power(1.0).unwrap();
        let cfg = QuadConfig::default();
        let xs = vec![0.0, 0.2, 0.45, 0.7, 1.0];
        let u = PiecewiseLinearFn::continuous(xs.clone(), vec![0.0, 0.25, 0.4, 0.72, 1.0]).unwrap();
        let mut t = PairTable::new(u.clone(), 0.05, &phi, &cfg).unwrap();
        let fresh = lambda_delta(&u, Interval::unit(), 0.05, &phi, &cfg).unwrap();
        assert_eq!(t.energy().value.to_bits(), fresh.value.to_bits());

        let v = PiecewiseLinearFn::continuous(xs, vec![0.0, 0.25, 0.5, 0.72, 1.0]).unwrap();
        let prop = t.propose(&v, &[1, 2]).unwrap();
        let fresh = lambda_delta(&v, Interval::unit(), 0.05, &phi, &cfg).unwrap();
        assert_eq!(prop.energy.value.to_bits(), fresh.value.to_bits());
        t.commit(v, prop);
        assert_eq!(t.energy().value.to_bits(), fresh.value.to_bits());
    }
}
