//! Simulated annealing with a deterministic coordinate polish, on top of
//! [`PairTable`] so that each move only re-integrates the pairs it touches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evaluator::{PairTable, QuadConfig};
use crate::gridfn::{lp_distance, PiecewiseLinearFn};
use crate::profile::PhiProfile;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig<T> {
    /// Extra annealing runs from the best structured seed, each on its own stream.
    pub restarts: usize,
    pub anneal_moves: usize,
    /// Moves between two temperature steps `T_{j+1} = cooling·T_j`.
    pub moves_per_temperature: usize,
    /// `T_0` relative to the energy of the start.
    pub t0: T,
    pub cooling: T,
    pub target_acceptance: T,
    pub polish_passes: usize,
    /// Coordinates visited per polish pass, chosen at random without repetition.
    pub polish_budget: usize,
    /// Constraint radius `ε(δ) = epsilon_scale·δ^epsilon_exponent`.
    pub epsilon_scale: T,
    pub epsilon_exponent: T,
    pub seed: u64,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            restarts: 2,
            anneal_moves: 600,
            moves_per_temperature: 50,
            t0: T::lit(1e-3),
            cooling: T::lit(0.95),
            target_acceptance: T::lit(0.3),
            polish_passes: 1,
            polish_budget: 200,
            epsilon_scale: T::one(),
            epsilon_exponent: T::lit(0.5),
            seed: 0,
            quad: QuadConfig::default(),
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn epsilon(&self, delta: T) -> T {
        self.epsilon_scale * delta.powf(self.epsilon_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if self.moves_per_temperature == 0 {
            return Err(LabError::InvalidParameter("moves_per_temperature must be positive".into()));
        }
        if !(self.cooling > T::zero() && self.cooling <= T::one()) {
            return Err(LabError::InvalidParameter(format!("cooling {} outside (0, 1]", self.cooling)));
        }
        if !(self.t0 >= T::zero()) || !(self.epsilon_scale > T::zero()) {
            return Err(LabError::InvalidParameter("t0 and epsilon_scale must be non-negative".into()));
        }
        if !(self.target_acceptance > T::zero() && self.target_acceptance < T::one()) {
            return Err(LabError::InvalidParameter("target_acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Independent stream for start `start` at ladder entry `level`.
pub(crate) fn stream(seed: u64, level: usize, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | start as u64);
    rng
}

/// Constrained minimization of `Λ_δ(v, domain)` over `‖v - target‖_q ≤ ε`.
pub(crate) struct Problem<'a, T> {
    pub target: &'a PiecewiseLinearFn<T>,
    pub norm_exponent: T,
    pub epsilon: T,
    pub delta: T,
    pub profile: &'a PhiProfile<T>,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Problem<'_, T> {
    pub fn distance(&self, v: &PiecewiseLinearFn<T>) -> T {
        lp_distance(v, self.target, self.norm_exponent, self.target.domain())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome<T> {
    pub best: PiecewiseLinearFn<T>,
    pub energy: T,
    pub error: T,
    pub start_energy: T,
    pub accepted: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Node,
    Shift,
    Slide,
}

struct Search<'p, 'a, T> {
    problem: &'p Problem<'a, T>,
    table: PairTable<T>,
    best: PiecewiseLinearFn<T>,
    best_energy: T,
    best_error: T,
    accepted: usize,
    evaluations: usize,
}

impl<T: Real> Search<'_, '_, T> {
    /// Evaluates `cand`; returns its energy when feasible and finite.
    fn try_candidate(&mut self, cand: &PiecewiseLinearFn<T>) -> Option<(T, crate::evaluator::Proposal<T>)> {
        let d = self.problem.distance(cand);
        if !(d <= self.problem.epsilon) {
            return None;
        }
        let cur = self.table.function();
        let changed: Vec<usize> = (0..cur.num_segments()).filter(|&i| cur.segment(i) != cand.segment(i)).collect();
        if changed.is_empty() {
            return None;
        }
        self.evaluations += 1;
        let prop = self.table.propose(cand, &changed).ok()?;
        if prop.energy.is_divergent() {
            return None;
        }
        let e = prop.energy.value;
        if e < self.best_energy {
            self.best = cand.clone();
            self.best_energy = e;
            self.best_error = prop.energy.error_estimate;
        }
        Some((e, prop))
    }
}

/// Builds the candidate for one move; `None` when the move is not applicable.
fn apply_move<T: Real>(
    u: &PiecewiseLinearFn<T>,
    mv: Move,
    k: usize,
    step: T,
    side: bool,
    min_len: T,
) -> Option<PiecewiseLinearFn<T>> {
    let n = u.num_segments();
    let mut xs = u.breakpoints().to_vec();
    let mut left = u.left_values().to_vec();
    let mut right = u.right_values().to_vec();
    match mv {
        Move::Node => {
            // node k in 0..=n
            if k == 0 || k == n || left[k] == right[k] {
                left[k] = left[k] + step;
                right[k] = right[k] + step;
            } else if side {
                left[k] = left[k] + step;
            } else {
                right[k] = right[k] + step;
            }
        }
        Move::Shift => {
            // segment k in 0..n
            right[k] = right[k] + step;
            left[k + 1] = left[k + 1] + step;
            if k == 0 {
                left[0] = right[0];
            }
            if k + 1 == n {
                right[n] = left[n];
            }
        }
        Move::Slide => {
            if k == 0 || k >= n {
                return None;
            }
            let (lo, hi) = (xs[k - 1], xs[k + 1]);
            let margin = ((hi - lo) * T::lit(1e-3)).max(min_len);
            let x = (xs[k] + step).max(lo + margin).min(hi - margin);
            if x == xs[k] || hi - lo < margin * T::lit(2.0) {
                return None;
            }
            xs[k] = x;
        }
    }
    PiecewiseLinearFn::new(xs, left, right).ok()
}

fn gaussian<T: Real>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// One annealing run plus polish from `start`. `Ok(None)` when the start is
/// infeasible or divergent.
const MAX_WIDTH_GROWTH: f64 = 16.0;
const MIN_CELL_FRACTION: f64 = 0.01;

pub(crate) fn run_start<T: Real>(
    problem: &Problem<'_, T>,
    start: PiecewiseLinearFn<T>,
    cfg: &OptimizerConfig<T>,
    hot: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Outcome<T>>> {
    let d0 = problem.distance(&start);
    if !(d0 <= problem.epsilon) {
        return Ok(None);
    }
    let table = match PairTable::new(start.clone(), problem.delta, problem.profile, &problem.quad) {
        Ok(t) => t,
        Err(LabError::Divergent { .. }) | Err(LabError::InconclusiveQuadrature { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let e0 = table.energy().value;
    let mut s = Search {
        problem,
        best: start,
        best_energy: e0,
        best_error: table.energy().error_estimate,
        table,
        accepted: 0,
        evaluations: 1,
    };
    if e0 <= T::zero() {
        // energies are nonnegative: nothing to improve
        return Ok(Some(s.finish(e0)));
    }
    let n = s.table.function().num_segments();
    let min_cell = s.table.function().segments().map(|g| g.len()).fold(T::infinity(), T::min);
    let mut width = [problem.delta * T::lit(0.05), problem.delta * T::lit(0.05), min_cell * T::lit(0.1)];
    // flat landscapes accept everything; without a cap the widths grow without bound
    let max_width = width.map(|w| w * T::lit(MAX_WIDTH_GROWTH));
    // slides never make a cell shorter than this: near-empty cells cost deep quadrature
    let min_len = min_cell.min(problem.delta * T::lit(MIN_CELL_FRACTION));
    let t_start = cfg.t0 * e0.abs().max(problem.delta) * if hot { T::lit(10.0) } else { T::one() };
    let mut temp = t_start;
    let mut batch = [(0usize, 0usize); 3];
    let mut current = e0;
    for step in 0..cfg.anneal_moves {
        let r: f64 = rng.random();
        let (mv, k) = if r < 0.4 {
            (Move::Node, rng.random_range(0..=n))
        } else if r < 0.7 {
            (Move::Shift, rng.random_range(0..n))
        } else {
            (Move::Slide, rng.random_range(0..=n))
        };
        let w = width[mv as usize];
        let side: bool = rng.random();
        let z: T = gaussian(rng);
        let u: f64 = rng.random();
        batch[mv as usize].1 += 1;
        let cand = apply_move(s.table.function(), mv, k, w * z, side, min_len);
        if let Some(cand) = cand {
            if let Some((e, prop)) = s.try_candidate(&cand) {
                let de = e - current;
                let accept = de <= T::zero() || (temp > T::zero() && T::lit(u) < (-de / temp).exp());
                if accept {
                    s.table.commit(cand, prop);
                    current = e;
                    s.accepted += 1;
                    batch[mv as usize].0 += 1;
                }
            }
        }
        if (step + 1) % cfg.moves_per_temperature == 0 {
            temp = temp * cfg.cooling;
            for (m, (acc, tot)) in batch.iter_mut().enumerate() {
                if *tot > 0 {
                    let rate = T::of_usize(*acc) / T::of_usize(*tot);
                    width[m] = (width[m] * (rate - cfg.target_acceptance).exp()).min(max_width[m]);
                }
                *acc = 0;
                *tot = 0;
            }
        }
    }

    // polish from the best point found
    if s.table.function() != &s.best {
        match PairTable::new(s.best.clone(), problem.delta, problem.profile, &problem.quad) {
            Ok(t) => s.table = t,
            Err(_) => return Ok(Some(s.finish(e0))),
        }
    }
    let mut coords: Vec<(Move, usize)> = (0..=n).map(|k| (Move::Node, k)).collect();
    coords.extend((0..n).map(|k| (Move::Shift, k)));
    coords.extend((1..n).map(|k| (Move::Slide, k)));
    for _ in 0..cfg.polish_passes {
        coords.shuffle(rng);
        for &(mv, k) in coords.iter().take(cfg.polish_budget) {
            for sign in [T::one(), -T::one()] {
                let sides: &[bool] = if mv == Move::Node { &[false, true] } else { &[false] };
                for &side in sides {
                    let Some(cand) = apply_move(s.table.function(), mv, k, sign * width[mv as usize], side, min_len) else {
                        continue;
                    };
                    let before = s.table.energy().value;
                    if let Some((e, prop)) = s.try_candidate(&cand) {
                        if e < before {
                            s.table.commit(cand, prop);
                            s.accepted += 1;
                        }
                    }
                }
            }
        }
        for w in width.iter_mut() {
            *w = *w * T::lit(0.5);
        }
    }
    Ok(Some(s.finish(e0)))
}

impl<T: Real> Search<'_, '_, T> {
    fn finish(self, e0: T) -> Outcome<T> {
        Outcome {
            best: self.best,
            energy: self.best_energy,
            error: self.best_error,
            start_energy: e0,
            accepted: self.accepted,
            evaluations: self.evaluations,
        }
    }
}
