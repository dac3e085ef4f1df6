//! Contribution of one ordered segment pair `(i, j)`, `i ≤ j`, to
//! `∫∫ φ(|u(y) - u(x)|/δ) |y - x|^{-(p+1)}` in units where `φ_δ` is replaced by `φ`
//! (the caller multiplies by `δ^p`). Both orderings `x < y` and `y < x` are included.

use std::cell::Cell;

use crate::gridfn::Segment;
use crate::profile::{PhiProfile, Shape};
use crate::quad::{Adaptive, GaussLegendre, QuadResult};
use crate::real::Real;

pub(crate) struct PairCtx<'a, T> {
    pub phi: &'a PhiProfile<T>,
    pub delta: T,
    pub rule: &'a GaussLegendre<T>,
    pub far_rule: &'a GaussLegendre<T>,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: u32,
    pub max_cells: usize,
    pub band_levels: u32,
    /// Profile breakpoints, cached.
    pub tks: &'a [T],
}

/// `∫_{y0}^{y1} (y - x)^{-(p+1)} dy` for `x ≤ y0 < y1`.
#[inline]
pub(crate) fn kernel_int<T: Real>(p: T, r0: T, r1: T) -> T {
    if r0 <= T::zero() {
        return T::infinity();
    }
    if p == T::one() {
        return (r1 - r0) / (r0 * r1);
    }
    // r0^{-p} (1 - (r0/r1)^p) / p without cancellation
    -r0.powf(-p) * (p * (r0 / r1).ln()).exp_m1() / p
}

/// `∫_a^b ∫_c^d (y - x)^{-(p+1)} dy dx` for `a < b ≤ c < d`.
pub(crate) fn rect_int<T: Real>(p: T, a: T, b: T, c: T, d: T, far_rule: &GaussLegendre<T>) -> T {
    let gap = c - b;
    if gap <= T::zero() {
        return T::infinity();
    }
    if p == T::one() {
        return ((b - a) * (d - c) / (gap * (d - a))).ln_1p();
    }
    if gap > T::lit(8.0) * (b - a).max(d - c) {
        return far_rule.apply(&mut |x: T| kernel_int(p, c - x, d - x), a, b);
    }
    // second difference of G(s) = s^{1-p} / (p(p-1))
    let g = |s: T| s.powf(T::one() - p) / (p * (p - T::one()));
    g(d - a) - g(d - b) - g(c - a) + g(c - b)
}

impl<'a, T: Real> PairCtx<'a, T> {
    fn quad(&self, rel: T) -> Adaptive<'a, T> {
        let mut q = Adaptive::new(self.rule, rel, self.abs_tol, self.max_depth);
        q.max_cells = self.max_cells;
        q
    }

    /// Range of `|D|/δ` for `D` ranging over `[lo, hi]`.
    fn t_range(&self, lo: T, hi: T) -> (T, T) {
        let t_lo = if lo <= T::zero() && hi >= T::zero() { T::zero() } else { lo.abs().min(hi.abs()) };
        (t_lo / self.delta, lo.abs().max(hi.abs()) / self.delta)
    }

    /// `∫_{y_lo}^{y_hi} φ(|D(y)|/δ) (y - x)^{-(p+1)} dy` with `D(y) = d0 + slope (y - y_ref)`.
    pub(crate) fn inner(&self, x: T, d0: T, slope: T, y_ref: T, y_lo: T, y_hi: T, failed: &Cell<bool>, err: &Cell<T>) -> T {
        let p = self.phi.p();
        let p1 = p + T::one();
        if slope == T::zero() {
            let v = self.phi.eval(d0.abs() / self.delta);
            return if v == T::zero() { T::zero() } else { v * kernel_int(p, y_lo - x, y_hi - x) };
        }
        let mut pts: Vec<T> = Vec::with_capacity(2 * self.tks.len() + 3);
        pts.push(y_ref - d0 / slope);
        for &t in self.tks {
            let s = self.delta * t;
            pts.push(y_ref + (s - d0) / slope);
            pts.push(y_ref + (-s - d0) / slope);
        }
        let grid = crate::quad::breakpoints(y_lo, y_hi, &mut pts);
        let mut acc = T::zero();
        for w in grid.windows(2) {
            let (y0, y1) = (w[0], w[1]);
            let mid = (y0 + y1) * T::lit(0.5);
            let tm = (d0 + slope * (mid - y_ref)).abs() / self.delta;
            let shape = self.phi.pieces()[self.phi.piece_index(tm)].shape;
            let v = match shape {
                Shape::Zero => T::zero(),
                Shape::Const(c) => c * kernel_int(p, y0 - x, y1 - x),
                _ => {
                    let r = self.quad(self.rel_tol).integrate(
                        |y| shape.eval((d0 + slope * (y - y_ref)).abs() / self.delta) * (y - x).powf(-p1),
                        y0,
                        y1,
                    );
                    if !r.converged {
                        failed.set(true);
                    }
                    err.set(err.get() + r.error);
                    r.value
                }
            };
            acc = acc + v;
        }
        acc
    }

    /// Doubled contribution of the triangle `x < y` inside one segment.
    pub fn same(&self, s: Segment<T>) -> QuadResult<T> {
        let slope = s.slope();
        if slope == T::zero() {
            return QuadResult::zero();
        }
        let (lo, hi) = self.t_range(T::zero(), slope.abs() * s.len());
        if self.phi.vanishes_on(lo, hi) {
            return QuadResult::zero();
        }
        let mut pts: Vec<T> = self.tks.iter().map(|t| s.x1 - self.delta * *t / slope.abs()).collect();
        self.outer(s.x0, s.x1, &mut pts, |x, failed, err| self.inner(x, T::zero(), slope, x, x, s.x1, failed, err))
    }

    /// Doubled contribution of `x ∈ si`, `y ∈ sj`, `si` left of `sj`.
    pub fn cross(&self, si: Segment<T>, sj: Segment<T>) -> QuadResult<T> {
        let (a, b, c, d) = (si.x0, si.x1, sj.x0, sj.x1);
        let (li, lj) = (si.slope(), sj.slope());
        let di_lo = si.u0.min(si.u1);
        let di_hi = si.u0.max(si.u1);
        let dj_lo = sj.u0.min(sj.u1);
        let dj_hi = sj.u0.max(sj.u1);
        let (lo, hi) = self.t_range(dj_lo - di_hi, dj_hi - di_lo);
        if self.phi.vanishes_on(lo, hi) {
            return QuadResult::zero();
        }
        let two = T::lit(2.0);
        let p = self.phi.p();
        if c > b {
            if let Some(v) = self.phi.constant_on(lo, hi) {
                return QuadResult::exact(two * v * rect_int(p, a, b, c, d, self.far_rule));
            }
        }
        if li == T::zero() && lj == T::zero() {
            let v = self.phi.eval((sj.u0 - si.u0).abs() / self.delta);
            if v == T::zero() {
                return QuadResult::zero();
            }
            return QuadResult::exact(two * v * rect_int(p, a, b, c, d, self.far_rule));
        }
        // Values of u_i(x) where the inner integrand changes structure.
        let mut pts = Vec::with_capacity(4 * self.tks.len() + 8);
        if li != T::zero() {
            let mut levels = vec![sj.u0, sj.u1];
            for &t in self.tks {
                let s = self.delta * t;
                levels.extend_from_slice(&[sj.u0 + s, sj.u0 - s, sj.u1 + s, sj.u1 - s]);
            }
            pts.extend(levels.into_iter().map(|v| b - (si.u1 - v) / li));
        }
        if c == b {
            let mut w = (b - a) * T::lit(0.5);
            for _ in 0..self.band_levels {
                pts.push(b - w);
                w = w * T::lit(0.5);
            }
        }
        let jump = sj.u0 - si.u1;
        self.outer(a, b, &mut pts, |x, failed, err| {
            let d0 = jump + li * (b - x);
            self.inner(x, d0, lj, c, c, d, failed, err)
        })
    }

    fn outer<F>(&self, a: T, b: T, pts: &mut Vec<T>, g: F) -> QuadResult<T>
    where
        F: Fn(T, &Cell<bool>, &Cell<T>) -> T,
    {
        let failed = Cell::new(false);
        let inner_err = Cell::new(T::zero());
        let grid = crate::quad::breakpoints(a, b, pts);
        let q = self.quad(self.rel_tol);
        let mut r = q.integrate_split(|x| g(x, &failed, &inner_err), &grid);
        // Inner integrals are relative-accurate, so their error scales with the value.
        r.error = r.error + self.rel_tol * r.value.abs();
        r.converged = r.converged && !failed.get() && r.value.is_finite();
        r * T::lit(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_integrals() {
        assert_relative_eq!(kernel_int(1.0, 1.0, 2.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(kernel_int(2.0, 1.0, 2.0), (1.0 - 0.25) / 2.0, max_relative = 1e-15);
        assert!(kernel_int(1.0f64, 0.0, 1.0).is_infinite());
        let g = GaussLegendre::<f64>::new(8);
        assert_relative_eq!(rect_int(1.0, 0.0, 1.0, 2.0, 3.0, &g), (4.0f64 / 3.0).ln(), max_relative = 1e-14);
        // p = 2: brute force midpoint
        let n = 2000;
        let mut s = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            s += kernel_int(2.0, 1.5 - x, 2.5 - x) / n as f64;
        }
        assert_relative_eq!(rect_int(2.0, 0.0, 1.0, 1.5, 2.5, &g), s, max_relative = 1e-6);
        let far = (1.0 / 21.0 - 2.0 / 20.0 + 1.0 / 19.0) / 2.0;
        assert_relative_eq!(rect_int(2.0, 0.0, 1.0, 20.0, 21.0, &g), far, max_relative = 1e-9);
    }
}
