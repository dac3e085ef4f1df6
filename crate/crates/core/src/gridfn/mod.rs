//! Piecewise-linear functions with optional jumps, the universal function
//! representation of the crate, plus the constructive transformations applied
//! to them (tiling, flattening, gluing, rescaling).

mod io;
mod ops;

pub use io::{parse_text, to_csv, to_text};
pub use ops::{
    difference_quotient_norm, glue, lp_distance, make_affine, make_heaviside, seminorm,
    spatial_block_rescale, tile_rescale, total_variation, flatten_near_points, FlattenSpec, Seminorm,
};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::real::Real;

/// Jumps smaller than this are treated as continuity.
pub const JUMP_SNAP: f64 = 1e-12;

/// Open interval `(a, b)`. `truncation_of_line` marks a finite window standing in for ℝ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval<T> {
    pub a: T,
    pub b: T,
    pub truncation_of_line: bool,
}

impl<T: Real> Interval<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(LabError::InvalidInterval { a: a.f64(), b: b.f64() });
        }
        Ok(Self { a, b, truncation_of_line: false })
    }

    /// Window used in place of the whole line.
    pub fn line_window(a: T, b: T) -> Result<Self> {
        Ok(Self { truncation_of_line: true, ..Self::new(a, b)? })
    }

    pub fn unit() -> Self {
        Self { a: T::zero(), b: T::one(), truncation_of_line: false }
    }

    pub fn len(&self) -> T {
        self.b - self.a
    }

    pub fn contains(&self, x: T) -> bool {
        x > self.a && x < self.b
    }
}

/// One affine piece `u(x) = u0 + (u1 - u0)(x - x0)/(x1 - x0)` on `(x0, x1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub x0: T,
    pub x1: T,
    pub u0: T,
    pub u1: T,
}

impl<T: Real> Segment<T> {
    #[inline]
    pub fn len(&self) -> T {
        self.x1 - self.x0
    }
    #[inline]
    pub fn slope(&self) -> T {
        (self.u1 - self.u0) / (self.x1 - self.x0)
    }
    #[inline]
    pub fn at(&self, x: T) -> T {
        self.u0 + self.slope() * (x - self.x0)
    }
    #[inline]
    pub fn is_constant(&self) -> bool {
        self.u0 == self.u1
    }
}

/// Piecewise-affine function on `[x_0, x_N]` with one-sided values at every breakpoint.
///
/// Segment `i` runs from `right[i]` at `x_i` to `left[i+1]` at `x_{i+1}`. At the
/// endpoints `left` and `right` coincide. Outside `[x_0, x_N]` the function is
/// extended by its end values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearFn<T> {
    xs: Vec<T>,
    left: Vec<T>,
    right: Vec<T>,
}

impl<T: Real> PiecewiseLinearFn<T> {
    pub fn new(xs: Vec<T>, mut left: Vec<T>, mut right: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(LabError::InvalidParameter("need at least two breakpoints".into()));
        }
        if left.len() != n || right.len() != n {
            return Err(LabError::InvalidParameter("value arrays must match breakpoints".into()));
        }
        if xs.iter().chain(&left).chain(&right).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter("non-finite breakpoint data".into()));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(LabError::InvalidParameter(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        left[0] = right[0];
        right[n - 1] = left[n - 1];
        let snap = T::lit(JUMP_SNAP);
        for i in 1..n - 1 {
            if (right[i] - left[i]).abs() < snap {
                right[i] = left[i];
            }
        }
        Ok(Self { xs, left, right })
    }

    /// Continuous function through `(xs[i], vals[i])`.
    pub fn continuous(xs: Vec<T>, vals: Vec<T>) -> Result<Self> {
        Self::new(xs, vals.clone(), vals)
    }

    /// From per-segment end values: segment `i` goes from `segs[i].0` to `segs[i].1`.
    pub fn from_segments(xs: Vec<T>, segs: &[(T, T)]) -> Result<Self> {
        let n = xs.len();
        if segs.len() + 1 != n {
            return Err(LabError::InvalidParameter("need one value pair per segment".into()));
        }
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        left.push(segs[0].0);
        for i in 0..n - 1 {
            right.push(segs[i].0);
            left.push(segs[i].1);
        }
        right.push(segs[n - 2].1);
        Self::new(xs, left, right)
    }

    /// Piecewise-constant function: `levels[i]` on `(xs[i], xs[i+1])`.
    pub fn step(xs: Vec<T>, levels: &[T]) -> Result<Self> {
        let segs: Vec<(T, T)> = levels.iter().map(|&c| (c, c)).collect();
        Self::from_segments(xs, &segs)
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.xs
    }
    pub fn left_values(&self) -> &[T] {
        &self.left
    }
    pub fn right_values(&self) -> &[T] {
        &self.right
    }

    pub fn num_segments(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn domain(&self) -> Interval<T> {
        Interval { a: self.xs[0], b: *self.xs.last().unwrap(), truncation_of_line: false }
    }

    #[inline]
    pub fn segment(&self, i: usize) -> Segment<T> {
        Segment { x0: self.xs[i], x1: self.xs[i + 1], u0: self.right[i], u1: self.left[i + 1] }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        (0..self.num_segments()).map(|i| self.segment(i))
    }

    /// Signed jump `u(x_i+) - u(x_i-)`; zero at the endpoints.
    pub fn jump(&self, i: usize) -> T {
        self.right[i] - self.left[i]
    }

    pub fn is_continuous(&self) -> bool {
        (0..self.xs.len()).all(|i| self.jump(i) == T::zero())
    }

    pub fn max_abs_jump(&self) -> T {
        (0..self.xs.len()).map(|i| self.jump(i).abs()).fold(T::zero(), T::max)
    }

    pub fn start_value(&self) -> T {
        self.left[0]
    }

    pub fn end_value(&self) -> T {
        *self.right.last().unwrap()
    }

    /// Index of the segment containing `x` (clamped to the valid range).
    pub fn segment_index(&self, x: T) -> usize {
        let i = self.xs.partition_point(|t| *t <= x);
        i.saturating_sub(1).min(self.num_segments() - 1)
    }

    /// Value at `x`; right-continuous at interior breakpoints, constant outside the domain.
    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.left[0];
        }
        if x >= self.xs[n - 1] {
            return self.right[n - 1];
        }
        self.segment(self.segment_index(x)).at(x)
    }

    /// Left limit at `x`.
    pub fn eval_left(&self, x: T) -> T {
        let i = self.xs.partition_point(|t| *t < x);
        if i < self.xs.len() && self.xs[i] == x {
            return self.left[i];
        }
        self.eval(x)
    }

    fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            xs: self.xs.clone(),
            left: self.left.iter().map(|v| f(*v)).collect(),
            right: self.right.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `k · u`.
    pub fn scaled(&self, k: T) -> Self {
        let out = self.map_values(|v| v * k);
        Self::new(out.xs, out.left, out.right).expect("scaling preserves validity")
    }

    /// `u + c`.
    pub fn shifted(&self, c: T) -> Self {
        self.map_values(|v| v + c)
    }

    /// `x ↦ u(a + b - x)` on the same domain.
    pub fn reflected(&self) -> Self {
        let (a, b) = (self.xs[0], *self.xs.last().unwrap());
        let xs = self.xs.iter().rev().map(|x| a + b - *x).collect();
        // Left and right swap under reflection.
        let left = self.right.iter().rev().copied().collect();
        let right = self.left.iter().rev().copied().collect();
        Self { xs, left, right }
    }

    /// `x ↦ u((x - shift)/stretch)`, i.e. the graph moved to `stretch·domain + shift`.
    pub fn remap_domain(&self, stretch: T, shift: T) -> Result<Self> {
        if !(stretch > T::zero()) {
            return Err(LabError::InvalidParameter("stretch must be positive".into()));
        }
        let xs = self.xs.iter().map(|x| *x * stretch + shift).collect();
        Self::new(xs, self.left.clone(), self.right.clone())
    }

    /// Restriction to `[a, b]` (extending by end values when `[a, b]` exceeds the domain).
    pub fn restrict(&self, a: T, b: T) -> Result<Self> {
        if !(a < b) {
            return Err(LabError::InvalidInterval { a: a.f64(), b: b.f64() });
        }
        let mut xs = vec![a];
        let mut left = vec![self.eval(a)];
        let mut right = vec![self.eval(a)];
        for (i, &x) in self.xs.iter().enumerate() {
            if x > a && x < b {
                xs.push(x);
                left.push(self.left[i]);
                right.push(self.right[i]);
            }
        }
        let vb = self.eval_left(b);
        xs.push(b);
        left.push(vb);
        right.push(vb);
        Self::new(xs, left, right)
    }

    /// Same function with extra breakpoints inserted (no-op at existing ones).
    pub fn refined(&self, extra: &[T]) -> Self {
        let mut pts: Vec<T> = extra
            .iter()
            .copied()
            .filter(|x| *x > self.xs[0] && *x < *self.xs.last().unwrap())
            .collect();
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        let mut xs = Vec::with_capacity(self.xs.len() + pts.len());
        let mut left = Vec::with_capacity(xs.capacity());
        let mut right = Vec::with_capacity(xs.capacity());
        let mut k = 0;
        for (i, &x) in self.xs.iter().enumerate() {
            while k < pts.len() && pts[k] < x {
                let v = self.eval(pts[k]);
                xs.push(pts[k]);
                left.push(v);
                right.push(v);
                k += 1;
            }
            if k < pts.len() && pts[k] == x {
                k += 1;
            }
            xs.push(x);
            left.push(self.left[i]);
            right.push(self.right[i]);
        }
        Self { xs, left, right }
    }

    /// Removes breakpoints where the function is continuous and has no kink.
    pub fn simplified(&self) -> Self {
        let n = self.xs.len();
        let mut keep = vec![true; n];
        for i in 1..n - 1 {
            if self.jump(i) != T::zero() {
                continue;
            }
            let s0 = self.segment(i - 1).slope();
            let s1 = self.segment(i).slope();
            let tol = T::lit(1e-14) * (T::one() + s0.abs().max(s1.abs()));
            if (s0 - s1).abs() <= tol && self.segment(i - 1).is_constant() == self.segment(i).is_constant() {
                keep[i] = false;
            }
        }
        let pick = |v: &Vec<T>| v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect();
        Self { xs: pick(&self.xs), left: pick(&self.left), right: pick(&self.right) }
    }

    /// Sup norm of the values (endpoints and one-sided values).
    pub fn sup_abs(&self) -> T {
        self.left.iter().chain(&self.right).fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Union of two sorted breakpoint lists restricted to `[a, b]`, endpoints included.
pub(crate) fn merged_grid<T: Real>(u: &[T], v: &[T], a: T, b: T) -> Vec<T> {
    let mut pts: Vec<T> = u.iter().chain(v).copied().filter(|x| *x > a && *x < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.push(a);
    out.extend(pts);
    out.push(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stair() -> PiecewiseLinearFn<f64> {
        PiecewiseLinearFn::step(vec![0.0, 0.5, 1.0], &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn eval_is_right_continuous() {
        let h = stair();
        assert_eq!(h.eval(0.5), 1.0);
        assert_eq!(h.eval_left(0.5), 0.0);
        assert_eq!(h.eval(-3.0), 0.0);
        assert_eq!(h.eval(7.0), 1.0);
        assert_eq!(h.jump(1), 1.0);
        assert!(!h.is_continuous());
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewiseLinearFn::continuous(vec![0.0], vec![1.0]).is_err());
        assert!(PiecewiseLinearFn::continuous(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseLinearFn::continuous(vec![0.0, f64::NAN], vec![1.0, 1.0]).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn tiny_jumps_snap() {
        let u = PiecewiseLinearFn::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0], vec![0.0, 1.0 + 1e-13, 1.0])
            .unwrap();
        assert!(u.is_continuous());
    }

    #[test]
    fn reflection_swaps_sides() {
        let h = stair().reflected();
        assert_eq!(h.eval(0.25), 1.0);
        assert_eq!(h.eval(0.75), 0.0);
        assert_eq!(h.jump(1), -1.0);
        assert_eq!(h.reflected(), stair());
    }

    #[test]
    fn restrict_and_refine() {
        let u = PiecewiseLinearFn::continuous(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let r = u.restrict(0.25, 0.5).unwrap();
        assert_eq!(r.breakpoints(), &[0.25, 0.5]);
        assert_eq!(r.eval(0.25), 0.5);
        let f = u.refined(&[0.5, 0.25, 0.5, 3.0]);
        assert_eq!(f.breakpoints(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(f.simplified(), u);
        let wide = stair().restrict(-1.0, 2.0).unwrap();
        assert_eq!(wide.eval(-0.5), 0.0);
        assert_eq!(wide.eval(1.5), 1.0);
    }

    #[test]
    fn from_segments_layout() {
        let u = PiecewiseLinearFn::from_segments(vec![0.0, 1.0, 2.0], &[(0.0, 1.0), (3.0, 2.0)]).unwrap();
        assert_eq!(u.eval(0.5), 0.5);
        assert_eq!(u.eval(1.0), 3.0);
        assert_eq!(u.eval_left(1.0), 1.0);
        assert_eq!(u.end_value(), 2.0);
        assert_eq!(u.segment(1).slope(), -1.0);
    }
}
