use serde::Serialize;

use super::{merged_grid, Interval, PiecewiseLinearFn};
use crate::error::{LabError, Result};
use crate::quad::GaussLegendre;
use crate::real::Real;

/// `u(x) = slope·x + intercept` on the interval.
pub fn make_affine<T: Real>(interval: Interval<T>, slope: T, intercept: T) -> PiecewiseLinearFn<T> {
    let (a, b) = (interval.a, interval.b);
    PiecewiseLinearFn::continuous(vec![a, b], vec![slope * a + intercept, slope * b + intercept])
        .expect("valid interval gives a valid affine function")
}

/// Unit step `H(x - c)`: 0 left of `c`, 1 from `c` on.
pub fn make_heaviside<T: Real>(interval: Interval<T>, c: T) -> Result<PiecewiseLinearFn<T>> {
    if !interval.contains(c) {
        return Err(LabError::InvalidParameter(format!(
            "jump location {c} outside ({}, {})",
            interval.a, interval.b
        )));
    }
    PiecewiseLinearFn::step(vec![interval.a, c, interval.b], &[T::zero(), T::one()])
}

/// `∫_0^h |d(s)|^p ds` for `d` affine from `d0` to `d1`.
pub(crate) fn abs_pow_linear<T: Real>(d0: T, d1: T, h: T, p: T) -> T {
    let p1 = p + T::one();
    if d0 == d1 {
        return h * d0.abs().powf(p);
    }
    let (a, b) = (d0.abs(), d1.abs());
    if d0 * d1 < T::zero() {
        // zero crossing at fraction a/(a+b)
        let r = a / (a + b);
        return h * (r * a.powf(p) + (T::one() - r) * b.powf(p)) / p1;
    }
    if (b - a).abs() > T::lit(1e-3) * a.max(b) {
        return h * (b.powf(p1) - a.powf(p1)) / (p1 * (b - a));
    }
    // Nearly constant and bounded away from zero: the integrand is smooth.
    let rule = GaussLegendre::<T>::new(8);
    rule.apply(&mut |s: T| (a + (b - a) * s).powf(p), T::zero(), T::one()) * h
}

/// `(∫_I |u - v|^p dx)^{1/p}` on the merged breakpoint grid, exact per segment.
pub fn lp_distance<T: Real>(
    u: &PiecewiseLinearFn<T>,
    v: &PiecewiseLinearFn<T>,
    p: T,
    interval: Interval<T>,
) -> T {
    let grid = merged_grid(u.breakpoints(), v.breakpoints(), interval.a, interval.b);
    let mut acc = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let d0 = u.eval(w[0]) - v.eval(w[0]);
        let d1 = u.eval_left(w[1]) - v.eval_left(w[1]);
        acc.push(abs_pow_linear(d0, d1, w[1] - w[0], p));
    }
    crate::quad::pairwise_sum(&acc).powf(p.recip())
}

fn require_domain<T: Real>(u: &PiecewiseLinearFn<T>, a: T, b: T) -> Result<()> {
    let d = u.domain();
    if d.a != a || d.b != b {
        return Err(LabError::InvalidParameter(format!(
            "expected a function on ({a}, {b}), got ({}, {})",
            d.a, d.b
        )));
    }
    Ok(())
}

/// `g(x) = (h(n x - j) + j)/n` on each cell `(j/n, (j+1)/n)`.
pub fn tile_rescale<T: Real>(h: &PiecewiseLinearFn<T>, n: usize) -> Result<PiecewiseLinearFn<T>> {
    if n == 0 {
        return Err(LabError::InvalidParameter("tile count must be positive".into()));
    }
    require_domain(h, T::zero(), T::one())?;
    let nf = T::of_usize(n);
    let (hx, hl, hr) = (h.breakpoints(), h.left_values(), h.right_values());
    let last = hx.len() - 1;
    let cap = n * last + 1;
    let (mut xs, mut left, mut right) =
        (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    for j in 0..n {
        let jf = T::of_usize(j);
        for i in 0..last {
            xs.push((hx[i] + jf) / nf);
            let l = if i == 0 && j > 0 { (hl[last] + jf - T::one()) / nf } else { (hl[i] + jf) / nf };
            left.push(l);
            right.push((hr[i] + jf) / nf);
        }
    }
    xs.push(T::one());
    let end = (hr[last] + nf - T::one()) / nf;
    left.push(end);
    right.push(end);
    PiecewiseLinearFn::new(xs, left, right)
}

/// `g(x) = u(n x)/n` on `(0, 1)` for `u` on `(0, n)`.
pub fn spatial_block_rescale<T: Real>(u: &PiecewiseLinearFn<T>, n: usize) -> Result<PiecewiseLinearFn<T>> {
    if n == 0 {
        return Err(LabError::InvalidParameter("block count must be positive".into()));
    }
    let nf = T::of_usize(n);
    require_domain(u, T::zero(), nf)?;
    let xs = u.breakpoints().iter().map(|x| *x / nf).collect();
    let l = u.left_values().iter().map(|v| *v / nf).collect();
    let r = u.right_values().iter().map(|v| *v / nf).collect();
    PiecewiseLinearFn::new(xs, l, r)
}

/// Concatenates functions on consecutive intervals; mismatched end values become jumps.
pub fn glue<T: Real>(pieces: &[(Interval<T>, PiecewiseLinearFn<T>)]) -> Result<PiecewiseLinearFn<T>> {
    if pieces.is_empty() {
        return Err(LabError::InvalidPartition("no pieces to glue".into()));
    }
    for w in pieces.windows(2) {
        let (b, a) = (w[0].0.b, w[1].0.a);
        if b > a {
            return Err(LabError::InvalidPartition(format!("intervals overlap at {a}..{b}")));
        }
        if b < a {
            return Err(LabError::InvalidPartition(format!("gap between {b} and {a}")));
        }
    }
    let (mut xs, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
    for (k, (iv, f)) in pieces.iter().enumerate() {
        let r = f.restrict(iv.a, iv.b)?;
        let m = r.breakpoints().len();
        let start = if k == 0 { 0 } else { 1 };
        if k > 0 {
            // junction: previous piece supplied the left value
            *right.last_mut().unwrap() = r.right_values()[0];
        }
        xs.extend_from_slice(&r.breakpoints()[start..]);
        left.extend_from_slice(&r.left_values()[start..]);
        right.extend_from_slice(&r.right_values()[start..m]);
    }
    PiecewiseLinearFn::new(xs, left, right)
}

/// Flattening around two anchors: keep `u` on `[x1, x2]`, put constant plateaus
/// next to the anchors, affine bridges outside them, and the boundary function beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct FlattenSpec<T> {
    pub x1: T,
    pub x2: T,
    pub plateau_left: T,
    pub bridge_left: T,
    pub plateau_right: T,
    pub bridge_right: T,
    pub boundary: PiecewiseLinearFn<T>,
}

impl<T: Real> FlattenSpec<T> {
    /// Splits `(a, x1)` and `(x2, b)` into thirds: boundary, bridge, plateau.
    pub fn thirds(domain: Interval<T>, x1: T, x2: T, boundary: PiecewiseLinearFn<T>) -> Self {
        let three = T::lit(3.0);
        let l = (x1 - domain.a) / three;
        let r = (domain.b - x2) / three;
        Self { x1, x2, plateau_left: l, bridge_left: l, plateau_right: r, bridge_right: r, boundary }
    }

    pub fn apply(&self, u: &PiecewiseLinearFn<T>) -> Result<PiecewiseLinearFn<T>> {
        let d = u.domain();
        let (a, b, x1, x2) = (d.a, d.b, self.x1, self.x2);
        let widths = [self.plateau_left, self.bridge_left, self.plateau_right, self.bridge_right];
        if widths.iter().any(|w| !(*w >= T::zero())) {
            return Err(LabError::InvalidSpec("negative plateau or bridge width".into()));
        }
        if !(a < x1 && x1 < x2 && x2 < b) {
            return Err(LabError::InvalidSpec(format!("anchors {x1}, {x2} not ordered inside ({a}, {b})")));
        }
        let l_end = x1 - self.plateau_left - self.bridge_left;
        let r_start = x2 + self.plateau_right + self.bridge_right;
        let slack = T::lit(1e-12) * (b - a);
        if l_end < a - slack || r_start > b + slack {
            return Err(LabError::InvalidSpec("plateau and bridge regions overlap the boundary".into()));
        }
        let l_end = l_end.max(a);
        let r_start = r_start.min(b);
        let l_br = x1 - self.plateau_left;
        let r_br = x2 + self.plateau_right;
        let (v1, v2) = (u.eval(x1), u.eval_left(x2));
        let mut parts: Vec<(Interval<T>, PiecewiseLinearFn<T>)> = Vec::new();
        let mut push = |lo: T, hi: T, f: PiecewiseLinearFn<T>| -> Result<()> {
            if hi > lo {
                parts.push((Interval::new(lo, hi)?, f));
            }
            Ok(())
        };
        let line = |x0: T, y0: T, x1: T, y1: T| PiecewiseLinearFn::continuous(vec![x0, x1], vec![y0, y1]);
        if l_end > a {
            push(a, l_end, self.boundary.clone())?;
        }
        if l_br > l_end {
            push(l_end, l_br, line(l_end, self.boundary.eval_left(l_end), l_br, v1)?)?;
        }
        if x1 > l_br {
            push(l_br, x1, line(l_br, v1, x1, v1)?)?;
        }
        push(x1, x2, u.clone())?;
        if r_br > x2 {
            push(x2, r_br, line(x2, v2, r_br, v2)?)?;
        }
        if r_start > r_br {
            push(r_br, r_start, line(r_br, v2, r_start, self.boundary.eval(r_start))?)?;
        }
        if b > r_start {
            push(r_start, b, self.boundary.clone())?;
        }
        glue(&parts)
    }
}

/// See [`FlattenSpec::apply`].
pub fn flatten_near_points<T: Real>(u: &PiecewiseLinearFn<T>, spec: &FlattenSpec<T>) -> Result<PiecewiseLinearFn<T>> {
    spec.apply(u)
}

/// `∫ |(u(x+h) - u(x))/h|^p dx` over the part of the window where `x + h` stays inside.
pub fn difference_quotient_norm<T: Real>(u: &PiecewiseLinearFn<T>, h: T, p: T, window: Interval<T>) -> Result<T> {
    if !(h > T::zero() && h < window.len()) {
        return Err(LabError::InvalidParameter(format!("shift {h} outside (0, {})", window.len())));
    }
    let (a, b) = (window.a, window.b - h);
    let shifted: Vec<T> = u.breakpoints().iter().map(|x| *x - h).collect();
    let grid = merged_grid(u.breakpoints(), &shifted, a, b);
    let mut acc = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let d0 = (u.eval(w[0] + h) - u.eval(w[0])) / h;
        let d1 = (u.eval_left(w[1] + h) - u.eval_left(w[1])) / h;
        acc.push(abs_pow_linear(d0, d1, w[1] - w[0], p));
    }
    Ok(crate::quad::pairwise_sum(&acc))
}

/// `Σ|u_{i+1} - u_i| + Σ|jumps|`.
pub fn total_variation<T: Real>(u: &PiecewiseLinearFn<T>) -> T {
    let n = u.breakpoints().len();
    let mut acc: Vec<T> = u.segments().map(|s| (s.u1 - s.u0).abs()).collect();
    acc.extend((1..n - 1).map(|i| u.jump(i).abs()));
    crate::quad::pairwise_sum(&acc)
}

/// Limiting-energy seminorm: total variation for `p = 1`, `∫|u'|^p` for `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Seminorm<T> {
    Finite(T),
    /// A jump is present and `p > 1`.
    Infinite,
}

impl<T: Real> Seminorm<T> {
    pub fn value(&self) -> T {
        match self {
            Seminorm::Finite(v) => *v,
            Seminorm::Infinite => T::infinity(),
        }
    }
}

pub fn seminorm<T: Real>(u: &PiecewiseLinearFn<T>, p: T) -> Seminorm<T> {
    if p == T::one() {
        return Seminorm::Finite(total_variation(u));
    }
    if !u.is_continuous() {
        return Seminorm::Infinite;
    }
    let acc: Vec<T> = u.segments().map(|s| s.slope().abs().powf(p) * s.len()).collect();
    Seminorm::Finite(crate::quad::pairwise_sum(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Interval<f64> {
        Interval::unit()
    }
    fn big_u() -> PiecewiseLinearFn<f64> {
        make_affine(unit(), 1.0, 0.0)
    }
    fn h_half() -> PiecewiseLinearFn<f64> {
        make_heaviside(unit(), 0.5).unwrap()
    }

    #[test]
    fn affine_examples() {
        let u = make_affine(Interval::new(-2.0, 5.0).unwrap(), -1.0, 1.0);
        assert_eq!(u.eval(-2.0), 3.0);
        assert_eq!(u.end_value(), -4.0);
        let c = make_affine(unit(), 0.0, 3.0);
        assert_eq!(c.eval(0.3), 3.0);
    }

    #[test]
    fn heaviside_examples() {
        let h = h_half();
        assert_eq!(h.eval(0.25), 0.0);
        assert_eq!(h.eval(0.75), 1.0);
        assert_eq!(h.jump(1), 1.0);
        assert!(make_heaviside(unit(), 1.0).is_err());
    }

    #[test]
    fn lp_distance_examples() {
        let zero = make_affine(unit(), 0.0, 0.0);
        assert_eq!(lp_distance(&big_u(), &big_u(), 1.0, unit()), 0.0);
        assert_relative_eq!(lp_distance(&big_u(), &zero, 1.0, unit()), 0.5, max_relative = 1e-15);
        assert_relative_eq!(lp_distance(&big_u(), &h_half(), 1.0, unit()), 0.25, max_relative = 1e-15);
        // (∫ x^2)^{1/2}
        assert_relative_eq!(lp_distance(&big_u(), &zero, 2.0, unit()), (1.0f64 / 3.0).sqrt(), max_relative = 1e-14);
        // non-integer p, zero crossing: ∫_0^1 |x - 1/2|^{1.5} = 2·(1/2)^{2.5}/2.5
        let half = make_affine(unit(), 0.0, 0.5);
        let want = (2.0 * 0.5f64.powf(2.5) / 2.5).powf(1.0 / 1.5);
        assert_relative_eq!(lp_distance(&big_u(), &half, 1.5, unit()), want, max_relative = 1e-13);
    }

    #[test]
    fn tile_examples() {
        for n in [1, 2, 5] {
            let t = tile_rescale(&big_u(), n).unwrap();
            assert!(t.is_continuous());
            assert!(lp_distance(&t, &big_u(), 1.0, unit()) < 1e-15);
        }
        let t = tile_rescale(&h_half(), 2).unwrap();
        assert_eq!(t.eval(0.1), 0.0);
        assert_eq!(t.eval(0.3), 0.5);
        assert_eq!(t.eval(0.6), 0.5);
        assert_eq!(t.eval(0.8), 1.0);
        assert_eq!(t.jump(1), 0.5);
        assert_eq!(t.breakpoints(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(t.simplified().breakpoints().len() == 4);
        assert_eq!(tile_rescale(&h_half(), 1).unwrap(), h_half());
        assert!(tile_rescale(&h_half(), 0).is_err());
    }

    #[test]
    fn block_rescale_examples() {
        let u = make_affine(Interval::new(0.0, 3.0).unwrap(), 1.0, 0.0);
        let g = spatial_block_rescale(&u, 3).unwrap();
        assert!(lp_distance(&g, &big_u(), 1.0, unit()) < 1e-15);
        let s = PiecewiseLinearFn::step(vec![0.0, 0.5, 1.5, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        let g = spatial_block_rescale(&s, 2).unwrap();
        assert_eq!(g.breakpoints(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(g.jump(1), 0.5);
        assert_eq!(g.jump(2), 0.5);
        assert_eq!(spatial_block_rescale(&big_u(), 1).unwrap(), big_u());
    }

    #[test]
    fn glue_examples() {
        let i1 = Interval::new(1.0, 2.0).unwrap();
        let u2 = make_affine(i1, 1.0, 0.0);
        let u2b = u2.clone();
        let g = glue(&[(unit(), big_u()), (i1, u2b)]).unwrap();
        assert!(g.is_continuous());
        assert_eq!(g.simplified().breakpoints(), &[0.0, 2.0]);
        let g = glue(&[(unit(), make_affine(unit(), 0.0, 0.0)), (i1, make_affine(i1, 0.0, 1.0))]).unwrap();
        assert_eq!(g.jump(1), 1.0);
        assert_eq!(glue(&[(unit(), big_u())]).unwrap(), big_u());
        let gap = Interval::new(1.5, 2.0).unwrap();
        assert!(matches!(glue(&[(unit(), big_u()), (gap, u2.clone())]), Err(LabError::InvalidPartition(_))));
        let over = Interval::new(0.5, 2.0).unwrap();
        assert!(glue(&[(unit(), big_u()), (over, u2)]).is_err());
    }

    #[test]
    fn flatten_examples() {
        // zero plateau with full-width bridges is a fixed point for U
        let spec = FlattenSpec {
            x1: 0.25,
            x2: 0.75,
            plateau_left: 0.0,
            bridge_left: 0.25,
            plateau_right: 0.0,
            bridge_right: 0.25,
            boundary: big_u(),
        };
        let f = spec.apply(&big_u()).unwrap();
        assert!(lp_distance(&f, &big_u(), 1.0, unit()) < 1e-15);

        // thirds: boundary on (0, x1/3), plateau u(x1) on (2x1/3, x1)
        let u = make_affine(unit(), 0.0, 0.3);
        let spec = FlattenSpec::thirds(unit(), 0.3, 0.6, big_u());
        let f = spec.apply(&u).unwrap();
        assert!(f.is_continuous());
        assert_eq!(f.eval(0.05), 0.05);
        assert_relative_eq!(f.eval(0.25), 0.3, max_relative = 1e-15);
        assert_eq!(f.eval(0.45), 0.3);
        assert_relative_eq!(f.eval(0.95), 0.95, max_relative = 1e-15);

        let bad = FlattenSpec { plateau_left: 0.2, bridge_left: 0.2, ..spec.clone() };
        assert!(matches!(bad.apply(&u), Err(LabError::InvalidSpec(_))));
        let swapped = FlattenSpec { x1: 0.6, x2: 0.3, ..spec };
        assert!(swapped.apply(&u).is_err());
    }

    #[test]
    fn difference_quotient_examples() {
        for h in [0.1, 0.37, 0.9] {
            let v = difference_quotient_norm(&big_u(), h, 2.0, unit()).unwrap();
            assert_relative_eq!(v, 1.0 - h, max_relative = 1e-14);
        }
        let c = make_affine(unit(), 0.0, 2.0);
        assert_eq!(difference_quotient_norm(&c, 0.2, 1.0, unit()).unwrap(), 0.0);
        let v = difference_quotient_norm(&h_half(), 0.1, 1.0, unit()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-13);
        assert!(difference_quotient_norm(&big_u(), 1.0, 1.0, unit()).is_err());
    }

    #[test]
    fn seminorm_examples() {
        assert_eq!(total_variation(&big_u()), 1.0);
        assert_eq!(seminorm(&big_u(), 3.0), Seminorm::Finite(1.0));
        assert_eq!(seminorm(&h_half(), 1.0), Seminorm::Finite(1.0));
        assert_eq!(seminorm(&h_half(), 2.0), Seminorm::Infinite);
        let n = 7;
        let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let lv: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let s = PiecewiseLinearFn::step(xs, &lv).unwrap();
        assert_relative_eq!(total_variation(&s), (n - 1) as f64 / n as f64, max_relative = 1e-14);
    }
}
