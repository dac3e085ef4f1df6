//! One-dimensional quadrature building blocks: Gauss–Legendre rules, a globally
//! adaptive bisection integrator, and order-fixed summation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::real::Real;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Builds the `n`-point rule. Nodes are found by Newton iteration on `P_n` in `f64`
    /// and then converted, so `f32` rules are correctly rounded as well.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Applies the rule on `[a, b]`.
    #[inline]
    pub fn apply<F: FnMut(T) -> T>(&self, f: &mut F, a: T, b: T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s = s + *w * f(mid + half * *x);
        }
        s * half
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

impl<T: Real> QuadResult<T> {
    pub fn exact(value: T) -> Self {
        Self { value, error: T::zero(), converged: true }
    }

    pub fn zero() -> Self {
        Self::exact(T::zero())
    }
}

impl<T: Real> std::ops::Add for QuadResult<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            error: self.error + o.error,
            converged: self.converged && o.converged,
        }
    }
}

impl<T: Real> std::ops::Mul<T> for QuadResult<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self { value: self.value * k, error: self.error * k.abs(), converged: self.converged }
    }
}

#[derive(Clone, Copy)]
struct Cell<T> {
    a: T,
    b: T,
    left: T,
    right: T,
    err: T,
    depth: u32,
}

struct HeapKey<T> {
    err: T,
    idx: usize,
}

impl<T: Real> PartialEq for HeapKey<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for HeapKey<T> {}
impl<T: Real> PartialOrd for HeapKey<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for HeapKey<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        // NaN errors sort first so broken cells get split
        let e = match self.err.partial_cmp(&o.err) {
            Some(ord) => ord,
            None => self.err.is_nan().cmp(&o.err.is_nan()),
        };
        e.then_with(|| o.idx.cmp(&self.idx))
    }
}

/// Globally adaptive bisection integrator: the cell with the largest error
/// estimate is split until the total estimate meets `max(abs_tol, rel_tol·|I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive<'a, T> {
    pub rule: &'a GaussLegendre<T>,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: u32,
    pub max_cells: usize,
}

impl<'a, T: Real> Adaptive<'a, T> {
    pub fn new(rule: &'a GaussLegendre<T>, rel_tol: T, abs_tol: T, max_depth: u32) -> Self {
        Self { rule, rel_tol, abs_tol, max_depth, max_cells: 4096 }
    }

    fn cell<F: FnMut(T) -> T>(&self, f: &mut F, a: T, b: T, whole: T, depth: u32) -> Cell<T> {
        let m = (a + b) * T::lit(0.5);
        let left = self.rule.apply(f, a, m);
        let right = self.rule.apply(f, m, b);
        Cell { a, b, left, right, err: (left + right - whole).abs(), depth }
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> QuadResult<T> {
        if !(b > a) {
            return QuadResult::zero();
        }
        let whole = self.rule.apply(&mut f, a, b);
        let mut cells = vec![self.cell(&mut f, a, b, whole, 0)];
        // Max-heap on the error; ties go to the lowest index so the order is deterministic.
        let mut heap = BinaryHeap::new();
        heap.push(HeapKey { err: cells[0].err, idx: 0 });
        let mut value = cells[0].left + cells[0].right;
        let mut error = cells[0].err;
        loop {
            let tol = self.abs_tol.max(self.rel_tol * value.abs());
            if error <= tol {
                break;
            }
            if !value.is_finite() || cells.len() >= self.max_cells {
                return self.finish(&cells, false);
            }
            let Some(HeapKey { idx: w, .. }) = heap.pop() else {
                return self.finish(&cells, false);
            };
            let c = cells[w];
            let m = (c.a + c.b) * T::lit(0.5);
            let l = self.cell(&mut f, c.a, m, c.left, c.depth + 1);
            let r = self.cell(&mut f, m, c.b, c.right, c.depth + 1);
            value = value - (c.left + c.right) + (l.left + l.right) + (r.left + r.right);
            error = error - c.err + l.err + r.err;
            cells[w] = l;
            cells.push(r);
            for (i, cell) in [(w, l), (cells.len() - 1, r)] {
                if cell.depth < self.max_depth {
                    heap.push(HeapKey { err: cell.err, idx: i });
                }
            }
        }
        self.finish(&cells, true)
    }

    fn finish(&self, cells: &[Cell<T>], converged: bool) -> QuadResult<T> {
        let vals: Vec<T> = cells.iter().map(|c| c.left + c.right).collect();
        let errs: Vec<T> = cells.iter().map(|c| c.err).collect();
        let value = pairwise_sum(&vals);
        let error = pairwise_sum(&errs);
        let tol = self.abs_tol.max(self.rel_tol * value.abs());
        QuadResult { value, error, converged: converged || error <= tol }
    }

    /// Integrates over consecutive sub-intervals given by sorted `points`.
    pub fn integrate_split<F: FnMut(T) -> T>(&self, mut f: F, points: &[T]) -> QuadResult<T> {
        let mut acc = QuadResult::zero();
        for w in points.windows(2) {
            if w[1] > w[0] {
                acc = acc + self.integrate(&mut f, w[0], w[1]);
            }
        }
        acc
    }
}

/// Pairwise (tree) summation in slice order. The result depends only on the
/// order of `xs`, never on how the values were produced.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= SUM_BLOCK {
        let mut s = T::zero();
        for &x in xs {
            s = s + x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

const SUM_BLOCK: usize = 32;

/// [`pairwise_sum`] kept up to date under point updates. The total is always
/// bit-identical to `pairwise_sum` of the current values.
#[derive(Debug, Clone)]
pub struct SumTree<T> {
    values: Vec<T>,
    // (lo, hi, sum, left child, right child); leaves have no children
    nodes: Vec<(usize, usize, T, usize, usize)>,
}

impl<T: Real> SumTree<T> {
    pub fn new(values: Vec<T>) -> Self {
        let mut t = Self { values, nodes: Vec::new() };
        let n = t.values.len();
        t.build(0, n);
        t
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push((lo, hi, T::zero(), usize::MAX, usize::MAX));
        if hi - lo <= SUM_BLOCK {
            self.nodes[id].2 = self.values[lo..hi].iter().fold(T::zero(), |s, &x| s + x);
        } else {
            let mid = lo + (hi - lo) / 2;
            let l = self.build(lo, mid);
            let r = self.build(mid, hi);
            self.nodes[id] = (lo, hi, self.nodes[l].2 + self.nodes[r].2, l, r);
        }
        id
    }

    pub fn total(&self) -> T {
        self.nodes[0].2
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Total after replacing the listed entries, which must be sorted by index.
    pub fn total_with(&self, updates: &[(usize, T)]) -> T {
        self.eval(0, updates)
    }

    fn eval(&self, id: usize, ups: &[(usize, T)]) -> T {
        let (lo, hi, sum, l, r) = self.nodes[id];
        if ups.is_empty() {
            return sum;
        }
        if l == usize::MAX {
            let mut s = T::zero();
            let mut k = 0;
            for i in lo..hi {
                let mut v = self.values[i];
                while k < ups.len() && ups[k].0 == i {
                    v = ups[k].1;
                    k += 1;
                }
                s = s + v;
            }
            return s;
        }
        let mid = self.nodes[l].1;
        let split = ups.partition_point(|u| u.0 < mid);
        self.eval(l, &ups[..split]) + self.eval(r, &ups[split..])
    }

    /// Applies sorted updates.
    pub fn update(&mut self, updates: &[(usize, T)]) {
        for &(i, v) in updates {
            self.values[i] = v;
        }
        self.refresh(0, updates);
    }

    fn refresh(&mut self, id: usize, ups: &[(usize, T)]) {
        if ups.is_empty() {
            return;
        }
        let (lo, hi, _, l, r) = self.nodes[id];
        if l == usize::MAX {
            self.nodes[id].2 = self.values[lo..hi].iter().fold(T::zero(), |s, &x| s + x);
            return;
        }
        let mid = self.nodes[l].1;
        let split = ups.partition_point(|u| u.0 < mid);
        self.refresh(l, &ups[..split]);
        self.refresh(r, &ups[split..]);
        self.nodes[id].2 = self.nodes[l].2 + self.nodes[r].2;
    }
}

/// Sorts, removes near-duplicates and clips `pts` to `[a, b]`, always keeping both endpoints.
pub fn breakpoints<T: Real>(a: T, b: T, pts: &mut Vec<T>) -> Vec<T> {
    let tiny = (b - a) * T::lit(1e-14);
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.push(a);
    pts.retain(|t| t.is_finite() && *t > a + tiny && *t < b - tiny);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for &t in pts.iter() {
        if t - *out.last().unwrap() > tiny {
            out.push(t);
        }
    }
    out.push(b);
    out
}
