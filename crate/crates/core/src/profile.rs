//! Kernel profiles `φ`, their admissibility bounds and the normalization
//! `∫_0^∞ φ(t) t^{-(p+1)} dt = 1/2`.
//!
//! Every profile is stored as a finite list of [`Piece`]s on `[0, ∞)`; the last
//! piece is unbounded and constant. Evaluation at a breakpoint returns the value
//! of the piece starting there, i.e. the right limit.

use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::quad::{Adaptive, GaussLegendre};
use crate::real::Real;

/// Tolerance on `|I(φ) - 1/2|` under which a profile counts as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Shape of `φ` on one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T> {
    Zero,
    Const(T),
    /// `coef · t^exp`
    Power { coef: T, exp: T },
    /// `intercept + slope · t`
    Linear { intercept: T, slope: T },
}

impl<T: Real> Shape<T> {
    #[inline]
    pub fn eval(&self, t: T) -> T {
        match *self {
            Shape::Zero => T::zero(),
            Shape::Const(c) => c,
            Shape::Power { coef, exp } => coef * t.powf(exp),
            Shape::Linear { intercept, slope } => intercept + slope * t,
        }
    }

    fn scaled(&self, k: T) -> Self {
        match *self {
            Shape::Zero => Shape::Zero,
            Shape::Const(c) => Shape::Const(c * k),
            Shape::Power { coef, exp } => Shape::Power { coef: coef * k, exp },
            Shape::Linear { intercept, slope } => {
                Shape::Linear { intercept: intercept * k, slope: slope * k }
            }
        }
    }

    /// Extremes over the closed interval `[t0, t1]`; all shapes are monotone there.
    fn range_on(&self, t0: T, t1: T) -> (T, T) {
        match *self {
            Shape::Zero => (T::zero(), T::zero()),
            Shape::Const(c) => (c, c),
            _ => {
                let (x, y) = (self.eval(t0), self.eval(t1));
                (x.min(y), x.max(y))
            }
        }
    }
}

/// `φ = shape` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<T> {
    pub start: T,
    pub end: T,
    pub shape: Shape<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileKind {
    /// `c · 1_{(1,∞)}`
    IndicatorStep,
    /// `c · min(t^{p+1}, 1)`
    SaturatingPower,
    /// `c · t^{p+1} · 1_{[0,1)}`
    CompactBump,
    /// Piecewise-linear interpolant of sampled values, constant past the last sample.
    Tabulated,
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::IndicatorStep => "indicator",
            ProfileKind::SaturatingPower => "saturating",
            ProfileKind::CompactBump => "compact",
            ProfileKind::Tabulated => "table",
        }
    }
}

/// Samples `(t, φ(t))` of a tabulated profile plus the abscissae where it jumps.
/// A jump at `t` is encoded by two consecutive samples at `t` (left value, then right value).
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    pub samples: Vec<(T, T)>,
    pub jumps: Vec<T>,
}

impl<T: Real> Table<T> {
    /// Parses the two-column text format: whitespace-separated `t φ(t)` rows,
    /// `# jump <t>` directives, other `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut jumps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("jump") {
                    let t = parse_num(it.next(), lineno)?;
                    if it.next().is_some() {
                        return Err(parse_err(lineno, "trailing tokens after jump"));
                    }
                    jumps.push(T::lit(t));
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let t = parse_num(it.next(), lineno)?;
            let v = parse_num(it.next(), lineno)?;
            if it.next().is_some() {
                return Err(parse_err(lineno, "expected exactly two columns"));
            }
            samples.push((T::lit(t), T::lit(v)));
        }
        Ok(Self { samples, jumps })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn pieces(&self) -> Result<Vec<Piece<T>>> {
        let mut s = self.samples.clone();
        if s.is_empty() {
            return Err(LabError::DegenerateProfile("empty table".into()));
        }
        if s[0].0 > T::zero() {
            s.insert(0, (T::zero(), T::zero()));
        }
        if s[0].0 < T::zero() {
            return Err(LabError::InvalidParameter("negative abscissa in table".into()));
        }
        if s[0].1 != T::zero() {
            return Err(LabError::InvalidParameter("tabulated profile must vanish at 0".into()));
        }
        let mut jumps = self.jumps.clone();
        jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in jumps.windows(2) {
            if w[1] <= w[0] {
                return Err(LabError::InvalidParameter("duplicate jump directive".into()));
            }
        }
        if jumps.iter().any(|j| *j <= T::zero()) {
            return Err(LabError::InvalidParameter("jump points must be positive".into()));
        }
        let mut pieces = Vec::new();
        for w in s.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if v0 < T::zero() || v1 < T::zero() {
                return Err(LabError::InvalidParameter("negative profile value".into()));
            }
            if t1 < t0 {
                return Err(LabError::InvalidParameter("abscissae must be increasing".into()));
            }
            if t1 == t0 {
                if !jumps.contains(&t0) {
                    return Err(LabError::InvalidParameter(format!(
                        "repeated abscissa {t0} without a jump directive"
                    )));
                }
                continue;
            }
            let slope = (v1 - v0) / (t1 - t0);
            let shape = if v0 == T::zero() && v1 == T::zero() {
                Shape::Zero
            } else if v0 == v1 {
                Shape::Const(v0)
            } else {
                Shape::Linear { intercept: v0 - slope * t0, slope }
            };
            pieces.push(Piece { start: t0, end: t1, shape });
        }
        for j in &jumps {
            let n = s.iter().filter(|(t, _)| t == j).count();
            if n != 2 {
                return Err(LabError::InvalidParameter(format!(
                    "jump at {j} needs exactly two samples (left and right value)"
                )));
            }
        }
        let (tl, vl) = *s.last().unwrap();
        if vl < T::zero() {
            return Err(LabError::InvalidParameter("negative profile value".into()));
        }
        let tail = if vl == T::zero() { Shape::Zero } else { Shape::Const(vl) };
        pieces.push(Piece { start: tl, end: T::infinity(), shape: tail });
        Ok(merge_pieces(pieces))
    }
}

fn parse_num(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing value"))?;
    let v: f64 = tok.parse().map_err(|_| parse_err(line, &format!("not a number: {tok}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, "non-finite value"));
    }
    Ok(v)
}

fn parse_err(line: usize, msg: &str) -> LabError {
    LabError::Parse { line, message: msg.to_string() }
}

/// Merges adjacent pieces with identical constant shapes.
fn merge_pieces<T: Real>(pieces: Vec<Piece<T>>) -> Vec<Piece<T>> {
    let mut out: Vec<Piece<T>> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            let same = matches!((last.shape, p.shape), (Shape::Zero, Shape::Zero))
                || matches!((last.shape, p.shape), (Shape::Const(a), Shape::Const(b)) if a == b);
            if same && last.end == p.start {
                last.end = p.end;
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// A kernel profile `φ` together with its admissibility constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile<T> {
    kind: ProfileKind,
    p: T,
    scale: T,
    jump_points: Vec<T>,
    alpha: T,
    beta: T,
    normalized: bool,
    table: Option<Table<T>>,
    /// Pieces with `scale` already applied.
    pieces: Vec<Piece<T>>,
}

impl<T: Real> PhiProfile<T> {
    /// Built-in profile with an explicit scale multiplier.
    pub fn builtin(kind: ProfileKind, p: T, scale: T) -> Result<Self> {
        check_p(p)?;
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(LabError::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        let one = T::one();
        let base = match kind {
            ProfileKind::IndicatorStep => vec![
                Piece { start: T::zero(), end: one, shape: Shape::Zero },
                Piece { start: one, end: T::infinity(), shape: Shape::Const(one) },
            ],
            ProfileKind::SaturatingPower => vec![
                Piece { start: T::zero(), end: one, shape: Shape::Power { coef: one, exp: p + one } },
                Piece { start: one, end: T::infinity(), shape: Shape::Const(one) },
            ],
            ProfileKind::CompactBump => vec![
                Piece { start: T::zero(), end: one, shape: Shape::Power { coef: one, exp: p + one } },
                Piece { start: one, end: T::infinity(), shape: Shape::Zero },
            ],
            ProfileKind::Tabulated => {
                return Err(LabError::InvalidParameter(
                    "tabulated profiles are built with PhiProfile::tabulated".into(),
                ))
            }
        };
        // Closed forms for the admissibility constants and the normalization integral.
        let (alpha, beta, integral) = match kind {
            ProfileKind::IndicatorStep => (T::zero(), scale, scale / p),
            ProfileKind::SaturatingPower => (scale, scale, scale * (one + one / p)),
            _ => (scale, scale, scale),
        };
        let jump_points = match kind {
            ProfileKind::SaturatingPower => vec![],
            _ => vec![one],
        };
        Ok(Self {
            kind,
            p,
            scale,
            jump_points,
            alpha,
            beta,
            normalized: (integral - T::lit(0.5)).abs() <= T::lit(NORMALIZATION_TOL),
            table: None,
            pieces: base.into_iter().map(|pc| Piece { shape: pc.shape.scaled(scale), ..pc }).collect(),
        })
    }

    /// `(p/2) · 1_{(1,∞)}`, normalized.
    pub fn indicator_step(p: T) -> Result<Self> {
        Self::builtin(ProfileKind::IndicatorStep, p, p * T::lit(0.5))
    }

    /// `c · min(t^{p+1}, 1)` with `c = p / (2(p+1))`, normalized.
    pub fn saturating_power(p: T) -> Result<Self> {
        Self::builtin(ProfileKind::SaturatingPower, p, p / (T::lit(2.0) * (p + T::one())))
    }

    /// `(1/2) · t^{p+1} · 1_{[0,1)}`, normalized.
    pub fn compact_bump(p: T) -> Result<Self> {
        Self::builtin(ProfileKind::CompactBump, p, T::lit(0.5))
    }

    /// Tabulated profile with scale 1. `alpha` and `beta` are set to the measured
    /// bounds; use [`PhiProfile::with_bounds`] to declare caps instead.
    pub fn tabulated(table: Table<T>, p: T) -> Result<Self> {
        check_p(p)?;
        let pieces = table.pieces()?;
        let jump_points = table.jumps.iter().copied().filter(|j| {
            let l = left_limit_of(&pieces, *j);
            let r = eval_pieces(&pieces, *j);
            l != r
        });
        let mut jump_points: Vec<T> = jump_points.collect();
        jump_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prof = Self {
            kind: ProfileKind::Tabulated,
            p,
            scale: T::one(),
            jump_points,
            alpha: T::zero(),
            beta: T::zero(),
            normalized: false,
            table: Some(table),
            pieces,
        };
        prof.alpha = prof.measure_alpha();
        prof.beta = prof.measure_beta();
        if let Ok(i) = prof.normalization_integral() {
            prof.normalized = (i - T::lit(0.5)).abs() <= T::lit(NORMALIZATION_TOL);
        }
        Ok(prof)
    }

    pub fn from_table_file(path: impl AsRef<Path>, p: T) -> Result<Self> {
        Self::tabulated(Table::from_file(path)?, p)
    }

    /// Replaces the declared admissibility caps.
    pub fn with_bounds(mut self, alpha: T, beta: T) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// Same shape with a different scale multiplier; `normalized` is recomputed.
    pub fn with_scale(&self, scale: T) -> Result<Self> {
        if !(scale > T::zero()) {
            return Err(LabError::InvalidParameter("scale must be positive".into()));
        }
        let k = scale / self.scale;
        let mut out = self.clone();
        out.scale = scale;
        out.alpha = self.alpha * k;
        out.beta = self.beta * k;
        out.pieces = self.pieces.iter().map(|pc| Piece { shape: pc.shape.scaled(k), ..*pc }).collect();
        out.normalized = match out.normalization_integral() {
            Ok(i) => (i - T::lit(0.5)).abs() <= T::lit(NORMALIZATION_TOL),
            Err(_) => false,
        };
        Ok(out)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn scale(&self) -> T {
        self.scale
    }
    pub fn jump_points(&self) -> &[T] {
        &self.jump_points
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
    pub fn table(&self) -> Option<&Table<T>> {
        self.table.as_ref()
    }
    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    /// Interior piece boundaries (jumps and kinks), increasing.
    pub fn breakpoints(&self) -> impl Iterator<Item = T> + '_ {
        self.pieces.iter().skip(1).map(|pc| pc.start)
    }

    /// Index of the piece whose half-open span `[start, end)` contains `t`.
    #[inline]
    pub fn piece_index(&self, t: T) -> usize {
        piece_index_of(&self.pieces, t)
    }

    /// `φ(t)`; the right limit at jump points.
    #[inline]
    pub fn eval(&self, t: T) -> T {
        eval_pieces(&self.pieces, t)
    }

    pub fn left_limit(&self, t: T) -> T {
        left_limit_of(&self.pieces, t)
    }

    /// `φ_δ(t) = δ^p φ(t/δ)`.
    pub fn eval_delta(&self, t: T, delta: T) -> Result<T> {
        if !(delta > T::zero()) {
            return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(delta.powf(self.p) * self.eval(t / delta))
    }

    /// Infimum of `φ` over the open interval `(t0, t1)`.
    pub fn inf_open(&self, t0: T, t1: T) -> T {
        let mut m = T::infinity();
        for pc in &self.pieces {
            if pc.start < t1 && pc.end > t0 {
                let (lo, _) = pc.shape.range_on(pc.start.max(t0), pc.end.min(t1));
                m = m.min(lo);
            }
        }
        m
    }

    /// Whether `φ` vanishes identically on `[t0, t1]` (one-sided at piece ends).
    pub fn vanishes_on(&self, t0: T, t1: T) -> bool {
        let i0 = self.piece_index(t0);
        let i1 = self.piece_index(t1);
        (i0..=i1).all(|i| {
            let pc = &self.pieces[i];
            match pc.shape {
                Shape::Zero => true,
                _ => {
                    // Only the left endpoint of this piece may be touched.
                    i == i1 && t1 == pc.start
                }
            }
        })
    }

    /// Constant value of `φ` on `[t0, t1]` when it has one.
    pub fn constant_on(&self, t0: T, t1: T) -> Option<T> {
        let i0 = self.piece_index(t0);
        let mut i1 = self.piece_index(t1);
        if i1 > i0 && t1 == self.pieces[i1].start {
            i1 -= 1;
        }
        if i0 != i1 {
            return None;
        }
        match self.pieces[i0].shape {
            Shape::Zero => Some(T::zero()),
            Shape::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Maximal intervals on which `φ` vanishes; `end` may be `+∞`.
    pub fn zero_intervals(&self) -> Vec<(T, T)> {
        let mut out: Vec<(T, T)> = Vec::new();
        for pc in &self.pieces {
            if pc.shape == Shape::Zero {
                match out.last_mut() {
                    Some(last) if last.1 == pc.start => last.1 = pc.end,
                    _ => out.push((pc.start, pc.end)),
                }
            }
        }
        out
    }

    /// `I(φ) = ∫_0^∞ φ(t) t^{-(p+1)} dt`, adaptive quadrature on `[0, T]` with
    /// `T = max(last breakpoint, 1)·2^10`, and an exact tail beyond `T`
    /// because the last piece is constant.
    pub fn normalization_integral(&self) -> Result<T> {
        let p = self.p;
        let last_break = self.breakpoints().fold(T::one(), |m, t| m.max(t));
        let cutoff = last_break * T::lit(1024.0);
        let rule = GaussLegendre::<T>::new(12);
        let quad = Adaptive::new(&rule, T::lit(1e-13), T::lit(1e-13), 60);
        let mut value = T::zero();
        let mut error = T::zero();
        for pc in &self.pieces {
            let a = pc.start;
            let b = pc.end.min(cutoff);
            if !(b > a) {
                continue;
            }
            if pc.shape == Shape::Zero {
                continue;
            }
            let shape = pc.shape;
            let r = quad.integrate(|t| shape.eval(t) * t.powf(-(p + T::one())), a, b);
            if !r.converged || !r.value.is_finite() {
                return Err(LabError::QuadratureFailure(format!(
                    "normalization integral does not converge on [{a}, {b}]"
                )));
            }
            value = value + r.value;
            error = error + r.error;
        }
        let tail_piece = self.pieces.last().unwrap();
        match tail_piece.shape {
            Shape::Zero => {}
            Shape::Const(c) => value = value + c * cutoff.powf(-p) / p,
            _ => {
                // Not produced by any constructor; bracket with beta.
                error = error + self.beta * cutoff.powf(-p) / p;
            }
        }
        if error > T::lit(NORMALIZATION_TOL) {
            return Err(LabError::QuadratureFailure(format!(
                "normalization bracket {error:e} wider than {NORMALIZATION_TOL:e}"
            )));
        }
        Ok(value)
    }

    /// Rescales so that the normalization integral equals 1/2.
    pub fn normalize(&self) -> Result<Self> {
        if self.normalized {
            return Ok(self.clone());
        }
        let i = self.normalization_integral()?;
        if !(i > T::zero()) {
            return Err(LabError::DegenerateProfile("normalization integral vanishes".into()));
        }
        let k = T::lit(0.5) / i;
        let mut out = self.clone();
        out.scale = self.scale * k;
        out.alpha = self.alpha * k;
        out.beta = self.beta * k;
        out.pieces = self.pieces.iter().map(|pc| Piece { shape: pc.shape.scaled(k), ..*pc }).collect();
        out.normalized = true;
        Ok(out)
    }

    /// Smallest `α` with `φ(t) ≤ α t^{p+1}` observed on a dense grid of `(0, 1)`,
    /// at piece boundaries from both sides and at the left limit in `t = 1`.
    /// Infinite when `φ` is not `O(t^{p+1})` at the origin.
    fn measure_alpha(&self) -> T {
        let p1 = self.p + T::one();
        let first = &self.pieces[0];
        let origin_ok = match first.shape {
            Shape::Zero => true,
            Shape::Const(c) => c == T::zero(),
            Shape::Power { coef, exp } => coef == T::zero() || exp >= p1,
            Shape::Linear { intercept, slope } => intercept == T::zero() && slope == T::zero(),
        };
        if !origin_ok {
            return T::infinity();
        }
        let ratio = |t: T, v: T| if v == T::zero() { T::zero() } else { v / t.powf(p1) };
        let n = 4096;
        let mut a = T::zero();
        for k in 1..n {
            let t = T::of_usize(k) / T::of_usize(n);
            a = a.max(ratio(t, self.eval(t)));
        }
        for t in self.breakpoints().filter(|t| *t > T::zero() && *t < T::one()) {
            a = a.max(ratio(t, self.eval(t))).max(ratio(t, self.left_limit(t)));
        }
        a.max(ratio(T::one(), self.left_limit(T::one())))
    }

    /// `sup φ`, including one-sided limits.
    fn measure_beta(&self) -> T {
        self.pieces
            .iter()
            .map(|pc| {
                let end = if pc.end.is_finite() { pc.end } else { pc.start + T::one() };
                pc.shape.range_on(pc.start, end).1
            })
            .fold(T::zero(), T::max)
    }

    /// Checks the three standing assumptions on `φ`.
    pub fn verify_conditions(&self) -> AdmissibilityReport {
        let alpha_measured = self.measure_alpha();
        let beta_measured = self.measure_beta();
        let slack = T::one() + T::lit(1e-12);
        let nonneg = self.pieces.iter().all(|pc| {
            let end = if pc.end.is_finite() { pc.end } else { pc.start + T::one() };
            pc.shape.range_on(pc.start, end).0 >= T::zero()
        });
        let vanishes_at_zero = self.eval(T::zero()) == T::zero();
        let (normalization, normalization_error) = match self.normalization_integral() {
            Ok(v) => (Some(v.f64()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let cond_small_t = alpha_measured.is_finite() && alpha_measured <= self.alpha * slack;
        let cond_bounded = beta_measured.is_finite() && beta_measured <= self.beta * slack;
        let cond_normalized =
            normalization.map(|v| (v - 0.5).abs() <= NORMALIZATION_TOL).unwrap_or(false);
        AdmissibilityReport {
            kind: self.kind,
            p: self.p.f64(),
            scale: self.scale.f64(),
            alpha_declared: self.alpha.f64(),
            beta_declared: self.beta.f64(),
            alpha_measured: alpha_measured.f64(),
            beta_measured: beta_measured.f64(),
            normalization,
            normalization_error,
            nonnegative: nonneg,
            vanishes_at_zero,
            cond_small_t,
            cond_bounded,
            cond_normalized,
        }
    }
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(LabError::InvalidParameter(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

fn piece_index_of<T: Real>(pieces: &[Piece<T>], t: T) -> usize {
    // last piece with start <= t
    let i = pieces.partition_point(|pc| pc.start <= t);
    i.saturating_sub(1)
}

fn eval_pieces<T: Real>(pieces: &[Piece<T>], t: T) -> T {
    if t <= T::zero() {
        return pieces[0].shape.eval(T::zero().max(t));
    }
    pieces[piece_index_of(pieces, t)].shape.eval(t)
}

fn left_limit_of<T: Real>(pieces: &[Piece<T>], t: T) -> T {
    let i = piece_index_of(pieces, t);
    if i > 0 && pieces[i].start == t {
        pieces[i - 1].shape.eval(t)
    } else {
        pieces[i].shape.eval(t)
    }
}

/// Outcome of [`PhiProfile::verify_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub kind: ProfileKind,
    pub p: f64,
    pub scale: f64,
    pub alpha_declared: f64,
    pub beta_declared: f64,
    pub alpha_measured: f64,
    pub beta_measured: f64,
    pub normalization: Option<f64>,
    pub normalization_error: Option<String>,
    pub nonnegative: bool,
    pub vanishes_at_zero: bool,
    /// `φ(t) ≤ α t^{p+1}` on `[0, 1]`.
    pub cond_small_t: bool,
    /// `φ ≤ β`.
    pub cond_bounded: bool,
    /// `∫ φ(t) t^{-(p+1)} dt = 1/2`.
    pub cond_normalized: bool,
}

impl AdmissibilityReport {
    pub fn passes(&self) -> bool {
        self.nonnegative
            && self.vanishes_at_zero
            && self.cond_small_t
            && self.cond_bounded
            && self.cond_normalized
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_values() {
        let phi = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        assert_eq!(phi.eval(0.5), 0.0);
        assert_eq!(phi.eval(2.0), 0.5);
        assert_eq!(phi.eval(0.0), 0.0);
        // right limit at the jump
        assert_eq!(phi.eval(1.0), 0.5);
        assert_eq!(phi.left_limit(1.0), 0.0);
        assert_eq!(phi.jump_points(), &[1.0]);
    }

    #[test]
    fn saturating_value() {
        let phi = PhiProfile::builtin(ProfileKind::SaturatingPower, 1.0, 0.25).unwrap();
        assert_relative_eq!(phi.eval(0.5), 0.0625, max_relative = 1e-15);
        assert!(phi.is_normalized());
    }

    #[test]
    fn phi_delta_examples() {
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        assert_relative_eq!(ind.eval_delta(0.5, 0.1).unwrap(), 0.05, max_relative = 1e-15);
        assert_eq!(ind.eval_delta(0.0, 0.3).unwrap(), 0.0);
        let bump = PhiProfile::<f64>::compact_bump(1.0).unwrap();
        assert_relative_eq!(bump.eval_delta(0.05, 0.1).unwrap(), 0.0125, max_relative = 1e-14);
        assert!(matches!(ind.eval_delta(1.0, 0.0), Err(LabError::InvalidParameter(_))));
        assert!(ind.eval_delta(1.0, -1.0).is_err());
    }

    #[test]
    fn normalization_closed_forms() {
        let cases = [
            (ProfileKind::IndicatorStep, 1.0, 0.5),
            (ProfileKind::SaturatingPower, 1.0, 0.25),
            (ProfileKind::CompactBump, 1.0, 0.5),
        ];
        for (kind, p, scale) in cases {
            let phi = PhiProfile::builtin(kind, p, scale).unwrap();
            let i: f64 = phi.normalization_integral().unwrap();
            assert!((i - 0.5).abs() <= 1e-9, "{kind:?}: {i}");
        }
    }

    #[test]
    fn normalize_examples() {
        let raw = PhiProfile::builtin(ProfileKind::IndicatorStep, 1.0, 1.0).unwrap();
        assert!(!raw.is_normalized());
        let n = raw.normalize().unwrap();
        assert_relative_eq!(n.scale(), 0.5, max_relative = 1e-12);
        assert!(n.is_normalized());
        assert_eq!(n.normalize().unwrap(), n);

        let sat = PhiProfile::builtin(ProfileKind::SaturatingPower, 2.0, 1.0).unwrap();
        let n = sat.normalize().unwrap();
        assert_relative_eq!(n.scale(), 1.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(n.beta(), 1.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(
            n.scale(),
            PhiProfile::<f64>::saturating_power(2.0).unwrap().scale(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn zero_profile_is_degenerate() {
        let t = Table::<f64>::parse("0 0\n2 0\n").unwrap();
        let phi = PhiProfile::tabulated(t, 1.0).unwrap();
        assert!(matches!(phi.normalize(), Err(LabError::DegenerateProfile(_))));
    }

    #[test]
    fn verify_builtin_reports() {
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap().verify_conditions();
        assert!(ind.passes());
        assert_eq!(ind.alpha_measured, 0.0);
        let bump = PhiProfile::<f64>::compact_bump(1.0).unwrap().verify_conditions();
        assert!(bump.passes());
        assert_relative_eq!(bump.alpha_measured, 0.5, max_relative = 1e-12);
        assert_relative_eq!(bump.beta_measured, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn verify_detects_violation() {
        let t = Table::<f64>::parse("0 0\n0.4 0\n0.5 10\n0.6 0\n").unwrap();
        let phi = PhiProfile::tabulated(t, 1.0).unwrap().with_bounds(1.0, 20.0);
        let r = phi.verify_conditions();
        assert!(!r.cond_small_t);
        assert!(r.alpha_measured >= 40.0 - 1e-9);
        assert!(!r.passes());
    }

    #[test]
    fn linear_start_violates_small_t_bound() {
        let t = Table::<f64>::parse("0 0\n1 1\n").unwrap();
        let phi = PhiProfile::tabulated(t, 1.0).unwrap().with_bounds(100.0, 1.0);
        let r = phi.verify_conditions();
        assert!(r.alpha_measured.is_infinite());
        assert!(!r.cond_small_t);
    }

    #[test]
    fn table_parse_with_jump() {
        let text = "# indicator\n0 0\n1 0\n# jump 1\n1 0.5\n4 0.5\n";
        let phi = PhiProfile::<f64>::tabulated(Table::parse(text).unwrap(), 1.0).unwrap();
        assert_eq!(phi.jump_points(), &[1.0]);
        assert_eq!(phi.eval(1.0), 0.5);
        assert_eq!(phi.eval(0.99), 0.0);
        assert_eq!(phi.eval(100.0), 0.5);
        assert!(phi.is_normalized());
        assert_eq!(phi.zero_intervals(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn table_rejects_bad_input() {
        assert!(Table::<f64>::parse("0 0\nx 1\n").is_err());
        assert!(Table::<f64>::parse("0 0 0\n").is_err());
        let dup = Table::<f64>::parse("0 0\n1 0\n1 1\n").unwrap();
        assert!(PhiProfile::tabulated(dup, 1.0).is_err());
        let nonzero = Table::<f64>::parse("0 1\n1 1\n").unwrap();
        assert!(PhiProfile::tabulated(nonzero, 1.0).is_err());
    }

    #[test]
    fn inf_and_vanishing_queries() {
        let ind = PhiProfile::<f64>::indicator_step(1.0).unwrap();
        assert_eq!(ind.inf_open(0.9, 1.1), 0.0);
        assert_eq!(ind.inf_open(1.0, 1.1), 0.5);
        assert!(ind.vanishes_on(0.2, 1.0));
        assert!(!ind.vanishes_on(0.2, 1.01));
        assert_eq!(ind.constant_on(1.0, 3.0), Some(0.5));
        assert_eq!(ind.constant_on(0.5, 3.0), None);
        let bump = PhiProfile::<f64>::compact_bump(1.0).unwrap();
        assert!(bump.vanishes_on(1.0, 7.0));
        assert_eq!(bump.zero_intervals(), vec![(1.0, f64::INFINITY)]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PhiProfile::<f64>::indicator_step(0.5).is_err());
        assert!(PhiProfile::builtin(ProfileKind::CompactBump, 1.0, 0.0).is_err());
    }
}
