//! Least-squares fits in the small-δ variables `δ` and `δ|ln δ|`.

use serde::Serialize;

use crate::real::Real;

/// `value(δ) ≈ limit + a·δ|ln δ| + b·δ`. Fewer than three points drop `b`, a single
/// point drops `a` as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaFit<T> {
    pub limit: T,
    pub a_dlog: T,
    pub b_delta: T,
    /// Root-mean-square residual; zero for exactly determined fits.
    pub rms_residual: T,
}

fn basis<T: Real>(d: T) -> [T; 3] {
    [T::one(), d * d.ln().abs(), d]
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting; `None` when singular.
fn solve<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N]) -> Option<[T; N]> {
    for c in 0..N {
        let piv = (c..N).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[piv][c] == T::zero() {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..N {
            let f = a[r][c] / a[c][c];
            for k in c..N {
                a[r][k] = a[r][k] - f * a[c][k];
            }
            b[r] = b[r] - f * b[c];
        }
    }
    let mut x = [T::zero(); N];
    for r in (0..N).rev() {
        let mut s = b[r];
        for k in r + 1..N {
            s = s - a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normal_fit<T: Real, const N: usize>(deltas: &[T], values: &[T]) -> Option<[T; N]> {
    let mut a = [[T::zero(); N]; N];
    let mut b = [T::zero(); N];
    for (&d, &v) in deltas.iter().zip(values) {
        let f = basis(d);
        for i in 0..N {
            for j in 0..N {
                a[i][j] = a[i][j] + f[i] * f[j];
            }
            b[i] = b[i] + f[i] * v;
        }
    }
    solve(a, b)
}

/// Fits `values` against the δ ladder; `None` for an empty or degenerate ladder.
pub fn fit_delta_model<T: Real>(deltas: &[T], values: &[T]) -> Option<DeltaFit<T>> {
    let n = deltas.len().min(values.len());
    let (deltas, values) = (&deltas[..n], &values[..n]);
    let coef: [T; 3] = match n {
        0 => return None,
        1 => [values[0], T::zero(), T::zero()],
        2 => {
            let c: [T; 2] = normal_fit(deltas, values)?;
            [c[0], c[1], T::zero()]
        }
        _ => normal_fit(deltas, values)?,
    };
    let mut ss = T::zero();
    for (&d, &v) in deltas.iter().zip(values) {
        let f = basis(d);
        let r = v - (coef[0] * f[0] + coef[1] * f[1] + coef[2] * f[2]);
        ss = ss + r * r;
    }
    Some(DeltaFit { limit: coef[0], a_dlog: coef[1], b_delta: coef[2], rms_residual: (ss / T::of_usize(n)).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_model() {
        let ds = [0.1, 0.01, 0.001, 0.0005];
        let vs: Vec<f64> = ds.iter().map(|d: &f64| 1.0 - d + d * d.ln()).collect();
        let f = fit_delta_model(&ds, &vs).unwrap();
        assert_relative_eq!(f.limit, 1.0, epsilon = 1e-9);
        assert_relative_eq!(f.a_dlog, -1.0, epsilon = 1e-7);
        assert_relative_eq!(f.b_delta, -1.0, epsilon = 1e-7);
        let two = fit_delta_model(&ds[..2], &[0.5, 0.6]).unwrap();
        assert_eq!(two.b_delta, 0.0);
        assert_eq!(fit_delta_model(&[0.1], &[0.3]).unwrap().limit, 0.3);
        assert!(fit_delta_model::<f64>(&[], &[]).is_none());
    }
}
