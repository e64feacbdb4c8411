//! Restarted GMRES for matrix-free linear operators.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final residual norm relative to `‖b‖`.
    pub relative_residual: T,
    pub converged: bool,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Solves `A x = b` starting from `x = 0`, with `apply(v, out)` computing
/// `out = A v`. Stops once `‖b − Ax‖ ≤ tol·‖b‖` or after `max_iter` inner
/// iterations.
pub fn gmres<T: Scalar>(
    mut apply: impl FnMut(&[T], &mut [T]),
    b: &[T],
    restart: usize,
    tol: T,
    max_iter: usize,
) -> GmresOutcome<T> {
    let n = b.len();
    let m = restart.max(1).min(n.max(1));
    let mut x = vec![T::zero(); n];
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return GmresOutcome { x, iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut total = 0usize;
    let mut w = vec![T::zero(); n];

    while total < max_iter {
        let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| *x / beta).collect());
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iter {
            apply(&v[k], &mut w);
            total += 1;
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                let hik = h[i][k];
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj = *wj - hik * *vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            let hk1 = h[k + 1][k];
            h[k][k] = cs[k] * h[k][k] + sn[k] * hk1;
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            let breakdown = hk1 == T::zero();
            if !breakdown {
                v.push(w.iter().map(|x| *x / hk1).collect());
            }
            k += 1;
            if g[k].abs() <= target || breakdown {
                break;
            }
        }
        // Back substitution on the k×k triangle.
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s = s - h[i][j] * y[j];
            }
            y[i] = if h[i][i] != T::zero() { s / h[i][i] } else { T::zero() };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi = *xi + *yj * *vi;
            }
        }
        apply(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        beta = norm(&r);
        if beta <= target || !beta.is_finite() {
            break;
        }
    }
    GmresOutcome { x, iterations: total, relative_residual: beta / bnorm, converged: beta <= target }
}
