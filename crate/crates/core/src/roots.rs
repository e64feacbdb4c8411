//! Bracketing scalar root finder (Brent's method).

use thiserror::Error;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("f(a) and f(b) have the same sign")]
    NotBracketed,
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("function returned a non-finite value")]
    NonFinite,
}

/// Finds a zero of `f` in `[a, b]`, given `f(a)` and `f(b)` of opposite sign
/// (or either exactly zero). Stops when the bracket is narrower than
/// `xtol + rtol * |x|`.
pub fn brent<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    a: T,
    b: T,
    xtol: T,
    rtol: T,
    max_iter: usize,
) -> Result<T, RootError> {
    let two = lit::<T>(2.0);
    let half = lit::<T>(0.5);
    let (mut xpre, mut xcur) = (a, b);
    let (mut fpre, mut fcur) = (f(xpre), f(xcur));
    if !fpre.is_finite() || !fcur.is_finite() {
        return Err(RootError::NonFinite);
    }
    if fpre == T::zero() {
        return Ok(xpre);
    }
    if fcur == T::zero() {
        return Ok(xcur);
    }
    if fpre.signum() == fcur.signum() {
        return Err(RootError::NotBracketed);
    }
    let (mut xblk, mut fblk) = (T::zero(), T::zero());
    let (mut spre, mut scur) = (T::zero(), T::zero());

    for _ in 0..max_iter {
        if fpre != T::zero() && fcur != T::zero() && fpre.signum() != fcur.signum() {
            xblk = xpre;
            fblk = fpre;
            spre = xcur - xpre;
            scur = spre;
        }
        if fblk.abs() < fcur.abs() {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }

        let delta = (xtol + rtol * xcur.abs()) * half;
        let sbis = (xblk - xcur) * half;
        if fcur == T::zero() || sbis.abs() < delta {
            return Ok(xcur);
        }

        if spre.abs() > delta && fcur.abs() < fpre.abs() {
            let stry = if xpre == xblk {
                // secant
                -fcur * (xcur - xpre) / (fcur - fpre)
            } else {
                // inverse quadratic interpolation
                let dpre = (fpre - fcur) / (xpre - xcur);
                let dblk = (fblk - fcur) / (xblk - xcur);
                -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            };
            if two * stry.abs() < spre.abs().min(lit::<T>(3.0) * sbis.abs() - delta) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }

        xpre = xcur;
        fpre = fcur;
        if scur.abs() > delta {
            xcur = xcur + scur;
        } else {
            xcur = xcur + if sbis > T::zero() { delta } else { -delta };
        }
        fcur = f(xcur);
        if !fcur.is_finite() {
            return Err(RootError::NonFinite);
        }
    }
    Err(RootError::MaxIterations(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = brent(|x: f64| x * x - 2.0, 0.0, 2.0, 0.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_roots_are_returned() {
        assert_eq!(brent(|x: f64| x - 1.0, 1.0, 3.0, 0.0, 1e-12, 50).unwrap(), 1.0);
        assert_eq!(brent(|x: f64| x - 3.0, 1.0, 3.0, 0.0, 1e-12, 50).unwrap(), 3.0);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert_eq!(brent(|x: f64| x * x + 1.0, -1.0, 1.0, 0.0, 1e-12, 50), Err(RootError::NotBracketed));
    }

    #[test]
    fn steep_monotone_function() {
        let r = brent(|x: f64| (x - 0.3).powi(3) * 1e6, 0.0, 1.0, 0.0, 1e-13, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-6);
    }

    #[test]
    fn works_in_f32() {
        let r = brent(|x: f32| x.cos() - x, 0.0, 1.0, 0.0, 1e-6, 100).unwrap();
        assert!((r - 0.739_085_1).abs() < 1e-5);
    }
}
