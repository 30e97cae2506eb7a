//! Adaptive Gauss–Kronrod (7/15) quadrature.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default absolute tolerance for all integrals in the crate.
pub const ABS_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 20_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

struct Panel<T> {
    lo: f64,
    hi: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<T: QuadValue>(f: &dyn Fn(f64) -> T, lo: f64, hi: f64) -> (T, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

/// Integrates `f` over the finite interval `[lo, hi]`, splitting at the
/// given interior breakpoints first.
pub fn integrate_with<T, F>(f: F, lo: f64, hi: f64, breaks: &[f64], tol: f64) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    integrate_dyn(&f, lo, hi, breaks, tol)
}

fn integrate_dyn<T: QuadValue>(f: &dyn Fn(f64) -> T, lo: f64, hi: f64, breaks: &[f64], tol: f64) -> Result<T> {
    if !(lo.is_finite() && hi.is_finite()) {
        return integrate_infinite(f, lo, hi, tol);
    }
    if hi <= lo {
        return Ok(T::zero());
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut heap = BinaryHeap::new();
    let mut edges = vec![lo];
    edges.extend(cuts);
    edges.push(hi);
    let mut total = T::zero();
    let mut err = 0.0;
    for w in edges.windows(2) {
        let (value, error) = kronrod(f, w[0], w[1]);
        total = total + value;
        err += error;
        heap.push(Panel {
            lo: w[0],
            hi: w[1],
            value,
            error,
        });
    }
    while err > tol {
        if heap.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                lo,
                hi,
                error: err,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // panel cannot be split any further
            if worst.error > tol {
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    error: err,
                });
            }
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(f, worst.lo, mid);
        let (v2, e2) = kronrod(f, mid, worst.hi);
        total = total - worst.value + v1 + v2;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed drift from the running updates
    Ok(heap.into_iter().fold(T::zero(), |acc, p| acc + p.value))
}

fn integrate_infinite<T: QuadValue>(f: &dyn Fn(f64) -> T, lo: f64, hi: f64, tol: f64) -> Result<T> {
    match (lo.is_finite(), hi.is_finite()) {
        (true, false) => integrate_dyn(
            &|t: f64| {
                let s = 1.0 - t;
                f(lo + t / s) * (1.0 / (s * s))
            },
            0.0,
            1.0,
            &[],
            tol,
        ),
        (false, true) => integrate_dyn(
            &|t: f64| {
                let s = 1.0 - t;
                f(hi - t / s) * (1.0 / (s * s))
            },
            0.0,
            1.0,
            &[],
            tol,
        ),
        _ => {
            let a = integrate_infinite(f, 0.0, f64::INFINITY, tol / 2.0)?;
            let b = integrate_infinite(f, f64::NEG_INFINITY, 0.0, tol / 2.0)?;
            Ok(a + b)
        }
    }
}

/// Integrates `f` over `[lo, hi]` to the default absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    integrate_with(f, lo, hi, &[], ABS_TOL)
}

/// Complex-valued counterpart of [`integrate`].
pub fn integrate_complex<F: Fn(f64) -> Complex64>(f: F, lo: f64, hi: f64) -> Result<Complex64> {
    integrate_with(f, lo, hi, &[], ABS_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_exponential() {
        let v = integrate(|x| x * x, 0.0, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x: f64| (-x).exp(), 0.0, f64::INFINITY).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate(|x: f64| (-x * x / 2.0).exp(), f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        let v = integrate_with(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let theta = 25.0;
        let v = integrate_complex(|x| Complex64::new(0.0, theta * x).exp(), 0.0, 1.0).unwrap();
        let exact = (Complex64::new(0.0, theta).exp() - 1.0) / Complex64::new(0.0, theta);
        assert!((v - exact).norm() < 1e-10);
    }
}
