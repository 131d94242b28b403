//! Fixed-grid quadrature shared by the signal, control and noise stages.

use std::ops::{Add, Mul};

/// Abscissae and weights of the 8-point Gauss–Legendre rule on [-1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887),
    (-0.183_434_642_495_65, 0.362_683_783_378_362),
    (0.183_434_642_495_65, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Integrates `f` over `[a, b]` with a single 8-point Gauss–Legendre panel.
pub fn gauss_legendre<T, F>(a: f64, b: f64, mut f: F) -> T
where
    T: Add<Output = T> + Mul<f64, Output = T> + Default,
    F: FnMut(f64) -> T,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = T::default();
    for &(x, w) in GL8.iter() {
        acc = acc + f(mid + half * x) * w;
    }
    acc * half
}

/// Composite Gauss–Legendre over `panels` equal panels.
pub fn gauss_legendre_composite<T, F>(a: f64, b: f64, panels: usize, mut f: F) -> T
where
    T: Add<Output = T> + Mul<f64, Output = T> + Default,
    F: FnMut(f64) -> T,
{
    let h = (b - a) / panels as f64;
    let mut acc = T::default();
    for k in 0..panels {
        let lo = a + h * k as f64;
        acc = acc + gauss_legendre(lo, lo + h, &mut f);
    }
    acc
}

/// Composite Simpson rule for uniformly spaced samples.
///
/// An odd number of intervals is closed with Simpson's 3/8 rule on the
/// last three intervals. Two samples fall back to the trapezoid rule.
pub fn simpson<T>(samples: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let n = samples.len();
    match n {
        0 | 1 => T::default(),
        2 => (samples[0] + samples[1]) * (0.5 * h),
        3 => simpson_even(samples, h),
        4 => three_eighths(&samples[0..4], h),
        _ => {
            let intervals = n - 1;
            if intervals % 2 == 0 {
                simpson_even(samples, h)
            } else {
                simpson_even(&samples[..n - 3], h) + three_eighths(&samples[n - 4..], h)
            }
        }
    }
}

fn simpson_even<T>(samples: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let n = samples.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let mut odd = T::default();
    let mut even = T::default();
    for (i, &s) in samples.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd = odd + s;
        } else {
            even = even + s;
        }
    }
    (samples[0] + samples[n - 1] + odd * 4.0 + even * 2.0) * (h / 3.0)
}

fn three_eighths<T>(s: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    (s[0] + s[1] * 3.0 + s[2] * 3.0 + s[3]) * (3.0 * h / 8.0)
}

/// Simpson's rule on one interval given endpoint and midpoint values.
#[inline]
pub fn simpson_panel<T>(left: T, mid: T, right: T, h: f64) -> T
where
    T: Add<Output = T> + Mul<f64, Output = T>,
{
    (left + mid * 4.0 + right) * (h / 6.0)
}

/// Locates a root of `f` in `[a, b]` by bisection. `f(a)` and `f(b)` must
/// differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut a: f64, mut b: f64, mut f: F) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_degree_15() {
        let v: f64 = gauss_legendre(0.0, 2.0, |x| x.powi(15));
        assert_relative_eq!(v, 2f64.powi(16) / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn simpson_handles_both_parities() {
        for n in [3usize, 4, 5, 6, 65, 66] {
            let h = 1.0 / (n - 1) as f64;
            let s: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(3)).collect();
            assert_relative_eq!(simpson(&s, h), 0.25, max_relative = 1e-13);
        }
    }

    #[test]
    fn simpson_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let s: Vec<f64> = (0..n).map(|k| (k as f64 * h).exp()).collect();
            (simpson(&s, h) - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(33) / err(65);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn bisect_finds_cosine_root() {
        let r = bisect(0.0, 3.0, f64::cos);
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, max_relative = 1e-14);
    }
}
