//! Special functions and quadrature helpers: normalized sinc, Bessel J0/Y0,
//! Hankel H0^(1), Gauss–Legendre rules, pairwise summation.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};
#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Switch-over between the ascending series and the asymptotic expansion.
const BESSEL_SERIES_LIMIT: f64 = 8.0;

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let px = PI * x;
    // Exact zeros at nonzero integers instead of sin(nπ) round-off.
    if x.fract() == 0.0 {
        return 0.0;
    }
    px.sin() / px
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < BESSEL_SERIES_LIMIT {
        j0_series(x)
    } else {
        let (p, q) = hankel_pq(x);
        let chi = x - FRAC_PI_4;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Bessel function of the second kind, order zero (`x > 0`).
pub fn bessel_y0(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < BESSEL_SERIES_LIMIT {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            harmonic += 1.0 / kf;
            let contrib = -term * harmonic;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        (2.0 / PI) * (((0.5 * x).ln() + EULER_GAMMA) * j0_series(x) + sum)
    } else {
        let (p, q) = hankel_pq(x);
        let chi = x - FRAC_PI_4;
        (2.0 / PI / x).sqrt() * (p * chi.sin() + q * chi.cos())
    }
}

/// Hankel function of the first kind, order zero: `J0 + iY0`.
pub fn hankel1_0(x: f64) -> C64 {
    C64::new(bessel_j0(x), bessel_y0(x))
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel's asymptotic P0, Q0, truncated at the smallest term.
fn hankel_pq(x: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= -(odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if last < 1e-17 {
            break;
        }
    }
    (p, q)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut x, mut w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        *xi = mid + half * *xi;
        *wi *= half;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Pairwise (tree) summation; deterministic and accurate for long sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Complex pairwise summation.
pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    // Abramowitz & Stegun Table 9.1.
    const J0_TABLE: [(f64, f64); 5] = [
        (1.0, 0.765_197_686_557_966_6),
        (2.5, -0.048_383_776_468_197_98),
        (5.0, -0.177_596_771_314_338_3),
        (10.0, -0.245_935_764_451_348_3),
        (15.0, -0.014_224_472_826_780_773),
    ];
    const Y0_TABLE: [(f64, f64); 5] = [
        (1.0, 0.088_256_964_215_676_96),
        (2.5, 0.498_070_359_615_232_2),
        (5.0, -0.308_517_625_249_033_8),
        (10.0, 0.055_671_167_283_599_4),
        (15.0, 0.205_464_296_038_918_25),
    ];

    #[test]
    fn j0_matches_table() {
        for (x, v) in J0_TABLE {
            assert!((bessel_j0(x) - v).abs() < 1e-9, "J0({x}) = {}", bessel_j0(x));
        }
    }

    #[test]
    fn y0_matches_table() {
        for (x, v) in Y0_TABLE {
            assert!((bessel_y0(x) - v).abs() < 1e-9, "Y0({x}) = {}", bessel_y0(x));
        }
    }

    #[test]
    fn series_and_asymptotic_agree_at_switch() {
        let below = j0_series(8.0);
        let (p, q) = hankel_pq(8.0);
        let chi = 8.0 - FRAC_PI_4;
        let above = (2.0 / (PI * 8.0)).sqrt() * (p * chi.cos() - q * chi.sin());
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn hankel_large_argument_magnitude() {
        let x = 200.0;
        let mag = hankel1_0(x).norm();
        assert!((mag - (2.0 / (PI * x)).sqrt()).abs() < 1e-5 * mag);
    }

    #[test]
    fn wronskian_identity() {
        // J1 = -J0', Y1 = -Y0'; J1 Y0 - J0 Y1 = 2/(πx).
        for &x in &[0.5, 3.0, 7.9, 8.1, 20.0] {
            let h = 1e-5;
            let j1 = -(bessel_j0(x + h) - bessel_j0(x - h)) / (2.0 * h);
            let y1 = -(bessel_y0(x + h) - bessel_y0(x - h)) / (2.0 * h);
            let w = j1 * bessel_y0(x) - bessel_j0(x) * y1;
            assert!((w - 2.0 / (PI * x)).abs() < 1e-6, "x={x}: {w}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        // Degree 13 is the highest exactly integrated.
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_high_order_is_stable() {
        let (x, w) = gauss_legendre_on(256, 0.0, PI);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn sinc_exact_zeros() {
        assert_eq!(sinc(0.0), 1.0);
        for n in 1..10 {
            assert_eq!(sinc(n as f64), 0.0);
        }
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn pairwise_matches_naive_on_short_input() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
