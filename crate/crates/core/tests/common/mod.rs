//! Independent reference values shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bessel functions `J0(x)` and `Y0(x)` for `x > 0`: power series below 12,
/// Hankel's asymptotic expansion above.
pub fn bessel_j0_y0(x: f64) -> (f64, f64) {
    assert!(x > 0.0);
    if x < 12.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut j0 = 1.0;
        let mut harmonic = 0.0;
        let mut ysum = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            harmonic += 1.0 / kf;
            j0 += term;
            ysum -= harmonic * term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        let y0 = 2.0 / PI * ((0.5 * x).ln() + EULER_GAMMA) * j0 + 2.0 / PI * ysum;
        (j0, y0)
    } else {
        // |a_k| = prod_{m=1..k} (2m-1)^2 / (k! 8^k); P and Q alternate from +1 and -1/(8x).
        let mut p = 0.0;
        let mut qs = 0.0;
        let mut a = 1.0;
        for k in 0..30 {
            let term = a / x.powi(k);
            match k % 4 {
                0 => p += term,
                1 => qs -= term,
                2 => p -= term,
                _ => qs += term,
            }
            let m = (2 * k + 1) as f64;
            let next = a * m * m / ((k + 1) as f64 * 8.0);
            if next / x.powi(k + 1) > term.abs() || term.abs() < 1e-17 {
                break;
            }
            a = next;
        }
        let chi = x - 0.25 * PI;
        let s = (2.0 / (PI * x)).sqrt();
        (
            s * (p * chi.cos() - qs * chi.sin()),
            s * (p * chi.sin() + qs * chi.cos()),
        )
    }
}

/// Outgoing free-space Green's function `(i/4) H0(kr)` for `e^{-iωt}`.
pub fn green_2d(k: f64, r: f64) -> Complex64 {
    let (j0, y0) = bessel_j0_y0(k * r);
    Complex64::new(0.0, 0.25) * Complex64::new(j0, y0)
}

#[test]
fn bessel_reference_points() {
    // Tabulated values.
    let cases = [
        (1.0, 0.765_197_686_557_966_6, 0.088_256_964_215_676_96),
        (2.404_825_557_695_773, 0.0, 0.509_924_383_448_479_2),
        (5.0, -0.177_596_771_314_338_3, -0.308_517_625_249_033_8),
        (10.0, -0.245_935_764_451_348_3, 0.055_671_167_283_599_4),
        (30.0, -0.086_367_983_581_040_2, -0.117_295_731_686_663_98),
    ];
    for (x, j, y) in cases {
        let (j0, y0) = bessel_j0_y0(x);
        assert!((j0 - j).abs() < 1e-10, "J0({x}) = {j0}");
        assert!((y0 - y).abs() < 1e-10, "Y0({x}) = {y0}");
    }
    // Continuity across the switch point.
    let (a, b) = bessel_j0_y0(12.0 - 1e-9);
    let (c, d) = bessel_j0_y0(12.0);
    assert!((a - c).abs() < 1e-9 && (b - d).abs() < 1e-9);
}
