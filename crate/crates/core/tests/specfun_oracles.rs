//! Scaled Bessel functions against independent references: 50-digit
//! values produced by `oracles/golden.py`, and trapezoidal quadrature of
//! the integral representations (spectrally accurate for these integrands).

use std::f64::consts::PI;

use mbres_core::specfun::{bessel_i0_scaled, bessel_k0_scaled, sinh_k0};

/// (x, e^{-x} I0, e^{x} K0, sinh K0) at 50 digits, rounded to 20.
const GOLDEN: [(f64, f64, f64, f64); 11] = [
    (1e-6, 0.99999900000074999958, 13.931456005075458763, 0.00001393144207362874132),
    (0.1, 0.90710092578230109644, 2.6823261022628943831, 0.24311161627823354292),
    (1.0, 0.4657596075936404365, 1.1444630798068950147, 0.49478842237369140122),
    (2.0, 0.30850832255367103953, 0.84156821507077141792, 0.41307717777164929323),
    (2.5, 0.27004644161220273956, 0.75954869032809957869, 0.3772154457547220317),
    (7.0, 0.15373774467288124815, 0.46584509609301588792, 0.23292235436471991651),
    (10.0, 0.12783333716342860732, 0.39163193443659866573, 0.1958159668146925427),
    (30.0, 0.073145946482237293929, 0.22788666561625373042, 0.11394333280812686521),
    (50.0, 0.05656162664745419253, 0.17680715585742933811, 0.088403577928714669056),
    (1000.0, 0.012617240455891256586, 0.039628321600754217115, 0.019814160800377108557),
    (1e5, 0.0012615678379767767669, 0.0039633223434747558606, 0.0019816611717373779303),
];

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn i0_scaled_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = PI / n as f64;
    let f = |th: f64| (x * (th.cos() - 1.0)).exp();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for k in 1..n {
        s += f(k as f64 * h);
    }
    s * h / PI
}

fn k0_scaled_quadrature(x: f64) -> f64 {
    let h = 0.002;
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp();
    let mut s = 0.5 * f(0.0);
    let mut k = 1;
    loop {
        let v = f(k as f64 * h);
        s += v;
        if v < 1e-300 || k > 100_000 {
            break;
        }
        k += 1;
    }
    s * h
}

#[test]
fn golden_values_to_1e10() {
    for &(x, i0e, k0e, shk0) in &GOLDEN {
        let got = bessel_i0_scaled(x).unwrap();
        assert!(rel(got, i0e) < 1e-10, "i0e({x}) = {got}, want {i0e}");
        let got = bessel_k0_scaled(x).unwrap();
        assert!(rel(got, k0e) < 1e-10, "k0e({x}) = {got}, want {k0e}");
        let got = sinh_k0(x).unwrap();
        assert!(rel(got, shk0) < 1e-10, "sinh_k0({x}) = {got}, want {shk0}");
    }
}

#[test]
fn quadrature_oracle_over_range() {
    let mut x = 1e-6;
    while x <= 1000.0 {
        let got = bessel_i0_scaled(x).unwrap();
        assert!(rel(got, i0_scaled_quadrature(x)) < 1e-10, "i0e at {x}");
        let got = bessel_k0_scaled(x).unwrap();
        assert!(rel(got, k0_scaled_quadrature(x)) < 1e-10, "k0e at {x}");
        x *= 1.7;
    }
}

#[test]
fn small_argument_log_expansion() {
    let expected = -(1e-6f64 / 2.0).ln() - 0.577_215_664_901_532_9;
    let got = bessel_k0_scaled(1e-6).unwrap();
    // e^x I0(x) corrections are O(x); compare at that level.
    assert!(rel(got, expected) < 2e-6);
    assert!((bessel_i0_scaled(1e-12).unwrap() - 1.0).abs() < 1e-11);
}

#[test]
fn large_argument_leading_terms() {
    let x = 1000.0;
    assert!(rel(bessel_i0_scaled(x).unwrap(), 1.0 / (2.0 * PI * x).sqrt()) < 2e-4);
    assert!(rel(bessel_k0_scaled(x).unwrap(), (PI / (2.0 * x)).sqrt()) < 2e-4);
    assert!(rel(sinh_k0(x).unwrap(), (PI / (8.0 * x)).sqrt()) < 2e-4);
}

#[test]
fn asymptotic_invariants() {
    let mut prev = f64::INFINITY;
    let mut x = 50.0;
    while x <= 1e5 {
        let dev_k = (sinh_k0(x).unwrap() / (PI / (8.0 * x)).sqrt() - 1.0).abs();
        assert!(dev_k < prev, "sinh_k0 deviation not decreasing at {x}");
        assert!(dev_k < 1e-2);
        prev = dev_k;
        let dev_i = (bessel_i0_scaled(x).unwrap() * (2.0 * PI * x).sqrt() - 1.0).abs();
        assert!(dev_i < 1e-2);
        x *= 1.25;
    }
}

#[test]
fn naive_products_agree_where_safe() {
    let mut x: f64 = 0.1;
    while x <= 30.0 {
        let naive = x.sinh() * bessel_k0_scaled(x).unwrap() * (-x).exp();
        assert!(rel(sinh_k0(x).unwrap(), naive) < 1e-12, "at {x}");
        x *= 1.1;
    }
}
