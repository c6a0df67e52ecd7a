//! Reference values computed without the solver code paths, used by the
//! acceptance suite.

use std::f64::consts::PI;

use vortex_core::Point;

/// Dirichlet Green function of the unit disk by the image construction,
/// `G = (1/2π) ln(|y| |x - y*| / |x - y|)` with `y* = y/|y|²`.
pub fn disk_green(x: Point, y: Point) -> f64 {
    let r = y.norm();
    // |y| |x - y*| = | |y| x - y/|y| |, which tends to 1 as y → 0.
    let image = if r < 1e-300 {
        1.0
    } else {
        (x * r - y * (1.0 / r)).norm()
    };
    (image / x.dist(y)).ln() / (2.0 * PI)
}

/// `dW/ds` for two unit vortices at `±(s, 0)` in the unit disk with the
/// background stream function `c (x² - y²)`.
pub fn strain_pair_slope(s: f64, c: f64) -> f64 {
    (2.0 * s / (1.0 + s * s) - 1.0 / s - 2.0 * s / (1.0 - s * s)) / (2.0 * PI) + 4.0 * c * s
}

/// Every sign change of `f` on `n` uniform subintervals of `[a, b]`,
/// refined by bisection to machine precision.
pub fn scan_roots(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let at = |k: usize| a + (b - a) * k as f64 / n as f64;
    for k in 0..n {
        let (mut lo, mut hi) = (at(k), at(k + 1));
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi >= 0.0 {
            continue;
        }
        let up = flo < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) < 0.0) == up {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}
