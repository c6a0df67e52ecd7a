//! Gauss-Legendre rules and polar quadrature on disks and annuli.

use std::f64::consts::PI;

use crate::point::Point;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (t * p - p0) / (t * t - 1.0);
    (p, dp)
}

/// Composite Gauss-Legendre rule over the radial breakpoints `radii`
/// (increasing, starting at the inner radius) and the periodic trapezoid
/// rule in angle. Integrates `f` over the annular region around `center`.
#[derive(Debug, Clone)]
pub struct PolarRule {
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl PolarRule {
    pub fn new(radii: &[f64], panels_per_interval: usize, order: usize, n_theta: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let dtheta = 2.0 * PI / n_theta as f64;
        for win in radii.windows(2) {
            let (a, b) = (win[0], win[1]);
            let hp = (b - a) / panels_per_interval as f64;
            for k in 0..panels_per_interval {
                let lo = a + k as f64 * hp;
                for (x, w) in gx.iter().zip(&gw) {
                    let r = lo + 0.5 * hp * (x + 1.0);
                    let wr = 0.5 * hp * w * r * dtheta;
                    for j in 0..n_theta {
                        nodes.push((r, (j as f64 + 0.5) * dtheta));
                        weights.push(wr);
                    }
                }
            }
        }
        PolarRule { nodes, weights }
    }

    pub fn integrate(&self, center: Point, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&(r, t), w)| w * f(center + Point::polar(r, t)))
            .sum()
    }
}
