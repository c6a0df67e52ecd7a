//! Radial ground state of `-Δφ = φ^p` in the unit disk with `φ = 0` on the
//! boundary.
//!
//! The shooting problem `ψ'' + ψ'/r + ψ^p = 0`, `ψ(0) = 1`, is integrated
//! with an adaptive Dormand-Prince 5(4) scheme up to the first zero `r₀`,
//! then rescaled by `φ(ρ) = r₀^{2/(p-1)} ψ(r₀ ρ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_R_MAX: f64 = 50.0;
/// Taylor-series start radius on the shooting scale.
const R_START: f64 = 1e-3;
/// Cap on the shooting-scale step so Hermite interpolation stays accurate.
const H_MAX: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub r_max: f64,
    /// Extra tightening of the integration tolerance by `32^refine`.
    pub refine: u32,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            r_max: DEFAULT_R_MAX,
            refine: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub p: f64,
    /// First zero of the shooting solution with unit central height.
    pub r0: f64,
    /// Samples `(r, φ(r), φ'(r))` on `[0, 1]`, increasing in `r`.
    pub samples: Vec<[f64; 3]>,
    pub phi_prime_1: f64,
    /// `∫_{B₁} φ^p`.
    pub i_p: f64,
    /// `∫_{B₁} φ^{p+1}`.
    pub i_p1: f64,
    pub pohozaev_residuals: [f64; 2],
    pub steps: usize,
}

impl ProfileSolution {
    pub fn phi0(&self) -> f64 {
        self.samples[0][1]
    }
}

type State = [f64; 4];

fn rhs(p: f64, r: f64, y: &State) -> State {
    let psi = y[0].max(0.0);
    let pp = psi.powf(p);
    [y[1], -y[1] / r - pp, 2.0 * PI * r * pp, 2.0 * PI * r * pp * psi]
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: fifth-order solution and error estimate.
fn dp_step(p: f64, r: f64, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 4]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for i in 0..4 {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        k[s] = rhs(p, r + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; 4];
    for s in 0..7 {
        for i in 0..4 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

pub fn solve_profile(p: f64, tol: f64) -> Result<ProfileSolution> {
    solve_profile_with(p, tol, ProfileOptions::default())
}

pub fn solve_profile_with(p: f64, tol: f64, opts: ProfileOptions) -> Result<ProfileSolution> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidInput(format!("exponent p must exceed 1, got {p}")));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidInput(format!("tolerance must lie in (0, 1e-4], got {tol}")));
    }
    let rtol = (tol * 1e-4 / 32f64.powi(opts.refine as i32)).max(1e-14);
    let atol = rtol;

    let r = R_START;
    let mut y: State = [
        1.0 - r * r / 4.0 + p * r.powi(4) / 64.0,
        -r / 2.0 + p * r.powi(3) / 16.0,
        PI * r * r - p * PI * r.powi(4) / 8.0,
        PI * r * r - (p + 1.0) * PI * r.powi(4) / 8.0,
    ];
    let mut r = r;
    let mut raw: Vec<[f64; 3]> = vec![[0.0, 1.0, 0.0], [r, y[0], y[1]]];
    let mut h: f64 = 1e-3;
    let mut steps = 0usize;
    let root = loop {
        if r >= opts.r_max {
            return Err(Error::NoZeroCrossing { r_max: opts.r_max });
        }
        h = h.min(H_MAX).min(opts.r_max - r + 1e-12);
        let (y5, err) = dp_step(p, r, &y, h);
        let en = (0..4)
            .map(|i| err[i].abs() / (atol + rtol * y[i].abs().max(y5[i].abs())))
            .fold(0.0, f64::max);
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            if h < 1e-14 {
                return Err(Error::ToleranceNotMet(format!(
                    "profile step size underflow at r = {r}"
                )));
            }
            continue;
        }
        steps += 1;
        if y5[0] <= 0.0 {
            break polish_root(p, r, &y, h)?;
        }
        r += h;
        y = y5;
        raw.push([r, y[0], y[1]]);
        h *= if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
        };
    };
    let (r0, y0) = root;
    raw.push([r0, 0.0, y0[1]]);

    let lambda = r0.powf(2.0 / (p - 1.0));
    let samples: Vec<[f64; 3]> = raw
        .iter()
        .map(|s| [s[0] / r0, lambda * s[1], lambda * r0 * s[2]])
        .collect();
    let phi_prime_1 = lambda * r0 * y0[1];
    let i_p = r0.powf(2.0 / (p - 1.0)) * y0[2];
    let i_p1 = r0.powf(4.0 / (p - 1.0)) * y0[3];
    let poh1 = (i_p1 - PI * (p + 1.0) / 2.0 * phi_prime_1 * phi_prime_1).abs() / i_p1;
    let poh0 = (i_p - 2.0 * PI * phi_prime_1.abs()).abs() / i_p;
    if poh0.max(poh1) > 1e-6 {
        return Err(Error::ToleranceNotMet(format!(
            "Pohozaev residuals {poh0:e}, {poh1:e} exceed 1e-6"
        )));
    }
    Ok(ProfileSolution {
        p,
        r0,
        samples,
        phi_prime_1,
        i_p,
        i_p1,
        pohozaev_residuals: [poh0, poh1],
        steps,
    })
}

/// Newton iteration on the step length so that a single step from `(r, y)`
/// lands on `ψ = 0`.
fn polish_root(p: f64, r: f64, y: &State, h: f64) -> Result<(f64, State)> {
    let (y1, _) = dp_step(p, r, y, h);
    // Secant start from the bracketing step.
    let mut d = h * y[0] / (y[0] - y1[0]);
    for _ in 0..50 {
        let (yd, _) = dp_step(p, r, y, d);
        let step = yd[0] / yd[1];
        d -= step;
        if step.abs() <= 1e-15 * (r + d) {
            let (yd, _) = dp_step(p, r, y, d);
            return Ok((r + d, yd));
        }
    }
    Err(Error::ToleranceNotMet("profile zero crossing did not polish".into()))
}

/// Value and radial derivative at `r ≥ 0`; for `r > 1` the C¹ logarithmic
/// continuation `(φ'(1) ln r, φ'(1)/r)`.
pub fn eval_profile(sol: &ProfileSolution, r: f64) -> (f64, f64) {
    let r = r.abs();
    if r > 1.0 {
        return (sol.phi_prime_1 * r.ln(), sol.phi_prime_1 / r);
    }
    let s = &sol.samples;
    let k = match s.binary_search_by(|v| v[0].partial_cmp(&r).unwrap()) {
        Ok(k) => return (s[k][1], s[k][2]),
        Err(k) => k.clamp(1, s.len() - 1) - 1,
    };
    let (a, b) = (s[k], s[k + 1]);
    let dr = b[0] - a[0];
    let t = (r - a[0]) / dr;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * a[1] + h10 * dr * a[2] + h01 * b[1] + h11 * dr * b[2];
    let d00 = (6.0 * t2 - 6.0 * t) / dr;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / dr;
    let d11 = 3.0 * t2 - 2.0 * t;
    let d = d00 * a[1] + d10 * a[2] + d01 * b[1] + d11 * b[2];
    (v, d)
}
