//! Discrete Dirichlet Laplacian on the masked grid and Krylov solvers.
//!
//! The operator is the five-point `-Δ_h` on interior nodes. Where a stencil
//! arm leaves the domain, the boundary crossing is located on the level set
//! and the arm is shortened to `θh` (symmetric cut-cell treatment), which
//! keeps the matrix symmetric and the solution second-order accurate.

use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::point::Point;

pub const NONE: usize = usize::MAX;
const THETA_MIN: f64 = 1e-4;
const PAR_CHUNK: usize = 4096;

/// A stencil arm cut by the boundary.
#[derive(Debug, Clone, Copy)]
pub struct Cut {
    pub unknown: usize,
    /// `1 / (θ h²)`.
    pub weight: f64,
    pub point: Point,
}

#[derive(Debug, Clone)]
pub struct DirichletLaplacian {
    pub grid: GridSpec,
    /// Grid node of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown index of each grid node, `NONE` for exterior nodes.
    pub unknown_of: Vec<usize>,
    pub diag: Vec<f64>,
    pub nbrs: Vec<[usize; 4]>,
    pub cuts: Vec<Cut>,
}

impl DirichletLaplacian {
    pub fn new(domain: &Domain) -> Self {
        let grid = domain.grid;
        let h = grid.h;
        let ih2 = 1.0 / (h * h);
        let mut unknown_of = vec![NONE; grid.len()];
        let mut nodes = Vec::new();
        for k in 0..grid.len() {
            if domain.interior[k] {
                unknown_of[k] = nodes.len();
                nodes.push(k);
            }
        }
        let mut diag = vec![0.0; nodes.len()];
        let mut nbrs = vec![[NONE; 4]; nodes.len()];
        let mut cuts = Vec::new();
        let dirs: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        for (u, &k) in nodes.iter().enumerate() {
            let (i, j) = grid.ij(k);
            let p = grid.node(i, j);
            for (d, &(di, dj)) in dirs.iter().enumerate() {
                let ni = i as isize + di;
                let nj = j as isize + dj;
                let inside_grid =
                    ni >= 0 && nj >= 0 && (ni as usize) < grid.nx && (nj as usize) < grid.ny;
                let nk = if inside_grid {
                    grid.index(ni as usize, nj as usize)
                } else {
                    NONE
                };
                if nk != NONE && unknown_of[nk] != NONE {
                    nbrs[u][d] = unknown_of[nk];
                    diag[u] += ih2;
                } else {
                    let dir = Point::new(di as f64, dj as f64);
                    let theta = crossing_fraction(domain, p, dir * h).max(THETA_MIN);
                    let weight = ih2 / theta;
                    diag[u] += weight;
                    cuts.push(Cut {
                        unknown: u,
                        weight,
                        point: p + dir * (theta * h),
                    });
                }
            }
        }
        DirichletLaplacian {
            grid,
            nodes,
            unknown_of,
            diag,
            nbrs,
            cuts,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `y = A x` with `A = -Δ_h` and homogeneous boundary data.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ih2 = 1.0 / (self.grid.h * self.grid.h);
        y.par_chunks_mut(PAR_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PAR_CHUNK;
                for (o, yv) in chunk.iter_mut().enumerate() {
                    let u = base + o;
                    let mut acc = self.diag[u] * x[u];
                    for &nb in &self.nbrs[u] {
                        if nb != NONE {
                            acc -= ih2 * x[nb];
                        }
                    }
                    *yv = acc;
                }
            });
    }

    /// Boundary contribution `b` so that `A u - b` is `-Δ_h u` with
    /// Dirichlet data `g`.
    pub fn boundary_rhs(&self, g: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.n()];
        for c in &self.cuts {
            b[c.unknown] += c.weight * g(c.point);
        }
        b
    }

    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&k| values[k]).collect()
    }

    /// Writes unknowns into a full grid vector; exterior nodes get `fill`.
    pub fn scatter(&self, x: &[f64], fill: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.grid.len())
            .map(|k| match self.unknown_of[k] {
                NONE => fill(self.grid.node_k(k)),
                u => x[u],
            })
            .collect()
    }

    /// Solves `-Δ_h u = f` with `u = g` on the boundary.
    pub fn solve_dirichlet(
        &self,
        f: &[f64],
        g: impl Fn(Point) -> f64,
        rtol: f64,
    ) -> Result<(Vec<f64>, SolveStats)> {
        let mut b = self.boundary_rhs(g);
        for (bi, fi) in b.iter_mut().zip(f) {
            *bi += fi;
        }
        let mut x = vec![0.0; self.n()];
        let stats = pcg(
            |v, out| self.apply(v, out),
            &self.diag,
            &b,
            &mut x,
            rtol,
            20 * self.n().max(100),
        )?;
        Ok((x, stats))
    }

    /// Max-norm of `A u - b` for unknowns `u` and boundary data `g`.
    pub fn harmonic_residual(&self, u: &[f64], g: impl Fn(Point) -> f64) -> f64 {
        let b = self.boundary_rhs(g);
        let mut au = vec![0.0; self.n()];
        self.apply(u, &mut au);
        au.iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Fraction of the segment `p → p + step` before the level set changes sign.
fn crossing_fraction(domain: &Domain, p: Point, step: Point) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if domain.shape.level_set(p + step * mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual (true residual for CG, preconditioned for MINRES).
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Sequential on purpose: reductions must be bit-reproducible.
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// definite `A`, starting from the incoming `x`.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut stats = SolveStats::default();
    if !bnorm.is_finite() {
        return Err(Error::InvalidInput("right-hand side norm is not finite".into()));
    }
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(stats);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    stats.history.push(rel);
    while rel > rtol {
        if stats.iterations >= max_iter {
            return Err(Error::NotConverged {
                what: "conjugate gradient".into(),
                iterations: stats.iterations,
                residual: rel,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotConverged {
                what: "conjugate gradient (matrix not positive definite)".into(),
                iterations: stats.iterations,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        stats.iterations += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        stats.history.push(rel);
    }
    stats.relative_residual = rel;
    Ok(stats)
}

/// Preconditioned MINRES for symmetric (possibly indefinite) `A` with a
/// positive diagonal preconditioner. Starts from zero.
pub fn minres(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: &[f64],
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut stats = SolveStats::default();
    let mut r1 = b.to_vec();
    let mut y: Vec<f64> = r1.iter().zip(precond).map(|(r, m)| r / m).collect();
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return Ok((x, stats));
    }
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    stats.history.push(1.0);
    loop {
        if stats.iterations >= max_iter {
            return Err(Error::NotConverged {
                what: "MINRES".into(),
                iterations: stats.iterations,
                residual: phibar / beta1,
            });
        }
        stats.iterations += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut y);
        if stats.iterations >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        for i in 0..n {
            y[i] = r2[i] / precond[i];
        }
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        let rel = phibar / beta1;
        stats.history.push(rel);
        if rel <= rtol || beta == 0.0 {
            stats.relative_residual = rel;
            return Ok((x, stats));
        }
    }
}
