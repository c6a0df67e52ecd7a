//! Kirchhoff-Routh function `W`, the reduced function `Φ`, and their
//! critical points.
//!
//! `W(Z) = ½ Σ_{i≠j} κ_i κ_j G(z_i, z_j) - ½ Σ κ_i² h(z_i, z_i) + Σ κ_i ψ₀(z_i)`
//! with `h` the regular part returned by [`PotentialEvaluator::robin`]. With
//! this sign `Φ + 4π² W = Σ π κ_i² ln R` holds identically.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::potential::{Backend, BackgroundFlow, PotentialEvaluator};

/// Exponent `L̄` of the separation floor `|z_i - z_j| ≥ ϱ^L̄`.
pub const L_BAR: f64 = 2.0;

/// How the subdomains `Ω_j` are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    /// Disks of radius `min(d(z_j, ∂Ω), ½ min_{i≠j} |z_i - z_j|) / 2`.
    #[default]
    Disks,
    /// Disks with explicit radii.
    DiskRadii { radii: Vec<f64> },
    /// Voronoi cells of the positions, shrunk by `gap` on each side of every
    /// bisector.
    Voronoi { gap: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexConfig {
    pub kappa: Vec<f64>,
    pub z: Vec<Point>,
    #[serde(default)]
    pub masks: MaskSpec,
    /// Separation floor `ϱ`; `None` means `0.1 · inradius`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_true")]
    pub use_masks: bool,
}

fn default_true() -> bool {
    true
}

impl VortexConfig {
    pub fn new(kappa: Vec<f64>, z: Vec<Point>) -> Self {
        VortexConfig {
            kappa,
            z,
            masks: MaskSpec::Disks,
            rho: None,
            use_masks: true,
        }
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn with_positions(&self, z: Vec<Point>) -> Self {
        VortexConfig {
            z,
            ..self.clone()
        }
    }

    pub fn rho(&self, domain: &Domain) -> f64 {
        self.rho.unwrap_or(0.1 * domain.inradius)
    }

    /// Checks shape, positivity and the admissibility constraints.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.z.is_empty() {
            return Err(Error::InvalidInput("at least one vortex is required".into()));
        }
        if self.kappa.len() != self.z.len() {
            return Err(Error::InvalidInput(format!(
                "{} strengths for {} positions",
                self.kappa.len(),
                self.z.len()
            )));
        }
        if let Some(k) = self.kappa.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::InvalidInput(format!("strength {k} is not positive")));
        }
        if !self.use_masks {
            let k0 = self.kappa[0];
            if self.kappa.iter().any(|k| (k - k0).abs() > 1e-12 * k0) {
                return Err(Error::InvalidInput(
                    "running without masks needs equal strengths".into(),
                ));
            }
        }
        self.check_admissible(domain)?;
        if let MaskSpec::DiskRadii { radii } = &self.masks {
            if radii.len() != self.m() {
                return Err(Error::InvalidInput("one mask radius per vortex".into()));
            }
        }
        Ok(())
    }

    pub fn check_admissible(&self, domain: &Domain) -> Result<()> {
        check_positions(domain, &self.z, self.rho(domain))
    }

    /// Radii of the disk masks (for disk-type masks).
    pub fn mask_radii(&self, domain: &Domain) -> Vec<f64> {
        match &self.masks {
            MaskSpec::DiskRadii { radii } => radii.clone(),
            _ => (0..self.m())
                .map(|j| {
                    let db = domain.boundary_distance(self.z[j]);
                    let sep = (0..self.m())
                        .filter(|&i| i != j)
                        .map(|i| self.z[i].dist(self.z[j]))
                        .fold(f64::INFINITY, f64::min);
                    0.5 * db.min(0.5 * sep)
                })
                .collect(),
        }
    }

    /// Index of the subdomain containing `p`, if any. Without masks every
    /// point of the domain belongs to subdomain 0.
    pub fn mask_of(&self, domain: &Domain, radii: &[f64], p: Point) -> Option<usize> {
        if !self.use_masks {
            return Some(0);
        }
        match &self.masks {
            MaskSpec::Disks | MaskSpec::DiskRadii { .. } => {
                (0..self.m()).find(|&j| p.dist(self.z[j]) < radii[j])
            }
            MaskSpec::Voronoi { gap } => {
                if !domain.contains(p) {
                    return None;
                }
                let mut d: Vec<(f64, usize)> =
                    self.z.iter().enumerate().map(|(j, z)| (p.dist(*z), j)).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if d.len() == 1 {
                    return Some(d[0].1);
                }
                // Distance to the bisector between the nearest two positions.
                let (a, b) = (self.z[d[0].1], self.z[d[1].1]);
                let n = (b - a) * (1.0 / a.dist(b));
                let mid = (a + b) * 0.5;
                if (mid - p).dot(n) > *gap {
                    Some(d[0].1)
                } else {
                    None
                }
            }
        }
    }

    /// Checks disjointness and containment of disk masks.
    pub fn check_masks(&self, domain: &Domain) -> Result<()> {
        if !self.use_masks || matches!(self.masks, MaskSpec::Voronoi { .. }) {
            return Ok(());
        }
        let r = self.mask_radii(domain);
        for j in 0..self.m() {
            if !(r[j] > 0.0) || r[j] >= domain.boundary_distance(self.z[j]) {
                return Err(Error::InvalidInput(format!(
                    "mask {j} of radius {} is not compactly inside the domain",
                    r[j]
                )));
            }
            for i in 0..j {
                if r[i] + r[j] >= self.z[i].dist(self.z[j]) {
                    return Err(Error::InvalidInput(format!("masks {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

fn check_positions(domain: &Domain, z: &[Point], rho: f64) -> Result<()> {
    for (j, zj) in z.iter().enumerate() {
        if !zj.is_finite() || !domain.contains(*zj) {
            return Err(Error::Inadmissible(format!(
                "z_{j} = ({}, {}) is outside the domain",
                zj.x, zj.y
            )));
        }
        let d = domain.boundary_distance(*zj);
        if d < rho {
            return Err(Error::Inadmissible(format!(
                "d(z_{j}, boundary) = {d:.3e} < rho = {rho:.3e}"
            )));
        }
        for (i, zi) in z.iter().enumerate().take(j) {
            let sep = zi.dist(*zj);
            if sep < rho.powf(L_BAR) {
                return Err(Error::Inadmissible(format!(
                    "|z_{i} - z_{j}| = {sep:.3e} < rho^L = {:.3e}",
                    rho.powf(L_BAR)
                )));
            }
        }
    }
    Ok(())
}

/// The Kirchhoff-Routh function.
pub fn eval_w(ev: &PotentialEvaluator, flow: &BackgroundFlow, cfg: &VortexConfig) -> Result<f64> {
    cfg.check_admissible(&ev.domain)?;
    w_unchecked(ev, flow, &cfg.kappa, &cfg.z)
}

fn w_unchecked(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    kappa: &[f64],
    z: &[Point],
) -> Result<f64> {
    let m = z.len();
    let mut w = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                w += 0.5 * kappa[i] * kappa[j] * ev.green(z[i], z[j])?;
            }
        }
        w -= 0.5 * kappa[i] * kappa[i] * ev.robin(z[i])?;
        w += kappa[i] * flow.psi0_at(z[i]);
    }
    Ok(w)
}

/// The reduced function
/// `Φ = Σ 4π² κ_i q(z_i) + Σ π κ_i² g(z_i, z_i) - Σ_{j≠i} π κ_i κ_j Ḡ(z_j, z_i)`.
pub fn eval_phi(ev: &PotentialEvaluator, flow: &BackgroundFlow, cfg: &VortexConfig) -> Result<f64> {
    cfg.check_admissible(&ev.domain)?;
    phi_unchecked(ev, flow, &cfg.kappa, &cfg.z)
}

fn phi_unchecked(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    kappa: &[f64],
    z: &[Point],
) -> Result<f64> {
    let m = z.len();
    let mut phi = 0.0;
    for i in 0..m {
        phi += 4.0 * PI * PI * kappa[i] * flow.q_at(z[i]);
        phi += PI * kappa[i] * kappa[i] * ev.g(z[i], z[i])?;
        for j in 0..m {
            if j != i {
                phi -= PI * kappa[i] * kappa[j] * ev.g_bar(z[j], z[i])?;
            }
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    W,
    Phi,
}

/// Default finite-difference step: two grid cells.
pub fn default_fd_step(ev: &PotentialEvaluator) -> f64 {
    2.0 * ev.domain.grid.h
}

fn step_or_default(ev: &PotentialEvaluator, h: f64) -> f64 {
    if h > 0.0 {
        h
    } else {
        default_fd_step(ev)
    }
}

fn flatten(z: &[Point]) -> Vec<f64> {
    z.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(v: &[f64]) -> Vec<Point> {
    v.chunks(2).map(|c| Point::new(c[0], c[1])).collect()
}

fn objective_value(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    kappa: &[f64],
    obj: Objective,
    z: &[Point],
) -> Result<f64> {
    match obj {
        Objective::W => w_unchecked(ev, flow, kappa, z),
        Objective::Phi => phi_unchecked(ev, flow, kappa, z),
    }
}

/// Gradient of `W` in `(x_1, y_1, …, x_m, y_m)`: analytic on the disk
/// backend, central differences with step `h_fd` otherwise. A step `<= 0`
/// selects [`default_fd_step`].
pub fn grad_w(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    h_fd: f64,
) -> Result<Vec<f64>> {
    cfg.check_admissible(&ev.domain)?;
    gradient(ev, flow, cfg, Objective::W, &cfg.z, h_fd)
}

pub fn grad_phi(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    h_fd: f64,
) -> Result<Vec<f64>> {
    cfg.check_admissible(&ev.domain)?;
    gradient(ev, flow, cfg, Objective::Phi, &cfg.z, h_fd)
}

fn gradient(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    obj: Objective,
    z: &[Point],
    h_fd: f64,
) -> Result<Vec<f64>> {
    match ev.backend {
        Backend::AnalyticDisk => analytic_gradient(ev, flow, &cfg.kappa, obj, z),
        Backend::GridHarmonic => fd_gradient(ev, flow, cfg, obj, z, step_or_default(ev, h_fd)),
    }
}

fn analytic_gradient(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    kappa: &[f64],
    obj: Objective,
    z: &[Point],
) -> Result<Vec<f64>> {
    let m = z.len();
    let mut out = Vec::with_capacity(2 * m);
    for k in 0..m {
        let mut g = flow.grad_psi0_at(z[k]) * kappa[k] - ev.grad_robin(z[k])? * (0.5 * kappa[k] * kappa[k]);
        if obj == Objective::Phi {
            // ∂Φ/∂z_k computed from its own definition.
            let mut gp = flow.grad_psi0_at(z[k]) * (-4.0 * PI * PI * kappa[k])
                + ev.grad_robin(z[k])? * (2.0 * PI * PI * kappa[k] * kappa[k]);
            for j in 0..m {
                if j != k {
                    // ∇_x Ḡ(x, z) = -(x - z)/|x - z|² - 2π ∇_x h(x, z)
                    let d = z[k] - z[j];
                    let gbar = d * (-1.0 / d.norm_sq()) - ev.grad_regular_x(z[k], z[j])? * (2.0 * PI);
                    gp = gp - gbar * (2.0 * PI * kappa[k] * kappa[j]);
                }
            }
            out.extend([gp.x, gp.y]);
            continue;
        }
        for j in 0..m {
            if j != k {
                g = g + ev.grad_green_x(z[k], z[j])? * (kappa[k] * kappa[j]);
            }
        }
        out.extend([g.x, g.y]);
    }
    Ok(out)
}

fn fd_gradient(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    obj: Objective,
    z: &[Point],
    h: f64,
) -> Result<Vec<f64>> {
    let base = flatten(z);
    let rho = cfg.rho(&ev.domain);
    let mut out = vec![0.0; base.len()];
    for (c, o) in out.iter_mut().enumerate() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[c] += h;
        minus[c] -= h;
        let (zp, zm) = (unflatten(&plus), unflatten(&minus));
        check_positions(&ev.domain, &zp, rho)?;
        check_positions(&ev.domain, &zm, rho)?;
        *o = (objective_value(ev, flow, &cfg.kappa, obj, &zp)?
            - objective_value(ev, flow, &cfg.kappa, obj, &zm)?)
            / (2.0 * h);
    }
    Ok(out)
}

/// Symmetric Hessian: central differences of the analytic gradient on the
/// disk backend, second differences of the objective otherwise.
pub fn hessian(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    obj: Objective,
    h_fd: f64,
) -> Result<DMatrix<f64>> {
    let z = &cfg.z;
    let base = flatten(z);
    let n = base.len();
    let rho = cfg.rho(&ev.domain);
    let mut hm = DMatrix::zeros(n, n);
    match ev.backend {
        Backend::AnalyticDisk => {
            let e = 1e-5 * ev.domain.diameter;
            for c in 0..n {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[c] += e;
                minus[c] -= e;
                let (zp, zm) = (unflatten(&plus), unflatten(&minus));
                check_positions(&ev.domain, &zp, rho)?;
                check_positions(&ev.domain, &zm, rho)?;
                let gp = analytic_gradient(ev, flow, &cfg.kappa, obj, &zp)?;
                let gm = analytic_gradient(ev, flow, &cfg.kappa, obj, &zm)?;
                for r in 0..n {
                    hm[(r, c)] = (gp[r] - gm[r]) / (2.0 * e);
                }
            }
        }
        Backend::GridHarmonic => {
            let h = step_or_default(ev, h_fd);
            let f = |v: &[f64]| -> Result<f64> {
                let zz = unflatten(v);
                check_positions(&ev.domain, &zz, rho)?;
                objective_value(ev, flow, &cfg.kappa, obj, &zz)
            };
            let f0 = f(&base)?;
            for a in 0..n {
                for b in a..n {
                    let val = if a == b {
                        let mut p = base.clone();
                        let mut m = base.clone();
                        p[a] += h;
                        m[a] -= h;
                        (f(&p)? - 2.0 * f0 + f(&m)?) / (h * h)
                    } else {
                        let shift = |sa: f64, sb: f64| {
                            let mut v = base.clone();
                            v[a] += sa * h;
                            v[b] += sb * h;
                            v
                        };
                        (f(&shift(1.0, 1.0))? - f(&shift(1.0, -1.0))? - f(&shift(-1.0, 1.0))?
                            + f(&shift(-1.0, -1.0))?)
                            / (4.0 * h * h)
                    };
                    hm[(a, b)] = val;
                    hm[(b, a)] = val;
                }
            }
        }
    }
    Ok((&hm + hm.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NondegenerateMin,
    NondegenerateMax,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub z: Vec<Point>,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub objective: Objective,
    pub z_star: Vec<Point>,
    pub value: f64,
    pub grad_norm: f64,
    /// Full Hessian spectrum, ascending.
    pub hessian_eigs: Vec<f64>,
    /// Spectrum used for classification, with the rotation direction removed
    /// when the configuration lies on a rotation orbit.
    pub transversal_eigs: Vec<f64>,
    pub rotation_orbit: bool,
    pub class: Classification,
    /// Hessian nondegeneracy, the operational meaning of stability here.
    pub stable: bool,
    pub iterations: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalOptions {
    pub objective: Objective,
    /// Gradient-norm tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference step for the grid backend; `None` picks two cells.
    pub h_fd: Option<f64>,
    /// Relative eigenvalue threshold for degeneracy.
    pub eig_tol: f64,
    pub initial_radius: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            objective: Objective::W,
            tol: 1e-10,
            max_iter: 100,
            h_fd: None,
            eig_tol: 1e-6,
            initial_radius: 0.1,
        }
    }
}

/// Unit tangent of the rotation orbit through `Z`, if the problem is
/// rotation invariant and `Z` is not a fixed point.
fn rotation_direction(ev: &PotentialEvaluator, flow: &BackgroundFlow, z: &[Point]) -> Option<DVector<f64>> {
    let c = ev.domain.rotation_center()?;
    if !flow.is_zero {
        return None;
    }
    let t = DVector::from_vec(z.iter().flat_map(|p| {
        let q = (*p - c).perp();
        [q.x, q.y]
    }).collect());
    let n = t.norm();
    if n < 1e-6 * ev.domain.diameter {
        None
    } else {
        Some(t / n)
    }
}

/// Damped Newton iteration on the gradient with an eigenvalue-based
/// pseudo-inverse and a trust region.
pub fn find_critical(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    seed: &[Point],
    opts: &CriticalOptions,
) -> Result<CriticalPoint> {
    let rho = cfg.rho(&ev.domain);
    check_positions(&ev.domain, seed, rho)?;
    let h_fd = opts.h_fd.unwrap_or_else(|| default_fd_step(ev));
    let obj = opts.objective;
    let mut z = seed.to_vec();
    let mut radius = opts.initial_radius * ev.domain.diameter;
    let mut trajectory = Vec::new();
    let grad_at = |z: &[Point]| gradient(ev, flow, &cfg.with_positions(z.to_vec()), obj, z, h_fd);
    let mut g = DVector::from_vec(grad_at(&z)?);
    let mut iterations = 0;
    loop {
        let value = objective_value(ev, flow, &cfg.kappa, obj, &z)?;
        trajectory.push(TrajectoryPoint {
            iteration: iterations,
            z: z.clone(),
            value,
            grad_norm: g.norm(),
        });
        if g.norm() <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                what: "critical point search".into(),
                iterations,
                residual: g.norm(),
            });
        }
        iterations += 1;
        let hm = hessian(ev, flow, &cfg.with_positions(z.clone()), obj, h_fd)?;
        let eig = SymmetricEigen::new(hm);
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut step = DVector::zeros(g.len());
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() > 1e-10 * lmax.max(1e-300) {
                let v = eig.eigenvectors.column(k);
                step -= v * (v.dot(&g) / lam);
            }
        }
        if let Some(t) = rotation_direction(ev, flow, &z) {
            let along = t.dot(&step);
            step -= &t * along;
        }
        loop {
            let norm = step.norm();
            let scaled = if norm > radius { &step * (radius / norm) } else { step.clone() };
            let cand: Vec<Point> = z
                .iter()
                .enumerate()
                .map(|(i, p)| *p + Point::new(scaled[2 * i], scaled[2 * i + 1]))
                .collect();
            let ok = check_positions(&ev.domain, &cand, rho).is_ok();
            if ok {
                let gc = match grad_at(&cand) {
                    Ok(v) => DVector::from_vec(v),
                    // The difference stencil left the admissible set.
                    Err(Error::Inadmissible(_)) => DVector::from_element(g.len(), f64::INFINITY),
                    Err(e) => return Err(e),
                };
                if gc.norm() < g.norm() || scaled.norm() < 1e-13 * ev.domain.diameter {
                    z = cand;
                    g = gc;
                    if norm <= radius {
                        radius = (2.0 * radius).min(0.5 * ev.domain.diameter);
                    }
                    break;
                }
            }
            radius *= 0.25;
            if radius < 1e-14 * ev.domain.diameter {
                if !ok {
                    check_positions(&ev.domain, &cand, rho)?;
                    return Err(Error::Inadmissible(
                        "critical point search reached the admissibility barrier".into(),
                    ));
                }
                return Err(Error::NotConverged {
                    what: "critical point search (trust region collapsed)".into(),
                    iterations,
                    residual: g.norm(),
                });
            }
        }
    }
    classify(ev, flow, cfg, obj, z, g.norm(), iterations, trajectory, h_fd, opts.eig_tol)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    obj: Objective,
    z: Vec<Point>,
    grad_norm: f64,
    iterations: usize,
    trajectory: Vec<TrajectoryPoint>,
    h_fd: f64,
    eig_tol: f64,
) -> Result<CriticalPoint> {
    let hm = hessian(ev, flow, &cfg.with_positions(z.clone()), obj, h_fd)?;
    let mut all: Vec<f64> = SymmetricEigen::new(hm.clone()).eigenvalues.iter().copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let orbit = rotation_direction(ev, flow, &z);
    let transversal = match &orbit {
        Some(t) => {
            // Restrict the Hessian to the orthogonal complement of t.
            let n = t.len();
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for k in 0..n {
                let mut e = DVector::zeros(n);
                e[k] = 1.0;
                e -= t * t[k];
                for b in &basis {
                    let c = b.dot(&e);
                    e -= b * c;
                }
                if e.norm() > 1e-8 {
                    basis.push(e.normalize());
                }
                if basis.len() == n - 1 {
                    break;
                }
            }
            let q = DMatrix::from_columns(&basis);
            let reduced = q.transpose() * &hm * &q;
            let mut ev: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ev
        }
        None => all.clone(),
    };
    let scale = transversal.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let degenerate = transversal.iter().any(|l| l.abs() <= eig_tol * scale);
    let class = if degenerate {
        Classification::Degenerate
    } else if transversal.iter().all(|&l| l > 0.0) {
        Classification::NondegenerateMin
    } else if transversal.iter().all(|&l| l < 0.0) {
        Classification::NondegenerateMax
    } else {
        Classification::Saddle
    };
    let value = objective_value(ev, flow, &cfg.kappa, obj, &z)?;
    Ok(CriticalPoint {
        objective: obj,
        z_star: z,
        value,
        grad_norm,
        hessian_eigs: all,
        transversal_eigs: transversal,
        rotation_orbit: orbit.is_some(),
        class,
        stable: !degenerate,
        iterations,
        trajectory,
    })
}

/// Independent searches from several seeds, run in parallel.
pub fn find_critical_multistart(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    seeds: &[Vec<Point>],
    opts: &CriticalOptions,
) -> Vec<Result<CriticalPoint>> {
    seeds
        .par_iter()
        .map(|s| find_critical(ev, flow, cfg, s, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, Shape};
    use crate::potential::{solve_background, FluxSamples};
    use std::sync::Arc;

    fn disk_setup() -> (PotentialEvaluator, BackgroundFlow) {
        let d = Arc::new(make_domain(Shape::unit_disk(), 64).unwrap());
        let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
        (PotentialEvaluator::new(d), flow)
    }

    #[test]
    fn single_vortex_at_center() {
        let (ev, flow) = disk_setup();
        let cfg = VortexConfig::new(vec![1.0], vec![Point::ORIGIN]);
        assert_eq!(eval_w(&ev, &flow, &cfg).unwrap(), 0.0);
        let g = grad_w(&ev, &flow, &cfg, 1e-3).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
        let phi = eval_phi(&ev, &flow, &cfg).unwrap();
        assert!((phi - PI * 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn phi_is_homogeneous_without_flow() {
        let (ev, flow) = disk_setup();
        let z = vec![Point::new(0.2, -0.1)];
        let a = eval_phi(&ev, &flow, &VortexConfig::new(vec![1.0], z.clone())).unwrap();
        let b = eval_phi(&ev, &flow, &VortexConfig::new(vec![2.0], z)).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn admissibility_is_enforced() {
        let (ev, flow) = disk_setup();
        let near_wall = VortexConfig::new(vec![1.0], vec![Point::new(0.95, 0.0)]);
        assert!(matches!(eval_w(&ev, &flow, &near_wall), Err(Error::Inadmissible(_))));
        let close = VortexConfig::new(vec![1.0, 1.0], vec![Point::new(0.0, 0.0), Point::new(0.005, 0.0)]);
        assert!(matches!(eval_w(&ev, &flow, &close), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn default_masks_are_disjoint_and_contained() {
        let d = make_domain(Shape::unit_disk(), 64).unwrap();
        let cfg = VortexConfig::new(
            vec![1.0, 2.0, 1.5],
            vec![Point::new(0.4, 0.0), Point::new(-0.3, 0.2), Point::new(0.0, -0.5)],
        );
        cfg.check_masks(&d).unwrap();
        let r = cfg.mask_radii(&d);
        for j in 0..3 {
            assert_eq!(cfg.mask_of(&d, &r, cfg.z[j]), Some(j));
        }
    }

    #[test]
    fn center_is_a_nondegenerate_maximum() {
        let (ev, flow) = disk_setup();
        let cfg = VortexConfig::new(vec![1.0], vec![Point::new(0.3, 0.2)]);
        let cp = find_critical(&ev, &flow, &cfg, &cfg.z, &CriticalOptions::default()).unwrap();
        assert!(cp.z_star[0].norm() < 1e-8);
        assert_eq!(cp.class, Classification::NondegenerateMax);
        assert!(!cp.rotation_orbit);
    }
}
