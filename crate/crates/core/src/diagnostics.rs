//! Circulation, energy, flow reconstruction and sweep summaries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ansatz::{assemble_ansatz, solve_params, Ansatz, AnsatzOptions, AnsatzParams, ScaleParams};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridField};
use crate::laplace::dot;
use crate::point::Point;
use crate::potential::{BackgroundFlow, PotentialEvaluator};
use crate::profile::ProfileSolution;
use crate::quadrature::PolarRule;
use crate::routh::{eval_phi, grad_w, MaskSpec, VortexConfig};
use crate::solver::{detect_cores, CoreComponent, Problem, SolveReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circulation {
    pub total: f64,
    /// `(vortex, circulation)` per detected core component.
    pub per_core: Vec<(usize, f64)>,
}

/// `(1/ε²) Σ_j ∫_{Ω_j} (u - q - κ_j |ln ε|/2π)_+^p`, midpoint rule on the
/// grid nodes.
pub fn circulation(u: &GridField, domain: &Domain, problem: &Problem) -> Result<Circulation> {
    let scale = problem.scale;
    let f = scale.w_to_u();
    let x = problem.unknowns(u)?;
    let eps2 = scale.eps * scale.eps;
    let cell = domain.grid.cell_area();
    let density: Vec<f64> = (0..problem.n())
        .map(|k| match problem.mask[k] {
            Some(_) => (x[k] - f * problem.level[k]).max(0.0).powf(scale.p) / eps2,
            None => 0.0,
        })
        .collect();
    let total: f64 = density.iter().sum::<f64>() * cell;
    if total == 0.0 {
        return Ok(Circulation {
            total,
            per_core: Vec::new(),
        });
    }
    let w = u.map(FieldKind::W, |v| v / f);
    let cores = detect_cores(&w, domain, problem)?;
    if cores.components.is_empty() {
        return Err(Error::NoCores { vortex: 0 });
    }
    let per_core = cores
        .components
        .iter()
        .map(|c| {
            let s: f64 = c.cells.iter().map(|&k| density[problem.lap.unknown_of[k]]).sum();
            (c.vortex, s * cell)
        })
        .collect();
    Ok(Circulation { total, per_core })
}

/// Grid energy `(δ²/2) h² wᵀ A w - (1/(p+1)) h² Σ χ (w - level)_+^{p+1}`,
/// with `A` the solver's Laplacian so that the Dirichlet form matches the
/// discrete equation.
pub fn energy(w: &GridField, domain: &Domain, problem: &Problem) -> Result<f64> {
    let x = problem.unknowns(w)?;
    let mut ax = vec![0.0; x.len()];
    problem.lap.apply(&x, &mut ax);
    let cell = domain.grid.cell_area();
    let d2 = problem.scale.delta * problem.scale.delta;
    let p = problem.scale.p;
    let dirichlet = 0.5 * d2 * dot(&x, &ax) * cell;
    let nonlinear: f64 = (0..x.len())
        .filter(|&k| problem.mask[k].is_some())
        .map(|k| (x[k] - problem.level[k]).max(0.0).powf(p + 1.0))
        .sum::<f64>()
        * cell
        / (p + 1.0);
    Ok(dirichlet - nonlinear)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub panels: usize,
    pub order: usize,
    pub n_theta: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            panels: 12,
            order: 8,
            n_theta: 96,
        }
    }
}

/// Energy of the approximate solution by polar quadrature around each
/// core. The Dirichlet part is `Σ_j ∫ (W_j - a_j)_+^p P` (integration by
/// parts), the nonlinear part is integrated over a disk of twice the core
/// radius clipped to the subdomain.
pub fn ansatz_energy(ans: &Ansatz, flow: &BackgroundFlow, quad: &QuadOptions) -> Result<f64> {
    let cfg = ans.cfg;
    let params = ans.params;
    let scale = ans.scale;
    let domain = &ans.ev.domain;
    let radii = cfg.mask_radii(domain);
    let p = scale.p;
    let mut dirichlet = 0.0;
    let mut nonlinear = 0.0;
    for j in 0..cfg.m() {
        let z = cfg.z[j];
        let s = params.s[j];
        let inner = PolarRule::new(&[0.0, s], quad.panels, quad.order, quad.n_theta);
        let mut err = None;
        dirichlet += inner.integrate(z, |x| {
            let src = ans.source(j, x);
            if src == 0.0 {
                return 0.0;
            }
            match ans.value(x) {
                Ok(v) => src * v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        });
        let mut outer = 2.0 * s;
        outer = outer.min(0.999 * domain.boundary_distance(z));
        if cfg.use_masks && !matches!(cfg.masks, MaskSpec::Voronoi { .. }) {
            outer = outer.min(radii[j]);
        }
        let mut breaks = vec![0.0];
        for r in [0.8 * s, s, 1.25 * s] {
            if r < outer {
                breaks.push(r);
            }
        }
        breaks.push(outer);
        let rule = PolarRule::new(&breaks, quad.panels, quad.order, quad.n_theta);
        let kap = cfg.kappa[j];
        nonlinear += rule.integrate(z, |x| {
            let owner = if cfg.use_masks {
                cfg.mask_of(domain, &radii, x)
            } else {
                Some(nearest(&cfg.z, x))
            };
            if owner != Some(j) {
                return 0.0;
            }
            match ans.value(x) {
                Ok(v) => {
                    let lvl = kap + 2.0 * PI * flow.q_at(x) / scale.ln_eps;
                    (v - lvl).max(0.0).powf(p + 1.0)
                }
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(0.5 * dirichlet - nonlinear / (p + 1.0))
}

fn nearest(z: &[Point], p: Point) -> usize {
    let mut best = 0;
    for (j, zj) in z.iter().enumerate() {
        if zj.dist(p) < z[best].dist(p) {
            best = j;
        }
    }
    best
}

/// Energy of the approximate solution from the core integrals in closed
/// form (interactions evaluated at the centres), with `ℓ_i = ln(R/s_i)`:
/// `Σ_i [π(p+1)δ²a_i²/(4ℓ_i²) + πδ²a_i²/ℓ_i - π g_ii δ² a_i²/ℓ_i²]
///  + Σ_{i≠j} π Ḡ_ij δ² a_i a_j/(ℓ_i ℓ_j) - (πδ²/2) Σ a_j²/ℓ_j²`.
pub fn ansatz_energy_closed_form(
    ev: &PotentialEvaluator,
    cfg: &VortexConfig,
    params: &AnsatzParams,
    scale: &ScaleParams,
) -> Result<f64> {
    let d2 = scale.delta * scale.delta;
    let p = scale.p;
    let m = cfg.m();
    let mut k = 0.0;
    for i in 0..m {
        let (a, l) = (params.a[i], params.log_ratio(i));
        let g = ev.g(cfg.z[i], cfg.z[i])?;
        k += PI * (p + 1.0) / 4.0 * d2 * a * a / (l * l) + PI * d2 * a * a / l - PI * g * d2 * a * a / (l * l);
        k -= 0.5 * PI * d2 * a * a / (l * l);
        for j in 0..m {
            if j != i {
                let gb = ev.g_bar(cfg.z[j], cfg.z[i])?;
                k += PI * gb * d2 * a * params.a[j] / (l * params.log_ratio(j));
            }
        }
    }
    Ok(k)
}

/// Position-dependent leading part of the energy expansion,
/// `(δ²/L²) [Σ π(p-1)κ²/4 + Σ 4π²κ q L/|ln ε| + Σ πκ² g - Σ_{i≠j} πκκ Ḡ]`
/// with `L = ln(R/ε)`, plus `C δ²/L` for a supplied constant `C`.
pub fn energy_expansion(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
    c: f64,
) -> Result<f64> {
    let d2 = scale.delta * scale.delta;
    let l = (ev.enclosing_radius() / scale.eps).ln();
    let p = scale.p;
    let mut v = c * d2 / l;
    for i in 0..cfg.m() {
        let k = cfg.kappa[i];
        v += PI * (p - 1.0) * d2 * k * k / (4.0 * l * l);
        v += 4.0 * PI * PI * d2 * k * flow.q_at(cfg.z[i]) / (scale.ln_eps * l);
        v += PI * d2 * k * k * ev.g(cfg.z[i], cfg.z[i])? / (l * l);
        for j in 0..cfg.m() {
            if j != i {
                v -= PI * d2 * k * cfg.kappa[j] * ev.g_bar(cfg.z[j], cfg.z[i])? / (l * l);
            }
        }
    }
    Ok(v)
}

/// Energy of the approximate solution at `cfg.z`, parameters re-solved.
pub fn ansatz_energy_at(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
    profile: &ProfileSolution,
    quad: &QuadOptions,
) -> Result<f64> {
    let params = solve_params(ev, flow, cfg, scale, profile, &AnsatzOptions::default())?;
    let ans = Ansatz {
        ev,
        cfg,
        params: &params,
        scale: *scale,
        profile,
    };
    ansatz_energy(&ans, flow, quad)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyDifference {
    pub eps: f64,
    pub k_difference: f64,
    pub predicted: f64,
    pub relative_discrepancy: f64,
}

/// `K(Z₁) - K(Z₂)` against `(δ²/|ln ε|²)(Φ(Z₁) - Φ(Z₂))`.
pub fn energy_difference(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    z1: &VortexConfig,
    z2: &VortexConfig,
    scale: &ScaleParams,
    profile: &ProfileSolution,
    quad: &QuadOptions,
) -> Result<EnergyDifference> {
    let k1 = ansatz_energy_at(ev, flow, z1, scale, profile, quad)?;
    let k2 = ansatz_energy_at(ev, flow, z2, scale, profile, quad)?;
    let d2 = scale.delta * scale.delta;
    let predicted = d2 / (scale.ln_eps * scale.ln_eps) * (eval_phi(ev, flow, z1)? - eval_phi(ev, flow, z2)?);
    Ok(EnergyDifference {
        eps: scale.eps,
        k_difference: k1 - k2,
        predicted,
        relative_discrepancy: ((k1 - k2) - predicted).abs() / predicted.abs(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientCheck {
    pub finite_difference: Vec<f64>,
    pub predicted: Vec<f64>,
    pub residual: f64,
    /// `residual · |ln ε|³ / (δ² ln|ln ε|)`.
    pub scaled_residual: f64,
    /// Cosine between the finite-difference gradient and `-∇W`.
    pub cosine_to_minus_grad_w: f64,
}

/// Central differences of the approximate-solution energy against
/// `4π²δ²κ_i ∂q/(|ln ε| L) + 2πδ²κ_i² ∂₁g(z_i,z_i)/L² - Σ_{j≠i} 2πδ²κ_iκ_j ∂₁Ḡ(z_i,z_j)/L²`.
pub fn energy_gradient_check(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
    profile: &ProfileSolution,
    h_fd: f64,
    quad: &QuadOptions,
) -> Result<GradientCheck> {
    let rho = cfg.rho(&ev.domain);
    for z in &cfg.z {
        if ev.domain.boundary_distance(*z) < rho + 2.0 * h_fd {
            return Err(Error::Inadmissible(
                "difference stencil leaves the admissible set".into(),
            ));
        }
    }
    let m = cfg.m();
    let mut fd = Vec::with_capacity(2 * m);
    for c in 0..2 * m {
        let shifted = |sgn: f64| {
            let mut z = cfg.z.clone();
            let d = if c % 2 == 0 { Point::new(sgn * h_fd, 0.0) } else { Point::new(0.0, sgn * h_fd) };
            z[c / 2] = z[c / 2] + d;
            cfg.with_positions(z)
        };
        let (cp, cm) = (shifted(1.0), shifted(-1.0));
        cp.check_admissible(&ev.domain)?;
        cm.check_admissible(&ev.domain)?;
        let kp = ansatz_energy_at(ev, flow, &cp, scale, profile, quad)?;
        let km = ansatz_energy_at(ev, flow, &cm, scale, profile, quad)?;
        fd.push((kp - km) / (2.0 * h_fd));
    }
    let d2 = scale.delta * scale.delta;
    let l = (ev.enclosing_radius() / scale.eps).ln();
    let mut predicted = Vec::with_capacity(2 * m);
    for i in 0..m {
        let zi = cfg.z[i];
        let k = cfg.kappa[i];
        let dq = flow.grad_psi0_at(zi) * -1.0;
        let dg = ev.grad_regular_x(zi, zi)? * (2.0 * PI);
        let mut v = dq * (4.0 * PI * PI * d2 * k / (scale.ln_eps * l)) + dg * (2.0 * PI * d2 * k * k / (l * l));
        for j in 0..m {
            if j != i {
                let d = zi - cfg.z[j];
                let dgb = d * (-1.0 / d.norm_sq()) - ev.grad_regular_x(zi, cfg.z[j])? * (2.0 * PI);
                v = v - dgb * (2.0 * PI * d2 * k * cfg.kappa[j] / (l * l));
            }
        }
        predicted.extend([v.x, v.y]);
    }
    let residual = fd
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gw = grad_w(ev, flow, cfg, h_fd)?;
    let nf = dot(&fd, &fd).sqrt();
    let ng = dot(&gw, &gw).sqrt();
    let cosine = if nf == 0.0 || ng == 0.0 {
        0.0
    } else {
        -dot(&fd, &gw) / (nf * ng)
    };
    Ok(GradientCheck {
        finite_difference: fd,
        predicted,
        residual,
        scaled_residual: residual * scale.ln_eps.powi(3) / (d2 * scale.ln_eps.ln()),
        cosine_to_minus_grad_w: cosine,
    })
}

#[derive(Debug, Clone)]
pub struct FlowFields {
    pub velocity_x: GridField,
    pub velocity_y: GridField,
    pub vorticity: GridField,
    pub pressure: GridField,
    /// `max |v·∇ω| / (max|v| · max|∇ω|)` away from the wall layer.
    pub stationarity: f64,
    /// `max |∇·v|` over nodes with a full stencil.
    pub divergence: f64,
}

/// Velocity `(∇ψ)^⊥ = (ψ_y, -ψ_x)` of `ψ = u - q`, vorticity as its discrete
/// curl, and the pressure of the stream-function construction. Central
/// differences throughout; vorticity is left at zero in the two node layers
/// next to the wall.
pub fn reconstruct_flow(u: &GridField, flow: &BackgroundFlow, domain: &Domain, problem: &Problem) -> Result<FlowFields> {
    problem.unknowns(u)?;
    let grid = domain.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let psi: Vec<f64> = (0..grid.len())
        .map(|k| u.values[k] + flow.psi0.values[k])
        .collect();
    let nbrs = |k: usize| -> Option<[usize; 4]> {
        let (i, j) = grid.ij(k);
        if i == 0 || j == 0 || i + 1 >= nx || j + 1 >= ny {
            return None;
        }
        Some([grid.index(i + 1, j), grid.index(i - 1, j), grid.index(i, j + 1), grid.index(i, j - 1)])
    };
    // A stencil is valid at k when k and its four neighbours pass `ok`.
    let widen = |ok: &[bool]| -> Vec<bool> {
        (0..grid.len())
            .map(|k| ok[k] && nbrs(k).is_some_and(|n| n.iter().all(|&l| ok[l])))
            .collect()
    };
    let vel_ok = widen(&domain.interior);
    let om_ok = widen(&vel_ok);
    let tr_ok = widen(&om_ok);
    let diff = |f: &[f64], k: usize| -> (f64, f64) {
        let [e, w, n, s] = nbrs(k).unwrap();
        ((f[e] - f[w]) / (2.0 * h), (f[n] - f[s]) / (2.0 * h))
    };
    let mut vx = vec![0.0; grid.len()];
    let mut vy = vec![0.0; grid.len()];
    for k in 0..grid.len() {
        if !domain.interior[k] {
            continue;
        }
        let (dx, dy) = if vel_ok[k] {
            diff(&psi, k)
        } else {
            // One-sided towards the interior in the wall layer.
            one_sided(&psi, k, grid, &domain.interior)
        };
        vx[k] = dy;
        vy[k] = -dx;
    }
    let mut omega = vec![0.0; grid.len()];
    let mut div: f64 = 0.0;
    for k in (0..grid.len()).filter(|&k| om_ok[k]) {
        let (dvx_dx, dvx_dy) = diff(&vx, k);
        let (dvy_dx, dvy_dy) = diff(&vy, k);
        omega[k] = dvy_dx - dvx_dy;
        div = div.max((dvx_dx + dvy_dy).abs());
    }
    let (mut tmax, mut vmax, mut gmax) = (0.0_f64, 0.0_f64, 0.0_f64);
    for k in (0..grid.len()).filter(|&k| tr_ok[k]) {
        let (gx, gy) = diff(&omega, k);
        tmax = tmax.max((vx[k] * gx + vy[k] * gy).abs());
        vmax = vmax.max(vx[k].hypot(vy[k]));
        gmax = gmax.max(gx.hypot(gy));
    }
    let f = problem.scale.w_to_u();
    let p = problem.scale.p;
    let mut pressure = vec![0.0; grid.len()];
    for (unk, &k) in problem.lap.nodes.iter().enumerate() {
        let core = match problem.mask[unk] {
            Some(_) => (u.values[k] - f * problem.level[unk]).max(0.0).powf(p + 1.0) / (p + 1.0),
            None => 0.0,
        };
        pressure[k] = core - 0.5 * (vx[k] * vx[k] + vy[k] * vy[k]);
    }
    let make = |values: Vec<f64>, kind| GridField {
        grid,
        values,
        interior: domain.interior.clone(),
        kind,
    };
    Ok(FlowFields {
        velocity_x: make(vx, FieldKind::VelocityX),
        velocity_y: make(vy, FieldKind::VelocityY),
        vorticity: make(omega, FieldKind::Vorticity),
        pressure: make(pressure, FieldKind::Pressure),
        stationarity: if vmax * gmax > 0.0 { tmax / (vmax * gmax) } else { 0.0 },
        divergence: div,
    })
}

fn one_sided(f: &[f64], k: usize, grid: crate::grid::GridSpec, interior: &[bool]) -> (f64, f64) {
    let (i, j) = grid.ij(k);
    let h = grid.h;
    let axis = |fwd: Option<usize>, bwd: Option<usize>| -> f64 {
        let fwd = fwd.filter(|&l| interior[l]);
        let bwd = bwd.filter(|&l| interior[l]);
        match (fwd, bwd) {
            (Some(a), Some(b)) => (f[a] - f[b]) / (2.0 * h),
            (Some(a), None) => (f[a] - f[k]) / h,
            (None, Some(b)) => (f[k] - f[b]) / h,
            (None, None) => 0.0,
        }
    };
    let e = (i + 1 < grid.nx).then(|| grid.index(i + 1, j));
    let w = (i > 0).then(|| grid.index(i - 1, j));
    let n = (j + 1 < grid.ny).then(|| grid.index(i, j + 1));
    let s = (j > 0).then(|| grid.index(i, j - 1));
    (axis(e, w), axis(n, s))
}

/// `max |ω|` over nodes farther than `band` cells from every core cell,
/// relative to `max |ω|`.
pub fn vorticity_leak(fields: &FlowFields, cores: &[CoreComponent], band: usize) -> f64 {
    let grid = fields.vorticity.grid;
    let mut near = vec![false; grid.len()];
    let b = band as isize;
    for k in cores.iter().flat_map(|c| c.cells.iter().copied()) {
        let (i, j) = grid.ij(k);
        for dj in -b..=b {
            for di in -b..=b {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni >= 0 && nj >= 0 && (ni as usize) < grid.nx && (nj as usize) < grid.ny {
                    near[grid.index(ni as usize, nj as usize)] = true;
                }
            }
        }
    }
    let vals = &fields.vorticity.values;
    let peak = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let outside = (0..grid.len())
        .filter(|&k| !near[k])
        .fold(0.0_f64, |m, k| m.max(vals[k].abs()));
    outside / peak
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eps: f64,
    pub circulation_err: f64,
    pub core_radius_over_eps: f64,
    pub dist_to_zstar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
    pub circulation_err_decreasing: bool,
    pub dist_decreasing: bool,
    /// `max |r/ε - mean| / mean` over the sweep.
    pub radius_ratio_spread: f64,
}

/// Sweep summary: per `ε` the relative total-circulation error, the largest
/// core radius over `ε`, and the largest centroid distance to `Z*`.
pub fn convergence_study(
    entries: &[(SolveReport, Circulation)],
    z_star: &[Point],
) -> Result<ConvergenceTable> {
    if entries.len() < 3 {
        return Err(Error::InvalidInput("a convergence study needs at least three solves".into()));
    }
    let m = z_star.len();
    let mut rows = Vec::new();
    for (rep, circ) in entries {
        if rep.kappa.len() != m {
            return Err(Error::InconsistentReports(format!(
                "report at eps = {} has {} vortices, expected {m}",
                rep.eps,
                rep.kappa.len()
            )));
        }
        let per_vortex = group_cores(&rep.cores, m);
        if per_vortex.iter().any(|c| c.is_none()) {
            return Err(Error::InconsistentReports(format!(
                "report at eps = {} is missing a core",
                rep.eps
            )));
        }
        let total_kappa: f64 = rep.kappa.iter().sum();
        let dist = per_vortex
            .iter()
            .zip(z_star)
            .map(|(c, z)| c.unwrap().centroid.dist(*z))
            .fold(0.0, f64::max);
        let radius = per_vortex.iter().map(|c| c.unwrap().radius).fold(0.0, f64::max);
        rows.push(StudyRow {
            eps: rep.eps,
            circulation_err: (circ.total - total_kappa).abs() / total_kappa,
            core_radius_over_eps: radius / rep.eps,
            dist_to_zstar: dist,
        });
    }
    rows.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
    let strictly_dec = |f: &dyn Fn(&StudyRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let mean = rows.iter().map(|r| r.core_radius_over_eps).sum::<f64>() / rows.len() as f64;
    let spread = rows
        .iter()
        .map(|r| (r.core_radius_over_eps - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(ConvergenceTable {
        circulation_err_decreasing: strictly_dec(&|r| r.circulation_err),
        dist_decreasing: strictly_dec(&|r| r.dist_to_zstar),
        radius_ratio_spread: spread,
        rows,
    })
}

/// The largest core component of each vortex.
pub fn group_cores(cores: &[CoreComponent], m: usize) -> Vec<Option<&CoreComponent>> {
    (0..m)
        .map(|j| {
            cores
                .iter()
                .filter(|c| c.vortex == j)
                .max_by(|a, b| a.area.partial_cmp(&b.area).unwrap())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub eps: Vec<f64>,
    pub total_circulation: Vec<f64>,
    pub per_core_circulation: Vec<Vec<(usize, f64)>>,
    pub centroids: Vec<Vec<Point>>,
    pub core_radii: Vec<Vec<f64>>,
    pub dist_to_zstar: Vec<f64>,
    pub energy: Vec<f64>,
    /// `|E(w) - E(ansatz)| / |E(w)|` per `ε`.
    pub energy_residual: Vec<f64>,
    pub stationarity: Vec<f64>,
    pub table: Option<ConvergenceTable>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn finish(mut self) -> Self {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }
}

/// Approximate solution, its parameters and the grid residual norm of the
/// discrete equation, for diagnostics.
pub fn ansatz_residual(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
    profile: &ProfileSolution,
) -> Result<(GridField, AnsatzParams, f64)> {
    let params = solve_params(ev, flow, cfg, scale, profile, &AnsatzOptions::default())?;
    let field = assemble_ansatz(ev, cfg, &params, scale, profile, &ev.domain.grid)?;
    let problem = Problem::new(&ev.domain, flow, cfg, *scale)?;
    let x = problem.unknowns(&field)?;
    let r = problem.residual_vec(&x);
    let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok((field, params, norm))
}
