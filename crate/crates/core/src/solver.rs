//! Grid solver for `-δ² Δ w = Σ_j χ_{Ω_j} (w - κ_j - 2π q/|ln ε|)_+^p`, `w = 0`
//! on the boundary.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ansatz::{assemble_ansatz, solve_params, AnsatzOptions, ScaleParams};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridField};
use crate::laplace::{dot, minres, pcg, DirichletLaplacian, NONE};
use crate::point::Point;
use crate::potential::{BackgroundFlow, PotentialEvaluator};
use crate::profile::ProfileSolution;
use crate::routh::VortexConfig;

/// The discretized free-boundary problem on the domain grid.
pub struct Problem {
    pub lap: DirichletLaplacian,
    pub scale: ScaleParams,
    /// Subdomain of each unknown (`None` outside every mask).
    pub mask: Vec<Option<usize>>,
    /// Threshold `κ_j + 2π q/|ln ε|` of each unknown (unused outside masks).
    pub level: Vec<f64>,
    pub m: usize,
    pub kappa: Vec<f64>,
    pub z: Vec<Point>,
    pub use_masks: bool,
}

impl Problem {
    pub fn new(domain: &Domain, flow: &BackgroundFlow, cfg: &VortexConfig, scale: ScaleParams) -> Result<Self> {
        cfg.validate(domain)?;
        cfg.check_masks(domain)?;
        let lap = DirichletLaplacian::new(domain);
        let radii = cfg.mask_radii(domain);
        let mut mask = Vec::with_capacity(lap.n());
        let mut level = Vec::with_capacity(lap.n());
        for &k in &lap.nodes {
            let x = domain.grid.node_k(k);
            let j = cfg.mask_of(domain, &radii, x);
            mask.push(j);
            let kap = j.map(|j| cfg.kappa[j]).unwrap_or(0.0);
            level.push(kap + 2.0 * std::f64::consts::PI * flow.q_at(x) / scale.ln_eps);
        }
        Ok(Problem {
            lap,
            scale,
            mask,
            level,
            m: cfg.m(),
            kappa: cfg.kappa.clone(),
            z: cfg.z.clone(),
            use_masks: cfg.use_masks,
        })
    }

    pub fn n(&self) -> usize {
        self.lap.n()
    }

    fn d2(&self) -> f64 {
        self.scale.delta * self.scale.delta
    }

    /// Plus-part excess `(w - level)_+` at unknown `u`.
    fn excess(&self, u: usize, w: f64) -> f64 {
        match self.mask[u] {
            Some(_) => (w - self.level[u]).max(0.0),
            None => 0.0,
        }
    }

    /// Residual on the unknowns.
    pub fn residual_vec(&self, w: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n()];
        self.lap.apply(w, &mut r);
        let d2 = self.d2();
        let p = self.scale.p;
        for (u, ru) in r.iter_mut().enumerate() {
            *ru = d2 * *ru - self.excess(u, w[u]).powf(p);
        }
        r
    }

    /// `J v = δ² A v - p (w - level)_+^{p-1} v`, with the factor `p` replaced
    /// by `coef`.
    fn jacobian_diag(&self, w: &[f64], coef: f64) -> Vec<f64> {
        let p = self.scale.p;
        (0..self.n())
            .map(|u| coef * self.excess(u, w[u]).powf(p - 1.0))
            .collect()
    }

    pub fn apply_jacobian(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        let c = self.jacobian_diag(w, self.scale.p);
        let mut out = vec![0.0; self.n()];
        self.apply_shifted(&c, v, &mut out);
        out
    }

    fn apply_shifted(&self, c: &[f64], v: &[f64], out: &mut [f64]) {
        self.lap.apply(v, out);
        let d2 = self.d2();
        for u in 0..v.len() {
            out[u] = d2 * out[u] - c[u] * v[u];
        }
    }

    pub fn field(&self, domain: &Domain, w: &[f64], kind: FieldKind) -> GridField {
        GridField {
            grid: domain.grid,
            values: self.lap.scatter(w, |_| 0.0),
            interior: domain.interior.clone(),
            kind,
        }
    }

    pub fn unknowns(&self, field: &GridField) -> Result<Vec<f64>> {
        if !field.grid.same_layout(&self.lap.grid) || field.values.len() != self.lap.grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field grid {}x{} does not match the problem grid {}x{}",
                field.grid.nx, field.grid.ny, self.lap.grid.nx, self.lap.grid.ny
            )));
        }
        Ok(self.lap.gather(&field.values))
    }
}

/// Residual of the discrete problem as a grid field (zero off the unknowns).
pub fn residual(w: &GridField, domain: &Domain, problem: &Problem) -> Result<GridField> {
    let x = problem.unknowns(w)?;
    let r = problem.residual_vec(&x);
    Ok(problem.field(domain, &r, FieldKind::Other))
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Absolute residual target in the max norm; `None` means `1e-10 · max κ`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Smallest step length tried by the line search.
    pub min_step: f64,
    pub armijo: f64,
    /// Relative tolerance of the inner linear solves near convergence.
    pub linear_rtol: f64,
    pub max_linear_iter: usize,
    /// Stop with an error instead of reporting a core split.
    pub fail_on_split: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: None,
            max_iter: 50,
            min_step: 1.0 / 64.0,
            armijo: 1e-4,
            linear_rtol: 1e-12,
            max_linear_iter: 20_000,
            fail_on_split: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreComponent {
    pub vortex: usize,
    /// Grid node indices of the component.
    pub cells: Vec<usize>,
    pub area: f64,
    /// Vorticity-weighted mean position.
    pub centroid: Point,
    /// Largest distance from the centroid to a node of the component.
    pub radius: f64,
    /// `sqrt(area / π)`.
    pub equivalent_radius: f64,
    pub touches_mask: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreSet {
    pub components: Vec<CoreComponent>,
    /// Vortices whose subdomain holds more than one component.
    pub split: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
    pub fallback_used: bool,
    pub max_w: f64,
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub use_masks: bool,
    pub z: Vec<Point>,
    pub kappa: Vec<f64>,
    pub cores: Vec<CoreComponent>,
    pub core_split: Vec<usize>,
    /// Excluded from reproducibility comparisons.
    pub wall_clock_seconds: f64,
}

/// Damped Newton iteration with MINRES inner solves.
pub fn newton_solve(
    seed: &GridField,
    domain: &Domain,
    problem: &Problem,
    opts: &NewtonOptions,
) -> Result<(GridField, SolveReport)> {
    let start = Instant::now();
    let kmax = problem.kappa.iter().copied().fold(0.0, f64::max);
    let kmin = problem.kappa.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = opts.tol.unwrap_or(1e-10 * kmax);
    let mut w = problem.unknowns(seed)?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("seed has non-finite values".into()));
    }
    let vortex_seed = norm_inf(&w) >= 0.5 * kmin;
    let mut r = problem.residual_vec(&w);
    let mut rnorm = norm_inf(&r);
    let mut history = vec![rnorm];
    let mut linear_iterations = 0;
    let mut stalls = 0;
    let mut fallback = false;
    let mut fallback_used = false;
    let mut iterations = 0;
    let precond: Vec<f64> = problem.lap.diag.iter().map(|d| problem.d2() * d).collect();
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                what: "Newton iteration".into(),
                iterations,
                residual: rnorm,
            });
        }
        iterations += 1;
        // Secant coefficient (w - level)_+^{p-1} once the line search has
        // stalled twice, the exact derivative otherwise.
        let coef = if fallback { 1.0 } else { problem.scale.p };
        let c = problem.jacobian_diag(&w, coef);
        let rtol = if rnorm > 1e3 * tol { 1e-6 } else { opts.linear_rtol };
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let (d, stats) = minres(
            |v, out| problem.apply_shifted(&c, v, out),
            &precond,
            &neg_r,
            rtol,
            opts.max_linear_iter,
        )?;
        linear_iterations += stats.iterations;
        let f0 = dot(&r, &r);
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            let rt = problem.residual_vec(&trial);
            let ft = dot(&rt, &rt);
            if ft <= (1.0 - 2.0 * opts.armijo * lambda) * f0 || f0 == 0.0 {
                break Some((trial, rt));
            }
            lambda *= 0.5;
            if lambda < opts.min_step {
                break None;
            }
        };
        match accepted {
            Some((trial, rt)) => {
                w = trial;
                r = rt;
                if fallback && lambda == 1.0 && norm_inf(&r) < 1e-2 * history[0] {
                    // Back in the region where the exact derivative works.
                    fallback = false;
                    stalls = 0;
                    fallback_used = true;
                }
            }
            None => {
                stalls += 1;
                if stalls >= 2 {
                    fallback = true;
                    fallback_used = true;
                }
                // Take the smallest step anyway so the iteration moves.
                w = w.iter().zip(&d).map(|(a, b)| a + opts.min_step * b).collect();
                r = problem.residual_vec(&w);
            }
        }
        rnorm = norm_inf(&r);
        history.push(rnorm);
        if vortex_seed && norm_inf(&w) < 0.5 * kmin {
            return Err(Error::VortexCollapsed { max_w: norm_inf(&w) });
        }
        if rnorm < tol {
            break;
        }
    }
    let field = problem.field(domain, &w, FieldKind::W);
    let (cores, split) = if vortex_seed {
        let set = detect_cores_in(&field, domain, problem)?;
        if let Some(c) = set.components.iter().find(|c| c.touches_mask) {
            return Err(Error::CoreTouchesMask { vortex: c.vortex });
        }
        if opts.fail_on_split {
            if let Some(&j) = set.split.first() {
                let n = set.components.iter().filter(|c| c.vortex == j).count();
                return Err(Error::CoreSplit { vortex: j, components: n });
            }
        }
        (set.components, set.split)
    } else {
        (Vec::new(), Vec::new())
    };
    let report = SolveReport {
        converged: true,
        iterations,
        residual_norm: rnorm,
        tolerance: tol,
        residual_history: history,
        linear_iterations,
        fallback_used,
        max_w: norm_inf(&w),
        eps: problem.scale.eps,
        delta: problem.scale.delta,
        p: problem.scale.p,
        nx: domain.grid.nx,
        ny: domain.grid.ny,
        h: domain.grid.h,
        use_masks: problem.use_masks,
        z: problem.z.clone(),
        kappa: problem.kappa.clone(),
        cores,
        core_split: split,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((field, report))
}

/// `u = (|ln ε| / 2π) w`.
pub fn recover_u(w: &GridField, scale: &ScaleParams) -> GridField {
    let f = scale.w_to_u();
    w.map(FieldKind::U, |v| v * f)
}

/// Connected components (4-neighbour) of `{w > κ_j + 2π q/|ln ε|}` inside
/// each subdomain. Returns an empty set for an empty superlevel set.
pub fn detect_cores(w: &GridField, domain: &Domain, problem: &Problem) -> Result<CoreSet> {
    detect_cores_in(w, domain, problem)
}

fn detect_cores_in(w: &GridField, domain: &Domain, problem: &Problem) -> Result<CoreSet> {
    let x = problem.unknowns(w)?;
    let lap = &problem.lap;
    let grid = domain.grid;
    let n = lap.n();
    let active: Vec<bool> = (0..n).map(|u| problem.excess(u, x[u]) > 0.0).collect();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    let p = problem.scale.p;
    for seed in 0..n {
        if !active[seed] || label[seed] != usize::MAX {
            continue;
        }
        let sub = problem.mask[seed];
        let id = components.len();
        let mut stack = vec![seed];
        let mut cells = Vec::new();
        label[seed] = id;
        let mut touches = false;
        while let Some(u) = stack.pop() {
            cells.push(u);
            for &nb in &lap.nbrs[u] {
                if nb == NONE {
                    // Arm cut by the domain boundary.
                    touches = true;
                    continue;
                }
                if problem.use_masks && problem.mask[nb] != sub {
                    touches = true;
                    continue;
                }
                if active[nb] && label[nb] == usize::MAX {
                    label[nb] = id;
                    stack.push(nb);
                }
            }
        }
        cells.sort_unstable();
        let mut wsum = 0.0;
        let mut c = Point::ORIGIN;
        for &u in &cells {
            let wt = problem.excess(u, x[u]).powf(p);
            wsum += wt;
            c = c + grid.node_k(lap.nodes[u]) * wt;
        }
        let centroid = c * (1.0 / wsum);
        let radius = cells
            .iter()
            .map(|&u| grid.node_k(lap.nodes[u]).dist(centroid))
            .fold(0.0, f64::max);
        let area = cells.len() as f64 * grid.cell_area();
        let vortex = if problem.use_masks {
            sub.unwrap_or(0)
        } else {
            nearest(&problem.z, centroid)
        };
        components.push(CoreComponent {
            vortex,
            cells: cells.iter().map(|&u| lap.nodes[u]).collect(),
            area,
            centroid,
            radius,
            equivalent_radius: (area / std::f64::consts::PI).sqrt(),
            touches_mask: touches,
        });
    }
    if components.is_empty() {
        return Ok(CoreSet {
            components,
            split: Vec::new(),
        });
    }
    components.sort_by_key(|c| (c.vortex, c.cells[0]));
    let mut split = Vec::new();
    for j in 0..problem.m {
        let count = components.iter().filter(|c| c.vortex == j).count();
        if count == 0 {
            return Err(Error::NoCores { vortex: j });
        }
        if count > 1 {
            split.push(j);
        }
    }
    Ok(CoreSet { components, split })
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

/// Full single-`ε` solve from the approximate solution.
#[allow(clippy::too_many_arguments)]
pub fn solve_from_ansatz(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    profile: &ProfileSolution,
    eps: f64,
    ansatz_opts: &AnsatzOptions,
    opts: &NewtonOptions,
) -> Result<(GridField, SolveReport)> {
    let scale = ScaleParams::new(eps, profile.p)?;
    let params = solve_params(ev, flow, cfg, &scale, profile, ansatz_opts)?;
    let seed = assemble_ansatz(ev, cfg, &params, &scale, profile, &ev.domain.grid)?;
    let problem = Problem::new(&ev.domain, flow, cfg, scale)?;
    newton_solve(&seed, &ev.domain, &problem, opts)
}

/// Continuation over a decreasing list of `ε`: the first solve starts from
/// the approximate solution, each later one from the previous solution plus
/// the change in the approximate solution.
pub fn continue_in_eps(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    profile: &ProfileSolution,
    eps_list: &[f64],
    ansatz_opts: &AnsatzOptions,
    opts: &NewtonOptions,
) -> Result<Vec<(GridField, SolveReport)>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("empty eps list".into()));
    }
    if eps_list[0] > 0.2 {
        return Err(Error::InvalidInput(format!(
            "continuation must start at eps <= 0.2, got {}",
            eps_list[0]
        )));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("eps list must be strictly decreasing".into()));
    }
    let grid = ev.domain.grid;
    let mut out: Vec<(GridField, SolveReport)> = Vec::new();
    let mut prev_ansatz: Option<GridField> = None;
    for &eps in eps_list {
        let wrap = |e: Error| Error::AtEps {
            eps,
            source: Box::new(e),
        };
        let scale = ScaleParams::new(eps, profile.p).map_err(wrap)?;
        let params = solve_params(ev, flow, cfg, &scale, profile, ansatz_opts).map_err(wrap)?;
        let ans = assemble_ansatz(ev, cfg, &params, &scale, profile, &grid).map_err(wrap)?;
        let seed = match (&prev_ansatz, out.last()) {
            (Some(pa), Some((w_prev, _))) => {
                let mut s = w_prev.clone();
                for k in 0..s.values.len() {
                    s.values[k] += ans.values[k] - pa.values[k];
                }
                s
            }
            _ => ans.clone(),
        };
        let problem = Problem::new(&ev.domain, flow, cfg, scale).map_err(wrap)?;
        let solved = newton_solve(&seed, &ev.domain, &problem, opts).map_err(wrap)?;
        out.push(solved);
        prev_ansatz = Some(ans);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm change of the last iteration.
    pub last_change: f64,
    pub residual_norm: f64,
}

/// Plain fixed-point iteration `w ← (-δ² Δ_h)^{-1} N(w)`.
pub fn picard_iterate(
    seed: &GridField,
    domain: &Domain,
    problem: &Problem,
    tol: f64,
    max_iter: usize,
) -> Result<(GridField, PicardReport)> {
    let mut w = problem.unknowns(seed)?;
    let d2 = problem.d2();
    let p = problem.scale.p;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let rhs: Vec<f64> = (0..problem.n()).map(|u| problem.excess(u, w[u]).powf(p) / d2).collect();
        let mut next = w.clone();
        let solved = pcg(
            |v, out| problem.lap.apply(v, out),
            &problem.lap.diag,
            &rhs,
            &mut next,
            1e-14,
            20 * problem.n(),
        );
        match solved {
            Ok(_) => {}
            // The iterate has overflowed.
            Err(Error::InvalidInput(_)) => {
                change = f64::INFINITY;
                break;
            }
            Err(e) => return Err(e),
        }
        change = next.iter().zip(&w).fold(0.0, |m: f64, (a, b)| {
            let d = (a - b).abs();
            if d.is_nan() {
                f64::INFINITY
            } else {
                m.max(d)
            }
        });
        w = next;
        if change < tol || !change.is_finite() {
            break;
        }
    }
    let residual_norm = norm_inf(&problem.residual_vec(&w));
    Ok((
        problem.field(domain, &w, FieldKind::W),
        PicardReport {
            iterations,
            converged: change < tol,
            last_change: change,
            residual_norm,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, Shape};
    use crate::potential::{solve_background, FluxSamples};

    fn small() -> (Domain, BackgroundFlow, VortexConfig) {
        let d = make_domain(Shape::unit_disk(), 48).unwrap();
        let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
        (d, flow, VortexConfig::new(vec![1.0], vec![Point::ORIGIN]))
    }

    #[test]
    fn zero_is_a_solution() {
        let (d, flow, cfg) = small();
        let prob = Problem::new(&d, &flow, &cfg, ScaleParams::new(0.05, 2.0).unwrap()).unwrap();
        let zero = GridField::zeros(d.grid, d.interior.clone(), FieldKind::W);
        let r = residual(&zero, &d, &prob).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        let (w, rep) = newton_solve(&zero, &d, &prob, &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(w.values.iter().all(|v| *v == 0.0));
        assert!(rep.cores.is_empty());
        assert!(detect_cores(&w, &d, &prob).unwrap().components.is_empty());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (d, flow, cfg) = small();
        let prob = Problem::new(&d, &flow, &cfg, ScaleParams::new(0.05, 2.0).unwrap()).unwrap();
        let other = make_domain(Shape::unit_disk(), 40).unwrap();
        let f = GridField::zeros(other.grid, other.interior.clone(), FieldKind::W);
        assert!(matches!(residual(&f, &d, &prob), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn continuation_checks_list() {
        let (d, flow, cfg) = small();
        let ev = PotentialEvaluator::new(std::sync::Arc::new(d));
        let prof = crate::profile::solve_profile(2.0, 1e-8).unwrap();
        let o = NewtonOptions::default();
        let a = AnsatzOptions::default();
        assert!(continue_in_eps(&ev, &flow, &cfg, &prof, &[0.3], &a, &o).is_err());
        assert!(continue_in_eps(&ev, &flow, &cfg, &prof, &[0.1, 0.1], &a, &o).is_err());
    }
}
