//! Approximate solutions: truncated radial profiles glued to logarithms,
//! projected onto the domain and superposed over the vortex positions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridField, GridSpec};
use crate::point::Point;
use crate::potential::{BackgroundFlow, PotentialEvaluator};
use crate::profile::{eval_profile, ProfileSolution};
use crate::routh::{MaskSpec, VortexConfig};

/// `ε`, `p` and the derived scale `δ = ε (2π/|ln ε|)^{(p-1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub eps: f64,
    pub p: f64,
    pub delta: f64,
    /// `|ln ε|`.
    pub ln_eps: f64,
}

impl ScaleParams {
    pub fn new(eps: f64, p: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInput(format!("eps = {eps} is not in (0, 1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("p = {p} must exceed 1")));
        }
        let ln_eps = eps.ln().abs();
        let delta = eps * (2.0 * PI / ln_eps).powf(0.5 * (p - 1.0));
        Ok(ScaleParams {
            eps,
            p,
            delta,
            ln_eps,
        })
    }

    /// `δ^{2/(p-1)}`.
    pub fn delta_pow(&self) -> f64 {
        self.delta.powf(2.0 / (self.p - 1.0))
    }

    /// Factor `|ln ε| / 2π` taking `w` to `u`.
    pub fn w_to_u(&self) -> f64 {
        self.ln_eps / (2.0 * PI)
    }

    /// The lower and upper ends `δ/|ln δ|`, `δ|ln δ|` of the nominal core
    /// radius bracket.
    pub fn nominal_bracket(&self) -> [f64; 2] {
        let l = self.delta.ln().abs();
        [self.delta / l, self.delta * l]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnsatzOptions {
    /// Joint relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Treat the nominal bracket and the plateau range as hard constraints.
    pub strict: bool,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        AnsatzOptions {
            tol: 1e-12,
            max_iter: 200,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub eps: f64,
    pub p: f64,
    pub delta: f64,
    pub enclosing_radius: f64,
    /// Core radii `s_i`.
    pub s: Vec<f64>,
    /// Plateau levels `a_i`.
    pub a: Vec<f64>,
    /// Relative residual of the C¹ matching condition at `|x| = s_i`.
    pub matching_residual: Vec<f64>,
    /// Relative residual of the plateau-level system.
    pub level_residual: Vec<f64>,
    pub iterations: usize,
    pub bracket: [f64; 2],
    /// Whether the root search had to go past the nominal upper end.
    pub bracket_extended: Vec<bool>,
    pub in_bracket: Vec<bool>,
    /// Whether `a_i ∈ [κ_i/2, 3κ_i/2]`.
    pub a_in_range: Vec<bool>,
}

impl AnsatzParams {
    /// `ln(R / s_i)`.
    pub fn log_ratio(&self, i: usize) -> f64 {
        (self.enclosing_radius / self.s[i]).ln()
    }
}

/// `θ_i(s) = s^{2/(p-1)}/ln(R/s) + φ'(1) δ^{2/(p-1)} / a_i`, increasing in `s`.
fn theta(scale: &ScaleParams, phi1: f64, r: f64, a: f64, s: f64) -> f64 {
    s.powf(2.0 / (scale.p - 1.0)) / (r / s).ln() + phi1 * scale.delta_pow() / a
}

fn matching_residual(scale: &ScaleParams, phi1: f64, r: f64, a: f64, s: f64) -> f64 {
    let lhs = scale.delta_pow() * s.powf(-2.0 / (scale.p - 1.0)) * phi1;
    let rhs = a / (s / r).ln();
    (lhs - rhs).abs() / rhs.abs()
}

struct Coefficients {
    /// `g(z_i, z_i)`.
    g_diag: Vec<f64>,
    /// `Ḡ(z_i, z_j)`, zero on the diagonal.
    g_bar: DMatrix<f64>,
    rhs: Vec<f64>,
}

fn coefficients(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
) -> Result<Coefficients> {
    let m = cfg.m();
    let mut g_bar = DMatrix::zeros(m, m);
    let mut g_diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        g_diag[i] = ev.g(cfg.z[i], cfg.z[i])?;
        rhs[i] = cfg.kappa[i] + 2.0 * PI * flow.q_at(cfg.z[i]) / scale.ln_eps;
        for j in 0..m {
            if j != i {
                g_bar[(i, j)] = ev.g_bar(cfg.z[i], cfg.z[j])?;
            }
        }
    }
    Ok(Coefficients { g_diag, g_bar, rhs })
}

fn solve_levels(c: &Coefficients, ell: &[f64]) -> Result<Vec<f64>> {
    let m = ell.len();
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mat[(i, j)] = if i == j {
                1.0 - c.g_diag[i] / ell[i]
            } else {
                c.g_bar[(i, j)] / ell[j]
            };
        }
    }
    let lu = mat.lu();
    let a = lu
        .solve(&DVector::from_column_slice(&c.rhs))
        .ok_or(Error::SingularSystem)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(a.iter().copied().collect())
}

fn level_residuals(c: &Coefficients, ell: &[f64], a: &[f64]) -> Vec<f64> {
    let m = a.len();
    (0..m)
        .map(|i| {
            let mut rhs = c.rhs[i] + c.g_diag[i] / ell[i] * a[i];
            for j in 0..m {
                if j != i {
                    rhs -= c.g_bar[(i, j)] / ell[j] * a[j];
                }
            }
            (a[i] - rhs).abs() / a[i].abs()
        })
        .collect()
}

/// Solves the matching and plateau-level system by alternating a linear
/// solve for the levels with scalar root finds for the radii.
pub fn solve_params(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
    profile: &ProfileSolution,
    opts: &AnsatzOptions,
) -> Result<AnsatzParams> {
    cfg.validate(&ev.domain)?;
    if (profile.p - scale.p).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "profile computed for p = {}, scale uses p = {}",
            profile.p, scale.p
        )));
    }
    let m = cfg.m();
    let r = ev.enclosing_radius();
    let phi1 = profile.phi_prime_1;
    let bracket = scale.nominal_bracket();
    if scale.delta >= 1.0 || !(bracket[0] < bracket[1]) {
        return Err(Error::BracketSign {
            vortex: 0,
            detail: format!(
                "delta = {:.4} leaves no admissible core-radius bracket",
                scale.delta
            ),
        });
    }
    let coef = coefficients(ev, flow, cfg, scale)?;
    let mut a: Vec<f64> = cfg.kappa.clone();
    let mut s = vec![0.0; m];
    let mut extended = vec![false; m];
    let mut iterations = 0;
    loop {
        iterations += 1;
        for i in 0..m {
            let (si, ext) = root_radius(scale, phi1, r, a[i], bracket, ev.domain.boundary_distance(cfg.z[i]), i, opts.strict)?;
            s[i] = si;
            extended[i] = ext;
        }
        let ell: Vec<f64> = s.iter().map(|si| (r / si).ln()).collect();
        let a_new = solve_levels(&coef, &ell)?;
        let change = a_new
            .iter()
            .zip(&a)
            .map(|(x, y)| ((x - y) / y).abs())
            .fold(0.0, f64::max);
        a = a_new;
        if a.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::PlateauRange {
                vortex: a.iter().position(|v| !(*v > 0.0)).unwrap(),
                value: a.iter().copied().fold(f64::INFINITY, f64::min),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if change < 0.1 * opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                what: "core parameter iteration".into(),
                iterations,
                residual: change,
            });
        }
    }
    // Final radii for the converged levels.
    for i in 0..m {
        let (si, ext) = root_radius(scale, phi1, r, a[i], bracket, ev.domain.boundary_distance(cfg.z[i]), i, opts.strict)?;
        s[i] = si;
        extended[i] = ext;
    }
    let ell: Vec<f64> = s.iter().map(|si| (r / si).ln()).collect();
    let matching: Vec<f64> = (0..m).map(|i| matching_residual(scale, phi1, r, a[i], s[i])).collect();
    let level = level_residuals(&coef, &ell, &a);
    let worst = matching.iter().chain(&level).copied().fold(0.0, f64::max);
    if worst >= opts.tol {
        return Err(Error::ToleranceNotMet(format!(
            "core parameter residual {worst:.3e} above {:.1e}",
            opts.tol
        )));
    }
    let a_in_range: Vec<bool> = (0..m)
        .map(|i| a[i] >= 0.5 * cfg.kappa[i] && a[i] <= 1.5 * cfg.kappa[i])
        .collect();
    if opts.strict {
        if let Some(i) = a_in_range.iter().position(|ok| !ok) {
            return Err(Error::PlateauRange {
                vortex: i,
                value: a[i],
                lo: 0.5 * cfg.kappa[i],
                hi: 1.5 * cfg.kappa[i],
            });
        }
    }
    Ok(AnsatzParams {
        eps: scale.eps,
        p: scale.p,
        delta: scale.delta,
        enclosing_radius: r,
        in_bracket: s.iter().map(|&v| v >= bracket[0] && v <= bracket[1]).collect(),
        s,
        a,
        matching_residual: matching,
        level_residual: level,
        iterations,
        bracket,
        bracket_extended: extended,
        a_in_range,
    })
}

/// Root of `θ` in the nominal bracket, or past its upper end up to the
/// distance to the boundary when the nominal end is still negative.
#[allow(clippy::too_many_arguments)]
fn root_radius(
    scale: &ScaleParams,
    phi1: f64,
    r: f64,
    a: f64,
    bracket: [f64; 2],
    wall: f64,
    vortex: usize,
    strict: bool,
) -> Result<(f64, bool)> {
    let f = |s: f64| theta(scale, phi1, r, a, s);
    let lo = bracket[0];
    if f(lo) >= 0.0 {
        return Err(Error::BracketSign {
            vortex,
            detail: format!("theta({lo:.4e}) = {:.3e} is not negative", f(lo)),
        });
    }
    let mut hi = bracket[1];
    let mut extended = false;
    if f(hi) <= 0.0 {
        let far = wall.min(0.999 * r);
        if strict || far <= hi || f(far) <= 0.0 {
            return Err(Error::BracketSign {
                vortex,
                detail: format!("theta does not change sign on [{lo:.4e}, {:.4e}]", far.max(hi)),
            });
        }
        hi = far;
        extended = true;
    }
    let (mut a0, mut b0) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a0 + b0);
        if mid <= a0 || mid >= b0 {
            break;
        }
        if f(mid) < 0.0 {
            a0 = mid;
        } else {
            b0 = mid;
        }
    }
    // Pick the end with the smaller residual.
    let s = if f(a0).abs() <= f(b0).abs() { a0 } else { b0 };
    Ok((s, extended))
}

/// Leading-order plateau levels
/// `κ_i + 2π q(z_i)/|ln ε| + κ_i g(z_i, z_i)/ln(R/ε) - Σ_{j≠i} κ_j Ḡ(z_i, z_j)/ln(R/ε)`.
pub fn plateau_expansion(
    ev: &PotentialEvaluator,
    flow: &BackgroundFlow,
    cfg: &VortexConfig,
    scale: &ScaleParams,
) -> Result<Vec<f64>> {
    let c = coefficients(ev, flow, cfg, scale)?;
    let l = (ev.enclosing_radius() / scale.eps).ln();
    Ok((0..cfg.m())
        .map(|i| {
            let mut v = c.rhs[i] + cfg.kappa[i] * c.g_diag[i] / l;
            for j in 0..cfg.m() {
                if j != i {
                    v -= cfg.kappa[j] * c.g_bar[(i, j)] / l;
                }
            }
            v
        })
        .collect())
}

/// Small-`δ` limit of the core radius, `δ |ln δ|^{(p-1)/2} (|φ'(1)|/a)^{(p-1)/2}`.
pub fn core_radius_asymptote(scale: &ScaleParams, profile: &ProfileSolution, a: f64) -> f64 {
    let e = 0.5 * (scale.p - 1.0);
    scale.delta * scale.delta.ln().abs().powf(e) * (profile.phi_prime_1.abs() / a).powf(e)
}

/// The single-vortex profile on `B_R`: plateau `a` plus a rescaled profile
/// inside `|x| ≤ s`, a logarithm vanishing at `|x| = R` outside.
pub fn eval_wprofile(
    scale: &ScaleParams,
    s: f64,
    a: f64,
    profile: &ProfileSolution,
    r_enclosing: f64,
    x_rel: Point,
) -> Result<f64> {
    if !(s > 0.0 && a > 0.0) {
        return Err(Error::InvalidInput(format!("core radius {s} and level {a} must be positive")));
    }
    let r = x_rel.norm();
    if r > r_enclosing {
        return Err(Error::InvalidInput(format!(
            "|x| = {r} exceeds the enclosing radius {r_enclosing}"
        )));
    }
    Ok(wprofile_unchecked(scale, s, a, profile, r_enclosing, r))
}

fn wprofile_unchecked(scale: &ScaleParams, s: f64, a: f64, profile: &ProfileSolution, big_r: f64, r: f64) -> f64 {
    if r <= s {
        a + scale.delta_pow() * s.powf(-2.0 / (scale.p - 1.0)) * eval_profile(profile, r / s).0
    } else {
        a * (r / big_r).ln() / (s / big_r).ln()
    }
}

/// One-sided radial slopes `(inside, outside)` of the profile at `|x| = s`.
pub fn wprofile_slopes(scale: &ScaleParams, s: f64, a: f64, profile: &ProfileSolution, big_r: f64) -> (f64, f64) {
    let inner = scale.delta_pow() * s.powf(-2.0 / (scale.p - 1.0)) * profile.phi_prime_1 / s;
    let outer = a / (s * (s / big_r).ln());
    (inner, outer)
}

/// Checks that every core disk lies inside the domain and inside its mask.
pub fn check_cores(ev: &PotentialEvaluator, cfg: &VortexConfig, params: &AnsatzParams) -> Result<()> {
    let d = &ev.domain;
    for (j, (&z, &s)) in cfg.z.iter().zip(&params.s).enumerate() {
        if s >= d.boundary_distance(z) {
            return Err(Error::CoreIntersectsBoundary {
                vortex: j,
                radius: s,
                what: "domain boundary",
            });
        }
    }
    if !cfg.use_masks {
        return Ok(());
    }
    match &cfg.masks {
        MaskSpec::Disks | MaskSpec::DiskRadii { .. } => {
            let radii = cfg.mask_radii(d);
            for j in 0..cfg.m() {
                if params.s[j] >= radii[j] {
                    return Err(Error::CoreIntersectsBoundary {
                        vortex: j,
                        radius: params.s[j],
                        what: "mask boundary",
                    });
                }
            }
        }
        MaskSpec::Voronoi { gap } => {
            for j in 0..cfg.m() {
                for i in 0..cfg.m() {
                    if i != j && params.s[j] >= 0.5 * cfg.z[i].dist(cfg.z[j]) - gap {
                        return Err(Error::CoreIntersectsBoundary {
                            vortex: j,
                            radius: params.s[j],
                            what: "mask boundary",
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Continuous evaluation of the assembled approximate solution.
pub struct Ansatz<'a> {
    pub ev: &'a PotentialEvaluator,
    pub cfg: &'a VortexConfig,
    pub params: &'a AnsatzParams,
    pub scale: ScaleParams,
    pub profile: &'a ProfileSolution,
}

impl<'a> Ansatz<'a> {
    /// Projected profile of vortex `j` at `x`.
    pub fn component(&self, j: usize, x: Point) -> Result<f64> {
        let z = self.cfg.z[j];
        let (s, a) = (self.params.s[j], self.params.a[j]);
        let big_r = self.params.enclosing_radius;
        let w = wprofile_unchecked(&self.scale, s, a, self.profile, big_r, x.dist(z));
        Ok(w - a / self.params.log_ratio(j) * self.ev.g(x, z)?)
    }

    pub fn value(&self, x: Point) -> Result<f64> {
        (0..self.cfg.m()).map(|j| self.component(j, x)).sum()
    }

    /// `(W_j - a_j)_+^p`, the source carried by vortex `j`.
    pub fn source(&self, j: usize, x: Point) -> f64 {
        let r = x.dist(self.cfg.z[j]);
        let s = self.params.s[j];
        if r >= s {
            return 0.0;
        }
        let v = self.scale.delta_pow() * s.powf(-2.0 / (self.scale.p - 1.0)) * eval_profile(self.profile, r / s).0;
        v.max(0.0).powf(self.scale.p)
    }
}

/// Samples the approximate solution on `grid`; nodes outside the domain
/// carry 0.
pub fn assemble_ansatz(
    ev: &PotentialEvaluator,
    cfg: &VortexConfig,
    params: &AnsatzParams,
    scale: &ScaleParams,
    profile: &ProfileSolution,
    grid: &GridSpec,
) -> Result<GridField> {
    check_cores(ev, cfg, params)?;
    let d = &ev.domain;
    let interior: Vec<bool> = if grid.same_layout(&d.grid) {
        d.interior.clone()
    } else {
        (0..grid.len()).map(|k| d.contains(grid.node_k(k))).collect()
    };
    let big_r = params.enclosing_radius;
    let ln_r = big_r.ln();
    let mut values = vec![0.0; grid.len()];
    for j in 0..cfg.m() {
        let h = ev.regular_part_on(grid, cfg.z[j])?;
        let (s, a) = (params.s[j], params.a[j]);
        let coef = a / params.log_ratio(j);
        for k in 0..grid.len() {
            if !interior[k] {
                continue;
            }
            let x = grid.node_k(k);
            let w = wprofile_unchecked(scale, s, a, profile, big_r, x.dist(cfg.z[j]));
            values[k] += w - coef * (ln_r + 2.0 * PI * h[k]);
        }
    }
    Ok(GridField {
        grid: *grid,
        values,
        interior,
        kind: FieldKind::Ansatz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, Shape};
    use crate::potential::{solve_background, FluxSamples};
    use crate::profile::solve_profile;
    use std::sync::Arc;

    fn setup() -> (PotentialEvaluator, BackgroundFlow, ProfileSolution) {
        let d = Arc::new(make_domain(Shape::unit_disk(), 64).unwrap());
        let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
        (PotentialEvaluator::new(d), flow, solve_profile(2.0, 1e-10).unwrap())
    }

    #[test]
    fn scale_formula() {
        let s = ScaleParams::new(0.05, 2.0).unwrap();
        let expect = 0.05 * (2.0 * PI / 0.05f64.ln().abs()).sqrt();
        assert_eq!(s.delta, expect);
        assert!(ScaleParams::new(1.0, 2.0).is_err());
        assert!(ScaleParams::new(0.1, 1.0).is_err());
    }

    #[test]
    fn profile_branches_agree_at_core_edge() {
        let (ev, flow, prof) = setup();
        let scale = ScaleParams::new(1e-3, 2.0).unwrap();
        let cfg = VortexConfig::new(vec![1.0], vec![Point::ORIGIN]);
        let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &AnsatzOptions::default()).unwrap();
        let (s, a) = (par.s[0], par.a[0]);
        let r = par.enclosing_radius;
        let inside = wprofile_unchecked(&scale, s, a, &prof, r, s * (1.0 - 1e-15));
        let outside = wprofile_unchecked(&scale, s, a, &prof, r, s * (1.0 + 1e-15));
        assert!((inside - a).abs() < 1e-12 && (outside - a).abs() < 1e-12);
        assert!(eval_wprofile(&scale, s, a, &prof, r, Point::new(r, 0.0)).unwrap().abs() < 1e-15);
        let (i, o) = wprofile_slopes(&scale, s, a, &prof, r);
        assert!((i - o).abs() < 1e-10 * i.abs(), "{i} {o}");
        assert!(eval_wprofile(&scale, s, a, &prof, r, Point::new(r * 1.01, 0.0)).is_err());
    }

    #[test]
    fn large_eps_has_no_bracket() {
        let (ev, flow, prof) = setup();
        let cfg = VortexConfig::new(vec![1.0], vec![Point::ORIGIN]);
        let scale = ScaleParams::new(0.5, 2.0).unwrap();
        let e = solve_params(&ev, &flow, &cfg, &scale, &prof, &AnsatzOptions::default()).unwrap_err();
        assert_eq!(e.code().as_str(), "BRACKET_SIGN");
    }

    #[test]
    fn residuals_meet_tolerance() {
        let (ev, flow, prof) = setup();
        let cfg = VortexConfig::new(
            vec![1.0, 2.0],
            vec![Point::new(0.4, 0.1), Point::new(-0.3, -0.2)],
        );
        for eps in [1e-2, 1e-3, 1e-5] {
            let scale = ScaleParams::new(eps, 2.0).unwrap();
            let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &AnsatzOptions::default()).unwrap();
            assert!(par.matching_residual.iter().chain(&par.level_residual).all(|r| *r < 1e-12));
        }
    }
}
