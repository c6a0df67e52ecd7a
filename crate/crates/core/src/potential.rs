//! Green and Robin functions of planar domains and the background flow.
//!
//! Conventions, with `Γ(x) = (1/2π) ln(1/|x|)`:
//! `G(x, y) = Γ(x - y) - h(x, y)` where `h` is the harmonic regular part;
//! [`PotentialEvaluator::robin`] returns `h(z, z)`;
//! `g(x, z) = ln R + 2π h(x, z)` and `Ḡ(x, z) = ln(R/|x - z|) - g(x, z)`,
//! so that `Ḡ = 2πG` holds identically.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Shape};
use crate::error::{Error, Result};
use crate::grid::{interpolate_cubic, FieldKind, GridField, GridSpec};
use crate::laplace::{DirichletLaplacian, SolveStats};
use crate::point::Point;

const CACHE_CAPACITY: usize = 64;
pub const LAPLACE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    AnalyticDisk,
    GridHarmonic,
}

/// Free-space fundamental solution `(1/2π) ln(1/|x|)`.
pub fn fundamental(x: Point) -> f64 {
    -x.norm().ln() / (2.0 * PI)
}

type RemainderCache = Mutex<VecDeque<((u64, u64), Arc<Vec<f64>>)>>;

#[derive(Debug)]
pub struct PotentialEvaluator {
    pub domain: Arc<Domain>,
    pub backend: Backend,
    lap: Option<DirichletLaplacian>,
    cache: RemainderCache,
}

impl PotentialEvaluator {
    /// Analytic backend for disks, grid backend otherwise.
    pub fn new(domain: Arc<Domain>) -> Self {
        match domain.shape {
            Shape::Disk { .. } => Self::analytic_disk(domain).expect("disk shape"),
            _ => Self::grid(domain),
        }
    }

    pub fn analytic_disk(domain: Arc<Domain>) -> Result<Self> {
        if !matches!(domain.shape, Shape::Disk { .. }) {
            return Err(Error::InvalidInput(format!(
                "analytic-disk backend needs a disk, got {}",
                domain.shape.name()
            )));
        }
        Ok(PotentialEvaluator {
            domain,
            backend: Backend::AnalyticDisk,
            lap: None,
            cache: Mutex::new(VecDeque::new()),
        })
    }

    pub fn grid(domain: Arc<Domain>) -> Self {
        let lap = DirichletLaplacian::new(&domain);
        PotentialEvaluator {
            domain,
            backend: Backend::GridHarmonic,
            lap: Some(lap),
            cache: Mutex::new(VecDeque::new()),
        }
    }

    pub fn enclosing_radius(&self) -> f64 {
        self.domain.enclosing_radius
    }

    fn disk(&self) -> (Point, f64) {
        match self.domain.shape {
            Shape::Disk { radius, center } => (center, radius),
            _ => unreachable!("analytic backend on a non-disk domain"),
        }
    }

    fn check_inside(&self, p: Point) -> Result<()> {
        if !p.is_finite() || !self.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(())
    }

    fn check_distinct(&self, x: Point, y: Point) -> Result<()> {
        if x.dist(y) <= 1e-12 * self.domain.diameter {
            return Err(Error::Singular(format!(
                "Green function evaluated on the diagonal at ({}, {})",
                x.x, x.y
            )));
        }
        Ok(())
    }

    /// Harmonic remainder `h(·, y)` on the evaluator grid; exterior nodes
    /// hold the boundary data `Γ(· - y)`.
    pub fn remainder_field(&self, y: Point) -> Result<Arc<Vec<f64>>> {
        let lap = self
            .lap
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("remainder fields need the grid backend".into()))?;
        let key = (y.x.to_bits(), y.y.to_bits());
        if let Some(hit) = self
            .cache
            .lock()
            .unwrap()
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.clone())
        {
            return Ok(hit);
        }
        let zero = vec![0.0; lap.n()];
        let (x, _) = lap.solve_dirichlet(&zero, |p| fundamental(p - y), LAPLACE_RTOL)?;
        let full = Arc::new(lap.scatter(&x, |p| fundamental(p - y)));
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_CAPACITY {
            cache.pop_front();
        }
        cache.push_back((key, full.clone()));
        Ok(full)
    }

    fn remainder_unchecked(&self, x: Point, y: Point) -> Result<f64> {
        match self.backend {
            Backend::AnalyticDisk => {
                let (c, rho) = self.disk();
                let (xx, yy) = (cx(x - c), cx(y - c));
                Ok((rho / (rho * rho - xx * yy.conj()).norm()).ln() / (2.0 * PI))
            }
            Backend::GridHarmonic => {
                let field = self.remainder_field(y)?;
                Ok(interpolate_cubic(&self.domain.grid, &field, x))
            }
        }
    }

    /// Regular part `h(x, y) = Γ(x - y) - G(x, y)`.
    pub fn regular_part(&self, x: Point, y: Point) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        self.remainder_unchecked(x, y)
    }

    pub fn green(&self, x: Point, y: Point) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        self.check_distinct(x, y)?;
        match self.backend {
            Backend::AnalyticDisk => {
                let (c, rho) = self.disk();
                let (xx, yy) = (cx(x - c), cx(y - c));
                let num = (rho * rho - xx * yy.conj()).norm();
                Ok((num / (rho * (xx - yy).norm())).ln() / (2.0 * PI))
            }
            Backend::GridHarmonic => Ok(fundamental(x - y) - self.remainder_unchecked(x, y)?),
        }
    }

    /// Robin function: the regular part on the diagonal.
    pub fn robin(&self, z: Point) -> Result<f64> {
        self.check_inside(z)?;
        match self.backend {
            Backend::AnalyticDisk => {
                let (c, rho) = self.disk();
                let r2 = (z - c).norm_sq();
                Ok(((rho * rho - r2) / rho).ln() * (-1.0 / (2.0 * PI)))
            }
            Backend::GridHarmonic => self.remainder_unchecked(z, z),
        }
    }

    /// `g(x, z) = ln R + 2π h(x, z)`.
    pub fn g(&self, x: Point, z: Point) -> Result<f64> {
        let h = if x == z {
            self.robin(z)?
        } else {
            self.regular_part(x, z)?
        };
        Ok(self.enclosing_radius().ln() + 2.0 * PI * h)
    }

    /// `Ḡ(x, z) = ln(R/|x - z|) - g(x, z)`.
    pub fn g_bar(&self, x: Point, z: Point) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(z)?;
        self.check_distinct(x, z)?;
        Ok((self.enclosing_radius() / x.dist(z)).ln() - self.g(x, z)?)
    }

    /// Gradient in `x` of `G(x, y)`.
    pub fn grad_green_x(&self, x: Point, y: Point) -> Result<Point> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        self.check_distinct(x, y)?;
        let d = x - y;
        let singular = d * (-1.0 / (2.0 * PI * d.norm_sq()));
        Ok(singular - self.grad_regular_x(x, y)?)
    }

    /// Gradient in `x` of `h(x, y)`.
    pub fn grad_regular_x(&self, x: Point, y: Point) -> Result<Point> {
        match self.backend {
            Backend::AnalyticDisk => {
                // h = -(1/2π) ln|ρ² - X Ȳ| + const; d/dX of ln(ρ² - XȲ) is -Ȳ/(ρ² - XȲ).
                let (c, rho) = self.disk();
                let (xx, yy) = (cx(x - c), cx(y - c));
                let fp = -yy.conj() / (rho * rho - xx * yy.conj());
                Ok(Point::new(-fp.re, fp.im) * (1.0 / (2.0 * PI)))
            }
            Backend::GridHarmonic => {
                let field = self.remainder_field(y)?;
                let e = self.domain.grid.h;
                let f = |p: Point| interpolate_cubic(&self.domain.grid, &field, p);
                Ok(Point::new(
                    (f(x + Point::new(e, 0.0)) - f(x - Point::new(e, 0.0))) / (2.0 * e),
                    (f(x + Point::new(0.0, e)) - f(x - Point::new(0.0, e))) / (2.0 * e),
                ))
            }
        }
    }

    /// Gradient of the Robin function (analytic backend only).
    pub fn grad_robin(&self, z: Point) -> Result<Point> {
        self.check_inside(z)?;
        match self.backend {
            Backend::AnalyticDisk => {
                let (c, rho) = self.disk();
                let zz = z - c;
                Ok(zz * (1.0 / (PI * (rho * rho - zz.norm_sq()))))
            }
            Backend::GridHarmonic => Err(Error::InvalidInput(
                "analytic Robin gradient needs the analytic-disk backend".into(),
            )),
        }
    }

    /// `h(x, z)` at every node of `grid` (exterior nodes included where
    /// defined).
    pub fn regular_part_on(&self, grid: &GridSpec, z: Point) -> Result<Vec<f64>> {
        self.check_inside(z)?;
        match self.backend {
            Backend::AnalyticDisk => {
                let (c, rho) = self.disk();
                let zz = cx(z - c);
                Ok((0..grid.len())
                    .map(|k| {
                        let xx = cx(grid.node_k(k) - c);
                        (rho / (rho * rho - xx * zz.conj()).norm()).ln() / (2.0 * PI)
                    })
                    .collect())
            }
            Backend::GridHarmonic => {
                let field = self.remainder_field(z)?;
                if grid.same_layout(&self.domain.grid) {
                    Ok(field.as_ref().clone())
                } else {
                    Ok((0..grid.len())
                        .map(|k| interpolate_cubic(&self.domain.grid, &field, grid.node_k(k)))
                        .collect())
                }
            }
        }
    }
}

fn cx(p: Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

/// Boundary flux data: one array of normal-velocity samples per boundary
/// component, uniformly spaced in arclength from the component's start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSamples {
    pub components: Vec<Vec<f64>>,
}

impl FluxSamples {
    pub fn zero(domain: &Domain) -> Self {
        let n = default_sample_count(domain);
        FluxSamples {
            components: domain.boundary.iter().map(|_| vec![0.0; n]).collect(),
        }
    }

    /// Samples `v·n` of a velocity field.
    pub fn from_velocity(domain: &Domain, v: impl Fn(Point) -> Point) -> Self {
        let n = default_sample_count(domain);
        FluxSamples {
            components: domain
                .boundary
                .iter()
                .map(|c| {
                    c.uniform_samples(n)
                        .into_iter()
                        .map(|(p, nrm)| v(p).dot(nrm))
                        .collect()
                })
                .collect(),
        }
    }

    /// Samples of a normal-velocity function of the boundary point and the
    /// arclength angle `2π s / L`.
    pub fn from_fn(domain: &Domain, f: impl Fn(Point, f64) -> f64) -> Self {
        let n = default_sample_count(domain);
        FluxSamples {
            components: domain
                .boundary
                .iter()
                .map(|c| {
                    (0..n)
                        .map(|k| {
                            let s = c.length * k as f64 / n as f64;
                            f(c.at(s).0, 2.0 * PI * k as f64 / n as f64)
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

fn default_sample_count(domain: &Domain) -> usize {
    (8 * domain.resolution).max(1024)
}

/// Named background flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum FlowPreset {
    None,
    /// Uniform stream `(u, v)`.
    Uniform { u: f64, v: f64 },
    /// Stream function `c (x² - y²)` about the domain's bounding-box center.
    Strain { c: f64 },
}

impl FlowPreset {
    /// Normal-velocity samples. The presets are divergence free, so the
    /// mean of each component is sampling error and is removed.
    pub fn samples(&self, domain: &Domain) -> FluxSamples {
        let o = domain.bbox.center();
        let mut s = match *self {
            FlowPreset::None => FluxSamples::zero(domain),
            FlowPreset::Uniform { u, v } => FluxSamples::from_velocity(domain, |_| Point::new(u, v)),
            FlowPreset::Strain { c } => FluxSamples::from_velocity(domain, |p| {
                let d = p - o;
                // v = (ψ_y, -ψ_x) for ψ = c(x² - y²)
                Point::new(-2.0 * c * d.y, -2.0 * c * d.x)
            }),
        };
        for comp in &mut s.components {
            let mean = comp.iter().sum::<f64>() / comp.len() as f64;
            comp.iter_mut().for_each(|v| *v -= mean);
        }
        s
    }
}

/// Harmonic extension of boundary data on a disk as `K + Re Σ c_j ζ^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSeries {
    pub center: Point,
    pub radius: f64,
    pub constant: f64,
    pub terms: Vec<(u32, [f64; 2])>,
}

impl DiskSeries {
    pub fn value(&self, p: Point) -> f64 {
        let zeta = cx(p - self.center) / self.radius;
        let mut pow = Complex64::new(1.0, 0.0);
        let mut last = 0;
        let mut acc = self.constant;
        for &(j, c) in &self.terms {
            while last < j {
                pow *= zeta;
                last += 1;
            }
            acc += (Complex64::new(c[0], c[1]) * pow).re;
        }
        acc
    }

    pub fn gradient(&self, p: Point) -> Point {
        let zeta = cx(p - self.center) / self.radius;
        let mut pow = Complex64::new(1.0, 0.0); // ζ^(j-1)
        let mut last = 1;
        let mut fp = Complex64::new(0.0, 0.0);
        for &(j, c) in &self.terms {
            while last < j {
                pow *= zeta;
                last += 1;
            }
            fp += Complex64::new(c[0], c[1]) * pow * (j as f64);
        }
        fp /= self.radius;
        Point::new(fp.re, -fp.im)
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundFlow {
    pub flux: FluxSamples,
    /// Boundary values of ψ₀ at the flux sample locations.
    pub boundary_psi: Vec<Vec<f64>>,
    pub psi0: GridField,
    pub q: GridField,
    pub series: Option<DiskSeries>,
    /// Net flux per component, as integrated.
    pub net_flux: Vec<f64>,
    pub laplace_stats: SolveStats,
    pub is_zero: bool,
    /// Constant added to ψ₀ after the solve (zero for the standard gauge).
    pub gauge: f64,
}

impl BackgroundFlow {
    pub fn psi0_at(&self, p: Point) -> f64 {
        if self.is_zero {
            return 0.0;
        }
        match &self.series {
            Some(s) => s.value(p) + self.gauge,
            None => self.psi0.sample(p),
        }
    }

    pub fn q_at(&self, p: Point) -> f64 {
        -self.psi0_at(p)
    }

    pub fn grad_psi0_at(&self, p: Point) -> Point {
        if self.is_zero {
            return Point::ORIGIN;
        }
        match &self.series {
            Some(s) => s.gradient(p),
            None => {
                let e = self.psi0.grid.h;
                let f = |d: Point| self.psi0.sample(p + d);
                Point::new(
                    (f(Point::new(e, 0.0)) - f(Point::new(-e, 0.0))) / (2.0 * e),
                    (f(Point::new(0.0, e)) - f(Point::new(0.0, -e))) / (2.0 * e),
                )
            }
        }
    }

    /// Same flow with ψ₀ shifted by a constant.
    pub fn with_gauge(&self, constant: f64) -> BackgroundFlow {
        let mut out = self.clone();
        out.gauge += constant;
        out.is_zero = false;
        out.psi0.values.iter_mut().for_each(|v| *v += constant);
        out.q = out.psi0.map(FieldKind::Q, |v| -v);
        out
    }

    /// `ψ₀` on the boundary at `(component, arclength)`, periodic cubic
    /// interpolation of the boundary table.
    pub fn boundary_value(&self, domain: &Domain, comp: usize, s: f64) -> f64 {
        periodic_cubic(&self.boundary_psi[comp], s / domain.boundary[comp].length) + self.gauge
    }
}

fn periodic_cubic(table: &[f64], frac: f64) -> f64 {
    let n = table.len();
    let x = frac.rem_euclid(1.0) * n as f64;
    let i = x.floor() as isize;
    let t = x - i as f64;
    let at = |k: isize| table[k.rem_euclid(n as isize) as usize];
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    // Catmull-Rom
    0.5 * (2.0 * p1
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Integrates `v_n` along each component (spectrally on circles, by the
/// trapezoid rule otherwise) and extends harmonically into the domain.
pub fn solve_background(domain: &Domain, flux: &FluxSamples) -> Result<BackgroundFlow> {
    if flux.components.len() != domain.boundary.len() {
        return Err(Error::ShapeMismatch(format!(
            "flux has {} components, domain boundary has {}",
            flux.components.len(),
            domain.boundary.len()
        )));
    }
    let mut net_flux = Vec::new();
    let mut boundary_psi = Vec::new();
    let mut series = None;
    let vmax = flux
        .components
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    for (samples, curve) in flux.components.iter().zip(&domain.boundary) {
        if samples.len() < 8 {
            return Err(Error::InvalidInput("need at least 8 flux samples per component".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flux sample is not finite".into()));
        }
        let n = samples.len();
        let ds = curve.length / n as f64;
        let net: f64 = samples.iter().sum::<f64>() * ds;
        let tol = 1e-8 * vmax * domain.perimeter();
        if net.abs() > tol {
            return Err(Error::FluxNonzero { net, tol });
        }
        net_flux.push(net);
        boundary_psi.push(integrate_flux(samples, curve.length, curve_is_circle(domain)));
    }
    if let Shape::Disk { radius, center } = domain.shape {
        series = Some(disk_series(&flux.components[0], center, radius));
    }
    let is_zero = vmax == 0.0;

    let lap = DirichletLaplacian::new(domain);
    let bflow_tmp = BackgroundFlow {
        flux: flux.clone(),
        boundary_psi,
        psi0: GridField::zeros(domain.grid, domain.interior.clone(), FieldKind::Psi0),
        q: GridField::zeros(domain.grid, domain.interior.clone(), FieldKind::Q),
        series,
        net_flux,
        laplace_stats: SolveStats::default(),
        is_zero,
        gauge: 0.0,
    };
    let g = |p: Point| {
        let (comp, s) = domain.project_to_boundary(p);
        bflow_tmp.boundary_value(domain, comp, s)
    };
    let zero = vec![0.0; lap.n()];
    let (x, stats) = lap.solve_dirichlet(&zero, g, LAPLACE_RTOL)?;
    let values = lap.scatter(&x, g);
    let psi0 = GridField {
        grid: domain.grid,
        values,
        interior: domain.interior.clone(),
        kind: FieldKind::Psi0,
    };
    let q = psi0.map(FieldKind::Q, |v| -v);
    Ok(BackgroundFlow {
        psi0,
        q,
        laplace_stats: stats,
        ..bflow_tmp
    })
}

fn curve_is_circle(domain: &Domain) -> bool {
    matches!(domain.shape, Shape::Disk { .. } | Shape::Annulus { .. })
}

/// `ψ(s) = ∫₀^s v_n` at the sample locations, so that `n · (∇ψ)^⊥ = v_n`
/// with `(∇ψ)^⊥ = (ψ_y, -ψ_x)`.
fn integrate_flux(samples: &[f64], length: f64, spectral: bool) -> Vec<f64> {
    let n = samples.len();
    if spectral {
        let (a, b) = real_dft(samples);
        let rho = length / (2.0 * PI);
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let mut acc = 0.0;
                for j in 1..a.len() {
                    let jf = j as f64;
                    acc += a[j] * (jf * t).sin() / jf + b[j] * (1.0 - (jf * t).cos()) / jf;
                }
                rho * acc
            })
            .collect()
    } else {
        let ds = length / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..n {
            acc += 0.5 * (samples[k - 1] + samples[k]) * ds;
            out.push(acc);
        }
        out
    }
}

/// Cosine and sine coefficients `v ≈ a₀ + Σ a_j cos jt + b_j sin jt`,
/// Nyquist mode dropped.
fn real_dft(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let kmax = (n - 1) / 2;
    let mut a = vec![0.0; kmax + 1];
    let mut b = vec![0.0; kmax + 1];
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|k| (2.0 * PI * k as f64 / n as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip();
    for j in 0..=kmax {
        let (mut sa, mut sb) = (0.0, 0.0);
        for (k, v) in samples.iter().enumerate() {
            let idx = (j * k) % n;
            sa += v * cos_t[idx];
            sb += v * sin_t[idx];
        }
        let scale = if j == 0 { 1.0 } else { 2.0 } / n as f64;
        a[j] = sa * scale;
        b[j] = sb * scale;
    }
    (a, b)
}

fn disk_series(samples: &[f64], center: Point, radius: f64) -> DiskSeries {
    let (a, b) = real_dft(samples);
    let amax = a.iter().chain(&b).fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut constant = 0.0;
    let mut terms = Vec::new();
    for j in 1..a.len() {
        let jf = j as f64;
        if a[j].abs().max(b[j].abs()) <= 1e-14 * amax {
            continue;
        }
        constant += radius * b[j] / jf;
        terms.push((j as u32, [-radius * b[j] / jf, -radius * a[j] / jf]));
    }
    DiskSeries {
        center,
        radius,
        constant,
        terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;

    fn unit_disk(res: usize) -> Arc<Domain> {
        Arc::new(make_domain(Shape::unit_disk(), res).unwrap())
    }

    #[test]
    fn disk_green_with_source_at_center() {
        let ev = PotentialEvaluator::new(unit_disk(64));
        for &r in &[0.1, 0.5, 0.9] {
            let x = Point::polar(r, 0.7);
            let oracle = (1.0 / r).ln() / (2.0 * PI);
            assert!((ev.green(x, Point::ORIGIN).unwrap() - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn disk_robin_oracle() {
        let ev = PotentialEvaluator::new(unit_disk(64));
        assert_eq!(ev.robin(Point::ORIGIN).unwrap(), 0.0);
        let mut prev = -1.0;
        for k in 0..20 {
            let r = 0.049 * k as f64;
            let v = ev.robin(Point::polar(r, 1.1)).unwrap();
            assert!((v - (-(1.0 - r * r).ln() / (2.0 * PI))).abs() < 1e-14);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn g_bar_is_two_pi_green() {
        let ev = PotentialEvaluator::new(unit_disk(64));
        let x = Point::new(0.5, 0.0);
        assert!((ev.g_bar(x, Point::ORIGIN).unwrap() - 2f64.ln()).abs() < 1e-14);
        let y = Point::new(-0.2, 0.3);
        let lhs = ev.g_bar(x, y).unwrap();
        let rhs = 2.0 * PI * ev.green(x, y).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn errors_outside_and_on_diagonal() {
        let ev = PotentialEvaluator::new(unit_disk(64));
        let z = Point::new(0.1, 0.1);
        assert!(matches!(ev.green(z, z), Err(Error::Singular(_))));
        assert!(matches!(
            ev.green(Point::new(1.2, 0.0), z),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(matches!(ev.robin(Point::new(0.0, 1.0)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let ev = PotentialEvaluator::new(unit_disk(64));
        let (x, y) = (Point::new(0.31, -0.2), Point::new(-0.4, 0.25));
        let e = 1e-6;
        let g = ev.grad_green_x(x, y).unwrap();
        let fx = (ev.green(x + Point::new(e, 0.0), y).unwrap()
            - ev.green(x - Point::new(e, 0.0), y).unwrap())
            / (2.0 * e);
        let fy = (ev.green(x + Point::new(0.0, e), y).unwrap()
            - ev.green(x - Point::new(0.0, e), y).unwrap())
            / (2.0 * e);
        assert!((g.x - fx).abs() < 1e-8 && (g.y - fy).abs() < 1e-8);
        let gr = ev.grad_robin(x).unwrap();
        let rx = (ev.robin(x + Point::new(e, 0.0)).unwrap() - ev.robin(x - Point::new(e, 0.0)).unwrap())
            / (2.0 * e);
        assert!((gr.x - rx).abs() < 1e-8);
    }

    #[test]
    fn zero_flux_gives_zero_stream_function() {
        let d = unit_disk(64);
        let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
        assert!(flow.psi0.values.iter().all(|&v| v == 0.0));
        assert!(flow.q.values.iter().all(|&v| v == 0.0));
        assert_eq!(flow.psi0_at(Point::new(0.3, 0.1)), 0.0);
    }

    #[test]
    fn cosine_flux_on_disk() {
        let d = unit_disk(128);
        let flux = FluxSamples::from_fn(&d, |_, t| t.cos());
        let flow = solve_background(&d, &flux).unwrap();
        let err = (0..d.grid.len())
            .filter(|&k| d.interior[k])
            .map(|k| {
                let p = d.grid.node_k(k);
                (flow.psi0.values[k] - p.y).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        let p = Point::new(0.2, -0.45);
        assert!((flow.psi0_at(p) - p.y).abs() < 1e-12);
        let gp = flow.grad_psi0_at(p);
        assert!(gp.x.abs() < 1e-12 && (gp.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonzero_net_flux_is_rejected() {
        let d = unit_disk(64);
        let flux = FluxSamples::from_fn(&d, |_, t| 1.0 + t.cos());
        assert!(matches!(
            solve_background(&d, &flux),
            Err(Error::FluxNonzero { .. })
        ));
    }

    #[test]
    fn strain_preset_matches_its_stream_function() {
        let d = unit_disk(64);
        let flow = solve_background(&d, &FlowPreset::Strain { c: 0.3 }.samples(&d)).unwrap();
        // Gauge: zero at (1, 0) where c(x² - y²) = c.
        for p in [Point::new(0.1, 0.2), Point::new(-0.5, 0.4)] {
            let exact = 0.3 * (p.x * p.x - p.y * p.y) - 0.3;
            assert!((flow.psi0_at(p) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn tangential_derivative_reproduces_flux() {
        let d = Arc::new(
            make_domain(
                Shape::Rectangle {
                    width: 2.0,
                    height: 1.0,
                    center: Point::ORIGIN,
                },
                64,
            )
            .unwrap(),
        );
        let flux = FlowPreset::Uniform { u: 0.7, v: -0.2 }.samples(&d);
        let flow = solve_background(&d, &flux).unwrap();
        let c = &d.boundary[0];
        let n = flux.components[0].len();
        let ds = c.length / n as f64;
        for k in [10, 200, 700, 900] {
            let dpsi = (flow.boundary_psi[0][k + 1] - flow.boundary_psi[0][k - 1]) / (2.0 * ds);
            assert!((dpsi - flux.components[0][k]).abs() < 1e-9, "{k}");
        }
    }
}
