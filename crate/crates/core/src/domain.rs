//! Bounded planar domains: shape, boundary parametrization, level set and the
//! Cartesian grid used by every grid-based solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::point::Point;

/// Polyline resolution used for curved boundaries without a closed-form
/// projection.
const CURVE_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        radius: f64,
        #[serde(default)]
        center: Point,
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: Point,
    },
    Rectangle {
        width: f64,
        height: f64,
        #[serde(default)]
        center: Point,
    },
    Annulus {
        inner: f64,
        outer: f64,
        #[serde(default)]
        center: Point,
    },
    Polygon {
        vertices: Vec<Point>,
    },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Disk { .. } => "disk",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Rectangle { .. } => "rectangle",
            Shape::Annulus { .. } => "annulus",
            Shape::Polygon { .. } => "polygon",
        }
    }

    pub fn unit_disk() -> Shape {
        Shape::Disk {
            radius: 1.0,
            center: Point::ORIGIN,
        }
    }

    /// Signed level set: negative inside, positive outside. Exact signed
    /// distance except for the ellipse, where only the sign is exact.
    pub fn level_set(&self, p: Point) -> f64 {
        match self {
            Shape::Disk { radius, center } => (p - *center).norm() - radius,
            Shape::Ellipse { a, b, center } => {
                let d = p - *center;
                ((d.x / a).hypot(d.y / b) - 1.0) * a.min(*b)
            }
            Shape::Rectangle {
                width,
                height,
                center,
            } => {
                let d = p - *center;
                let qx = d.x.abs() - 0.5 * width;
                let qy = d.y.abs() - 0.5 * height;
                if qx > 0.0 || qy > 0.0 {
                    qx.max(0.0).hypot(qy.max(0.0))
                } else {
                    qx.max(qy)
                }
            }
            Shape::Annulus {
                inner,
                outer,
                center,
            } => {
                let r = (p - *center).norm();
                (r - outer).max(inner - r)
            }
            Shape::Polygon { vertices } => {
                let d = polyline_distance(vertices, p, true);
                if winding_inside(vertices, p) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::DegenerateShape(format!("{name} must be positive, got {v}")));
            }
            Ok(())
        };
        match self {
            Shape::Disk { radius, .. } => positive(*radius, "radius"),
            Shape::Ellipse { a, b, .. } => {
                positive(*a, "a")?;
                positive(*b, "b")
            }
            Shape::Rectangle { width, height, .. } => {
                positive(*width, "width")?;
                positive(*height, "height")
            }
            Shape::Annulus { inner, outer, .. } => {
                positive(*inner, "inner radius")?;
                positive(*outer, "outer radius")?;
                if inner >= outer {
                    return Err(Error::DegenerateShape(format!(
                        "annulus inner radius {inner} must be below outer radius {outer}"
                    )));
                }
                Ok(())
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::DegenerateShape("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("polygon vertex is not finite".into()));
                }
                let area = signed_area(vertices).abs();
                let scale = bbox_of(vertices).diagonal();
                if area <= 1e-12 * scale * scale {
                    return Err(Error::DegenerateShape("polygon has zero area".into()));
                }
                Ok(())
            }
        }
    }

    fn curves(&self) -> Vec<BoundaryCurve> {
        match self {
            Shape::Disk { radius, center } => vec![BoundaryCurve::circle(*center, *radius, true)],
            Shape::Annulus {
                inner,
                outer,
                center,
            } => vec![
                BoundaryCurve::circle(*center, *outer, true),
                BoundaryCurve::circle(*center, *inner, false),
            ],
            Shape::Ellipse { a, b, center } => {
                let pts = (0..=CURVE_SAMPLES)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * (k % CURVE_SAMPLES) as f64
                            / CURVE_SAMPLES as f64;
                        *center + Point::new(a * t.cos(), b * t.sin())
                    })
                    .collect();
                vec![BoundaryCurve::polyline(pts)]
            }
            Shape::Rectangle {
                width,
                height,
                center,
            } => {
                let (w, h) = (0.5 * width, 0.5 * height);
                // Start at the middle of the right edge so the parametrization
                // origin matches the disk's angle zero.
                let c = *center;
                let pts = vec![
                    c + Point::new(w, 0.0),
                    c + Point::new(w, h),
                    c + Point::new(-w, h),
                    c + Point::new(-w, -h),
                    c + Point::new(w, -h),
                    c + Point::new(w, 0.0),
                ];
                vec![BoundaryCurve::polyline(pts)]
            }
            Shape::Polygon { vertices } => {
                let mut pts = vertices.clone();
                if signed_area(&pts) < 0.0 {
                    pts.reverse();
                }
                pts.push(pts[0]);
                vec![BoundaryCurve::polyline(pts)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

fn bbox_of(points: &[Point]) -> BoundingBox {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    BoundingBox { min, max }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}

fn winding_inside(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segment_projection(a: Point, b: Point, p: Point) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_sq();
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, (a + d * t).dist(p))
}

fn polyline_distance(v: &[Point], p: Point, closed: bool) -> f64 {
    let n = v.len();
    let segs = if closed { n } else { n - 1 };
    (0..segs)
        .map(|i| segment_projection(v[i], v[(i + 1) % n], p).1)
        .fold(f64::INFINITY, f64::min)
}

/// One closed boundary component, oriented with the domain on its left.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    kind: CurveKind,
    /// Closed sample polyline (first == last).
    pub points: Vec<Point>,
    /// Cumulative arclength at each sample.
    pub arclength: Vec<f64>,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CurveKind {
    Circle { center: Point, radius: f64, ccw: bool },
    Polyline,
}

impl BoundaryCurve {
    fn circle(center: Point, radius: f64, ccw: bool) -> Self {
        let sign = if ccw { 1.0 } else { -1.0 };
        let points: Vec<Point> = (0..=CURVE_SAMPLES)
            .map(|k| {
                let t = sign * 2.0 * std::f64::consts::PI * (k % CURVE_SAMPLES) as f64
                    / CURVE_SAMPLES as f64;
                center + Point::polar(radius, t)
            })
            .collect();
        let length = 2.0 * std::f64::consts::PI * radius;
        let arclength = (0..=CURVE_SAMPLES)
            .map(|k| length * k as f64 / CURVE_SAMPLES as f64)
            .collect();
        BoundaryCurve {
            kind: CurveKind::Circle {
                center,
                radius,
                ccw,
            },
            points,
            arclength,
            length,
        }
    }

    fn polyline(points: Vec<Point>) -> Self {
        let mut arclength = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        arclength.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            arclength.push(acc);
        }
        BoundaryCurve {
            kind: CurveKind::Polyline,
            points,
            arclength,
            length: acc,
        }
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        self.points[0].dist(*self.points.last().unwrap()) <= tol
    }

    fn wrap(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        if s >= self.length {
            0.0
        } else {
            s
        }
    }

    /// Boundary point and outward unit normal at arclength `s`.
    pub fn at(&self, s: f64) -> (Point, Point) {
        let s = self.wrap(s);
        match self.kind {
            CurveKind::Circle {
                center,
                radius,
                ccw,
            } => {
                let t = s / radius * if ccw { 1.0 } else { -1.0 };
                let u = Point::polar(1.0, t);
                (center + u * radius, if ccw { u } else { -u })
            }
            CurveKind::Polyline => {
                let k = match self
                    .arclength
                    .binary_search_by(|v| v.partial_cmp(&s).unwrap())
                {
                    Ok(k) => k.min(self.points.len() - 2),
                    Err(k) => k - 1,
                };
                let (a, b) = (self.points[k], self.points[k + 1]);
                let seg = self.arclength[k + 1] - self.arclength[k];
                let t = if seg > 0.0 {
                    (s - self.arclength[k]) / seg
                } else {
                    0.0
                };
                let tan = (b - a) * (1.0 / seg.max(f64::MIN_POSITIVE));
                (a + (b - a) * t, Point::new(tan.y, -tan.x))
            }
        }
    }

    /// Arclength of the closest boundary point and its distance to `p`.
    pub fn project(&self, p: Point) -> (f64, f64) {
        match self.kind {
            CurveKind::Circle {
                center,
                radius,
                ccw,
            } => {
                let d = p - center;
                let mut t = d.y.atan2(d.x);
                if !ccw {
                    t = -t;
                }
                let s = (t.rem_euclid(2.0 * std::f64::consts::PI)) * radius;
                (self.wrap(s), (d.norm() - radius).abs())
            }
            CurveKind::Polyline => {
                let mut best = (0.0, f64::INFINITY);
                for k in 0..self.points.len() - 1 {
                    let (t, d) = segment_projection(self.points[k], self.points[k + 1], p);
                    if d < best.1 {
                        let s = self.arclength[k] + t * (self.arclength[k + 1] - self.arclength[k]);
                        best = (s, d);
                    }
                }
                (self.wrap(best.0), best.1)
            }
        }
    }

    /// `n` points at uniformly spaced arclength starting at the origin of
    /// the parametrization.
    pub fn uniform_samples(&self, n: usize) -> Vec<(Point, Point)> {
        (0..n)
            .map(|k| self.at(self.length * k as f64 / n as f64))
            .collect()
    }
}

/// A planar domain together with its computational grid.
#[derive(Debug, Clone)]
pub struct Domain {
    pub shape: Shape,
    pub boundary: Vec<BoundaryCurve>,
    pub bbox: BoundingBox,
    pub diameter: f64,
    /// Enclosing radius `R = 1.5 * diam`.
    pub enclosing_radius: f64,
    pub inradius: f64,
    pub grid: GridSpec,
    pub interior: Vec<bool>,
    pub resolution: usize,
}

/// Builds a domain and its grid of `resolution` cells across the longer
/// side of the bounding box.
pub fn make_domain(shape: Shape, resolution: usize) -> Result<Domain> {
    if resolution < 32 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 32, got {resolution}"
        )));
    }
    shape.validate()?;
    let boundary = shape.curves();
    let all: Vec<Point> = boundary.iter().flat_map(|c| c.points.iter().copied()).collect();
    let bbox = bbox_of(&all);
    let diameter = diameter_of(&shape);
    let enclosing_radius = 1.5 * diameter;

    let extent = bbox.width().max(bbox.height());
    let h = extent / resolution as f64;
    let count = |len: f64| 2 * ((0.5 * len / h - 1e-9).ceil() as usize) + 3;
    let nx = count(bbox.width());
    let ny = count(bbox.height());
    let c = bbox.center();
    let grid = GridSpec {
        nx,
        ny,
        x0: c.x - (nx / 2) as f64 * h,
        y0: c.y - (ny / 2) as f64 * h,
        h,
    };
    let interior: Vec<bool> = (0..grid.len())
        .map(|k| shape.level_set(grid.node_k(k)) < 0.0)
        .collect();

    let mut domain = Domain {
        shape,
        boundary,
        bbox,
        diameter,
        enclosing_radius,
        inradius: 0.0,
        grid,
        interior,
        resolution,
    };
    domain.inradius = domain.compute_inradius();

    for (i, c) in domain.boundary.iter().enumerate() {
        if !c.is_closed(1e-12 * extent) {
            return Err(Error::DegenerateShape(format!("boundary component {i} is not closed")));
        }
    }
    let n_interior = domain.interior.iter().filter(|&&b| b).count();
    if n_interior < 16 || domain.inradius < 2.0 * h {
        return Err(Error::Unresolvable(format!(
            "inradius {:.3e} spans fewer than two cells of size {:.3e}",
            domain.inradius, h
        )));
    }
    Ok(domain)
}

fn diameter_of(shape: &Shape) -> f64 {
    match shape {
        Shape::Disk { radius, .. } => 2.0 * radius,
        Shape::Annulus { outer, .. } => 2.0 * outer,
        Shape::Ellipse { a, b, .. } => 2.0 * a.max(*b),
        Shape::Rectangle { width, height, .. } => width.hypot(*height),
        Shape::Polygon { vertices } => {
            let mut d: f64 = 0.0;
            for a in vertices {
                for b in vertices {
                    d = d.max(a.dist(*b));
                }
            }
            d
        }
    }
}

impl Domain {
    pub fn contains(&self, p: Point) -> bool {
        self.shape.level_set(p) < 0.0
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match &self.shape {
            Shape::Disk { .. } | Shape::Annulus { .. } | Shape::Rectangle { .. } => {
                self.shape.level_set(p).abs()
            }
            _ => self
                .boundary
                .iter()
                .map(|c| c.project(p).1)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Closest boundary point as `(component, arclength)`.
    pub fn project_to_boundary(&self, p: Point) -> (usize, f64) {
        let mut best = (0, 0.0, f64::INFINITY);
        for (i, c) in self.boundary.iter().enumerate() {
            let (s, d) = c.project(p);
            if d < best.2 {
                best = (i, s, d);
            }
        }
        (best.0, best.1)
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary.iter().map(|c| c.length).sum()
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn is_simply_connected(&self) -> bool {
        self.boundary.len() == 1
    }

    /// Rebuilds the same shape at another grid resolution.
    pub fn with_resolution(&self, resolution: usize) -> Result<Domain> {
        make_domain(self.shape.clone(), resolution)
    }

    fn compute_inradius(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius, .. } => *radius,
            Shape::Annulus { inner, outer, .. } => 0.5 * (outer - inner),
            Shape::Rectangle { width, height, .. } => 0.5 * width.min(*height),
            Shape::Ellipse { a, b, .. } => a.min(*b),
            Shape::Polygon { .. } => (0..self.grid.len())
                .filter(|&k| self.interior[k])
                .map(|k| self.boundary_distance(self.grid.node_k(k)))
                .fold(0.0, f64::max),
        }
    }

    /// Rotational symmetry about the domain center, if any.
    pub fn rotation_center(&self) -> Option<Point> {
        match &self.shape {
            Shape::Disk { center, .. } | Shape::Annulus { center, .. } => Some(*center),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_enclosing_radius() {
        let d = make_domain(Shape::unit_disk(), 128).unwrap();
        assert_eq!(d.enclosing_radius, 3.0);
        assert_eq!(d.grid.nx, 131);
        assert!(d.contains(Point::ORIGIN));
        let c = d.grid.node(d.grid.nx / 2, d.grid.ny / 2);
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn annulus_excludes_origin() {
        let d = make_domain(
            Shape::Annulus {
                inner: 0.4,
                outer: 1.0,
                center: Point::ORIGIN,
            },
            128,
        )
        .unwrap();
        assert!(!d.contains(Point::ORIGIN));
        assert_eq!(d.boundary.len(), 2);
        assert!((d.inradius - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rectangle_perimeter_matches_polyline() {
        let d = make_domain(
            Shape::Rectangle {
                width: 2.0,
                height: 1.0,
                center: Point::ORIGIN,
            },
            64,
        )
        .unwrap();
        // Independent polyline length of the four corners.
        let corners = [(1.0, 0.5), (-1.0, 0.5), (-1.0, -0.5), (1.0, -0.5)];
        let mut len = 0.0;
        for i in 0..4 {
            let (a, b) = (corners[i], corners[(i + 1) % 4]);
            len += f64::hypot(a.0 - b.0, a.1 - b.1);
        }
        assert!((d.perimeter() - len).abs() / len < 0.01);
    }

    #[test]
    fn rejects_degenerate_and_coarse() {
        assert_eq!(
            make_domain(Shape::Disk { radius: 0.0, center: Point::ORIGIN }, 64)
                .unwrap_err()
                .code(),
            crate::error::ErrorCode::DegenerateShape
        );
        assert!(matches!(
            make_domain(Shape::unit_disk(), 16),
            Err(Error::InvalidInput(_))
        ));
        let thin = Shape::Annulus {
            inner: 0.995,
            outer: 1.0,
            center: Point::ORIGIN,
        };
        assert_eq!(
            make_domain(thin, 64).unwrap_err().code(),
            crate::error::ErrorCode::Unresolvable
        );
    }

    #[test]
    fn boundary_parametrization_normals_point_outward() {
        for shape in [
            Shape::unit_disk(),
            Shape::Ellipse {
                a: 1.0,
                b: 0.6,
                center: Point::new(0.1, 0.0),
            },
            Shape::Annulus {
                inner: 0.4,
                outer: 1.0,
                center: Point::ORIGIN,
            },
            Shape::Polygon {
                vertices: vec![
                    Point::new(0.0, 0.0),
                    Point::new(0.0, 1.0),
                    Point::new(1.0, 1.0),
                    Point::new(1.0, 0.0),
                ],
            },
        ] {
            let d = make_domain(shape, 64).unwrap();
            for c in &d.boundary {
                for k in 0..37 {
                    // Offset to stay off polygon corners.
                    let (p, n) = c.at(c.length * (k as f64 + 0.3) / 37.0);
                    assert!(d.contains(p - n * 1e-3), "{p:?} {n:?}");
                    assert!(!d.contains(p + n * 1e-3));
                }
            }
        }
    }

    #[test]
    fn projection_inverts_parametrization() {
        let d = make_domain(
            Shape::Ellipse {
                a: 1.2,
                b: 0.7,
                center: Point::ORIGIN,
            },
            64,
        )
        .unwrap();
        let c = &d.boundary[0];
        for k in 1..20 {
            let s = c.length * k as f64 / 20.3;
            let (p, n) = c.at(s);
            let (s2, dist) = c.project(p + n * 1e-4);
            assert!((s2 - s).abs() < 1e-6, "{s} {s2}");
            assert!((dist - 1e-4).abs() < 1e-6);
        }
    }
}
