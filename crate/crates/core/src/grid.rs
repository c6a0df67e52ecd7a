//! Uniform Cartesian grids and scalar fields sampled on them.
//!
//! Nodes sit at `(x0 + i*h, y0 + j*h)` and values are stored row-major with
//! `j` (the y index) as the row. Nodes flagged exterior are Dirichlet ghost
//! nodes; their stored value is whatever extension the producer chose (zero
//! for `w`/`u`, boundary data for harmonic fields) and CSV output writes them
//! as `NaN`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    #[inline]
    pub fn node_k(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        self.node(i, j)
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Fractional grid coordinates of a point.
    pub fn locate(&self, p: Point) -> (f64, f64) {
        ((p.x - self.x0) / self.h, (p.y - self.y0) / self.h)
    }

    /// True when `other` has the same node layout up to rounding.
    pub fn same_layout(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.x0 - other.x0).abs() <= 1e-9 * self.h
            && (self.y0 - other.y0).abs() <= 1e-9 * self.h
    }
}

/// What a [`GridField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    W,
    U,
    Psi0,
    Q,
    Vorticity,
    VelocityX,
    VelocityY,
    Pressure,
    Ansatz,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub interior: Vec<bool>,
    pub kind: FieldKind,
}

impl GridField {
    pub fn zeros(grid: GridSpec, interior: Vec<bool>, kind: FieldKind) -> Self {
        assert_eq!(interior.len(), grid.len());
        GridField {
            grid,
            values: vec![0.0; grid.len()],
            interior,
            kind,
        }
    }

    pub fn from_fn(
        grid: GridSpec,
        interior: Vec<bool>,
        kind: FieldKind,
        f: impl Fn(Point) -> f64,
    ) -> Self {
        let values = (0..grid.len())
            .map(|k| if interior[k] { f(grid.node_k(k)) } else { 0.0 })
            .collect();
        GridField {
            grid,
            values,
            interior,
            kind,
        }
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn map(&self, kind: FieldKind, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            interior: self.interior.clone(),
            kind,
        }
    }

    pub fn max_interior(&self) -> f64 {
        self.interior_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_interior(&self) -> f64 {
        self.interior_values().fold(f64::INFINITY, f64::min)
    }

    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.interior)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.interior)
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Cubic-convolution interpolation of the stored node values.
    pub fn sample(&self, p: Point) -> f64 {
        interpolate_cubic(&self.grid, &self.values, p)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(out, "nx,ny,x0,y0,dx,dy")?;
        writeln!(out, "{},{},{},{},{},{}", g.nx, g.ny, g.x0, g.y0, g.h, g.h)?;
        let mut line = String::new();
        for j in 0..g.ny {
            line.clear();
            for i in 0..g.nx {
                let k = g.index(i, j);
                if i > 0 {
                    line.push(',');
                }
                if self.interior[k] {
                    line.push_str(&format!("{}", self.values[k]));
                } else {
                    line.push_str("NaN");
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`GridField::write_csv`]; `NaN` cells
    /// become exterior nodes holding zero.
    pub fn read_csv<R: BufRead>(input: R, kind: FieldKind) -> Result<GridField> {
        let mut lines = input.lines();
        let bad = |m: &str| Error::InvalidInput(format!("grid csv: {m}"));
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        if header.trim() != "nx,ny,x0,y0,dx,dy" {
            return Err(bad("unexpected header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing metadata"))??;
        let parts: Vec<&str> = meta.trim().split(',').collect();
        if parts.len() != 6 {
            return Err(bad("metadata must have 6 entries"));
        }
        let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let nx: usize = parts[0].trim().parse().map_err(|_| bad("bad nx"))?;
        let ny: usize = parts[1].trim().parse().map_err(|_| bad("bad ny"))?;
        let (x0, y0, dx, dy) = (
            parse_f(parts[2])?,
            parse_f(parts[3])?,
            parse_f(parts[4])?,
            parse_f(parts[5])?,
        );
        if (dx - dy).abs() > 1e-12 * dx {
            return Err(bad("anisotropic spacing is not supported"));
        }
        let grid = GridSpec {
            nx,
            ny,
            x0,
            y0,
            h: dx,
        };
        let mut values = Vec::with_capacity(grid.len());
        let mut interior = Vec::with_capacity(grid.len());
        for _ in 0..ny {
            let row = lines.next().ok_or_else(|| bad("too few rows"))??;
            let mut count = 0;
            for cell in row.trim().split(',') {
                let v = parse_f(cell)?;
                interior.push(!v.is_nan());
                values.push(if v.is_nan() { 0.0 } else { v });
                count += 1;
            }
            if count != nx {
                return Err(bad("row length differs from nx"));
            }
        }
        Ok(GridField {
            grid,
            values,
            interior,
            kind,
        })
    }
}

fn keys_weights(t: f64) -> [f64; 4] {
    // Keys cubic convolution kernel with a = -1/2 at offsets -1, 0, 1, 2.
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// C¹ cubic-convolution interpolation; falls back to bilinear within one
/// node of the grid edge and clamps outside it.
pub fn interpolate_cubic(grid: &GridSpec, values: &[f64], p: Point) -> f64 {
    let (fx, fy) = grid.locate(p);
    let fx = fx.clamp(0.0, (grid.nx - 1) as f64);
    let fy = fy.clamp(0.0, (grid.ny - 1) as f64);
    let i = (fx.floor() as usize).min(grid.nx - 2);
    let j = (fy.floor() as usize).min(grid.ny - 2);
    let tx = fx - i as f64;
    let ty = fy - j as f64;
    if i >= 1 && j >= 1 && i + 2 < grid.nx && j + 2 < grid.ny {
        let wx = keys_weights(tx);
        let wy = keys_weights(ty);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let row = (j + b - 1) * grid.nx;
            let mut r = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                r += wxa * values[row + i + a - 1];
            }
            acc += wyb * r;
        }
        acc
    } else {
        let v00 = values[grid.index(i, j)];
        let v10 = values[grid.index(i + 1, j)];
        let v01 = values[grid.index(i, j + 1)];
        let v11 = values[grid.index(i + 1, j + 1)];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec {
            nx: 21,
            ny: 17,
            x0: -1.0,
            y0: -0.8,
            h: 0.1,
        }
    }

    #[test]
    fn cubic_interpolation_reproduces_quadratics() {
        let g = spec();
        let f = |p: Point| 1.0 + 2.0 * p.x - p.y + 0.5 * p.x * p.x + p.x * p.y - 0.3 * p.y * p.y;
        let values: Vec<f64> = (0..g.len()).map(|k| f(g.node_k(k))).collect();
        for &(x, y) in &[(0.013, 0.27), (-0.55, 0.111), (0.31, -0.42)] {
            let p = Point::new(x, y);
            assert!((interpolate_cubic(&g, &values, p) - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_hits_nodes_exactly() {
        let g = spec();
        let values: Vec<f64> = (0..g.len()).map(|k| (k as f64).sin()).collect();
        let k = g.index(7, 9);
        assert!((interpolate_cubic(&g, &values, g.node(7, 9)) - values[k]).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = spec();
        let interior: Vec<bool> = (0..g.len()).map(|k| k % 3 != 0).collect();
        let f = GridField::from_fn(g, interior, FieldKind::W, |p| (p.x * 3.1).exp() / 7.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(std::io::Cursor::new(buf), FieldKind::W).unwrap();
        assert_eq!(back.grid, f.grid);
        assert_eq!(back.interior, f.interior);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let text = "nx,ny,x0,y0,dx,dy\n2,2,0,0,1,1\n1,2\n3\n";
        assert!(GridField::read_csv(std::io::Cursor::new(text), FieldKind::W).is_err());
    }
}
