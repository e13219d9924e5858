//! Uniform rectilinear grids, scalar fields, finite differences and norms.
//!
//! Points are stored row-major with axis 1 slowest:
//! `index = (i1 * n2 + i2) * n3 + i3`.  Inactive axes of lower-dimensional
//! grids carry a single point at coordinate zero.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Result, ShockError};
use crate::profile::eta;

/// Minimum number of points on an active axis.
pub const MIN_POINTS: usize = 8;

/// Uniform grid on `[-ext, ext]` along each active axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub n: [usize; 3],
    pub ext: [f64; 3],
    pub h: [f64; 3],
}

impl Grid {
    /// Grid of dimension `dim` with the given points and half-widths per axis.
    /// Entries for inactive axes are ignored.
    pub fn new(dim: usize, n: [usize; 3], ext: [f64; 3]) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(ShockError::InvalidGrid(format!("dimension {dim}")));
        }
        let mut gn = [1usize; 3];
        let mut ge = [0.0; 3];
        let mut gh = [0.0; 3];
        for a in 0..dim {
            if n[a] < MIN_POINTS {
                return Err(ShockError::InvalidGrid(format!(
                    "axis {} has {} points, need at least {MIN_POINTS}",
                    a + 1,
                    n[a]
                )));
            }
            if !(ext[a].is_finite() && ext[a] > 0.0) {
                return Err(ShockError::InvalidGrid(format!(
                    "axis {} has extent {}",
                    a + 1,
                    ext[a]
                )));
            }
            gn[a] = n[a];
            ge[a] = ext[a];
            gh[a] = 2.0 * ext[a] / (n[a] - 1) as f64;
        }
        Ok(Grid {
            dim,
            n: gn,
            ext: ge,
            h: gh,
        })
    }

    /// Total number of points.
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Whether the grid has no points (never true for a valid grid).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether axis `a` (0-based) is active.
    pub fn active(&self, a: usize) -> bool {
        a < self.dim
    }

    /// Stride of axis `a` (0-based) in the flat storage.
    pub fn stride(&self, a: usize) -> usize {
        match a {
            0 => self.n[1] * self.n[2],
            1 => self.n[2],
            _ => 1,
        }
    }

    /// Flat index of a multi-index.
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n[1] + i[1]) * self.n[2] + i[2]
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i3 = idx % self.n[2];
        let r = idx / self.n[2];
        [r / self.n[1], r % self.n[1], i3]
    }

    /// Coordinate of node `i` along axis `a` (0-based).
    pub fn coord(&self, a: usize, i: usize) -> f64 {
        if self.active(a) {
            -self.ext[a] + i as f64 * self.h[a]
        } else {
            0.0
        }
    }

    /// Coordinates of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.unravel(idx);
        [self.coord(0, m[0]), self.coord(1, m[1]), self.coord(2, m[2])]
    }

    /// Volume element of the trapezoidal rule at a multi-index.
    pub fn quad_weight(&self, m: [usize; 3]) -> f64 {
        let mut w = 1.0;
        for a in 0..self.dim {
            let end = m[a] == 0 || m[a] == self.n[a] - 1;
            w *= if end { 0.5 * self.h[a] } else { self.h[a] };
        }
        w
    }

    /// Cell volume (product of active spacings).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h[a]).product()
    }
}

/// Scalar field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub name: String,
    /// Inclusive index box outside of which the field is known to vanish.
    pub support: Option<[[usize; 2]; 3]>,
}

impl Field {
    /// Zero field.
    pub fn zeros(grid: Grid, name: &str) -> Field {
        Field {
            grid,
            values: vec![0.0; grid.len()],
            name: name.to_string(),
            support: None,
        }
    }

    /// Field sampled from a function of the coordinates.
    pub fn from_fn(grid: Grid, name: &str, f: impl Fn([f64; 3]) -> f64) -> Field {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Field {
            grid,
            values,
            name: name.to_string(),
            support: None,
        }
    }

    /// Field from raw values.
    pub fn from_values(grid: Grid, name: &str, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(ShockError::ShapeMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid,
            values,
            name: name.to_string(),
            support: None,
        })
    }

    /// Copy with a new name.
    pub fn renamed(&self, name: &str) -> Field {
        let mut f = self.clone();
        f.name = name.to_string();
        f
    }

    /// Pointwise map.
    pub fn map(&self, name: &str, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            name: name.to_string(),
            support: None,
        }
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// Maximum absolute value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal integral.
    pub fn integral(&self) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                s += g.quad_weight(g.unravel(idx)) * v;
            }
        }
        s
    }

    /// Smallest index box containing every entry with `|v| > threshold`.
    pub fn support_box(&self, threshold: f64) -> Option<[[usize; 2]; 3]> {
        let g = self.grid;
        let mut bx = [[usize::MAX, 0]; 3];
        let mut any = false;
        for (idx, v) in self.values.iter().enumerate() {
            if v.abs() > threshold {
                any = true;
                let m = g.unravel(idx);
                for a in 0..3 {
                    bx[a][0] = bx[a][0].min(m[a]);
                    bx[a][1] = bx[a][1].max(m[a]);
                }
            }
        }
        any.then_some(bx)
    }
}

/// Central 4th-order weights for derivatives of order 0..=4 together with
/// the stencil half-width.
pub fn central_weights(order: usize) -> Result<(&'static [f64], usize)> {
    const W0: [f64; 1] = [1.0];
    const W1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    const W2: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    const W3: [f64; 7] = [
        1.0 / 8.0,
        -1.0,
        13.0 / 8.0,
        0.0,
        -13.0 / 8.0,
        1.0,
        -1.0 / 8.0,
    ];
    const W4: [f64; 7] = [
        -1.0 / 6.0,
        2.0,
        -13.0 / 2.0,
        28.0 / 3.0,
        -13.0 / 2.0,
        2.0,
        -1.0 / 6.0,
    ];
    match order {
        0 => Ok((&W0, 0)),
        1 => Ok((&W1, 2)),
        2 => Ok((&W2, 2)),
        3 => Ok((&W3, 3)),
        4 => Ok((&W4, 3)),
        _ => Err(ShockError::UnsupportedOrder(order)),
    }
}

const LEFT1: [[f64; 5]; 2] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
];
const LEFT2: [[f64; 6]; 2] = [
    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
];

/// Apply the 1D derivative of `order` (1 or 2) to a strided line.
fn line_derivative(
    src: &[f64],
    dst: &mut [f64],
    start: usize,
    stride: usize,
    n: usize,
    h: f64,
    order: usize,
) {
    let at = |i: usize| src[start + i * stride];
    let (w, _) = central_weights(order).expect("order 1 or 2");
    let scale = if order == 1 { 1.0 / h } else { 1.0 / (h * h) };
    for i in 2..n - 2 {
        let mut s = 0.0;
        for (k, c) in w.iter().enumerate() {
            s += c * at(i + k - 2);
        }
        dst[start + i * stride] = s * scale;
    }
    for b in 0..2 {
        let (mut l, mut r) = (0.0, 0.0);
        if order == 1 {
            for k in 0..5 {
                l += LEFT1[b][k] * at(k);
                r -= LEFT1[b][k] * at(n - 1 - k);
            }
        } else {
            for k in 0..6 {
                l += LEFT2[b][k] * at(k);
                r += LEFT2[b][k] * at(n - 1 - k);
            }
        }
        dst[start + b * stride] = l * scale / 12.0;
        dst[start + (n - 1 - b) * stride] = r * scale / 12.0;
    }
}

fn check_axis(g: &Grid, axis: usize) -> Result<usize> {
    if axis == 0 || axis > g.dim {
        return Err(ShockError::InvalidGrid(format!(
            "axis {axis} is inactive on a {}-dimensional grid",
            g.dim
        )));
    }
    Ok(axis - 1)
}

/// Raw-slice version of [`derivative`] writing into `dst`.
pub fn derivative_into(
    g: &Grid,
    src: &[f64],
    axis: usize,
    order: usize,
    dst: &mut [f64],
) -> Result<()> {
    let a = check_axis(g, axis)?;
    if order == 0 || order > 2 {
        return Err(ShockError::UnsupportedOrder(order));
    }
    let n = g.n[a];
    let stride = g.stride(a);
    let h = g.h[a];
    let outer = g.len() / (n * stride);
    for o in 0..outer {
        for inner in 0..stride {
            let start = o * n * stride + inner;
            line_derivative(src, dst, start, stride, n, h, order);
        }
    }
    Ok(())
}

/// 4th-order finite-difference derivative along `axis` (1-based) of order 1 or 2.
pub fn derivative(f: &Field, axis: usize, order: usize) -> Result<Field> {
    let mut out = Field::zeros(f.grid, &format!("d{axis}^{order} {}", f.name));
    derivative_into(&f.grid, &f.values, axis, order, &mut out.values)?;
    Ok(out)
}

/// Mixed derivative `∂^γ f` built from repeated 1D derivatives, `γ` per axis.
pub fn mixed_derivative(f: &Field, gamma: [usize; 3]) -> Result<Field> {
    let mut cur = f.clone();
    for a in 0..3 {
        let mut left = gamma[a];
        while left > 0 {
            let step = left.min(2);
            cur = derivative(&cur, a + 1, step)?;
            left -= step;
        }
    }
    cur.name = format!("d{:?} {}", gamma, f.name);
    Ok(cur)
}

/// `sup η^p |f|` over the grid, with η evaluated at the grid coordinates.
pub fn weighted_sup(f: &Field, exponent: f64) -> f64 {
    let g = f.grid;
    let mut m = 0.0f64;
    for (idx, v) in f.values.iter().enumerate() {
        m = m.max(eta(g.point(idx)).powf(exponent) * v.abs());
    }
    m
}

/// Trapezoidal L² norm.
pub fn l2_norm(f: &Field) -> f64 {
    let g = f.grid;
    let mut s = 0.0;
    for (idx, v) in f.values.iter().enumerate() {
        s += g.quad_weight(g.unravel(idx)) * v * v;
    }
    s.sqrt()
}

/// Weight `λ(k) = δ² / (12 k²)` of the energy functional.
pub fn energy_lambda(delta: f64, k: usize) -> f64 {
    delta * delta / (12.0 * (k * k) as f64)
}

/// All multi-indices of total order `k` over the active axes of `g`.
pub fn multi_indices(dim: usize, k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            let c = k - a - b;
            let g = [a, b, c];
            if (0..3).all(|ax| ax < dim || g[ax] == 0) {
                out.push(g);
            }
        }
    }
    out
}

/// `Σ_{|γ|=k} λ^{|γ̌|} Σ_f ‖∂^γ f‖²` over a list of fields sharing a grid.
pub fn sobolev_seminorm(fields: &[&Field], k: usize, lambda: f64) -> Result<f64> {
    if k > 4 {
        return Err(ShockError::UnsupportedOrder(k)).map_err(|_| {
            ShockError::Config(format!(
                "reduced-k build: energy order {k} exceeds the supported maximum 4"
            ))
        });
    }
    let Some(first) = fields.first() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for gamma in multi_indices(first.grid.dim, k) {
        let weight = lambda.powi((gamma[1] + gamma[2]) as i32);
        for f in fields {
            if f.grid != first.grid {
                return Err(ShockError::ShapeMismatch("fields on different grids".into()));
            }
            let d = mixed_derivative(f, gamma)?;
            let n = l2_norm(&d);
            total += weight * n * n;
        }
    }
    Ok(total)
}

fn lagrange4(t: f64) -> [f64; 4] {
    // Nodes at -1, 0, 1, 2 relative to the base node.
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Base node and weights for cubic interpolation at coordinate `x` along axis `a`.
pub fn interp_stencil(g: &Grid, a: usize, x: f64) -> Option<(usize, [f64; 4])> {
    if !g.active(a) {
        return Some((0, [0.0, 1.0, 0.0, 0.0]));
    }
    let tol = 1e-9 * g.h[a];
    if x < -g.ext[a] - tol || x > g.ext[a] + tol {
        return None;
    }
    let u = (x + g.ext[a]) / g.h[a];
    let n = g.n[a];
    let base = (u.floor().max(1.0) as usize).min(n - 3);
    Some((base - 1, lagrange4(u - base as f64)))
}

/// Cubic tensor-product interpolation of raw values at `p`; `None` outside the grid.
pub fn interpolate_values(g: &Grid, values: &[f64], p: [f64; 3]) -> Option<f64> {
    let s0 = interp_stencil(g, 0, p[0])?;
    let s1 = interp_stencil(g, 1, p[1])?;
    let s2 = interp_stencil(g, 2, p[2])?;
    let r = |a: usize| if g.active(a) { 0..4 } else { 1..2 };
    let mut acc = 0.0;
    for i in r(0) {
        for j in r(1) {
            let mut row = 0.0;
            for k in r(2) {
                let idx = g.index([
                    if g.active(0) { s0.0 + i } else { 0 },
                    if g.active(1) { s1.0 + j } else { 0 },
                    if g.active(2) { s2.0 + k } else { 0 },
                ]);
                row += s2.1[k] * values[idx];
            }
            acc += s0.1[i] * s1.1[j] * row;
        }
    }
    Some(acc)
}

/// Cubic interpolation of a field at a point.
pub fn interpolate(f: &Field, p: [f64; 3]) -> Result<f64> {
    interpolate_values(&f.grid, &f.values, p)
        .ok_or_else(|| ShockError::OutOfRange(format!("point {p:?} outside grid of {}", f.name)))
}

/// Finite-difference value of `∂^γ f` at an interior node using central stencils.
pub fn node_derivative(g: &Grid, values: &[f64], m: [usize; 3], gamma: [usize; 3]) -> Result<f64> {
    node_derivative_strided(g, values, m, gamma, 1)
}

/// Whether the central stencil for `∂^γ` with node spacing `stride` fits at `m`.
pub fn stencil_fits(g: &Grid, m: [usize; 3], gamma: [usize; 3], stride: usize) -> bool {
    (0..3).all(|a| {
        if gamma[a] == 0 {
            return true;
        }
        let hw = (gamma[a] + 1) / 2 + 1;
        g.active(a) && m[a] >= hw * stride && m[a] + hw * stride < g.n[a]
    })
}

/// As [`node_derivative`] with the stencil nodes `stride` cells apart
/// (effective spacing `stride · h`).
pub fn node_derivative_strided(
    g: &Grid,
    values: &[f64],
    m: [usize; 3],
    gamma: [usize; 3],
    stride: usize,
) -> Result<f64> {
    let mut stencils: [(&[f64], usize); 3] = [(&[1.0], 0); 3];
    for a in 0..3 {
        if gamma[a] > 0 && !g.active(a) {
            return Err(ShockError::InvalidGrid(format!("axis {} inactive", a + 1)));
        }
        stencils[a] = central_weights(gamma[a])?;
        stencils[a].1 *= stride;
        let hw = stencils[a].1;
        if m[a] < hw || m[a] + hw >= g.n[a] {
            return Err(ShockError::OutOfRange(format!(
                "node {m:?} too close to the boundary for derivative {gamma:?}"
            )));
        }
    }
    let mut acc = 0.0;
    for (i, c0) in stencils[0].0.iter().enumerate() {
        if *c0 == 0.0 {
            continue;
        }
        for (j, c1) in stencils[1].0.iter().enumerate() {
            if *c1 == 0.0 {
                continue;
            }
            for (k, c2) in stencils[2].0.iter().enumerate() {
                if *c2 == 0.0 {
                    continue;
                }
                let idx = g.index([
                    m[0] + i * stride - stencils[0].1,
                    m[1] + j * stride - stencils[1].1,
                    m[2] + k * stride - stencils[2].1,
                ]);
                acc += c0 * c1 * c2 * values[idx];
            }
        }
    }
    let mut scale = 1.0;
    for a in 0..3 {
        if gamma[a] > 0 {
            scale /= (stride as f64 * g.h[a]).powi(gamma[a] as i32);
        }
    }
    Ok(acc * scale)
}

/// Derivative `∂^γ f` at an arbitrary interior point: central differences at
/// the surrounding nodes followed by cubic interpolation.
pub fn point_derivative(g: &Grid, values: &[f64], p: [f64; 3], gamma: [usize; 3]) -> Result<f64> {
    let mut st = [(0usize, [0.0; 4]); 3];
    for a in 0..3 {
        st[a] = interp_stencil(g, a, p[a])
            .ok_or_else(|| ShockError::OutOfRange(format!("point {p:?} outside grid")))?;
    }
    let r = |a: usize| if g.active(a) { 0..4 } else { 1..2 };
    let mut acc = 0.0;
    for i in r(0) {
        for j in r(1) {
            for k in r(2) {
                let w = st[0].1[i] * st[1].1[j] * st[2].1[k];
                let m = [
                    if g.active(0) { st[0].0 + i } else { 0 },
                    if g.active(1) { st[1].0 + j } else { 0 },
                    if g.active(2) { st[2].0 + k } else { 0 },
                ];
                acc += w * node_derivative(g, values, m, gamma)?;
            }
        }
    }
    Ok(acc)
}

/// Magic tag opening every snapshot file.
pub const SNAPSHOT_MAGIC: &str = "SHOCKLAB1";

/// Write fields sharing one grid as a snapshot.
pub fn write_snapshot(path: &Path, time: f64, fields: &[&Field]) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(ShockError::ShapeMismatch("snapshot without fields".into()));
    };
    let g = first.grid;
    let mut buf = Vec::with_capacity(64 + 8 * g.len() * fields.len());
    writeln!(
        buf,
        "{SNAPSHOT_MAGIC} {} {} {} {} {} {} {} {}",
        g.dim, g.n[0], g.n[1], g.n[2], g.ext[0], g.ext[1], g.ext[2], time
    )?;
    for f in fields {
        if f.grid != g {
            return Err(ShockError::ShapeMismatch("snapshot fields on different grids".into()));
        }
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Snapshot contents: grid, time and raw field arrays in file order.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub grid: Grid,
    pub time: f64,
    pub fields: Vec<Vec<f64>>,
}

/// Read a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut rd = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    rd.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 9 || parts[0] != SNAPSHOT_MAGIC {
        return Err(ShockError::Malformed(format!("bad snapshot header {header:?}")));
    }
    let num = |i: usize| -> Result<f64> {
        parts[i]
            .parse::<f64>()
            .map_err(|_| ShockError::Malformed(format!("bad header entry {}", parts[i])))
    };
    let dim = num(1)? as usize;
    let n = [num(2)? as usize, num(3)? as usize, num(4)? as usize];
    let ext = [num(5)?, num(6)?, num(7)?];
    let time = num(8)?;
    let grid = Grid::new(dim, n, ext)?;
    let mut rest = Vec::new();
    rd.read_to_end(&mut rest)?;
    let per = 8 * grid.len();
    if rest.is_empty() || rest.len() % per != 0 {
        return Err(ShockError::Malformed(format!(
            "payload of {} bytes is not a whole number of fields",
            rest.len()
        )));
    }
    let fields = rest
        .chunks(per)
        .map(|c| {
            c.chunks(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect()
        })
        .collect();
    Ok(Snapshot { grid, time, fields })
}

/// Column-oriented series written as CSV with a header row.
#[derive(Clone, Debug, Default)]
pub struct CsvSeries {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvSeries {
    /// Empty series with the given columns.
    pub fn new(header: &[&str]) -> CsvSeries {
        CsvSeries {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a numeric row.
    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| format!("{v:e}")).collect());
    }

    /// Append a row of preformatted cells.
    pub fn push_cells(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Write to disk.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV file written by [`CsvSeries::write`].
    pub fn read(path: &Path) -> Result<CsvSeries> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(|s| s.to_string()).collect());
        }
        Ok(CsvSeries { header, rows })
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ShockError::Malformed(format!("missing column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|_| ShockError::Malformed(format!("non-numeric cell {}", r[k])))
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> ShockError {
    ShockError::Malformed(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize, ext: f64) -> Grid {
        Grid::new(1, [n, 1, 1], [ext, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, [7, 1, 1], [1.0, 0.0, 0.0]).is_err());
        assert!(Grid::new(2, [8, 8, 1], [1.0, -1.0, 0.0]).is_err());
        let g = Grid::new(3, [9, 8, 10], [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.len(), 720);
        assert!((g.h[0] - 0.25).abs() < 1e-15);
        let idx = g.index([3, 4, 5]);
        assert_eq!(g.unravel(idx), [3, 4, 5]);
    }

    #[test]
    fn polynomial_exactness_all_points() {
        let g = g1(12, 1.3);
        for p in 0..=4 {
            let f = Field::from_fn(g, "p", |x| x[0].powi(p));
            let d1 = derivative(&f, 1, 1).unwrap();
            let d2 = derivative(&f, 1, 2).unwrap();
            for i in 0..g.len() {
                let x = g.coord(0, i);
                let e1 = if p >= 1 { p as f64 * x.powi(p - 1) } else { 0.0 };
                let e2 = if p >= 2 { (p * (p - 1)) as f64 * x.powi(p - 2) } else { 0.0 };
                assert!((d1.values[i] - e1).abs() < 1e-11, "d1 p={p} i={i}");
                assert!((d2.values[i] - e2).abs() < 1e-9, "d2 p={p} i={i}");
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let g = g1(n, 2.0);
            let f = Field::from_fn(g, "s", |x| x[0].sin());
            let d = derivative(&f, 1, 1).unwrap();
            (0..g.len())
                .map(|i| (d.values[i] - g.coord(0, i).cos()).abs())
                .fold(0.0, f64::max)
        };
        let r = err(81) / err(161);
        assert!(r > 14.0 && r < 18.0, "ratio {r}");
    }

    #[test]
    fn central_weight_exactness() {
        for order in 0..=4 {
            let (w, hw) = central_weights(order).unwrap();
            for p in 0..=(order + 3).min(6) {
                let s: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (k as f64 - hw as f64).powi(p as i32))
                    .sum();
                let expect = if p == order {
                    (1..=order).product::<usize>() as f64
                } else {
                    0.0
                };
                assert!((s - expect).abs() < 1e-12, "order {order} power {p}: {s}");
            }
        }
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let g = Grid::new(2, [10, 12, 1], [1.0, 2.0, 0.0]).unwrap();
        let f = Field::from_fn(g, "c", |x| x[0].powi(3) - 2.0 * x[0] * x[1] + x[1].powi(2));
        for p in [[0.13, -1.7, 0.0], [-0.99, 1.99, 0.0], [1.0, 2.0, 0.0]] {
            let v = interpolate(&f, p).unwrap();
            let e = p[0].powi(3) - 2.0 * p[0] * p[1] + p[1].powi(2);
            assert!((v - e).abs() < 1e-12);
        }
        assert!(interpolate(&f, [1.2, 0.0, 0.0]).is_err());
    }

    #[test]
    fn point_derivative_on_polynomial() {
        let g = Grid::new(3, [16, 16, 16], [1.0, 1.0, 1.0]).unwrap();
        let f = Field::from_fn(g, "p", |x| x[0].powi(3) * x[1] * x[1] + x[2] * x[0]);
        let p = [0.11, -0.2, 0.31];
        let d = point_derivative(&g, &f.values, p, [2, 2, 0]).unwrap();
        assert!((d - 12.0 * p[0]).abs() < 1e-9);
        let d = point_derivative(&g, &f.values, p, [1, 0, 1]).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norms() {
        let g = Grid::new(1, [11, 1, 1], [1.0, 0.0, 0.0]).unwrap();
        let one = Field::from_fn(g, "1", |_| 1.0);
        assert!((weighted_sup(&one, -1.0 / 6.0) - 1.0).abs() < 1e-15);
        assert!((l2_norm(&one) - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(weighted_sup(&Field::zeros(g, "0"), -1.0 / 6.0), 0.0);
        assert!((energy_lambda(1.0 / 32.0, 2) - 1.0 / 49152.0).abs() < 1e-20);
        assert!(sobolev_seminorm(&[&one], 5, 0.1).is_err());
    }

    #[test]
    fn seminorm_of_sine() {
        let pi = std::f64::consts::PI;
        let g = Grid::new(3, [65, 9, 9], [pi, pi, pi]).unwrap();
        let u = Field::from_fn(g, "u", |x| x[0].sin());
        let v = sobolev_seminorm(&[&u], 1, 0.3).unwrap();
        let expect = (2.0 * pi).powi(3) / 2.0;
        assert!((v - expect).abs() / expect < 1e-3, "{v} vs {expect}");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, [8, 9, 1], [1.0, 0.5, 0.0]).unwrap();
        let a = Field::from_fn(g, "a", |x| x[0] + 2.0 * x[1]);
        let b = Field::from_fn(g, "b", |x| (x[0] * x[1]).exp());
        let p = dir.path().join("s.bin");
        write_snapshot(&p, 0.25, &[&a, &b]).unwrap();
        let s = read_snapshot(&p).unwrap();
        assert_eq!(s.grid, g);
        assert_eq!(s.time, 0.25);
        assert_eq!(s.fields[0], a.values);
        assert_eq!(s.fields[1], b.values);
    }
}
