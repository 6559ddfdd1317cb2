//! Uniform cell-centered grids, sampled fields and the discrete operators
//! shared by the solver and the diagnostics.
//!
//! Two geometries are supported: a line segment `[x_lo, x_hi]` and a radial
//! mesh `[0, r_max]` standing in for a radially symmetric 2D problem. Radial
//! cells carry the annulus volume `2π r h`, so every integral below is a true
//! planar integral.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute floor under relative support thresholds.
pub const SUPPORT_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Line,
    Radial,
}

impl Geometry {
    pub fn dim(self) -> usize {
        match self {
            Geometry::Line => 1,
            Geometry::Radial => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    geometry: Geometry,
    n_cells: usize,
    lo: f64,
    hi: f64,
    h: f64,
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn line(lo: f64, hi: f64, n_cells: usize) -> Result<Self> {
        Self::new(Geometry::Line, lo, hi, n_cells)
    }

    pub fn radial(r_max: f64, n_cells: usize) -> Result<Self> {
        Self::new(Geometry::Radial, 0.0, r_max, n_cells)
    }

    pub fn new(geometry: Geometry, lo: f64, hi: f64, n_cells: usize) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "n_cells = {n_cells}, need at least {}",
                Self::MIN_CELLS
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidGrid(format!("extent [{lo}, {hi}] is empty")));
        }
        if geometry == Geometry::Radial && lo != 0.0 {
            return Err(Error::InvalidGrid("radial grids start at r = 0".into()));
        }
        Ok(Grid { geometry, n_cells, lo, hi, h: (hi - lo) / n_cells as f64 })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Position of face `j`, `0 <= j <= n_cells`.
    pub fn face(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.h
    }

    pub fn volume(&self, i: usize) -> f64 {
        match self.geometry {
            Geometry::Line => self.h,
            Geometry::Radial => 2.0 * PI * self.center(i) * self.h,
        }
    }

    pub fn volumes(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.volume(i)).collect()
    }

    /// Ratio (face area) / (cell volume) for the left and right faces of cell `i`.
    /// Boundary faces are reported too; callers apply zero flux there.
    pub(crate) fn face_factors(&self, i: usize) -> (f64, f64) {
        match self.geometry {
            Geometry::Line => (1.0 / self.h, 1.0 / self.h),
            Geometry::Radial => {
                let r = self.center(i);
                (self.face(i) / (r * self.h), self.face(i + 1) / (r * self.h))
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Index of the cell containing `x`, if inside the extent.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let i = ((x - self.lo) / self.h).floor() as usize;
        Some(i.min(self.n_cells - 1))
    }

    /// Linear interpolation between cell centers; constant in the outer half cells.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.lo) / self.h - 0.5;
        if s <= 0.0 {
            return Some(values[0]);
        }
        let j = s.floor() as usize;
        if j + 1 >= self.n_cells {
            return Some(values[self.n_cells - 1]);
        }
        let w = s - j as f64;
        Some(values[j] * (1.0 - w) + values[j + 1] * w)
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.geometry == other.geometry
            && self.n_cells == other.n_cells
            && self.lo == other.lo
            && self.hi == other.hi
    }
}

/// One value per cell, stamped with a time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<f64>,
}

/// One component per cell: `d/dx` on a line, `d/dr` on a radial mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0, cell: i });
        }
        Ok(ScalarField { grid, t, values })
    }

    pub fn zeros(grid: Grid, t: f64) -> Self {
        ScalarField { grid, t, values: vec![0.0; grid.n_cells()] }
    }

    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid, t, values: grid.centers().into_iter().map(f).collect() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell-volume-weighted sum.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| v * self.grid.volume(i)).sum()
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        self.grid.interpolate(&self.values, x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, t: self.t, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Cell-volume inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| a * b * self.grid.volume(i))
            .sum()
    }
}

/// Central differences in the interior, one-sided at the outer boundaries.
/// On a radial mesh the inner boundary is the symmetry axis, handled with a
/// mirrored ghost cell.
pub fn grad(u: &ScalarField) -> VectorField {
    let g = u.grid;
    let n = g.n_cells();
    let h = g.h();
    let v = &u.values;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if i == 0 {
            match g.geometry() {
                Geometry::Line => (v[1] - v[0]) / h,
                Geometry::Radial => (v[1] - v[0]) / (2.0 * h),
            }
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / h
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        };
    }
    VectorField { grid: g, t: u.t, values: out }
}

/// Face-flux form of `div(m grad u)` with arithmetic face averages of `m` and
/// zero flux through the outer boundary faces.
pub fn div_m_grad(m: &ScalarField, u: &ScalarField) -> ScalarField {
    let g = u.grid;
    let n = g.n_cells();
    let h = g.h();
    let mut flux = vec![0.0; n + 1];
    for j in 1..n {
        let m_face = 0.5 * (m.values[j - 1] + m.values[j]);
        flux[j] = m_face * (u.values[j] - u.values[j - 1]) / h;
    }
    let values = (0..n)
        .map(|i| {
            let (left, right) = g.face_factors(i);
            right * flux[i + 1] - left * flux[i]
        })
        .collect();
    ScalarField { grid: g, t: u.t, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
}

pub fn norms(u: &ScalarField) -> Norms {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut l4 = 0.0;
    let mut linf: f64 = 0.0;
    for (i, &v) in u.values.iter().enumerate() {
        let a = v.abs();
        let w = u.grid.volume(i);
        l1 += w * a;
        l2 += w * a * a;
        l4 += w * a.powi(4);
        linf = linf.max(a);
    }
    Norms { l1, l2: l2.sqrt(), l4: l4.powf(0.25), linf }
}

pub fn bv_seminorm(u: &ScalarField) -> f64 {
    let g = grad(u);
    g.values.iter().enumerate().map(|(i, v)| v.abs() * u.grid.volume(i)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub mask: Vec<bool>,
    /// Hull of the masked cell centers.
    pub interval: (f64, f64),
    pub threshold: f64,
}

impl Support {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Cells where `u > theta * max(max u, floor)`.
pub fn support(u: &ScalarField, theta: f64) -> Result<Support> {
    let threshold = theta * u.max().max(SUPPORT_FLOOR);
    let mask: Vec<bool> = u.values.iter().map(|&v| v > threshold).collect();
    let first = mask.iter().position(|&b| b).ok_or(Error::EmptySupport)?;
    let last = mask.iter().rposition(|&b| b).unwrap_or(first);
    Ok(Support {
        mask,
        interval: (u.grid.center(first), u.grid.center(last)),
        threshold,
    })
}

/// Keeps a cell only if every cell within `cells` of it is masked. Cells past
/// the outer boundary count as unmasked; the radial axis is a mirror.
pub fn erode(grid: &Grid, mask: &[bool], cells: usize) -> Vec<bool> {
    let n = mask.len() as isize;
    let c = cells as isize;
    (0..n)
        .map(|i| {
            (-c..=c).all(|o| {
                let mut j = i + o;
                if j < 0 {
                    if grid.geometry() == Geometry::Radial {
                        j = -j - 1;
                    } else {
                        return false;
                    }
                }
                j < n && mask[j as usize]
            })
        })
        .collect()
}

/// Connected runs of masked cells, as inclusive index ranges.
pub fn components(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in mask.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len() - 1));
    }
    out
}

// Binary snapshot layout, little-endian throughout:
//   magic "HSLS" | version u32 | dim u32 | n_cells u64 | lo f64 | hi f64 | t f64 | n_cells x f64
const SNAPSHOT_MAGIC: &[u8; 4] = b"HSLS";
const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot(field: &ScalarField, mut w: impl Write) -> Result<()> {
    let g = field.grid;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n_cells() as u64).to_le_bytes())?;
    w.write_all(&g.lo().to_le_bytes())?;
    w.write_all(&g.hi().to_le_bytes())?;
    w.write_all(&field.t.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn snapshot_bytes(field: &ScalarField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(44 + 8 * field.values.len());
    write_snapshot(field, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn read_snapshot(mut r: impl Read) -> Result<ScalarField> {
    let bad = |m: &str| Error::Parse { context: "snapshot".into(), message: m.into() };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != SNAPSHOT_VERSION {
        return Err(bad("unsupported version"));
    }
    r.read_exact(&mut b4)?;
    let geometry = match u32::from_le_bytes(b4) {
        1 => Geometry::Line,
        2 => Geometry::Radial,
        d => return Err(bad(&format!("unsupported dim {d}"))),
    };
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let read_f64 = |r: &mut dyn Read| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let lo = read_f64(&mut r)?;
    let hi = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let grid = Grid::new(geometry, lo, hi, n)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(read_f64(&mut r)?);
    }
    ScalarField::new(grid, t, values)
}

/// `x,value` rows with 17 significant digits.
pub fn field_csv(field: &ScalarField) -> String {
    let mut s = String::from("x,value\n");
    for (i, v) in field.values.iter().enumerate() {
        s.push_str(&format!("{},{}\n", fmt_f64(field.grid.center(i)), fmt_f64(*v)));
    }
    s
}

/// Fixed 17-significant-digit formatting used by every CSV artifact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
