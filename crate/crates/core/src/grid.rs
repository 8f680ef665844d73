//! Cell-centered grids, finite-difference X-gradients and midpoint quadrature.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Anisotropy;
use crate::domain::BoxDomain;
use crate::error::{ensure_dim, Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{Lagrangian, LagrangianKind};
use crate::pseudoinverse::{matrix_from_rows, pinv};

/// Uniform cell-centered grid over a box. Cells are ordered row-major (last
/// axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    #[serde(rename = "box")]
    domain: BoxDomain,
    resolution: Vec<usize>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(domain: BoxDomain, resolution: Vec<usize>) -> Result<Self> {
        ensure_dim(domain.dim(), resolution.len(), "grid resolution")?;
        if let Some(r) = resolution.iter().find(|&&r| r < 2) {
            return Err(Error::InvalidParam(format!("grid resolution must be at least 2, got {r}")));
        }
        let spacing = resolution
            .iter()
            .enumerate()
            .map(|(i, &r)| (domain.hi(i) - domain.lo(i)) / r as f64)
            .collect();
        Ok(Grid {
            domain,
            resolution,
            spacing,
        })
    }

    /// `n` cells along every axis.
    pub fn uniform(domain: BoxDomain, n: usize) -> Result<Self> {
        let d = domain.dim();
        Grid::new(domain, vec![n; d])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (axis, slot) in idx.iter_mut().enumerate().rev() {
            *slot = flat % self.resolution[axis];
            flat /= self.resolution[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    pub fn center_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.domain.lo(axis) + (i as f64 + 0.5) * self.spacing[axis])
            .collect()
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.center_of(&self.multi_index(flat))
    }

    /// Index of the cell whose center is nearest to `x`.
    pub fn snap(&self, x: &[f64]) -> Result<usize> {
        ensure_dim(self.dim(), x.len(), "grid point")?;
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        let idx: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(axis, &v)| {
                let s = (v - self.domain.lo(axis)) / self.spacing[axis] - 0.5;
                (s.round().max(0.0) as usize).min(self.resolution[axis] - 1)
            })
            .collect();
        Ok(self.flat_index(&idx))
    }
}

/// Values at the cell centers of a grid, `width` numbers per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    width: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParam("grid function width must be positive".into()));
        }
        ensure_dim(grid.len() * width, values.len(), "grid function values")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values".into()));
        }
        Ok(GridFunction { grid, width, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let values = (0..grid.len()).into_par_iter().map(|c| f(&grid.center(c))).collect();
        GridFunction::new(grid, 1, values)
    }

    /// Samples a scalar expression in `x1..xn` at the cell centers.
    pub fn from_expr(grid: Grid, e: &Expr) -> Result<Self> {
        e.check_vars(grid.dim(), 0)?;
        GridFunction::from_fn(grid, |x| e.eval(x, &[]))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, flat: usize) -> &[f64] {
        &self.values[flat * self.width..(flat + 1) * self.width]
    }

    fn ensure_scalar(&self) -> Result<()> {
        ensure_dim(1, self.width, "scalar grid function")
    }
}

/// Sum with a fixed binary reduction tree.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Euclidean gradient `Du`, width `n`. Central differences inside, one-sided
/// second-order stencils at the boundary (first order when an axis has two
/// cells).
pub fn gradient(u: &GridFunction) -> Result<GridFunction> {
    u.ensure_scalar()?;
    let g = &u.grid;
    let n = g.dim();
    let mut out = vec![0.0; g.len() * n];
    out.par_chunks_mut(n).enumerate().for_each(|(c, slot)| {
        let idx = g.multi_index(c);
        for axis in 0..n {
            let s = g.stride(axis);
            let h = g.spacing[axis];
            let r = g.resolution[axis];
            let i = idx[axis];
            let v = |k: usize| u.values[c - i * s + k * s];
            slot[axis] = if r == 2 {
                (v(1) - v(0)) / h
            } else if i == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if i == r - 1 {
                (3.0 * v(r - 1) - 4.0 * v(r - 2) + v(r - 3)) / (2.0 * h)
            } else {
                (v(i + 1) - v(i - 1)) / (2.0 * h)
            };
        }
    });
    GridFunction::new(g.clone(), n, out)
}

fn ensure_inside(a: &Anisotropy, grid: &Grid) -> Result<()> {
    ensure_dim(a.n(), grid.dim(), "grid dimension")?;
    if !a.domain().contains_box(grid.domain()) {
        return Err(Error::InvalidParam(
            "grid box is not contained in the anisotropy domain".into(),
        ));
    }
    Ok(())
}

/// `Xu = C(x) Du` at each cell center, width `m`.
pub fn x_gradient(u: &GridFunction, a: &Anisotropy) -> Result<GridFunction> {
    ensure_inside(a, &u.grid)?;
    let du = gradient(u)?;
    let g = &u.grid;
    let (m, n) = (a.m(), a.n());
    let mut out = vec![0.0; g.len() * m];
    out.par_chunks_mut(m).enumerate().for_each(|(c, slot)| {
        let cm = a.matrix_at(&g.center(c));
        let d = du.at(c);
        for (j, s) in slot.iter_mut().enumerate() {
            *s = (0..n).map(|k| cm[(j, k)] * d[k]).sum();
        }
    });
    GridFunction::new(g.clone(), m, out)
}

/// Cells of `grid` whose centers lie in `region`; `None` means all cells.
fn cells_in(grid: &Grid, region: Option<&BoxDomain>) -> Result<Vec<usize>> {
    match region {
        None => Ok((0..grid.len()).collect()),
        Some(r) => {
            if !grid.domain().contains_box(r) {
                return Err(Error::InvalidParam("region is not contained in the grid box".into()));
            }
            Ok((0..grid.len()).filter(|&c| r.contains(&grid.center(c))).collect())
        }
    }
}

fn quadrature(grid: &Grid, cells: &[usize], f: impl Fn(usize) -> Result<f64> + Sync) -> Result<f64> {
    let terms: Vec<f64> = cells.par_iter().map(|&c| f(c)).collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms) * grid.cell_volume())
}

/// `F(u, A) = int_A f(x, Xu) dx` by the midpoint rule over cells centered in `A`.
pub fn functional_eval(
    f: &Lagrangian,
    u: &GridFunction,
    a: &Anisotropy,
    region: Option<&BoxDomain>,
) -> Result<f64> {
    if f.kind() != LagrangianKind::Anisotropic {
        return Err(Error::InvalidParam("functional needs an anisotropic Lagrangian".into()));
    }
    ensure_dim(a.m(), f.arg_dim(), "Lagrangian argument")?;
    let xu = x_gradient(u, a)?;
    let cells = cells_in(&u.grid, region)?;
    quadrature(&u.grid, &cells, |c| f.eval(&u.grid.center(c), xu.at(c)))
}

/// `int_A f_e(x, Du) dx` by the midpoint rule.
pub fn functional_eval_euclidean(f_e: &Lagrangian, u: &GridFunction, region: Option<&BoxDomain>) -> Result<f64> {
    if f_e.kind() != LagrangianKind::Euclidean {
        return Err(Error::InvalidParam("expected a Euclidean Lagrangian".into()));
    }
    ensure_dim(u.grid.dim(), f_e.arg_dim(), "Lagrangian argument")?;
    let du = gradient(u)?;
    let cells = cells_in(&u.grid, region)?;
    quadrature(&u.grid, &cells, |c| f_e.eval(&u.grid.center(c), du.at(c)))
}

/// Both parts of `|u|_{L^p} + |Xu|_{L^p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNorm {
    pub value: f64,
    pub lp_u: f64,
    pub lp_xu: f64,
}

pub fn sobolev_norm(u: &GridFunction, a: &Anisotropy, p: f64) -> Result<SobolevNorm> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParam(format!("exponent p must be finite and >= 1, got {p}")));
    }
    u.ensure_scalar()?;
    let xu = x_gradient(u, a)?;
    let cells: Vec<usize> = (0..u.grid.len()).collect();
    let lp_u = quadrature(&u.grid, &cells, |c| Ok(u.values[c].abs().powf(p)))?.powf(1.0 / p);
    let lp_xu = quadrature(&u.grid, &cells, |c| {
        Ok(xu.at(c).iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
    })?
    .powf(1.0 / p);
    Ok(SobolevNorm {
        value: lp_u + lp_xu,
        lp_u,
        lp_xu,
    })
}

/// Discrete least-squares fit in a span of basis functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineFit {
    pub coeffs: Vec<f64>,
    /// Discrete `L^2` distance from `u` to the fitted function.
    pub residual: f64,
    pub rank: usize,
    /// `basis.len() - rank`; nonzero means the coefficients are the
    /// minimum-norm solution.
    pub rank_deficiency: usize,
}

pub fn best_affine_fit(u: &GridFunction, basis: &[Expr], p: f64) -> Result<AffineFit> {
    if p != 2.0 {
        return Err(Error::InvalidParam(format!("only p = 2 is supported, got {p}")));
    }
    if basis.is_empty() {
        return Err(Error::InvalidParam("basis must not be empty".into()));
    }
    u.ensure_scalar()?;
    let g = &u.grid;
    for b in basis {
        b.check_vars(g.dim(), 0)?;
    }
    let k = basis.len();
    let centers: Vec<Vec<f64>> = (0..g.len()).into_par_iter().map(|c| g.center(c)).collect();
    let cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| centers.iter().map(|x| b.eval(x, &[])).collect())
        .collect();
    if cols.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("basis function on the grid".into()));
    }
    let dot = |a: &[f64], b: &[f64]| {
        let t: Vec<f64> = a.iter().zip(b).map(|(p, q)| p * q).collect();
        pairwise_sum(&t)
    };
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect();
    let rhs: Vec<f64> = cols.iter().map(|c| dot(c, &u.values)).collect();
    let data = pinv(&matrix_from_rows(&gram)?)?;
    let coeffs: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| data.c_p[(i, j)] * rhs[j]).sum())
        .collect();
    let diff: Vec<f64> = (0..g.len())
        .map(|c| {
            let fit: f64 = (0..k).map(|i| coeffs[i] * cols[i][c]).sum();
            (u.values[c] - fit).powi(2)
        })
        .collect();
    let residual = (pairwise_sum(&diff) * g.cell_volume()).sqrt();
    Ok(AffineFit {
        coeffs,
        residual,
        rank: data.rank,
        rank_deficiency: k - data.rank,
    })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "box")]
    domain: BoxDomain,
    resolution: Vec<usize>,
    width: usize,
}

/// Path of the JSON metadata file next to a grid-function CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl GridFunction {
    fn value_names(&self) -> Vec<String> {
        if self.width == 1 {
            vec!["value".into()]
        } else {
            (1..=self.width).map(|j| format!("value{j}")).collect()
        }
    }

    /// One row per cell: index tuple, center coordinates, value(s).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let n = self.grid.dim();
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=n).map(|i| format!("i{i}")).collect();
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(self.value_names());
        wr.write_record(&header).map_err(csv_err)?;
        for c in 0..self.grid.len() {
            let idx = self.grid.multi_index(c);
            let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            row.extend(self.grid.center_of(&idx).iter().map(|v| v.to_string()));
            row.extend(self.at(c).iter().map(|v| v.to_string()));
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes the CSV and its JSON sidecar `{box, resolution, width}`.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        let meta = Sidecar {
            domain: self.grid.domain.clone(),
            resolution: self.grid.resolution.clone(),
            width: self.width,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(sidecar_path(csv_path), json + "\n")?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)
            .map_err(|e| Error::Config(format!("grid sidecar: {e}")))?;
        let grid = Grid::new(meta.domain, meta.resolution)?;
        let n = grid.dim();
        let mut rd = csv::Reader::from_path(csv_path).map_err(csv_err)?;
        let mut values = vec![f64::NAN; grid.len() * meta.width];
        let mut seen = 0usize;
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            ensure_dim(2 * n + meta.width, rec.len(), "grid CSV row")?;
            let idx = rec
                .iter()
                .take(n)
                .map(|s| s.parse::<usize>().map_err(|e| Error::Config(format!("cell index `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if idx.iter().zip(grid.resolution()).any(|(i, r)| i >= r) {
                return Err(Error::Config(format!("cell index {idx:?} out of range")));
            }
            let flat = grid.flat_index(&idx);
            for (j, s) in rec.iter().skip(2 * n).enumerate() {
                values[flat * meta.width + j] =
                    s.parse().map_err(|e| Error::Config(format!("value `{s}`: {e}")))?;
            }
            seen += 1;
        }
        ensure_dim(grid.len(), seen, "grid CSV row count")?;
        GridFunction::new(grid, meta.width, values)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
