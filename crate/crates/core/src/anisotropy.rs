//! Families of Lipschitz vector fields `X = (X_1, ..., X_m)` on a box in `R^n`.
//!
//! Field `X_j = sum_i c_{j,i}(x) d/dx_i` is stored as row `j` of the
//! coefficient matrix `C(x)`; the X-gradient of a smooth `u` is `C(x) Du(x)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{ensure_dim, Error, Result};
use crate::expr::{Expr, Var};

/// Names accepted by [`Anisotropy::builtin`].
pub const CATALOG: &[&str] = &[
    "euclidean",
    "heisenberg",
    "grushin",
    "split_plane",
    "duplicate_row",
    "riemannian_frame",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anisotropy {
    n: usize,
    m: usize,
    domain: BoxDomain,
    coeffs: Vec<Vec<Expr>>,
    name: Option<String>,
}

/// Optional knobs for catalog entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    /// Ambient dimension (euclidean only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Overrides the default domain box.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxDomain>,
    /// Coefficient rows of a Riemannian frame (riemannian_frame only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<Expr>>>,
}

fn parse_rows(rows: &[&[&str]]) -> Vec<Vec<Expr>> {
    rows.iter()
        .map(|r| r.iter().map(|s| Expr::parse(s).expect("catalog expression")).collect())
        .collect()
}

impl Anisotropy {
    /// Builds a custom anisotropy. Permits `m > n`; see [`Anisotropy::new_strict`].
    pub fn new(domain: BoxDomain, coeffs: Vec<Vec<Expr>>, name: Option<String>) -> Result<Self> {
        let n = domain.dim();
        let m = coeffs.len();
        if m == 0 {
            return Err(Error::InvalidParam("anisotropy needs at least one field".into()));
        }
        for row in &coeffs {
            ensure_dim(n, row.len(), "coefficient row length")?;
            for c in row {
                c.check_vars(n, 0)?;
            }
        }
        let a = Anisotropy {
            n,
            m,
            domain,
            coeffs,
            name,
        };
        a.check_finite()?;
        Ok(a)
    }

    /// Like [`Anisotropy::new`] but rejects `m > n`.
    pub fn new_strict(domain: BoxDomain, coeffs: Vec<Vec<Expr>>, name: Option<String>) -> Result<Self> {
        if coeffs.len() > domain.dim() {
            return Err(Error::InvalidParam(format!(
                "strict mode requires m <= n, got m = {} > n = {}",
                coeffs.len(),
                domain.dim()
            )));
        }
        Self::new(domain, coeffs, name)
    }

    /// Parses coefficient strings, row per field.
    pub fn from_strings(domain: BoxDomain, rows: &[&[&str]], name: Option<&str>) -> Result<Self> {
        let coeffs = rows
            .iter()
            .map(|r| r.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, coeffs, name.map(str::to_owned))
    }

    pub fn builtin(name: &str, params: &CatalogParams) -> Result<Self> {
        let fixed_dim = |n: usize| -> Result<()> {
            match params.n {
                Some(k) if k != n => Err(Error::InvalidParam(format!(
                    "`{name}` is defined only for n = {n}"
                ))),
                _ => Ok(()),
            }
        };
        if params.frame.is_some() && name != "riemannian_frame" {
            return Err(Error::InvalidParam(format!("`frame` does not apply to `{name}`")));
        }
        let domain = |default: BoxDomain| params.domain.clone().unwrap_or(default);
        let (dom, coeffs) = match name {
            "euclidean" => {
                let n = params.n.unwrap_or(2);
                if n == 0 {
                    return Err(Error::InvalidParam("euclidean requires n >= 1".into()));
                }
                let coeffs = (0..n)
                    .map(|j| (0..n).map(|i| Expr::num(if i == j { 1.0 } else { 0.0 })).collect())
                    .collect();
                (domain(BoxDomain::unit(n)), coeffs)
            }
            "heisenberg" => {
                fixed_dim(3)?;
                (
                    domain(BoxDomain::unit(3)),
                    parse_rows(&[&["1", "0", "x2"], &["0", "1", "-x1"]]),
                )
            }
            "grushin" => {
                fixed_dim(2)?;
                (
                    domain(BoxDomain::cube(2, -1.0, 1.0)),
                    parse_rows(&[&["1", "0"], &["0", "x1"]]),
                )
            }
            "split_plane" => {
                fixed_dim(2)?;
                // X_2 vanishes on x1 < 0 and equals x1 d/dx2 on x1 >= 0.
                (
                    domain(BoxDomain::cube(2, -1.0, 1.0)),
                    parse_rows(&[&["1", "0"], &["0", "max(x1, 0)"]]),
                )
            }
            "duplicate_row" => {
                fixed_dim(2)?;
                (
                    domain(BoxDomain::unit(2)),
                    parse_rows(&[&["1", "0"], &["1", "0"]]),
                )
            }
            "riemannian_frame" => {
                let frame = params.frame.clone().ok_or_else(|| {
                    Error::InvalidParam("riemannian_frame requires `frame` coefficient rows".into())
                })?;
                let n = frame.len();
                if n == 0 || frame.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidParam(
                        "riemannian_frame requires a square n x n frame".into(),
                    ));
                }
                fixed_dim(n)?;
                (domain(BoxDomain::unit(n)), frame)
            }
            other => return Err(Error::UnknownCatalog(other.to_owned())),
        };
        if dom.dim() != coeffs[0].len() {
            return Err(Error::InvalidParam(format!(
                "box has {} axes but `{name}` lives in R^{}",
                dom.dim(),
                coeffs[0].len()
            )));
        }
        Self::new(dom, coeffs, Some(name.to_owned()))
    }

    fn check_finite(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut pts = self.domain.corners();
        pts.push(self.domain.center());
        pts.extend((0..64).map(|_| self.domain.sample(&mut rng)));
        for p in &pts {
            for (j, row) in self.coeffs.iter().enumerate() {
                for (i, c) in row.iter().enumerate() {
                    if !c.eval(p, &[]).is_finite() {
                        return Err(Error::NonFinite(format!(
                            "coefficient c[{}][{}] = `{c}` at {p:?}",
                            j + 1,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }

    /// Same fields restricted to (or extended to) another box.
    pub fn with_domain(&self, domain: BoxDomain) -> Result<Self> {
        ensure_dim(self.n, domain.dim(), "domain dimension")?;
        Self::new(domain, self.coeffs.clone(), self.name.clone())
    }

    /// `C(x)`, checking that `x` lies in the closed domain box.
    pub fn coefficient_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        ensure_dim(self.n, x.len(), "point dimension")?;
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(self.matrix_at(x))
    }

    /// `C(x)` without the domain check; `x` must have length `n`.
    pub(crate) fn matrix_at(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |j, i| self.coeffs[j][i].eval(x, &[]))
    }

    /// `C(x) xi`, the X-gradient of any `u` with `Du(x) = xi`.
    pub fn apply_gradient(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.n, xi.len(), "gradient dimension")?;
        let c = self.coefficient_matrix(x)?;
        Ok((c * DVector::from_column_slice(xi)).as_slice().to_vec())
    }

    /// Coefficients of `[X_i, X_j]` at `x` (zero-based field indices).
    pub fn lie_bracket(&self, i: usize, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        for idx in [i, j] {
            if idx >= self.m {
                return Err(Error::InvalidParam(format!(
                    "field index {} out of range 1..{}",
                    idx + 1,
                    self.m
                )));
            }
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        // X_i applied to c_{j,k}, i.e. sum_l c_{i,l} d_l c_{j,k}.
        let apply = |field: usize, g: &Expr| -> Result<f64> {
            let mut acc = 0.0;
            for l in 0..self.n {
                let c = self.coeffs[field][l].eval(x, &[]);
                if c != 0.0 {
                    acc += c * g.derivative(Var::X(l))?.eval(x, &[]);
                }
            }
            Ok(acc)
        };
        (0..self.n)
            .map(|k| Ok(apply(i, &self.coeffs[j][k])? - apply(j, &self.coeffs[i][k])?))
            .collect()
    }

    /// Sampled Lipschitz quotient `max |C(x) - C(y)|_F / |x - y|` over random pairs.
    pub fn lipschitz_estimate(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let x = self.domain.sample(&mut rng);
            let y = self.domain.sample(&mut rng);
            let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dx == 0.0 {
                continue;
            }
            let dc = (self.matrix_at(&x) - self.matrix_at(&y)).norm();
            best = best.max(dc / dx);
        }
        best
    }
}

/// Anisotropy block of a config file: a catalog name with optional
/// parameters, or explicit coefficient strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawAnisotropyConfig")]
pub enum AnisotropyConfig {
    Custom {
        n: usize,
        m: usize,
        #[serde(rename = "box")]
        domain: BoxDomain,
        coeffs: Vec<Vec<Expr>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Builtin {
        name: String,
        #[serde(flatten)]
        params: CatalogParams,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnisotropyConfig {
    name: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    #[serde(rename = "box")]
    domain: Option<BoxDomain>,
    coeffs: Option<Vec<Vec<Expr>>>,
    frame: Option<Vec<Vec<Expr>>>,
}

impl TryFrom<RawAnisotropyConfig> for AnisotropyConfig {
    type Error = String;

    fn try_from(r: RawAnisotropyConfig) -> std::result::Result<Self, String> {
        match r.coeffs {
            Some(coeffs) => {
                if r.frame.is_some() {
                    return Err("`frame` applies only to the riemannian_frame catalog entry".into());
                }
                Ok(AnisotropyConfig::Custom {
                    n: r.n.ok_or("custom anisotropy needs `n`")?,
                    m: r.m.ok_or("custom anisotropy needs `m`")?,
                    domain: r.domain.ok_or("custom anisotropy needs `box`")?,
                    coeffs,
                    name: r.name,
                })
            }
            None => {
                if r.m.is_some() {
                    return Err("`m` is only used with explicit `coeffs`".into());
                }
                Ok(AnisotropyConfig::Builtin {
                    name: r.name.ok_or("anisotropy needs a catalog `name` or explicit `coeffs`")?,
                    params: CatalogParams {
                        n: r.n,
                        domain: r.domain,
                        frame: r.frame,
                    },
                })
            }
        }
    }
}

impl AnisotropyConfig {
    pub fn build(&self) -> Result<Anisotropy> {
        match self {
            AnisotropyConfig::Builtin { name, params } => Anisotropy::builtin(name, params),
            AnisotropyConfig::Custom {
                n,
                m,
                domain,
                coeffs,
                name,
            } => {
                ensure_dim(*n, domain.dim(), "custom anisotropy box")?;
                ensure_dim(*m, coeffs.len(), "custom anisotropy field count")?;
                Anisotropy::new(domain.clone(), coeffs.clone(), name.clone())
            }
        }
    }
}
