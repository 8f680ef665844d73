//! Run configuration shared by the CLI subcommands, read from TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anisotropy::{Anisotropy, AnisotropyConfig};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::Grid;
use crate::lagrangian::{Lagrangian, LagrangianConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub anisotropy: Option<AnisotropyConfig>,
    pub lagrangian: Option<LagrangianConfig>,
    /// Second Lagrangian for comparisons.
    pub lagrangian2: Option<LagrangianConfig>,
    pub grid: Option<GridConfig>,
    /// Scalar grid function `u(x)`.
    pub u: Option<Expr>,
    /// Integration region; defaults to the whole grid box.
    pub region: Option<BoxDomain>,
    /// Total sample count for sampled checks.
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    /// Half-width of the sampled argument cube.
    pub radius: Option<f64>,
    /// Norm exponent.
    pub p: Option<f64>,
    pub growth: Option<GrowthConfig>,
    pub basis: Option<Vec<Expr>>,
    /// Matrix rows for `pinv`.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Evaluation points.
    #[serde(default)]
    pub points: Vec<PointConfig>,
    /// Field index pairs (1-based) whose Lie brackets `catalog` reports.
    #[serde(default)]
    pub brackets: Vec<[usize; 2]>,
    pub ccdist: Option<CcConfig>,
    pub zigzag: Option<ZigZagConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to the anisotropy domain.
    #[serde(rename = "box")]
    pub domain: Option<BoxDomain>,
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub a: Expr,
    pub b: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcConfig {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(default = "default_cc_radius")]
    pub radius: usize,
    #[serde(default = "default_tau")]
    pub tau_span: f64,
}

fn default_cc_radius() -> usize {
    3
}

fn default_tau() -> f64 {
    crate::cc::DEFAULT_TAU_SPAN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZigZagConfig {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub t: f64,
    pub h: u32,
    /// Defaults to the unit box.
    #[serde(rename = "box")]
    pub domain: Option<BoxDomain>,
}

impl RunConfig {
    /// Parses TOML or JSON; `.json` files are read as JSON, everything else
    /// as TOML.
    pub fn from_str_with(src: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(src).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str_with(&src, json).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn need<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| Error::Config(format!("missing `{key}` block")))
    }

    pub fn anisotropy(&self) -> Result<Anisotropy> {
        Self::need(&self.anisotropy, "anisotropy")?.build()
    }

    pub fn lagrangian(&self, a: &Anisotropy) -> Result<Lagrangian> {
        Self::need(&self.lagrangian, "lagrangian")?.build(a)
    }

    pub fn lagrangian2(&self, a: &Anisotropy) -> Result<Lagrangian> {
        Self::need(&self.lagrangian2, "lagrangian2")?.build(a)
    }

    pub fn u(&self) -> Result<&Expr> {
        Self::need(&self.u, "u")
    }

    /// Grid over `grid.box` (or `fallback`), with `resolution` overriding the
    /// configured one.
    pub fn grid(&self, fallback: Option<&BoxDomain>, resolution: Option<usize>) -> Result<Grid> {
        let g = self.grid.clone().unwrap_or_default();
        let domain = g
            .domain
            .or_else(|| fallback.cloned())
            .ok_or_else(|| Error::Config("missing `grid.box`".into()))?;
        let n = resolution
            .or(g.resolution)
            .ok_or_else(|| Error::Config("missing `grid.resolution`".into()))?;
        Grid::uniform(domain, n)
    }

    pub fn growth(&self) -> Result<&GrowthConfig> {
        Self::need(&self.growth, "growth")
    }

    pub fn ccdist(&self) -> Result<&CcConfig> {
        Self::need(&self.ccdist, "ccdist")
    }

    pub fn zigzag(&self) -> Result<&ZigZagConfig> {
        Self::need(&self.zigzag, "zigzag")
    }

    pub fn basis(&self) -> Result<&[Expr]> {
        Ok(Self::need(&self.basis, "basis")?)
    }
}
