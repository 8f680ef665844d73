//! Carathéodory Lagrangians and the transformations between the Euclidean
//! and the anisotropic side.
//!
//! A Euclidean Lagrangian `f_e(x, xi)` takes `xi in R^n`; an anisotropic one
//! `f(x, eta)` takes `eta in R^m`. Given an anisotropy with coefficient
//! matrix `C(x)` and pseudo-inverse `C_P(x)`:
//!
//! * [`lift`]: `f(x, eta) = f_e(x, C_P(x) eta)`
//! * [`pushforward`]: `f_e(x, xi) = f(x, C(x) xi)`
//! * [`project`]: `f_e(x, xi) -> f_e(x, Pi_x xi)`, which makes any Euclidean
//!   Lagrangian constant along `ker C(x)`.
//!
//! Linear maps are recomputed at every evaluation point, since the rank of
//! `C(x)` may change across the domain.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::anisotropy::Anisotropy;
use crate::error::{ensure_dim, Error, Result};
use crate::expr::Expr;
use crate::pseudoinverse::pinv;

/// Values below this are flagged as violating nonnegativity.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagrangianKind {
    /// Argument is a Euclidean gradient in `R^n`.
    Euclidean,
    /// Argument is an X-gradient in `R^m`.
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearMap {
    /// `eta -> C_P(x) eta`
    PseudoInverse,
    /// `xi -> C(x) xi`
    Coefficient,
    /// `xi -> Pi_x xi`
    Projector,
}

#[derive(Debug, Clone)]
enum Body {
    Expr(Expr),
    Compose {
        outer: Arc<Lagrangian>,
        map: LinearMap,
        anisotropy: Arc<Anisotropy>,
    },
}

#[derive(Debug, Clone)]
pub struct Lagrangian {
    kind: LagrangianKind,
    space_dim: usize,
    arg_dim: usize,
    body: Body,
}

impl Lagrangian {
    /// Body over `x1..x{space_dim}` and `q1..q{arg_dim}`.
    pub fn from_expr(kind: LagrangianKind, space_dim: usize, arg_dim: usize, body: Expr) -> Result<Self> {
        if space_dim == 0 || arg_dim == 0 {
            return Err(Error::InvalidParam("Lagrangian dimensions must be positive".into()));
        }
        body.check_vars(space_dim, arg_dim)?;
        Ok(Lagrangian {
            kind,
            space_dim,
            arg_dim,
            body: Body::Expr(body),
        })
    }

    pub fn parse(kind: LagrangianKind, space_dim: usize, arg_dim: usize, src: &str) -> Result<Self> {
        Self::from_expr(kind, space_dim, arg_dim, Expr::parse(src)?)
    }

    /// Anisotropic Lagrangian whose argument matches `a`'s field count.
    pub fn anisotropic(a: &Anisotropy, src: &str) -> Result<Self> {
        Self::parse(LagrangianKind::Anisotropic, a.n(), a.m(), src)
    }

    /// Euclidean Lagrangian on `a`'s ambient space.
    pub fn euclidean(a: &Anisotropy, src: &str) -> Result<Self> {
        Self::parse(LagrangianKind::Euclidean, a.n(), a.n(), src)
    }

    pub fn kind(&self) -> LagrangianKind {
        self.kind
    }

    pub fn arg_dim(&self) -> usize {
        self.arg_dim
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    /// The expression body, when this Lagrangian is not a composition.
    pub fn expr(&self) -> Option<&Expr> {
        match &self.body {
            Body::Expr(e) => Some(e),
            Body::Compose { .. } => None,
        }
    }

    /// Precomputes every linear map at `x`.
    pub fn bind(&self, x: &[f64]) -> Result<BoundLagrangian<'_>> {
        ensure_dim(self.space_dim, x.len(), "evaluation point")?;
        Ok(BoundLagrangian {
            x: x.to_vec(),
            node: self.bind_node(x)?,
        })
    }

    fn bind_node(&self, x: &[f64]) -> Result<BoundNode<'_>> {
        Ok(match &self.body {
            Body::Expr(e) => BoundNode::Expr(e),
            Body::Compose {
                outer,
                map,
                anisotropy,
            } => {
                let c = anisotropy.matrix_at(x);
                let matrix = match map {
                    LinearMap::Coefficient => c,
                    LinearMap::PseudoInverse => pinv(&c)?.c_p,
                    LinearMap::Projector => pinv(&c)?.pi,
                };
                BoundNode::Compose {
                    outer: Box::new(outer.bind_node(x)?),
                    matrix,
                }
            }
        })
    }

    /// Raw value `f(x, arg)`; fails on dimension mismatch or a non-finite result.
    pub fn eval(&self, x: &[f64], arg: &[f64]) -> Result<f64> {
        ensure_dim(self.arg_dim, arg.len(), "Lagrangian argument")?;
        self.bind(x)?.eval(arg)
    }
}

/// Result of [`eval_lagrangian`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    /// Value fell below [`NEGATIVITY_TOLERANCE`].
    pub negative: bool,
}

pub fn eval_lagrangian(f: &Lagrangian, x: &[f64], arg: &[f64]) -> Result<Evaluation> {
    let value = f.eval(x, arg)?;
    Ok(Evaluation {
        value,
        negative: value < NEGATIVITY_TOLERANCE,
    })
}

/// A Lagrangian with its linear maps frozen at one point.
pub struct BoundLagrangian<'a> {
    x: Vec<f64>,
    node: BoundNode<'a>,
}

enum BoundNode<'a> {
    Expr(&'a Expr),
    Compose {
        outer: Box<BoundNode<'a>>,
        matrix: DMatrix<f64>,
    },
}

impl BoundNode<'_> {
    fn eval(&self, x: &[f64], arg: &[f64]) -> f64 {
        match self {
            BoundNode::Expr(e) => e.eval(x, arg),
            BoundNode::Compose { outer, matrix } => {
                let mapped = matrix * DVector::from_column_slice(arg);
                outer.eval(x, mapped.as_slice())
            }
        }
    }
}

impl BoundLagrangian<'_> {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, arg: &[f64]) -> Result<f64> {
        let v = self.node.eval(&self.x, arg);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!(
                "Lagrangian value {v} at x = {:?}, arg = {arg:?}",
                self.x
            )))
        }
    }
}

fn compose(
    f: &Lagrangian,
    a: &Anisotropy,
    map: LinearMap,
    kind: LagrangianKind,
    arg_dim: usize,
) -> Lagrangian {
    Lagrangian {
        kind,
        space_dim: f.space_dim,
        arg_dim,
        body: Body::Compose {
            outer: Arc::new(f.clone()),
            map,
            anisotropy: Arc::new(a.clone()),
        },
    }
}

fn expect(f: &Lagrangian, a: &Anisotropy, kind: LagrangianKind, arg_dim: usize) -> Result<()> {
    if f.kind != kind {
        return Err(Error::InvalidParam(format!(
            "expected a {kind:?} Lagrangian, got {:?}",
            f.kind
        )));
    }
    ensure_dim(a.n(), f.space_dim, "Lagrangian space dimension")?;
    ensure_dim(arg_dim, f.arg_dim, "Lagrangian argument dimension")
}

/// `f(x, eta) = f_e(x, C_P(x) eta)`.
pub fn lift(f_e: &Lagrangian, a: &Anisotropy) -> Result<Lagrangian> {
    expect(f_e, a, LagrangianKind::Euclidean, a.n())?;
    Ok(compose(f_e, a, LinearMap::PseudoInverse, LagrangianKind::Anisotropic, a.m()))
}

/// `f_e(x, xi) = f(x, C(x) xi)`.
pub fn pushforward(f: &Lagrangian, a: &Anisotropy) -> Result<Lagrangian> {
    expect(f, a, LagrangianKind::Anisotropic, a.m())?;
    Ok(compose(f, a, LinearMap::Coefficient, LagrangianKind::Euclidean, a.n()))
}

/// `g(x, xi) = f_e(x, Pi_x xi)`.
pub fn project(f_e: &Lagrangian, a: &Anisotropy) -> Result<Lagrangian> {
    expect(f_e, a, LagrangianKind::Euclidean, a.n())?;
    Ok(compose(f_e, a, LinearMap::Projector, LagrangianKind::Euclidean, a.n()))
}

impl fmt::Display for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Expr(e) => write!(f, "{e}"),
            Body::Compose { outer, map, .. } => {
                let (name, arg) = match map {
                    LinearMap::PseudoInverse => ("lift", "C_P(x) q"),
                    LinearMap::Coefficient => ("push", "C(x) q"),
                    LinearMap::Projector => ("project", "Pi(x) q"),
                };
                write!(f, "{name}[{outer}](q := {arg})")
            }
        }
    }
}

impl Serialize for Lagrangian {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Lagrangian", 3)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("arg_dim", &self.arg_dim)?;
        st.serialize_field("expr", &self.to_string())?;
        st.end()
    }
}

/// Lagrangian block of a config file.
///
/// `compose` lists transformations applied in order, e.g. `["project", "lift"]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    pub kind: LagrangianKind,
    pub expr: Expr,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compose: Vec<Transform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Lift,
    Push,
    Project,
}

impl LagrangianConfig {
    pub fn build(&self, a: &Anisotropy) -> Result<Lagrangian> {
        let arg_dim = match self.kind {
            LagrangianKind::Euclidean => a.n(),
            LagrangianKind::Anisotropic => a.m(),
        };
        let mut f = Lagrangian::from_expr(self.kind, a.n(), arg_dim, self.expr.clone())?;
        for t in &self.compose {
            f = match t {
                Transform::Lift => lift(&f, a)?,
                Transform::Push => pushforward(&f, a)?,
                Transform::Project => project(&f, a)?,
            };
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::CatalogParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const F1: &str = "2*((q1+q2)/2)^2";
    pub(crate) const F2: &str = "2*((q1+q2)/2)^2 + exp((q1-q2)^2) - 1";

    fn cat(name: &str) -> Anisotropy {
        Anisotropy::builtin(name, &CatalogParams::default()).unwrap()
    }

    #[test]
    fn section_five_values() {
        let d = cat("duplicate_row");
        let f1 = Lagrangian::anisotropic(&d, F1).unwrap();
        let f2 = Lagrangian::anisotropic(&d, F2).unwrap();
        let x = [0.5, 0.5];
        assert_eq!(f1.eval(&x, &[1.0, 1.0]).unwrap(), 2.0);
        assert!((f2.eval(&x, &[1.0, -1.0]).unwrap() - 53.598150033144236).abs() < 1e-9);
        assert_eq!(f1.eval(&x, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(f1.eval(&x, &[1.0]).is_err());
        assert!(f1.eval(&[0.5], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn negativity_flag_and_non_finite() {
        let e = cat("euclidean");
        let f = Lagrangian::euclidean(&e, "q1 + q2").unwrap();
        let ev = eval_lagrangian(&f, &[0.5, 0.5], &[-1.0, 0.0]).unwrap();
        assert!(ev.negative);
        assert!(!eval_lagrangian(&f, &[0.5, 0.5], &[1.0, 0.0]).unwrap().negative);
        let g = Lagrangian::euclidean(&e, "1/q1").unwrap();
        assert!(matches!(g.eval(&[0.5, 0.5], &[0.0, 1.0]), Err(Error::NonFinite(_))));
        assert!(Lagrangian::euclidean(&e, "q3").is_err());
        assert!(Lagrangian::euclidean(&e, "x3").is_err());
    }

    #[test]
    fn lift_examples() {
        let e = cat("euclidean");
        let fe = Lagrangian::euclidean(&e, "q1^2 + q2^2").unwrap();
        let f = lift(&fe, &e).unwrap();
        assert_eq!(f.kind(), LagrangianKind::Anisotropic);
        assert!((f.eval(&[0.2, 0.3], &[3.0, -4.0]).unwrap() - 25.0).abs() < 1e-12);

        let d = cat("duplicate_row");
        let fe = Lagrangian::euclidean(&d, "2*q1^2").unwrap();
        let f = lift(&fe, &d).unwrap();
        let f1 = Lagrangian::anisotropic(&d, F1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = d.domain().sample(&mut rng);
            let eta = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let (a, b) = (f.eval(&x, &eta).unwrap(), f1.eval(&x, &eta).unwrap());
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        let zero = Lagrangian::euclidean(&d, "0").unwrap();
        assert_eq!(lift(&zero, &d).unwrap().eval(&[0.5, 0.5], &[7.0, 1.0]).unwrap(), 0.0);

        assert!(lift(&f1, &d).is_err());
        let h = cat("heisenberg");
        assert!(lift(&fe, &h).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let d = cat("duplicate_row");
        let f1 = Lagrangian::anisotropic(&d, F1).unwrap();
        let f2 = Lagrangian::anisotropic(&d, F2).unwrap();
        let p1 = pushforward(&f1, &d).unwrap();
        let p2 = pushforward(&f2, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = d.domain().sample(&mut rng);
            let xi = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let want = 2.0 * xi[0] * xi[0];
            assert!((p1.eval(&x, &xi).unwrap() - want).abs() <= 1e-12 * (1.0 + want));
            assert!((p2.eval(&x, &xi).unwrap() - want).abs() <= 1e-12 * (1.0 + want));
        }
        let e = cat("euclidean");
        let f = Lagrangian::anisotropic(&e, "q1^4 + x1*q2^2").unwrap();
        let p = pushforward(&f, &e).unwrap();
        assert_eq!(p.eval(&[0.5, 0.5], &[2.0, 3.0]).unwrap(), f.eval(&[0.5, 0.5], &[2.0, 3.0]).unwrap());
        assert!(pushforward(&p, &e).is_err());
    }

    #[test]
    fn config_compose() {
        let d = cat("duplicate_row");
        let cfg: LagrangianConfig =
            toml::from_str("kind = \"euclidean\"\nexpr = \"2*q1^2 + q2^2\"\ncompose = [\"project\", \"lift\"]\n").unwrap();
        let f = cfg.build(&d).unwrap();
        assert_eq!(f.kind(), LagrangianKind::Anisotropic);
        // Pi kills q2, C_P maps (1,1) to (1,0).
        assert!((f.eval(&[0.5, 0.5], &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(f.to_string().starts_with("lift[project["));
        let bad: LagrangianConfig = serde_json::from_str(r#"{"kind":"anisotropic","expr":"q1","compose":["lift"]}"#).unwrap();
        assert!(bad.build(&d).is_err());
    }
}
